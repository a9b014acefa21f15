"""Pretty printer; output re-parses to an equal syntax tree."""
from __future__ import annotations

from fractions import Fraction

from .ast import Binary, Call, Ident, Ite, Lit, Program, Unary


def _lit(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    v = Fraction(v)
    if v.denominator == 1:
        return f"{v.numerator}.0"
    # exact decimal when the denominator allows it, else a quotient
    d = v.denominator
    k = 0
    while d % 2 == 0:
        d //= 2
        k += 1
    j = 0
    while d % 5 == 0:
        d //= 5
        j += 1
    if d == 1:
        digits = max(k, j)
        scaled = abs(v.numerator) * 10**digits // v.denominator
        s = str(scaled).rjust(digits + 1, "0")
        out = s[:-digits] + "." + s[-digits:]
        return ("-" if v < 0 else "") + out
    return f"({v.numerator}.0/{v.denominator})"


def expr_str(e) -> str:
    if isinstance(e, Lit):
        s = _lit(e.value)
        return f"({s})" if s.startswith("-") else s
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Unary):
        return f"{e.op}({expr_str(e.arg)})"
    if isinstance(e, Binary):
        return f"({expr_str(e.left)} {e.op} {expr_str(e.right)})"
    if isinstance(e, Ite):
        return f"({expr_str(e.cond)} ? {expr_str(e.then)} : {expr_str(e.other)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(expr_str(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def program_str(prog: Program) -> str:
    lines = [prog.model_type, ""]
    for c in prog.constants:
        if c.value is None:
            lines.append(f"const {c.type} {c.name};")
        else:
            lines.append(f"const {c.type} {c.name} = {expr_str(c.value)};")
    for m in prog.modules:
        lines += ["", f"module {m.name}"]
        for v in m.variables:
            dom = "bool" if v.type == "bool" else f"[{expr_str(v.low)}..{expr_str(v.high)}]"
            init = f" init {expr_str(v.init)}" if v.init is not None else ""
            lines.append(f"    {v.name} : {dom}{init};")
        for cmd in m.commands:
            ups = []
            for u in cmd.updates:
                if u.assignments:
                    body = " & ".join(f"({a.var}'={expr_str(a.expr)})" for a in u.assignments)
                else:
                    body = "true"
                ups.append(f"{expr_str(u.prob)}: {body}")
            lines.append(f"    [{cmd.action or ''}] {expr_str(cmd.guard)} -> {' + '.join(ups)};")
        lines.append("endmodule")
    if prog.labels:
        lines.append("")
    for lab in prog.labels:
        lines.append(f'label "{lab.name}" = {expr_str(lab.expr)};')
    return "\n".join(lines) + "\n"
