"""Sparse multivariate polynomials with exact rational coefficients.

Transition probabilities of parametric chains, coin weights and solution
functions all live here. Constants are ordinary :class:`fractions.Fraction`
objects; :func:`normalize` collapses constant polynomials back to them so
that dictionary keys and terminal tables treat ``Polynomial(1/2)`` and
``Fraction(1, 2)`` as the same thing.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from fractions import Fraction
from numbers import Rational
from typing import Union

Monomial = tuple  # tuple of (name, exponent) pairs, sorted by name

Number = Union[int, Fraction, "Polynomial"]


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for name, e in b:
        exps[name] = exps.get(name, 0) + e
    return tuple(sorted(exps.items()))


def _mono_div(a: Monomial, b: Monomial):
    """Return a / b, or None if b does not divide a."""
    exps = dict(a)
    for name, e in b:
        have = exps.get(name, 0)
        if have < e:
            return None
        if have == e:
            del exps[name]
        else:
            exps[name] = have - e
    return tuple(sorted(exps.items()))


def _mono_key(m: Monomial):
    # graded lexicographic: total degree first, then names/exponents
    return (sum(e for _, e in m), m)


class Polynomial:
    """Immutable polynomial in named parameters over the rationals."""

    __slots__ = ("_compiled", "_hash", "_terms")

    def __init__(self, terms: Mapping[Monomial, Fraction] | Iterable = ()):
        clean = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for mono, coeff in items:
            if coeff == 0:
                continue
            exps: dict = {}
            for n, e in mono:
                exps[n] = exps.get(n, 0) + int(e)
            mono = tuple(sorted((n, e) for n, e in exps.items() if e != 0))
            total = clean.get(mono, 0) + Fraction(coeff)
            if total == 0:
                clean.pop(mono, None)
            else:
                clean[mono] = total
        self._terms = dict(sorted(clean.items(), key=lambda kv: _mono_key(kv[0])))
        self._hash = None
        self._compiled = None

    @classmethod
    def var(cls, name: str) -> Polynomial:
        return cls({((name, 1),): Fraction(1)})

    @classmethod
    def const(cls, c) -> Polynomial:
        return cls({(): Fraction(c)})

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    @property
    def variables(self) -> frozenset:
        return frozenset(n for mono in self._terms for n, _ in mono)

    def is_constant(self) -> bool:
        return all(mono == () for mono in self._terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self._terms.get((), Fraction(0))

    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self._terms), default=0)

    # arithmetic ---------------------------------------------------------
    @staticmethod
    def _lift(other) -> Polynomial:
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, Rational)):
            return Polynomial.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for mono, c in other._terms.items():
            terms[mono] = terms.get(mono, 0) + c
        return Polynomial(terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        terms: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                terms[m] = terms.get(m, 0) + c1 * c2
        return Polynomial(terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = Polynomial.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            if not other.is_constant():
                q = self.exact_div(other)
                if q is None:
                    raise ZeroDivisionError(f"{other} does not divide {self}")
                return q
            other = other.constant_value()
        if not isinstance(other, (int, Rational)):
            return NotImplemented
        if other == 0:
            raise ZeroDivisionError("polynomial division by zero")
        inv = Fraction(1) / Fraction(other)
        return Polynomial({m: c * inv for m, c in self._terms.items()})

    def _leading(self):
        # graded lex with variables ranked alphabetically (p > q > r); a
        # missing variable counts as exponent 0, hence the negated exponents
        top = max(sum(e for _, e in m) for m in self._terms)
        mono = min(
            (m for m in self._terms if sum(e for _, e in m) == top),
            key=lambda m: tuple((n, -e) for n, e in m),
        )
        return mono, self._terms[mono]

    def exact_div(self, divisor: Number):
        """Quotient ``self / divisor`` if it is a polynomial, else ``None``.

        Multivariate division by a single polynomial under a graded order:
        the remainder is zero exactly when the divisor divides.
        """
        divisor = self._lift(divisor)
        if not divisor._terms:
            raise ZeroDivisionError("polynomial division by zero")
        lead_m, lead_c = divisor._leading()
        rem = self
        quot = Polynomial()
        while rem._terms:
            m, c = rem._leading()
            qm = _mono_div(m, lead_m)
            if qm is None:
                return None
            step = Polynomial({qm: c / lead_c})
            quot = quot + step
            rem = rem - step * divisor
        return quot

    # evaluation ---------------------------------------------------------
    def evaluate(self, valuation: Mapping[str, object]):
        """Evaluate at ``valuation``; works for Fraction or float values."""
        try:
            if any(isinstance(v, float) for v in valuation.values()):
                total = 0.0
                for mono, c in self._terms.items():
                    term = float(c)
                    for name, e in mono:
                        term *= valuation[name] ** e
                    total += term
                return total
            return self._evaluate_exact(valuation)
        except KeyError as e:
            raise KeyError(f"valuation misses parameter {e.args[0]!r}") from None

    def _compile(self):
        # integer coefficients over one common denominator, plus max degrees
        den = 1
        for c in self._terms.values():
            den = den * c.denominator // math.gcd(den, c.denominator)
        terms = [(int(c * den), mono) for mono, c in self._terms.items()]
        degree = {}
        for mono in self._terms:
            for name, e in mono:
                degree[name] = max(degree.get(name, 0), e)
        self._compiled = (den, terms, degree)
        return self._compiled

    def _evaluate_exact(self, valuation) -> Fraction:
        # all terms share the denominator den * prod(b_i ** maxdeg_i), so the
        # sum is accumulated in plain integers
        den, terms, degree = self._compiled or self._compile()
        nums, dens = {}, {}
        for name, d in degree.items():
            v = Fraction(valuation[name])
            nums[name] = [v.numerator ** k for k in range(d + 1)]
            dens[name] = [v.denominator ** k for k in range(d + 1)]
        total = 0
        for c, mono in terms:
            exps = dict(mono)
            for name, d in degree.items():
                e = exps.get(name, 0)
                c *= nums[name][e] * dens[name][d - e]
            total += c
        for name, d in degree.items():
            den *= dens[name][d]
        return Fraction(total, den)

    # comparison / hashing -----------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._terms == other._terms
        if isinstance(other, (int, Rational)):
            return self.is_constant() and self.constant_value() == other
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            if self.is_constant():
                self._hash = hash(self.constant_value())
            else:
                self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for mono, c in reversed(list(self._terms.items())):
            factors = [n if e == 1 else f"{n}^{e}" for n, e in mono]
            if not factors:
                body = str(abs(c))
            elif abs(c) == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(abs(c))] + factors)
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"Polynomial({str(self)!r})"

    def sort_key(self):
        return tuple((m, c) for m, c in self._terms.items())

    # serialization ------------------------------------------------------
    def to_json(self) -> list:
        return [
            [c.numerator, c.denominator, {n: e for n, e in mono}]
            for mono, c in self._terms.items()
        ]

    @classmethod
    def from_json(cls, data: list) -> Polynomial:
        return cls({tuple(sorted(m.items())): Fraction(num, den) for num, den, m in data})


class Quotient:
    """A ratio of two polynomials, used only as a coin weight.

    Appears when a conditional branch probability ``p_j / (1 - sum p_i)``
    is not itself a polynomial. Evaluates to 0 when the denominator
    vanishes; such a coin is never consulted with positive probability.
    """

    __slots__ = ("den", "num")

    def __init__(self, num, den):
        self.num = num
        self.den = den

    @property
    def variables(self):
        return _vars(self.num) | _vars(self.den)

    def evaluate(self, valuation):
        n = evaluate(self.num, valuation)
        d = evaluate(self.den, valuation)
        if d == 0:
            return n * 0
        return n / d

    def __eq__(self, other):
        return isinstance(other, Quotient) and (self.num, self.den) == (other.num, other.den)

    def __hash__(self):
        return hash((self.num, self.den))

    def __str__(self):
        return f"({self.num}) / ({self.den})"

    __repr__ = __str__

    def sort_key(self):
        return (sort_key(self.num), sort_key(self.den))


def _vars(x) -> frozenset:
    return getattr(x, "variables", frozenset())


def normalize(x):
    """Canonical scalar: constants become Fraction, others stay symbolic."""
    if isinstance(x, Polynomial):
        return x.constant_value() if x.is_constant() else x
    if isinstance(x, bool):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return x


def is_symbolic(x) -> bool:
    return isinstance(x, (Polynomial, Quotient))


def evaluate(x, valuation: Mapping[str, object]):
    """Evaluate a scalar (constant, Polynomial or Quotient) at a valuation."""
    if isinstance(x, (Polynomial, Quotient)):
        return x.evaluate(valuation)
    if any(isinstance(v, float) for v in valuation.values()):
        return float(x)
    return x


def sort_key(x):
    """Total order usable across Fractions and Polynomials (for determinism)."""
    if isinstance(x, Polynomial):
        return (1, str(x))
    if isinstance(x, Quotient):
        return (2, str(x))
    return (0, x)


def to_json(x):
    x = normalize(x)
    if isinstance(x, Fraction):
        return [x.numerator, x.denominator]
    return {"poly": x.to_json()}


def from_json(data):
    if isinstance(data, dict):
        return normalize(Polynomial.from_json(data["poly"]))
    num, den = data
    return Fraction(num, den)
