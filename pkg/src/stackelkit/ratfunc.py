"""Reduced multivariate rational functions with rational coefficients.

Numerator and denominator are integer polynomials (``flint.fmpz_mpoly``)
with no common factor, not even an integer one, and the denominator has a
positive leading coefficient. That form is canonical, so equality is
structural.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import flint


@lru_cache(maxsize=None)
def context(names: tuple):
    return flint.fmpz_mpoly_ctx.get(tuple(names), "deglex")


class RationalFunction:
    __slots__ = ("ctx", "numer", "denom", "_hash")

    def __init__(self, ctx, numer, denom=None, reduced=False):
        if denom is None:
            denom = ctx.constant(1)
        if denom.is_zero():
            raise ZeroDivisionError("zero denominator")
        if not reduced:
            if numer.is_zero():
                denom = ctx.constant(1)
            else:
                g = numer.gcd(denom)
                if not g.is_one():
                    numer, denom = numer // g, denom // g
            if denom.leading_coefficient() < 0:
                numer, denom = -numer, -denom
        self.ctx = ctx
        self.numer = numer
        self.denom = denom
        self._hash = None

    @classmethod
    def constant(cls, ctx, value):
        value = Fraction(value)
        return cls(ctx, ctx.constant(value.numerator), ctx.constant(value.denominator), reduced=True)

    @classmethod
    def gen(cls, ctx, i):
        return cls(ctx, ctx.gens()[i], reduced=True)

    def _same(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Fraction)):
            return RationalFunction.constant(self.ctx, other)
        return NotImplemented

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        if self.denom == other.denom:
            return RationalFunction(self.ctx, self.numer + other.numer, self.denom)
        g = self.denom.gcd(other.denom)
        a, b = self.denom // g, other.denom // g
        return RationalFunction(self.ctx, self.numer * b + other.numer * a, a * other.denom)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(self.ctx, -self.numer, self.denom, reduced=True)

    def __sub__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        # cross-cancel so each gcd involves the smaller factors only
        g1 = self.numer.gcd(other.denom)
        g2 = other.numer.gcd(self.denom)
        num = (self.numer // g1) * (other.numer // g2)
        den = (self.denom // g2) * (other.denom // g1)
        if num.is_zero():
            return RationalFunction(self.ctx, num)
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RationalFunction(self.ctx, num, den, reduced=True)

    __rmul__ = __mul__

    def inverse(self):
        if self.numer.is_zero():
            raise ZeroDivisionError("inverse of the zero function")
        num, den = self.denom, self.numer
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RationalFunction(self.ctx, num, den, reduced=True)

    def __truediv__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        base = self if k >= 0 else self.inverse()
        k = abs(k)
        return RationalFunction(self.ctx, base.numer**k, base.denom**k, reduced=True)

    def diff(self, i: int):
        n, d = self.numer, self.denom
        dn, dd = n.derivative(i), d.derivative(i)
        if dd.is_zero():
            return RationalFunction(self.ctx, dn, d)
        return RationalFunction(self.ctx, dn * d - n * dd, d * d)

    @staticmethod
    def sum(values):
        """Sum over a common denominator, reduced once at the end."""
        values = list(values)
        ctx = values[0].ctx
        groups = {}
        for v in values:
            key = v.denom.repr()
            if key in groups:
                groups[key][0] += v.numer
            else:
                groups[key] = [v.numer, v.denom]
        dens = [d for _, d in groups.values()]
        common = dens[0]
        for d in dens[1:]:
            common = common * (d // common.gcd(d))
        numer = ctx.constant(0)
        for num, den in groups.values():
            numer += num * (common // den)
        return RationalFunction(ctx, numer, common)

    # -- queries ------------------------------------------------------
    def __bool__(self):
        return not self.numer.is_zero()

    def __eq__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return self.numer == other.numer and self.denom == other.denom

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((tuple(self.numer.terms()), tuple(self.denom.terms())))
        return self._hash

    def is_constant(self):
        return self.numer.is_constant() and self.denom.is_constant()

    def __repr__(self):
        return f"({self.numer})/({self.denom})"


def poly_terms(poly):
    """(exponent tuple, int coefficient) pairs in the context's term order."""
    return [(tuple(int(e) for e in m), int(c)) for m, c in poly.terms()]
