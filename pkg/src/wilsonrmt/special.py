"""Polynomial arithmetic, scalar special functions and quadrature rules.

Everything downstream (weights, skew-orthogonal polynomials, kernels) is
built on top of the exact-coefficient :class:`Poly` type and the quadrature
rules defined here.  Polynomials live in the monomial basis; coefficient
arithmetic is double precision with exactly-rounded (``math.fsum``)
accumulation in the places where many terms are combined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import special as _sp

MAX_DEGREE = 400


class DegreeOverflowError(ValueError):
    """Raised when a polynomial operation would exceed MAX_DEGREE."""


class Poly:
    """Univariate polynomial sum_j c_j z^j with real double coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        if c.size == 0:
            c = np.zeros(1)
        # trim exact trailing zeros, keep at least the constant term
        nz = np.nonzero(c)[0]
        end = nz[-1] + 1 if nz.size else 1
        if end - 1 > MAX_DEGREE:
            raise DegreeOverflowError(f"degree {end - 1} exceeds {MAX_DEGREE}")
        self.coeffs = c[:end].copy()

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return len(self.coeffs) == 1 and self.coeffs[0] == 0.0

    def __call__(self, z):
        """Evaluate by Horner's scheme; z may be real/complex, scalar or array."""
        z = np.asarray(z)
        acc = np.zeros(z.shape, dtype=np.result_type(z.dtype, float))
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc if acc.shape else acc[()]

    def __add__(self, other):
        a, b = self.coeffs, _as_poly(other).coeffs
        n = max(len(a), len(b))
        out = np.zeros(n)
        out[: len(a)] += a
        out[: len(b)] += b
        return Poly(out)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return self + (_as_poly(other) * -1.0)

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if isinstance(other, Poly):
            if self.degree + other.degree > MAX_DEGREE:
                raise DegreeOverflowError("product degree exceeds MAX_DEGREE")
            return Poly(np.convolve(self.coeffs, other.coeffs))
        return Poly(self.coeffs * float(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def deriv(self):
        if self.degree == 0:
            return Poly([0.0])
        k = np.arange(1, len(self.coeffs))
        return Poly(self.coeffs[1:] * k)

    def shift_up(self, m=1):
        """Multiply by z^m."""
        return Poly(np.concatenate([np.zeros(m), self.coeffs]))

    def monic_error(self):
        """Relative deviation of the leading coefficient from 1."""
        return abs(self.coeffs[-1] - 1.0)

    def __repr__(self):
        return f"Poly({self.coeffs.tolist()})"


def _as_poly(x):
    if isinstance(x, Poly):
        return x
    return Poly([float(x)])


def poly_fsum(polys, weights=None):
    """Sum of polynomials with exactly-rounded per-coefficient accumulation.

    Used where many same-order terms combine with cancellation (for example
    the double-Hermite expansion of the even skew-orthogonal polynomials).
    """
    polys = list(polys)
    if weights is None:
        weights = [1.0] * len(polys)
    n = max(len(p.coeffs) for p in polys)
    out = np.zeros(n)
    for j in range(n):
        out[j] = math.fsum(
            w * p.coeffs[j] for p, w in zip(polys, weights) if j < len(p.coeffs)
        )
    return Poly(out)


def compose_affine(p, alpha, beta):
    """Coefficients of p(alpha*z + beta), by Horner in poly arithmetic."""
    lin = Poly([beta, alpha])
    out = Poly([p.coeffs[-1]])
    for c in p.coeffs[-2::-1]:
        out = out * lin + c
    return out


# ---------------------------------------------------------------------------
# classical polynomial families
# ---------------------------------------------------------------------------

def hermite(l, x):
    """Physicists' Hermite polynomial H_l(x), H_{l+1} = 2x H_l - 2l H_{l-1}."""
    if l < 0 or l > 200:
        raise ValueError("order out of range")
    hm, h = 0.0, 1.0
    for k in range(l):
        hm, h = h, 2.0 * x * h - 2.0 * k * hm
    return h


def laguerre(l, nu, x):
    """Generalized Laguerre polynomial L_l^(nu)(x) by the standard recurrence."""
    if l < 0 or l > 200:
        raise ValueError("order out of range")
    if l == 0:
        return 1.0
    lm, lk = 1.0, 1.0 + nu - x
    for k in range(1, l):
        lm, lk = lk, ((2 * k + 1 + nu - x) * lk - (k + nu) * lm) / (k + 1)
    return lk


@lru_cache(maxsize=512)
def hermite_poly(l):
    """Physicists' H_l as a Poly (exact integer coefficients)."""
    hm, h = Poly([0.0]), Poly([1.0])
    for k in range(l):
        hm, h = h, h.shift_up() * 2.0 - hm * (2.0 * k)
    return h


@lru_cache(maxsize=512)
def hermite_e_poly(l):
    """Probabilists' He_l as a Poly: He_{l+1} = z He_l - l He_{l-1} (monic)."""
    hm, h = Poly([0.0]), Poly([1.0])
    for k in range(l):
        hm, h = h, h.shift_up() - hm * float(k)
    return h


@lru_cache(maxsize=512)
def laguerre_poly(l, nu):
    """Generalized Laguerre L_l^(nu) as a Poly."""
    lm, lk = Poly([0.0]), Poly([1.0])
    for k in range(l):
        # (k+1) L_{k+1} = (2k+1+nu - x) L_k - (k+nu) L_{k-1}
        lm, lk = lk, (lk * (2.0 * k + 1.0 + nu) - lk.shift_up() - lm * (k + nu)) * (
            1.0 / (k + 1.0)
        )
    return lk


# ---------------------------------------------------------------------------
# scalar special functions
# ---------------------------------------------------------------------------

def erf2(x1, x2):
    """Generalized error function erf(x1, x2) = erf(x2) - erf(x1)."""
    return _sp.erf(x2) - _sp.erf(x1)


def bessel_i(l, x):
    """Modified Bessel function I_l(x) for integer order.

    I_{-l} = I_l and I_l(-x) = (-1)^l I_l(x).  Arguments beyond the
    reliable range |x| <= 700 return a signed infinity instead of garbage.
    """
    l = abs(int(l))
    if l > 200:
        raise ValueError("order out of range")
    if np.iscomplexobj(x) or isinstance(x, complex):
        return _sp.iv(l, x)
    if abs(x) > 700.0:
        sign = -1.0 if (x < 0 and l % 2 == 1) else 1.0
        return math.copysign(math.inf, sign)
    return float(_sp.iv(l, x))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

class QuadKind(Enum):
    GAUSS_HERMITE = "gauss-hermite"
    GAUSS_LEGENDRE = "gauss-legendre"
    GAUSS_LAGUERRE = "gauss-laguerre"
    TANH_SINH = "tanh-sinh"


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    kind: QuadKind

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=32)
def gauss_hermite(m):
    """m-point rule for integral f(t) exp(-t^2) dt over the real line."""
    x, w = np.polynomial.hermite.hermgauss(m)
    return Quadrature(x, w, QuadKind.GAUSS_HERMITE)


@lru_cache(maxsize=32)
def gauss_legendre(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return Quadrature(x, w, QuadKind.GAUSS_LEGENDRE)


@lru_cache(maxsize=32)
def gauss_laguerre(m):
    """m-point rule for integral f(u) exp(-u) du over [0, inf)."""
    x, w = np.polynomial.laguerre.laggauss(m)
    return Quadrature(x, w, QuadKind.GAUSS_LAGUERRE)


@lru_cache(maxsize=64)
def tanh_sinh(a, b, npts=301):
    """Double-exponential rule on [a, b]; clusters nodes at the endpoints.

    Robust for integrands that are analytic inside the interval but merely
    continuous (kinked) at an endpoint, which is exactly the situation for
    the sign-function factor in the non-Hermitian two-point weight.
    """
    half = (npts - 1) // 2
    umax = 3.2
    h = umax / half
    k = np.arange(-half, half + 1)
    u = k * h
    su = 0.5 * math.pi * np.sinh(u)
    t = np.tanh(su)
    w = 0.5 * math.pi * h * np.cosh(u) / np.cosh(su) ** 2
    mid, rad = 0.5 * (b + a), 0.5 * (b - a)
    nodes = mid + rad * t
    weights = rad * w
    keep = weights > 1e-300
    return Quadrature(nodes[keep], weights[keep], QuadKind.TANH_SINH)


@lru_cache(maxsize=32)
def half_gaussian_odd_rule(scale, m=80):
    """Nodes/weights for integral_0^inf g(y) exp(-scale*y^2) dy with g odd.

    Substituting u = scale*y^2 maps the integral onto Gauss-Laguerre; the
    rule is exact whenever g(y)/y is a polynomial in y^2, i.e. for every
    odd polynomial g.  That is precisely the integrand shape of the
    complex-pair part of the antisymmetric product.
    """
    gl = gauss_laguerre(m)
    y = np.sqrt(gl.nodes / scale)
    w = gl.weights / (2.0 * scale * y)
    return Quadrature(y, w, QuadKind.GAUSS_LAGUERRE)
