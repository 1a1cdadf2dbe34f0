"""One- and two-point weights and the scalar/antisymmetric products.

The Dirac deltas appearing in the formal definitions over the complex plane
are structural: every product below integrates only over the manifolds that
actually carry weight (real line, real x real, conjugate-pair line).

Quadrature layout, fixed once per context:

* scalar product      -- shifted Gauss-Hermite, exact for polynomials;
* minus two-point     -- rotated coordinates X = (x1+x2)/2, D = (x1-x2)/2,
  Gauss-Hermite in X (the weight is a pure shifted Gaussian there) and
  tanh-sinh in D where the erf factor is non-polynomial;
* plus real-real      -- same rotation; the difference factor combines a
  growing Gaussian with complementary error functions and is evaluated in
  scaled (erfcx) form so no intermediate overflows occur;
* plus complex-pair   -- Gauss-Hermite in x and a half-line Gauss-Laguerre
  rule in y that is exact for the odd-in-y polynomial integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as _sp

from .params import Branch, EnsembleParams, MinusBranchInvalidError, derive_scales
from .special import Poly, gauss_hermite, half_gaussian_odd_rule, tanh_sinh

SQRT8 = math.sqrt(8.0)


class PointKind(Enum):
    REAL_MODE = "real"
    COMPLEX_PAIR_MEMBER = "complex"


@dataclass(frozen=True)
class SpectralPoint:
    """A spectrum point: real mode (y == 0) or member of a conjugate pair."""

    x: float
    y: float = 0.0
    kind: PointKind = PointKind.REAL_MODE

    def __post_init__(self):
        if self.kind is PointKind.REAL_MODE and self.y != 0.0:
            raise ValueError("real modes must have y == 0")

    @property
    def z(self):
        return complex(self.x, self.y)

    @staticmethod
    def real(x):
        return SpectralPoint(float(x), 0.0, PointKind.REAL_MODE)

    @staticmethod
    def pair(x, y):
        return SpectralPoint(float(x), float(y), PointKind.COMPLEX_PAIR_MEMBER)


@dataclass(frozen=True)
class G2PlusValue:
    """Support-resolved value of the non-Hermitian two-point weight.

    ``real_real`` carries the coefficient of delta(y1) delta(y2); it is set
    whenever both arguments are real modes.  ``complex_pair`` carries the
    coefficient of the conjugate-pair line delta(x1-x2) delta(y1+y2); it is
    set when the second argument is the conjugate of the first.
    """

    real_real: float | None = None
    complex_pair: complex | None = None


def _erfc_scaled_times_exp(s, logfac):
    """exp(logfac) * erfc(s), evaluated as erfcx where that avoids overflow."""
    s = np.asarray(s, dtype=float)
    logfac = np.broadcast_to(np.asarray(logfac, dtype=float), s.shape)
    out = np.empty_like(s)
    pos = s >= 0.0
    out[pos] = _sp.erfcx(s[pos]) * np.exp(logfac[pos] - s[pos] ** 2)
    neg = ~pos
    sn = -s[neg]
    out[neg] = 2.0 * np.exp(logfac[neg]) - _sp.erfcx(sn) * np.exp(
        logfac[neg] - sn ** 2
    )
    return out


class WeightContext:
    """Weights and products for one ensemble and one sign branch."""

    def __init__(self, params: EnsembleParams, branch: Branch, max_degree=None,
                 gh_points=201, ts_points=301, lag_points=80):
        self.params = params
        self.branch = branch
        self.scales = derive_scales(params)
        if branch is Branch.MINUS and not self.scales.minus_valid:
            raise MinusBranchInvalidError(
                "two-point weight of the Hermitian branch requires a < 1"
            )
        n, a = params.n, params.a
        s = branch.sign
        if max_degree is None:
            max_degree = 2 * (params.nu + 2 * params.n + 8)
        self.max_degree = max_degree
        self._gh = gauss_hermite(gh_points)
        if 2 * gh_points - 1 < max_degree + 2:
            raise ValueError("quadrature capacity exceeded for requested degree")

        # one-point rule: weight exp[-(n/2a^2) x^2 + s*mu_l*x]
        sig1 = math.sqrt(2.0 * a * a / n)
        mean1 = s * a * a * params.mu_l / n
        fac1 = sig1 * math.exp(a * a * params.mu_l ** 2 / (2.0 * n))
        self._s_nodes = mean1 + sig1 * self._gh.nodes
        self._s_w = fac1 * self._gh.weights

        # symmetric coordinate rule: weight exp[-(n/a^2) X^2 + c*X],
        # c = mu_r - mu_l (minus branch) or mu_r + mu_l (plus branch)
        c = params.mu_r + s * params.mu_l
        sigX = math.sqrt(a * a / n)
        meanX = a * a * c / (2.0 * n)
        facX = sigX * math.exp(a * a * c * c / (4.0 * n))
        self._X_nodes = meanX + sigX * self._gh.nodes
        # overall 2 from the Jacobian dx1 dx2 = 2 dX dD
        self._X_w = 2.0 * facX * self._gh.weights

        # difference coordinate rule on [0, dmax], folded with the odd
        # two-point difference factor
        if branch is Branch.MINUS:
            a_dec = float(n)          # net Gaussian decay rate in D
        else:
            a_dec = n / (a * a)
        dmax = 1.6 * math.sqrt((0.5 * max_degree + 45.0) / a_dec)
        ts = tanh_sinh(0.0, dmax, ts_points)
        self._D_nodes = ts.nodes
        self._D_w = ts.weights * self._delta_factor(ts.nodes)

        if branch is Branch.PLUS:
            # complex-pair part: x-rule and half-line y-rule
            cc = params.mu_r + params.mu_l
            sigx = math.sqrt(a * a / (2.0 * n))
            meanx = a * a * cc / (2.0 * n)
            facx = math.sqrt(a * a / n) * math.exp(a * a * cc * cc / (4.0 * n))
            self._cx_nodes = meanx + math.sqrt(a * a / n) * self._gh.nodes
            self._cx_w = 8.0 * facx * self._gh.weights
            yrule = half_gaussian_odd_rule(float(n), lag_points)
            self._cy_nodes = yrule.nodes
            self._cy_w = yrule.weights
            self._cz = self._cx_nodes[:, None] + 1j * self._cy_nodes[None, :]

    # ------------------------------------------------------------------
    # pointwise weights
    # ------------------------------------------------------------------

    def g1(self, x):
        """One-point weight exp[-(n/2a^2) x^2 +- mu_l x]."""
        p = self.params
        x = np.asarray(x, dtype=float)
        return np.exp(-p.n / (2.0 * p.a ** 2) * x * x
                      + self.branch.sign * p.mu_l * x)

    def g2_minus(self, x1, x2):
        """Antisymmetric two-point weight of the Hermitian branch."""
        if self.branch is not Branch.MINUS:
            raise MinusBranchInvalidError("g2_minus requires the minus branch")
        p, sc = self.params, self.scales
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        n, a = p.n, p.a
        S, D = x1 + x2, x1 - x2
        expo = (-n / (4.0 * a * a) * S * S - n / 4.0 * D * D
                + 0.5 * (p.mu_r - p.mu_l) * S)
        c8 = SQRT8 * sc.a_hat_minus
        er = (_sp.erf((n * D - sc.m6_minus) / c8)
              - _sp.erf((-n * D - sc.m6_minus) / c8))
        return np.exp(expo) * er

    def g_r(self, x1, x2):
        """Real-real component of the non-Hermitian two-point weight.

        Evaluated through erfcx so the positive (n/4)(x1-x2)^2 exponent never
        materializes on its own.
        """
        p, sc = self.params, self.scales
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        n, a = p.n, p.a
        S, D = x1 + x2, x1 - x2
        expo = (-n / (4.0 * a * a) * S * S + n / 4.0 * D * D
                + 0.5 * (p.mu_r + p.mu_l) * S)
        sarg = (n * D - sc.l7_plus) / (SQRT8 * sc.a_hat_plus)
        # sign(D) - erf(s) = (sign(D) - 1) + erfc(s)
        first = (np.sign(D) - 1.0) * np.exp(expo)
        return first + _erfc_scaled_times_exp(sarg, expo)

    def g_c(self, z):
        """Conjugate-pair component; the sign factor is 0 on the real axis."""
        p, sc = self.params, self.scales
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        n, a = p.n, p.a
        mag = np.exp(-n / (a * a) * x * x - n * y * y + (p.mu_r + p.mu_l) * x)
        return -2.0j * np.sign(y) * mag

    def g2_plus(self, z1: SpectralPoint, z2: SpectralPoint) -> G2PlusValue:
        """Support-resolved g2^(+)(z1, z2) for two spectrum points."""
        if self.branch is not Branch.PLUS:
            raise ValueError("g2_plus requires the plus branch")
        rr = None
        cp = None
        if z1.kind is PointKind.REAL_MODE and z2.kind is PointKind.REAL_MODE:
            rr = float(self.g_r(z1.x, z2.x))
        if (z1.kind is PointKind.COMPLEX_PAIR_MEMBER
                and z2.kind is PointKind.COMPLEX_PAIR_MEMBER
                and abs(z1.x - z2.x) < 1e-12 and abs(z1.y + z2.y) < 1e-12):
            cp = complex(self.g_c(z1.z))
        return G2PlusValue(real_real=rr, complex_pair=cp)

    # ------------------------------------------------------------------
    # difference-coordinate factors (internal)
    # ------------------------------------------------------------------

    def _delta_factor(self, d):
        """Odd difference factor of the two-point weight, for d > 0."""
        p, sc = self.params, self.scales
        n = p.n
        if self.branch is Branch.MINUS:
            c8 = SQRT8 * sc.a_hat_minus
            er = (_sp.erf((2.0 * n * d - sc.m6_minus) / c8)
                  - _sp.erf((-2.0 * n * d - sc.m6_minus) / c8))
            return np.exp(-n * d * d) * er
        c8 = SQRT8 * sc.a_hat_plus
        logfac = n * d * d
        s1 = (2.0 * n * d - sc.l7_plus) / c8
        s2 = (2.0 * n * d + sc.l7_plus) / c8
        return (_erfc_scaled_times_exp(s1, logfac)
                + _erfc_scaled_times_exp(s2, logfac))

    # ------------------------------------------------------------------
    # products
    # ------------------------------------------------------------------

    def _check_capacity(self, f1: Poly, f2: Poly):
        if f1.degree + f2.degree > 2 * len(self._gh.nodes) - 2:
            raise ValueError("quadrature capacity exceeded")

    def scalar_product(self, f1: Poly, f2: Poly) -> float:
        """<f1|f2> against the one-point weight; exact for polynomials."""
        self._check_capacity(f1, f2)
        x = self._s_nodes
        return float(np.dot(self._s_w, f1(x) * f2(x)))

    def antisym_product(self, f1: Poly, f2: Poly) -> float:
        """(f1|f2) against the two-point weight g2 of the current branch."""
        self._check_capacity(f1, f2)
        X = self._X_nodes[:, None]
        D = self._D_nodes[None, :]
        xp, xm = X + D, X - D
        core = f1(xp) * f2(xm) - f1(xm) * f2(xp)
        val = float(self._X_w @ core @ self._D_w)
        if self.branch is Branch.PLUS:
            prod = f1(self._cz) * np.conj(f2(self._cz))
            val += float(self._cx_w @ prod.imag @ self._cy_w)
        return val

    def modified_product(self, sys, f1: Poly, f2: Poly) -> float:
        """(f1, f2) against the projected two-point weight G2.

        ``sys`` only needs to expose the orthogonal family: an iterable of
        objects with ``poly`` and ``h`` attributes (degrees 0 .. nu-1).
        """
        val = self.antisym_product(f1, f2)
        ortho = list(sys.ortho)[: self.params.nu]
        if not ortho:
            return val
        s1 = [self.scalar_product(f1, op.poly) for op in ortho]
        s2 = [self.scalar_product(op.poly, f2) for op in ortho]
        a1 = [self.antisym_product(op.poly, f2) for op in ortho]
        a2 = [self.antisym_product(f1, op.poly) for op in ortho]
        for j, op in enumerate(ortho):
            val -= (s1[j] * a1[j] + a2[j] * s2[j]) / op.h
        for i, opi in enumerate(ortho):
            for j, opj in enumerate(ortho):
                w = self.antisym_product(opi.poly, opj.poly)
                val += s1[i] * w * s2[j] / (opi.h * opj.h)
        return val
