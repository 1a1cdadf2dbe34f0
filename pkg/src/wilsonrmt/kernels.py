"""Christoffel-Darboux-like kernel, integral transforms and correlations.

Kernel values of the non-Hermitian branch are support-resolved: a value is
a mapping from delta-support tags to coefficients.  The empty tag set is
the smooth part; ``y1``/``y2`` mark terms carrying delta(y) of the first or
second argument; ``pair`` marks the conjugate-line delta of the raw
two-point weight.  Products during Pfaffian expansion merge tag sets; a
repeated ``y`` tag on one eigenvalue cannot occur because, within each
two-row block of the assembled matrix, only the first row carries the
delta of its own argument.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import Branch
from .skewlinalg import pfaffian
from .skewpoly import SkewSystem
from .special import Poly, gauss_legendre, tanh_sinh
from .weights import WeightContext


# ---------------------------------------------------------------------------
# Christoffel-Darboux-like kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CDKernel:
    sys: SkewSystem
    n_eff: int          # number of pair terms in the sum

    def __post_init__(self):
        if self.n_eff > self.sys.n_pairs:
            raise ValueError("system built with too few pairs for n_eff")

    def sigma_sum(self, z1, z2):
        """sum_l [q_even(z1) q_odd(z2) - q_odd(z1) q_even(z2)] / o_l."""
        s = self.sys
        z1 = np.asarray(z1)
        z2 = np.asarray(z2)
        acc = 0.0
        for l in range(self.n_eff):
            acc = acc + (s.q_even[l](z1) * s.q_odd[l](z2)
                         - s.q_odd[l](z1) * s.q_even[l](z2)) / s.o_l(l)
        return acc

    def sigma_integral(self, z1, z2, npts=400):
        """Same kernel from the one-dimensional half-line integral route."""
        s = self.sys
        p = s.params
        n, a = p.n, p.a
        N = self.n_eff
        qe_lo, qe_hi = s.q_even[N - 1], s.q_even[N]
        A = n / a ** 2
        B = (p.mu_r + s.branch.sign * p.mu_l) - A * (complex(z1) + complex(z2))
        deg = qe_lo.degree + qe_hi.degree
        xmax = max(0.0, B.real / (2 * A)) + 1.7 * math.sqrt((0.5 * deg + 45.0) / A)
        gl = gauss_legendre(npts)
        t = 0.5 * xmax * (gl.nodes + 1.0)
        w = 0.5 * xmax * gl.weights
        det = (qe_lo(z1 + t) * qe_hi(z2 + t) - qe_hi(z1 + t) * qe_lo(z2 + t))
        integ = np.exp(-A * t * t + B * t) * det
        return (n / (a ** 2 * s.o_l(N - 1))) * np.dot(w, integ)


# ---------------------------------------------------------------------------
# shared transform machinery
# ---------------------------------------------------------------------------

def _ts_unit(npts):
    return tanh_sinh(-1.0, 1.0, npts)


class MinusKernels:
    """Kernels of the Hermitian branch for n_f extra flavour pairs."""

    def __init__(self, ctx: WeightContext, sys: SkewSystem, n_flavors=0,
                 ts_points=241):
        if ctx.branch is not Branch.MINUS or sys.branch is not Branch.MINUS:
            raise ValueError("minus-branch context and system required")
        if n_flavors % 2:
            raise ValueError("number of flavours must be even")
        self.ctx = ctx
        self.sys = sys
        self.n_eff = sys.params.n + n_flavors // 2
        if self.n_eff > sys.n_pairs:
            raise ValueError("system built with too few pairs")
        p = sys.params
        n, a, nu = p.n, p.a, p.nu
        self._A = n * (1.0 + a * a) / (4.0 * a * a)
        deg = nu + 2 * self.n_eff + 2
        self._R = 1.7 * math.sqrt((0.5 * deg + 45.0) / self._A)
        self._ts = _ts_unit(ts_points)
        # projections (q_{nu+l} | p_j) for j < nu, l = 0 .. 2 n_eff - 1
        self.proj = np.zeros((2 * self.n_eff, nu))
        for l in range(2 * self.n_eff):
            for j in range(nu):
                self.proj[l, j] = ctx.antisym_product(sys.q(nu + l), sys.p(j))
        self.wmat = np.zeros((nu, nu))
        for i in range(nu):
            for j in range(i + 1, nu):
                self.wmat[i, j] = ctx.antisym_product(sys.p(i), sys.p(j))
                self.wmat[j, i] = -self.wmat[i, j]

    # -- one-dimensional transforms -------------------------------------

    def transform_g2(self, f: Poly, x):
        """integral f(t) g2(t, x) dt on an array of output points."""
        p = self.sys.params
        n, a = p.n, p.a
        x = np.atleast_1d(np.asarray(x, dtype=float))
        B = 0.5 * n * (1.0 - 1.0 / a ** 2) * x + 0.5 * (p.mu_r - p.mu_l)
        centers = B / (2.0 * self._A)
        nodes = centers[:, None] + self._R * self._ts.nodes[None, :]
        w = self._R * self._ts.weights
        vals = f(nodes) * self.ctx.g2_minus(nodes, x[:, None])
        return vals @ w

    def qtilde(self, l, x):
        """Transform of q_{nu+l} against the projected two-point weight."""
        p = self.sys.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.transform_g2(self.sys.q(p.nu + l), x)
        if p.nu:
            g1 = self.ctx.g1(x)
            for j in range(p.nu):
                out = out - (self.proj[l, j] / self.sys.h(j)) * self.sys.p(j)(x) * g1
        return out

    def ptransform(self, j, x):
        return self.transform_g2(self.sys.p(j), x)

    def modified_g2(self, x1, x2):
        """Projected two-point weight G2(x1, x2), scalars or arrays."""
        p = self.sys.params
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        val = self.ctx.g2_minus(x1, x2)
        if p.nu:
            g11, g12 = self.ctx.g1(x1), self.ctx.g1(x2)
            t1 = [self.ptransform(j, x1) for j in range(p.nu)]
            t2 = [self.ptransform(j, x2) for j in range(p.nu)]
            for j in range(p.nu):
                pj = self.sys.p(j)
                val = val - (t2[j] * pj(x1) * g11 - t1[j] * pj(x2) * g12) / self.sys.h(j)
            for i in range(p.nu):
                for j in range(p.nu):
                    val = val + (self.wmat[i, j] / (self.sys.h(i) * self.sys.h(j))
                                 * self.sys.p(i)(x1) * self.sys.p(j)(x2) * g11 * g12)
        return val

    # -- kernels ---------------------------------------------------------

    def k1(self, x1, x2):
        s = self.sys
        acc = np.asarray(self.modified_g2(x1, x2), dtype=float)
        for l in range(self.n_eff):
            acc = acc + (self.qtilde(2 * l + 1, x1) * self.qtilde(2 * l, x2)
                         - self.qtilde(2 * l, x1) * self.qtilde(2 * l + 1, x2)) / s.o_l(l)
        return acc

    def k2(self, x1, x2):
        s = self.sys
        p = s.params
        x1a = np.asarray(x1, dtype=float)
        x2a = np.atleast_1d(np.asarray(x2, dtype=float))
        acc = 0.0
        g1 = self.ctx.g1(x2a)
        for j in range(p.nu):
            acc = acc + s.p(j)(x1a) * s.p(j)(x2a) * g1 / s.h(j)
        for l in range(self.n_eff):
            acc = acc + (s.q_odd[l](x1a) * self.qtilde(2 * l, x2a)
                         - s.q_even[l](x1a) * self.qtilde(2 * l + 1, x2a)) / s.o_l(l)
        return acc

    def k2_diag(self, x):
        """K2(x, x) on a grid; the quenched one-point function before scaling."""
        s = self.sys
        p = s.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g1 = self.ctx.g1(x)
        acc = np.zeros_like(x)
        for j in range(p.nu):
            acc += s.p(j)(x) ** 2 * g1 / s.h(j)
        qt = {l: self.qtilde(l, x) for l in range(2 * self.n_eff)}
        for l in range(self.n_eff):
            acc += (s.q_odd[l](x) * qt[2 * l] - s.q_even[l](x) * qt[2 * l + 1]) / s.o_l(l)
        return acc

    def k3(self, x1, x2):
        return -CDKernel(self.sys, self.n_eff).sigma_sum(x1, x2)

    # -- correlation assembly ---------------------------------------------

    def correlation_raw(self, points, masses=()):
        """Sign-fixed Pfaffian ratio before the overall density calibration."""
        points = [float(x) for x in np.atleast_1d(points)]
        masses = [float(m) for m in np.atleast_1d(masses)] if len(np.atleast_1d(masses)) else []
        if len(masses) % 2:
            raise ValueError("need an even number of flavours")
        k = len(points)
        nf = len(masses)
        if nf:
            scale = max(abs(m) for m in masses)
            for i in range(nf):
                for j in range(i + 1, nf):
                    if abs(masses[i] - masses[j]) < 1e-10 * max(1.0, scale):
                        warnings.warn("degenerate masses split by machine offset")
                        masses[j] += 1e-7 * max(1.0, scale)
        lam = [-m for m in masses]
        dim = 2 * k + nf
        m = np.zeros((dim, dim))
        for i in range(k):
            for j in range(k):
                if i < j:
                    m[i, j] = self.k1(points[i], points[j])
                m[i, k + j] = -float(self.k2(points[j], points[i]))
            for j in range(nf):
                m[i, 2 * k + j] = -float(self.k2(lam[j], points[i]))
        for i in range(k):
            for j in range(k):
                if i < j:
                    m[k + i, k + j] = float(self.k3(points[i], points[j]))
            for j in range(nf):
                m[k + i, 2 * k + j] = float(self.k3(points[i], lam[j]))
        for i in range(nf):
            for j in range(i + 1, nf):
                m[2 * k + i, 2 * k + j] = float(self.k3(lam[i], lam[j]))
        m = m - m.T - np.diag(np.diag(m))
        num = pfaffian(m)
        if nf:
            dmat = np.zeros((nf, nf))
            for i in range(nf):
                for j in range(i + 1, nf):
                    dmat[i, j] = float(self.k3(lam[i], lam[j]))
            dmat = dmat - dmat.T
            den = pfaffian(dmat)
            if den == 0:
                raise ZeroDivisionError("singular mass-block Pfaffian")
        else:
            den = 1.0
        sign = (-1.0) ** ((k * (k + 1) // 2) % 2)
        return sign * num / den


# ---------------------------------------------------------------------------
# plus branch: support-resolved kernel values
# ---------------------------------------------------------------------------

SMOOTH = frozenset()


def _cmul(a_dict, b_dict, out, factor=1.0):
    for ta, va in a_dict.items():
        for tb, vb in b_dict.items():
            if ta & tb:
                continue  # repeated support tag: structurally zero
            key = ta | tb
            out[key] = out.get(key, 0.0) + factor * va * vb
    return out


class PlusKernels:
    """Kernels of the non-Hermitian branch with delta-support bookkeeping."""

    def __init__(self, ctx: WeightContext, sys: SkewSystem, n_flavors=0,
                 ts_points=241):
        if ctx.branch is not Branch.PLUS or sys.branch is not Branch.PLUS:
            raise ValueError("plus-branch context and system required")
        if n_flavors % 2:
            raise ValueError("number of flavours must be even")
        self.ctx = ctx
        self.sys = sys
        self.n_eff = sys.params.n + n_flavors // 2
        if self.n_eff > sys.n_pairs:
            raise ValueError("system built with too few pairs")
        p = sys.params
        n, a, nu = p.n, p.a, p.nu
        self._A = n / (2.0 * a * a)
        deg = nu + 2 * self.n_eff + 2
        self._R = 1.7 * math.sqrt((0.5 * deg + 45.0) / self._A)
        self._c0 = a * a * (p.mu_r + p.mu_l) / (2.0 * n)
        self._ts = _ts_unit(ts_points)
        self.proj = np.zeros((2 * self.n_eff, nu))
        for l in range(2 * self.n_eff):
            for j in range(nu):
                self.proj[l, j] = ctx.antisym_product(sys.q(nu + l), sys.p(j))
        self.wmat = np.zeros((nu, nu))
        for i in range(nu):
            for j in range(i + 1, nu):
                self.wmat[i, j] = ctx.antisym_product(sys.p(i), sys.p(j))
                self.wmat[j, i] = -self.wmat[i, j]

    # -- transforms -------------------------------------------------------

    def _gr_halves(self, x):
        """Split integration mesh with the sign kink at an endpoint."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo = np.minimum(self._c0 - self._R, x - self._R)
        hi = np.maximum(self._c0 + self._R, x + self._R)
        t = self._ts.nodes  # on [-1, 1]
        w = self._ts.weights
        nodes1 = x[:, None] + 0.5 * (x - lo)[:, None] * (t[None, :] - 1.0)
        w1 = 0.5 * (x - lo)[:, None] * w[None, :]
        nodes2 = x[:, None] + 0.5 * (hi - x)[:, None] * (t[None, :] + 1.0)
        w2 = 0.5 * (hi - x)[:, None] * w[None, :]
        return (nodes1, w1), (nodes2, w2)

    def transform_gr_first(self, f: Poly, x):
        """integral f(t) g_r(x, t) dt (output point in the first slot)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        (n1, w1), (n2, w2) = self._gr_halves(x)
        v1 = np.sum(f(n1) * self.ctx.g_r(x[:, None], n1) * w1, axis=1)
        v2 = np.sum(f(n2) * self.ctx.g_r(x[:, None], n2) * w2, axis=1)
        return v1 + v2

    def transform_gr_second(self, f: Poly, x):
        """integral f(t) g_r(t, x) dt (output point in the second slot)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        (n1, w1), (n2, w2) = self._gr_halves(x)
        v1 = np.sum(f(n1) * self.ctx.g_r(n1, x[:, None]) * w1, axis=1)
        v2 = np.sum(f(n2) * self.ctx.g_r(n2, x[:, None]) * w2, axis=1)
        return v1 + v2

    def qtr_delta(self, l, x):
        """delta(y)-part of the right transform of q_{nu+l}."""
        return self.transform_gr_first(self.sys.q(self.sys.params.nu + l), x)

    def qtr_smooth(self, l, z):
        q = self.sys.q(self.sys.params.nu + l)
        z = np.asarray(z, dtype=complex)
        return self.ctx.g_c(z) * q(np.conj(z))

    def qtl_delta(self, l, x):
        """delta(y)-part of the left transform (with the projection sum)."""
        p = self.sys.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.transform_gr_second(self.sys.q(p.nu + l), x)
        if p.nu:
            g1 = self.ctx.g1(x)
            for j in range(p.nu):
                out = out - (self.proj[l, j] / self.sys.h(j)) * self.sys.p(j)(x) * g1
        return out

    def qtl_smooth(self, l, z):
        return -self.qtr_smooth(l, z)

    def ptilde_delta(self, j, x):
        p = self.sys.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.transform_gr_second(self.sys.p(j), x)
        g1 = self.ctx.g1(x)
        for i in range(p.nu):
            out = out - (self.wmat[j, i] / (2.0 * self.sys.h(i))) * self.sys.p(i)(x) * g1
        return out

    def ptilde_smooth(self, j, z):
        z = np.asarray(z, dtype=complex)
        return -self.ctx.g_c(z) * self.sys.p(j)(np.conj(z))

    def _qtr(self, l, z):
        return {SMOOTH: complex(self.qtr_smooth(l, z)),
                frozenset({"y2"}): complex(self.qtr_delta(l, z.real)[0])}

    def _qtl(self, l, z, tag="y1"):
        return {SMOOTH: complex(self.qtl_smooth(l, z)),
                frozenset({tag}): complex(self.qtl_delta(l, z.real)[0])}

    # -- kernels (support-resolved scalars) -------------------------------

    def k1(self, z1, z2):
        z1, z2 = complex(z1), complex(z2)
        s = self.sys
        out = {}
        for l in range(self.n_eff):
            a1 = self._retag(self._qtr(2 * l + 1, z1), "y2", "y1")
            b1 = self._retag(self._qtr(2 * l, z1), "y2", "y1")
            a2 = self._qtr(2 * l + 1, z2)
            b2 = self._qtr(2 * l, z2)
            _cmul(a1, b2, out, 1.0 / s.o_l(l))
            _cmul(b1, a2, out, -1.0 / s.o_l(l))
        return out

    @staticmethod
    def _retag(d, old, new):
        out = {}
        for t, v in d.items():
            if old in t:
                t = (t - {old}) | {new}
                t = frozenset(t)
            out[t] = v
        return out

    def modified_g2_components(self, z1, z2):
        """G2(z1, z2) resolved by support; ``pair`` tags the conjugate line."""
        p = self.sys.params
        z1, z2 = complex(z1), complex(z2)
        x1, x2 = z1.real, z2.real
        out = {}
        out[frozenset({"y1", "y2"})] = float(self.ctx.g_r(x1, x2))
        if abs(z2 - z1.conjugate()) < 1e-12 * max(1.0, abs(z1)):
            out[frozenset({"pair"})] = complex(self.ctx.g_c(z1))
        if p.nu:
            g11 = float(self.ctx.g1(x1))
            g12 = float(self.ctx.g1(x2))
            for j in range(p.nu):
                pj = self.sys.p(j)
                tdelta = float(self.transform_gr_first(pj, x1)[0]
                               - self.transform_gr_second(pj, x1)[0])
                tsm = 2.0 * complex(self.ctx.g_c(z1)) * pj(np.conj(z1))
                key = frozenset({"y1", "y2"})
                out[key] = out.get(key, 0.0) - tdelta * pj(x2) * g12 / self.sys.h(j)
                key = frozenset({"y2"})
                out[key] = out.get(key, 0.0) - tsm * pj(x2) * g12 / self.sys.h(j)
            for i in range(p.nu):
                for j in range(p.nu):
                    key = frozenset({"y1", "y2"})
                    out[key] = out.get(key, 0.0) + (
                        self.wmat[i, j] / (2.0 * self.sys.h(i) * self.sys.h(j))
                        * self.sys.p(i)(x1) * self.sys.p(j)(x2) * g11 * g12)
        return out

    def k2(self, z1, z2):
        """K2(z1, z2); the raw-weight term enters with swapped arguments."""
        z1, z2 = complex(z1), complex(z2)
        s = self.sys
        p = s.params
        out = {}
        swapped = self.modified_g2_components(z2, z1)
        for t, v in swapped.items():
            t2 = frozenset("y1" if x == "y2" else ("y2" if x == "y1" else x) for x in t)
            out[t2] = out.get(t2, 0.0) + v
        for l in range(self.n_eff):
            a1 = self._qtl(2 * l + 1, z1)
            b1 = self._qtl(2 * l, z1)
            a2 = self._qtr(2 * l + 1, z2)
            b2 = self._qtr(2 * l, z2)
            _cmul(a1, b2, out, 1.0 / s.o_l(l))
            _cmul(b1, a2, out, -1.0 / s.o_l(l))
        g11 = float(self.ctx.g1(z1.real))
        for j in range(p.nu):
            pt = {SMOOTH: complex(self.ptilde_smooth(j, z2)),
                  frozenset({"y2"}): complex(self.ptilde_delta(j, z2.real)[0])}
            base = {frozenset({"y1"}): self.sys.p(j)(z1.real) * g11 / self.sys.h(j)}
            _cmul(base, pt, out, -1.0)
        return out

    def k3(self, z1, z2):
        z1, z2 = complex(z1), complex(z2)
        s = self.sys
        out = {}
        for l in range(self.n_eff):
            q_odd = {SMOOTH: complex(s.q_odd[l](z1))}
            q_even = {SMOOTH: complex(s.q_even[l](z1))}
            _cmul(q_odd, self._qtr(2 * l, z2), out, 1.0 / s.o_l(l))
            _cmul(q_even, self._qtr(2 * l + 1, z2), out, -1.0 / s.o_l(l))
        return out

    def k4(self, z1, z2):
        z1, z2 = complex(z1), complex(z2)
        s = self.sys
        p = s.params
        out = {}
        for l in range(self.n_eff):
            a1 = self._qtl(2 * l + 1, z1, "y1")
            b1 = self._qtl(2 * l, z1, "y1")
            a2 = self._qtl(2 * l + 1, z2, "y2")
            b2 = self._qtl(2 * l, z2, "y2")
            _cmul(a1, b2, out, 1.0 / s.o_l(l))
            _cmul(b1, a2, out, -1.0 / s.o_l(l))
        for j in range(p.nu):
            pt1 = {SMOOTH: complex(self.ptilde_smooth(j, z1)),
                   frozenset({"y1"}): complex(self.ptilde_delta(j, z1.real)[0])}
            d2 = {frozenset({"y2"}): self.sys.p(j)(z2.real) * float(self.ctx.g1(z2.real))}
            _cmul(pt1, d2, out, 1.0 / self.sys.h(j))
            pt2 = {SMOOTH: complex(self.ptilde_smooth(j, z2)),
                   frozenset({"y2"}): complex(self.ptilde_delta(j, z2.real)[0])}
            d1 = {frozenset({"y1"}): self.sys.p(j)(z1.real) * float(self.ctx.g1(z1.real))}
            _cmul(d1, pt2, out, -1.0 / self.sys.h(j))
        return out

    def k5(self, z1, z2):
        z1, z2 = complex(z1), complex(z2)
        s = self.sys
        p = s.params
        out = {}
        g12 = float(self.ctx.g1(z2.real))
        for j in range(p.nu):
            key = frozenset({"y2"})
            out[key] = out.get(key, 0.0) + (
                s.p(j)(z1) * s.p(j)(z2.real) * g12 / s.h(j))
        for l in range(self.n_eff):
            q_odd = {SMOOTH: complex(s.q_odd[l](z1))}
            q_even = {SMOOTH: complex(s.q_even[l](z1))}
            _cmul(q_odd, self._qtl(2 * l, z2, "y2"), out, 1.0 / s.o_l(l))
            _cmul(q_even, self._qtl(2 * l + 1, z2, "y2"), out, -1.0 / s.o_l(l))
        return out

    def k6(self, z1, z2):
        return {SMOOTH: complex(-CDKernel(self.sys, self.n_eff).sigma_sum(
            complex(z1), complex(z2)))}

    # -- densities (vectorized diagonals) ---------------------------------

    def density_right_delta(self, x):
        """Real-line component of the right-point one-level correlation
        before overall calibration: -K3(x, x) delta-part."""
        s = self.sys
        x = np.atleast_1d(np.asarray(x, dtype=float))
        tr = {l: self.qtr_delta(l, x) for l in range(2 * self.n_eff)}
        acc = np.zeros_like(x)
        for l in range(self.n_eff):
            acc += (s.q_odd[l](x) * tr[2 * l] - s.q_even[l](x) * tr[2 * l + 1]) / s.o_l(l)
        return -acc

    def density_left_delta(self, x):
        """Real-line component of the left-point correlation: +K5 delta-part."""
        s = self.sys
        p = s.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g1 = self.ctx.g1(x)
        acc = np.zeros_like(x)
        for j in range(p.nu):
            acc += s.p(j)(x) ** 2 * g1 / s.h(j)
        tl = {l: self.qtl_delta(l, x) for l in range(2 * self.n_eff)}
        for l in range(self.n_eff):
            acc += (s.q_odd[l](x) * tl[2 * l] - s.q_even[l](x) * tl[2 * l + 1]) / s.o_l(l)
        return acc

    def density_complex_half(self, z):
        """Smooth component shared by the right and left correlations
        (one half of the complex-plane density before calibration)."""
        s = self.sys
        z = np.asarray(z, dtype=complex)
        zc = np.conj(z)
        acc = 0.0
        for l in range(self.n_eff):
            acc = acc + (s.q_odd[l](z) * s.q_even[l](zc)
                         - s.q_even[l](z) * s.q_odd[l](zc)) / s.o_l(l)
        val = -self.ctx.g_c(z) * acc
        return np.real(val)

    # -- correlation assembly ---------------------------------------------

    def correlation_raw(self, points_r=(), points_l=(), masses=()):
        """Support-resolved Pfaffian ratio over the kernel blocks.

        Returns a dict mapping frozensets of tags to values; tags are
        ("y", idx) for the real-line delta of argument idx and
        ("pair", i, j) for a conjugate-pair line between arguments i, j.
        Argument indices count right points, then left points.
        """
        zr = [complex(z) for z in points_r]
        zl = [complex(z) for z in points_l]
        masses = [float(m) for m in np.atleast_1d(masses)] if len(np.atleast_1d(masses)) else []
        if len(masses) % 2:
            raise ValueError("need an even number of flavours")
        kr, kl, nf = len(zr), len(zl), len(masses)
        dim = 2 * kr + 2 * kl + nf
        mat = [[None] * dim for _ in range(dim)]

        def put(i, j, comp):
            mat[i][j] = comp
            mat[j][i] = {t: -v for t, v in comp.items()}

        def remap(comp, i_global, j_global):
            out = {}
            for t, v in comp.items():
                tags = []
                for tag in t:
                    if tag == "y1":
                        tags.append(("y", i_global))
                    elif tag == "y2":
                        tags.append(("y", j_global))
                    elif tag == "pair":
                        tags.append(("pair", min(i_global, j_global),
                                     max(i_global, j_global)))
                    else:
                        raise AssertionError(tag)
                key = frozenset(tags)
                out[key] = out.get(key, 0.0) + v
            return out

        def row(i):
            return 2 * i

        def lrow(i):
            return 2 * kr + 2 * i

        def mrow(i):
            return 2 * kr + 2 * kl + i

        for i in range(kr):
            for j in range(kr):
                if j < i:
                    continue
                k1c = remap(self.k1(zr[i], zr[j]), i, j)
                k3ij = remap(self.k3(zr[i], zr[j]), i, j)
                k3ji = remap(self.k3(zr[j], zr[i]), j, i)
                k6c = remap(self.k6(zr[i], zr[j]), i, j)
                if j == i:
                    put(row(i), row(i) + 1, {t: -v for t, v in k3ji.items()})
                    continue
                put(row(i), row(j), k1c)
                put(row(i), row(j) + 1, {t: -v for t, v in k3ji.items()})
                put(row(i) + 1, row(j), k3ij)
                put(row(i) + 1, row(j) + 1, k6c)
            for j in range(kl):
                gi, gj = i, kr + j
                k2c = remap(self.k2(zl[j], zr[i]), gj, gi)
                k3c = remap(self.k3(zl[j], zr[i]), gj, gi)
                k5c = remap(self.k5(zr[i], zl[j]), gi, gj)
                k6c = remap(self.k6(zr[i], zl[j]), gi, gj)
                put(row(i), lrow(j), k2c)
                put(row(i), lrow(j) + 1, {t: -v for t, v in k3c.items()})
                put(row(i) + 1, lrow(j), {t: -v for t, v in k5c.items()})
                put(row(i) + 1, lrow(j) + 1, k6c)
            for j in range(nf):
                gi = i
                k3c = remap(self.k3(masses[j], zr[i]), dim + j, gi)  # mass smooth
                k6c = remap(self.k6(zr[i], masses[j]), gi, dim + j)
                put(row(i), mrow(j), {t: -v for t, v in k3c.items()})
                put(row(i) + 1, mrow(j), k6c)
        for i in range(kl):
            for j in range(kl):
                if j < i:
                    continue
                gi, gj = kr + i, kr + j
                k4c = remap(self.k4(zl[i], zl[j]), gi, gj)
                k5ji = remap(self.k5(zl[j], zl[i]), gj, gi)
                k5ij = remap(self.k5(zl[i], zl[j]), gi, gj)
                k6c = remap(self.k6(zl[i], zl[j]), gi, gj)
                if j == i:
                    put(lrow(i), lrow(i) + 1, k5ji)
                    continue
                put(lrow(i), lrow(j), k4c)
                put(lrow(i), lrow(j) + 1, k5ji)
                put(lrow(i) + 1, lrow(j), {t: -v for t, v in k5ij.items()})
                put(lrow(i) + 1, lrow(j) + 1, k6c)
            for j in range(nf):
                gi = kr + i
                k5c = remap(self.k5(masses[j], zl[i]), dim + j, gi)
                k6c = remap(self.k6(zl[i], masses[j]), gi, dim + j)
                put(lrow(i), mrow(j), k5c)
                put(lrow(i) + 1, mrow(j), k6c)
        for i in range(nf):
            for j in range(i + 1, nf):
                put(mrow(i), mrow(j), self.k6(masses[i], masses[j]))
        for i in range(dim):
            if mat[i][i] is None:
                mat[i][i] = {}
            for j in range(dim):
                if mat[i][j] is None:
                    mat[i][j] = {}

        num = _component_pfaffian(mat)
        if nf:
            dmat = np.zeros((nf, nf), dtype=complex)
            for i in range(nf):
                for j in range(i + 1, nf):
                    dmat[i, j] = self.k6(masses[i], masses[j])[SMOOTH]
            dmat = dmat - dmat.T
            den = pfaffian(dmat)
            if den == 0:
                raise ZeroDivisionError("singular mass-block Pfaffian")
        else:
            den = 1.0
        return {t: v / den for t, v in num.items()}


def _component_pfaffian(mat):
    """Pfaffian of a matrix of support-resolved values by cofactor expansion."""
    dim = len(mat)
    if dim == 0:
        return {frozenset(): 1.0}
    if dim % 2:
        raise ValueError("even dimension required")
    if dim == 2:
        return dict(mat[0][1])
    out = {}
    for j in range(1, dim):
        entry = mat[0][j]
        if not entry:
            continue
        keep = [i for i in range(1, dim) if i != j]
        minor = [[mat[a][b] for b in keep] for a in keep]
        sub = _component_pfaffian(minor)
        sign = (-1.0) ** (j + 1)
        for t1, v1 in entry.items():
            for t2, v2 in sub.items():
                if t1 & t2:
                    continue
                key = t1 | t2
                out[key] = out.get(key, 0.0) + sign * v1 * v2
    return out


# ---------------------------------------------------------------------------
# density profiles and calibration
# ---------------------------------------------------------------------------

@dataclass
class DensityProfile:
    grid: np.ndarray
    real_component: np.ndarray
    complex_component: np.ndarray = None     # over (grid, ygrid), or None
    ygrid: np.ndarray = None
    norm_constant: float = 1.0


def _simpson_weights(x):
    w = np.zeros_like(x)
    n = len(x) - 1
    if n % 2:
        raise ValueError("need an even number of panels")
    h = x[1] - x[0]
    w[0] = w[-1] = h / 3.0
    w[1:-1:2] = 4.0 * h / 3.0
    w[2:-1:2] = 2.0 * h / 3.0
    return w


def default_support(params, pad=1.25):
    half = pad * 2.2 * math.sqrt(2.0 * params.n + params.nu) * max(
        math.sqrt(params.a ** 2 / params.n), 1.0 / math.sqrt(params.n))
    return half


def calibrate_minus(kern: MinusKernels, npts=481):
    """Overall constant from the one-level sum rule (total mass 2n+nu)."""
    p = kern.sys.params
    half = default_support(p)
    x = np.linspace(-half, half, npts)
    w = _simpson_weights(x)
    raw = float(np.dot(w, kern.k2_diag(x)))
    return p.dim / raw


def calibrate_plus(kern: PlusKernels, npts=321, nypts=81):
    """Overall constant from total mass of real plus complex components."""
    p = kern.sys.params
    half = default_support(p)
    x = np.linspace(-half, half, npts)
    wx = _simpson_weights(x)
    mass_r = float(np.dot(wx, kern.density_right_delta(x)))
    mass_l = float(np.dot(wx, kern.density_left_delta(x)))
    ymax = 3.5 / math.sqrt(p.n)
    y = np.linspace(ymax / (4 * nypts), ymax, nypts)
    wy = np.full_like(y, y[1] - y[0])
    zz = x[:, None] + 1j * y[None, :]
    dens = kern.density_complex_half(zz)
    mass_c = 2.0 * 2.0 * float(wx @ dens @ wy)   # both half-planes, both sets
    raw = mass_r + mass_l + mass_c
    return p.dim / raw


def density_profile_minus(ctx, sys, n_flavors, masses, grid) -> DensityProfile:
    kern = MinusKernels(ctx, sys, n_flavors)
    grid = np.asarray(grid, dtype=float)
    if len(masses) == 0:
        c = calibrate_minus(kern)
        vals = c * kern.k2_diag(grid)
    else:
        c = calibrate_minus(kern)  # quenched-scale constant; recalibrated below
        raw = np.array([kern.correlation_raw([x], masses) for x in grid])
        half = default_support(sys.params)
        xs = np.linspace(-half, half, 481)
        ws = _simpson_weights(xs)
        tot = float(np.dot(ws, [kern.correlation_raw([x], masses) for x in xs]))
        c = sys.params.dim / tot
        vals = c * raw
    return DensityProfile(grid=grid, real_component=vals, norm_constant=c)


def density_profile_plus(ctx, sys, n_flavors, masses, grid, ygrid=None) -> DensityProfile:
    """Total one-level density of the non-Hermitian operator.

    The real component is the sum of the right- and left-point real-line
    densities; the complex component is the full plane density (both
    conjugate partners counted), sampled on (grid, ygrid).
    """
    kern = PlusKernels(ctx, sys, n_flavors)
    if len(masses):
        raise NotImplementedError("unquenched profiles go through correlation_raw")
    grid = np.asarray(grid, dtype=float)
    c = calibrate_plus(kern)
    real = c * (kern.density_right_delta(grid) + kern.density_left_delta(grid))
    cc = None
    if ygrid is not None:
        ygrid = np.asarray(ygrid, dtype=float)
        zz = grid[:, None] + 1j * ygrid[None, :]
        cc = 2.0 * c * kern.density_complex_half(zz)
    return DensityProfile(grid=grid, real_component=real,
                          complex_component=cc, ygrid=ygrid, norm_constant=c)


def chirality_density(kern: PlusKernels, x):
    """Signed chirality density over the real line (index-positive sign)."""
    return kern.density_left_delta(x) - kern.density_right_delta(x)
