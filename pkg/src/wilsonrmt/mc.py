"""Monte Carlo sampling of the matrix ensemble and spectral observables.

The eigensolvers are implemented here rather than delegated: a cyclic
Jacobi iteration for the Hermitian operator and a Hessenberg + shifted-QR
Schur decomposition (with back-substituted eigenvectors) for the
non-Hermitian one.  At the desk-scale dimensions involved (<= 60) both are
robust and keep the sampling path self-contained; external linear algebra
appears only in the test suite as an oracle.  The cores are plain loops so
numba can compile them when available (it is optional).

Random numbers come from the counter-based Philox generator, so parallel
streams are reproducible from (seed, stream id) and results are
deterministic for a fixed configuration.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .params import EnsembleParams
from .weights import PointKind, SpectralPoint

try:  # pragma: no cover - exercised implicitly
    from numba import njit as _njit

    def _jit(f):
        return _njit(cache=True)(f)
except Exception:  # pragma: no cover
    def _jit(f):
        return f


class EigenConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# matrix sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WilsonMatrix:
    a_block: np.ndarray   # n x n Hermitian
    b_block: np.ndarray   # (n+nu) x (n+nu) Hermitian
    w_block: np.ndarray   # n x (n+nu) complex

    @property
    def dw(self):
        top = np.hstack([self.a_block, self.w_block])
        bot = np.hstack([-self.w_block.conj().T, self.b_block])
        return np.vstack([top, bot])

    @property
    def d5(self):
        top = np.hstack([self.a_block, self.w_block])
        bot = np.hstack([self.w_block.conj().T, -self.b_block])
        return np.vstack([top, bot])


def gamma5(params: EnsembleParams):
    g = np.ones(params.dim)
    g[params.n:] = -1.0
    return g


def make_rng(seed, stream=0):
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def _hermitian_gaussian(rng, dim, mean_diag, var_diag, var_off):
    sd = math.sqrt(var_off / 2.0)
    g = rng.normal(0.0, sd, (dim, dim)) + 1j * rng.normal(0.0, sd, (dim, dim))
    u = np.triu(g, 1)
    m = u + u.conj().T
    np.fill_diagonal(m, rng.normal(mean_diag, math.sqrt(var_diag), dim))
    return m


def sample(params: EnsembleParams, rng) -> WilsonMatrix:
    """Draw one matrix; diagonal blocks are shifted Gaussians, <|W_ij|^2>=1/n."""
    n, nu, a = params.n, params.nu, params.a
    va = a * a / n
    A = _hermitian_gaussian(rng, n, a * a * params.mu_r / n, va, va)
    B = _hermitian_gaussian(rng, n + nu, a * a * params.mu_l / n, va, va)
    sw = math.sqrt(0.5 / n)
    W = (rng.normal(0.0, sw, (n, n + nu)) + 1j * rng.normal(0.0, sw, (n, n + nu)))
    return WilsonMatrix(a_block=A, b_block=B, w_block=W)


# ---------------------------------------------------------------------------
# eigensolver cores (loop-style so numba can take them)
# ---------------------------------------------------------------------------

@_jit
def _jacobi_core(a, tol, max_sweeps):
    nd = a.shape[0]
    scale = 1.0
    for i in range(nd):
        for j in range(nd):
            v = abs(a[i, j])
            if v > scale:
                scale = v
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(nd - 1):
            for j in range(i + 1, nd):
                off += abs(a[i, j]) ** 2
        if math.sqrt(off) <= tol * scale:
            return 0
        for p in range(nd - 1):
            for q in range(p + 1, nd):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (a[p, p].real - a[q, q].real) / (2.0 * abs(apq))
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                phc = (apq / abs(apq)).conjugate()
                for i in range(nd):
                    vp = a[i, p]
                    vq = a[i, q]
                    a[i, p] = c * vp + s * phc * vq
                    a[i, q] = -s * vp + c * phc * vq
                for i in range(nd):
                    vp = a[p, i]
                    vq = a[q, i]
                    a[p, i] = c * vp + s * phc.conjugate() * vq
                    a[q, i] = -s * vp + c * phc.conjugate() * vq
    return 1


@_jit
def _hessenberg_core(h, q):
    nd = h.shape[0]
    v = np.zeros(nd, dtype=np.complex128)
    for k in range(nd - 2):
        nx2 = 0.0
        for i in range(k + 1, nd):
            nx2 += abs(h[i, k]) ** 2
        nx = math.sqrt(nx2)
        if nx <= 1e-300:
            continue
        tail = 0.0
        for i in range(k + 2, nd):
            tail += abs(h[i, k]) ** 2
        if tail == 0.0:
            continue
        x0 = h[k + 1, k]
        alpha = -nx * (x0 / abs(x0)) if abs(x0) > 0 else complex(-nx)
        nv2 = 0.0
        for i in range(k + 1, nd):
            v[i] = h[i, k]
            if i == k + 1:
                v[i] -= alpha
            nv2 += abs(v[i]) ** 2
        nv = math.sqrt(nv2)
        if nv <= 1e-300:
            continue
        for i in range(k + 1, nd):
            v[i] /= nv
        # H <- P H, P = 1 - 2 v v^H  (rows k+1.., cols k..)
        for j in range(k, nd):
            acc = 0.0 + 0.0j
            for i in range(k + 1, nd):
                acc += v[i].conjugate() * h[i, j]
            acc *= 2.0
            for i in range(k + 1, nd):
                h[i, j] -= acc * v[i]
        # H <- H P (all rows, cols k+1..)
        for i in range(nd):
            acc = 0.0 + 0.0j
            for j in range(k + 1, nd):
                acc += h[i, j] * v[j]
            acc *= 2.0
            for j in range(k + 1, nd):
                h[i, j] -= acc * v[j].conjugate()
        for i in range(nd):
            acc = 0.0 + 0.0j
            for j in range(k + 1, nd):
                acc += q[i, j] * v[j]
            acc *= 2.0
            for j in range(k + 1, nd):
                q[i, j] -= acc * v[j].conjugate()
        for i in range(k + 2, nd):
            h[i, k] = 0.0


@_jit
def _qr_schur_core(h, q, tol, budget):
    nd = h.shape[0]
    hi = nd - 1
    iters = 0
    while hi > 0:
        deflated = False
        for k in range(hi, 0, -1):
            if abs(h[k, k - 1]) <= tol * (abs(h[k - 1, k - 1]) + abs(h[k, k])):
                h[k, k - 1] = 0.0
                if k == hi:
                    hi -= 1
                    deflated = True
                break
        if deflated:
            continue
        lo = hi
        while lo > 0 and h[lo, lo - 1] != 0.0:
            lo -= 1
        iters += 1
        if iters > budget:
            return 1
        aa = h[hi - 1, hi - 1]
        bb = h[hi - 1, hi]
        cc = h[hi, hi - 1]
        dd = h[hi, hi]
        half = 0.5 * (aa - dd)
        disc = cmath.sqrt(half * half + bb * cc)
        mu1 = dd + half + disc
        mu2 = dd + half - disc
        mu = mu1 if abs(mu1 - dd) < abs(mu2 - dd) else mu2
        if iters % 17 == 0:
            mu = dd + abs(h[hi, hi - 1])
        x = h[lo, lo] - mu
        z = h[lo + 1, lo]
        for k in range(lo, hi):
            # givens zeroing z against x
            if abs(z) == 0.0:
                c = 1.0
                s = 0.0 + 0.0j
            elif abs(x) == 0.0:
                c = 0.0
                s = 1.0 + 0.0j
            else:
                r = math.hypot(abs(x), abs(z))
                c = abs(x) / r
                s = (x / abs(x)) * z.conjugate() / r
            sc = s.conjugate()
            lo_col = max(lo, k - 1)
            for j in range(lo_col, nd):
                t1 = h[k, j]
                t2 = h[k + 1, j]
                h[k, j] = c * t1 + s * t2
                h[k + 1, j] = -sc * t1 + c * t2
            hi_row = min(hi, k + 2)
            for i in range(hi_row + 1):
                t1 = h[i, k]
                t2 = h[i, k + 1]
                h[i, k] = c * t1 + sc * t2
                h[i, k + 1] = -s * t1 + c * t2
            for i in range(nd):
                t1 = q[i, k]
                t2 = q[i, k + 1]
                q[i, k] = c * t1 + sc * t2
                q[i, k + 1] = -s * t1 + c * t2
            if k + 2 <= hi:
                x = h[k + 1, k]
                z = h[k + 2, k]
    return 0


def hermitian_eigenvalues(h, tol=1e-14, max_sweeps=60):
    """Eigenvalues of a complex Hermitian matrix by cyclic Jacobi rotations."""
    a = np.array(h, dtype=np.complex128)
    if a.shape[0] == 1:
        return np.array([a[0, 0].real])
    if _jacobi_core(a, tol, max_sweeps) != 0:
        raise EigenConvergenceError("Jacobi sweeps did not converge")
    return np.sort(np.diag(a).real)


def complex_schur(m, tol=1e-13, max_iter_per_eig=60):
    """Schur form T = Q^H M Q (T upper triangular) for a complex matrix."""
    h = np.array(m, dtype=np.complex128)
    nd = h.shape[0]
    q = np.eye(nd, dtype=np.complex128)
    if nd == 1:
        return h, q
    _hessenberg_core(h, q)
    if _qr_schur_core(h, q, tol, max_iter_per_eig * nd) != 0:
        raise EigenConvergenceError("QR iteration budget exhausted")
    return h, q


def eig_with_vectors(m):
    """Eigenvalues and (unit) right eigenvectors via the Schur route."""
    t, q = complex_schur(m)
    nd = t.shape[0]
    vecs = np.zeros((nd, nd), dtype=complex)
    tscale = max(1.0, float(np.max(np.abs(np.diag(t)))))
    for k in range(nd):
        y = np.zeros(nd, dtype=complex)
        y[k] = 1.0
        lam = t[k, k]
        for i in range(k - 1, -1, -1):
            rhs = t[i, i + 1:k + 1] @ y[i + 1:k + 1]
            den = t[i, i] - lam
            if abs(den) < 1e-14 * tscale:
                den = 1e-14 * tscale
            y[i] = -rhs / den
        v = q @ y
        vecs[:, k] = v / np.linalg.norm(v)
    return np.diag(t).copy(), vecs


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumSample:
    d5_eigs: np.ndarray           # 2n+nu sorted reals
    dw_eigs: list                 # SpectralPoint, conjugate pairs adjacent
    chiralities: np.ndarray       # per real eigenvalue of the dw spectrum
    l_sector: int                 # number of conjugate pairs


def spectrum(m: WilsonMatrix, params: EnsembleParams, tau_real=1e-8) -> SpectrumSample:
    """Spectra of both operators plus chiralities of the real modes.

    Eigenvalues with |Im| below tau_real times the spectral scale are
    classified as real modes; the rest are matched into conjugate pairs.
    The sector structure (real count minus nu even and non-negative) is
    enforced by reclassifying the smallest-|Im| candidates when round-off
    puts one on the wrong side.
    """
    d5 = hermitian_eigenvalues(m.d5)
    eigs, vecs = eig_with_vectors(m.dw)
    scale = max(1.0, float(np.max(np.abs(eigs))))
    thresh = tau_real * scale

    real_idx = [i for i in range(len(eigs)) if abs(eigs[i].imag) <= thresh]
    cplx_idx = [i for i in range(len(eigs)) if abs(eigs[i].imag) > thresh]
    while (len(real_idx) - params.nu) % 2 != 0 or len(real_idx) < params.nu:
        if not cplx_idx:
            raise EigenConvergenceError("cannot satisfy sector structure")
        move = min(cplx_idx, key=lambda i: abs(eigs[i].imag))
        cplx_idx.remove(move)
        real_idx.append(move)

    g5 = gamma5(params)
    points = []
    chis = []
    for i in sorted(real_idx, key=lambda i: eigs[i].real):
        points.append(SpectralPoint(float(eigs[i].real), 0.0, PointKind.REAL_MODE))
        v = vecs[:, i]
        chis.append(float(np.real(np.sum(g5 * np.abs(v) ** 2))))
    remaining = sorted(cplx_idx, key=lambda i: (eigs[i].real, eigs[i].imag))
    used = set()
    for i in remaining:
        if i in used:
            continue
        best, bestd = None, None
        for j in remaining:
            if j is i or j in used:
                continue
            d = abs(eigs[i] - eigs[j].conjugate())
            if bestd is None or d < bestd:
                best, bestd = j, d
        used.add(i)
        used.add(best)
        zi = eigs[i] if eigs[i].imag > 0 else eigs[best]
        points.append(SpectralPoint(float(zi.real), float(abs(zi.imag)),
                                    PointKind.COMPLEX_PAIR_MEMBER))
        points.append(SpectralPoint(float(zi.real), float(-abs(zi.imag)),
                                    PointKind.COMPLEX_PAIR_MEMBER))
    return SpectrumSample(
        d5_eigs=np.sort(d5),
        dw_eigs=points,
        chiralities=np.array(chis),
        l_sector=len(cplx_idx) // 2,
    )


# ---------------------------------------------------------------------------
# accumulation
# ---------------------------------------------------------------------------

@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray = None
    sumw2: np.ndarray = None
    n_samples: int = 0

    def __post_init__(self):
        nb = len(self.edges) - 1
        if self.counts is None:
            self.counts = np.zeros(nb)
        if self.sumw2 is None:
            self.sumw2 = np.zeros(nb)

    def add(self, values, weights=None):
        values = np.asarray(values, dtype=float)
        if weights is None:
            weights = np.ones_like(values)
        weights = np.asarray(weights, dtype=float)
        c, _ = np.histogram(values, bins=self.edges, weights=weights)
        c2, _ = np.histogram(values, bins=self.edges, weights=weights ** 2)
        self.counts += c
        self.sumw2 += c2

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def density(self):
        """Per-sample density estimate (events per unit length per sample)."""
        return self.counts / (self.n_samples * self.widths)

    def stderr(self):
        return np.sqrt(np.maximum(self.sumw2, 1.0)) / (self.n_samples * self.widths)

    def total(self):
        return float(np.sum(self.counts)) / self.n_samples


@dataclass
class Hist2D:
    xedges: np.ndarray
    yedges: np.ndarray
    counts: np.ndarray = None
    n_samples: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((len(self.xedges) - 1, len(self.yedges) - 1))

    def add(self, x, y):
        c, _, _ = np.histogram2d(np.asarray(x, dtype=float),
                                 np.asarray(y, dtype=float),
                                 bins=(self.xedges, self.yedges))
        self.counts += c

    def density(self):
        area = np.outer(np.diff(self.xedges), np.diff(self.yedges))
        return self.counts / (self.n_samples * area)

    def stderr(self):
        area = np.outer(np.diff(self.xedges), np.diff(self.yedges))
        return np.sqrt(np.maximum(self.counts, 1.0)) / (self.n_samples * area)


@dataclass
class McResult:
    params: EnsembleParams
    n_samples: int
    d5: Histogram
    dw_real: Histogram
    dw_imag_near_axis: Histogram
    chi: Histogram
    dw_complex: Hist2D
    sector_counts: np.ndarray       # count of samples per l = 0..n
    real_mass: float = 0.0          # mean number of real modes per sample
    chi_mass: float = 0.0           # mean of the signed chirality sum

    def sector_fractions(self):
        return self.sector_counts / self.n_samples


def accumulate(params: EnsembleParams, n_samples, seed=0, bins=60,
               x_range=None, y_max=None, n_streams=1, tau_real=1e-8) -> McResult:
    """Histogram the spectral observables over n_samples draws.

    The chirality histogram counts each real mode with weight
    -sign(<psi|g5|psi>), oriented so that its integral equals the index.
    Streams are merged in stream-id order, so the result is deterministic
    for fixed (seed, n_streams).
    """
    n, nu, a = params.n, params.nu, params.a
    if x_range is None:
        half = 2.2 * math.sqrt(2.0 * n + nu) * max(math.sqrt(a * a / n), 1.0 / math.sqrt(n))
        x_range = (-half, half)
    if y_max is None:
        y_max = 2.5 / math.sqrt(n)
    xe = np.linspace(x_range[0], x_range[1], bins + 1)
    ye = np.linspace(-y_max, y_max, bins + 1)
    res = McResult(
        params=params, n_samples=n_samples,
        d5=Histogram(xe.copy()),
        dw_real=Histogram(xe.copy()),
        dw_imag_near_axis=Histogram(np.linspace(-16.0, 0.0, 65)),
        chi=Histogram(xe.copy()),
        dw_complex=Hist2D(xe.copy(), ye),
        sector_counts=np.zeros(n + 1),
    )
    per = [n_samples // n_streams] * n_streams
    per[-1] += n_samples - sum(per)
    real_mass = 0.0
    chi_mass = 0.0
    for stream, count in enumerate(per):
        rng = make_rng(seed, stream)
        d5_all, xr_all, wchi_all, zx_all, zy_all, logy_all = [], [], [], [], [], []
        for _ in range(count):
            sp = spectrum(sample(params, rng), params, tau_real=tau_real)
            d5_all.append(sp.d5_eigs)
            for ppt in sp.dw_eigs:
                if ppt.kind is PointKind.REAL_MODE:
                    xr_all.append(ppt.x)
                else:
                    zx_all.append(ppt.x)
                    zy_all.append(ppt.y)
                    logy_all.append(math.log10(max(abs(ppt.y), 1e-16)))
            wchi_all.extend((-np.sign(sp.chiralities)).tolist())
            res.sector_counts[sp.l_sector] += 1
            real_mass += len(sp.chiralities)
            chi_mass += float(np.sum(-np.sign(sp.chiralities)))
        res.d5.add(np.concatenate(d5_all))
        res.dw_real.add(xr_all)
        res.chi.add(xr_all, weights=wchi_all)
        if zx_all:
            res.dw_complex.add(zx_all, zy_all)
            res.dw_imag_near_axis.add(logy_all)
    for hist in (res.d5, res.dw_real, res.chi, res.dw_imag_near_axis):
        hist.n_samples = n_samples
    res.dw_complex.n_samples = n_samples
    res.real_mass = real_mass / n_samples
    res.chi_mass = chi_mass / n_samples
    return res
