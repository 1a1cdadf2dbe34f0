"""Orthogonal and skew-orthogonal polynomial families.

Three independent construction routes are provided and must agree:

* the closed double-Hermite expansion for the even family, with the odd
  family generated by the first-order recursion;
* the Pfaffian construction from product-moment matrices (oracle scale);
* a two-phase integral representation with spectral-accuracy trapezoid.

All polynomials are monic.  Probabilists' Hermite polynomials are the
natural building blocks here: with them the shifted-Gaussian orthogonal
family is monic without extra rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import Branch, EnsembleParams, MinusBranchInvalidError
from .special import Poly, compose_affine, hermite_e_poly, poly_fsum


class ConvergenceError(RuntimeError):
    pass


class SingularNormalizationError(RuntimeError):
    """The normalization Pfaffian of the moment construction vanished."""


@dataclass(frozen=True)
class OrthoPoly:
    l: int
    poly: Poly
    h: float


@dataclass(frozen=True)
class DTildeOperator:
    """First-order operator d/dz - (n/a^2) z + (mu_r +- mu_l)/2."""

    params: EnsembleParams
    branch: Branch

    @property
    def shift(self):
        p = self.params
        return 0.5 * (p.mu_r + self.branch.sign * p.mu_l)

    def apply(self, f: Poly) -> Poly:
        p = self.params
        return f.deriv() - f.shift_up() * (p.n / p.a ** 2) + f * self.shift


def hermite_shifted(l, alpha, beta, scale):
    """scale^l * He_l(alpha z + beta) as a Poly."""
    return compose_affine(hermite_e_poly(l), alpha, beta) * (scale ** l)


def build_ortho(params: EnsembleParams, branch: Branch, lmax=None):
    """Monic orthogonal family p_0 .. p_lmax with norms h_l."""
    n, a = params.n, params.a
    if lmax is None:
        lmax = params.nu + 2 * params.n + 2
    alpha = math.sqrt(n / a ** 2)
    beta = -branch.sign * math.sqrt(a ** 2 / n) * params.mu_l
    scale = math.sqrt(a ** 2 / n)
    hfac = math.exp(a ** 2 * params.mu_l ** 2 / (2.0 * n))
    out = []
    for l in range(lmax + 1):
        poly = hermite_shifted(l, alpha, beta, scale)
        h = math.sqrt(2.0 * math.pi) * (a * a / n) ** (l + 0.5) * math.factorial(l) * hfac
        out.append(OrthoPoly(l=l, poly=poly, h=h))
    return out


def ortho_moment_route(params: EnsembleParams, branch: Branch, l):
    """Monic p_l from the moment-determinant construction (oracle, l <= 6)."""
    if l > 8:
        raise ValueError("moment-determinant route is an oracle for small l only")
    n, a = params.n, params.a
    mean = branch.sign * a * a * params.mu_l / n
    var = a * a / n
    m0 = math.sqrt(2.0 * math.pi * var) * math.exp(a * a * params.mu_l ** 2 / (2.0 * n))
    mom = [m0, mean * m0]
    for k in range(1, 2 * l + 2):
        mom.append(mean * mom[k] + k * var * mom[k - 1])
    if l == 0:
        return Poly([1.0])
    dmat = np.array([[mom[i + j] for j in range(l)] for i in range(l)])
    den = np.linalg.det(dmat)
    coeffs = np.zeros(l + 1)
    for j in range(l + 1):
        cols = [k for k in range(l + 1) if k != j]
        sub = np.array([[mom[i + k] for k in cols] for i in range(l)])
        coeffs[j] = (-1.0) ** (l + j) * np.linalg.det(sub) / den
    return Poly(coeffs)


@dataclass(frozen=True)
class SkewSystem:
    """The full polynomial family of one ensemble and sign branch."""

    params: EnsembleParams
    branch: Branch
    ortho: list            # OrthoPoly, degrees 0 .. lmax_p
    q_even: list           # Poly, q_{nu+2l} for l = 0 .. n_pairs
    q_odd: list            # Poly, q_{nu+2l+1} for l = 0 .. n_pairs
    o: np.ndarray          # normalization o_l (nan on invalid minus branch)
    eps_tilde: np.ndarray
    _eps_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_pairs(self):
        return len(self.q_even) - 1

    def p(self, l) -> Poly:
        return self.ortho[l].poly

    def h(self, l) -> float:
        return self.ortho[l].h

    def q(self, k) -> Poly:
        """Skew polynomial by absolute degree nu + l."""
        off = k - self.params.nu
        if off < 0:
            raise IndexError("skew family starts at degree nu")
        return self.q_even[off // 2] if off % 2 == 0 else self.q_odd[off // 2]

    def o_l(self, l) -> float:
        v = self.o[l]
        if math.isnan(v):
            raise MinusBranchInvalidError("o_l undefined on the minus branch at a >= 1")
        return float(v)


def o_norm(params: EnsembleParams, branch: Branch, l):
    """Closed-form skew normalization o_l, consistent with the products.

    Checked against two independent routes (direct two-dimensional
    quadrature of the antisymmetric product, and the Pfaffian ratio of
    product-moment matrices): the source-term exponent carries
    a^2/(4n(1+-a^2)) on the squared source difference, and the minus
    branch picks up a factor (-1)^nu because its two-point weight couples
    x2 ~ -x1, flipping consecutive-degree products for odd starting degree.
    """
    n, a = params.n, params.a
    s = branch.sign
    opa = 1.0 + s * a * a
    if opa <= 0:
        return math.nan
    mu2 = params.mu_r ** 2 + params.mu_l ** 2
    mdiff = params.mu_r - s * params.mu_l
    expo = (a * a / (2.0 * n)) * mu2 - (a * a / (4.0 * n * opa)) * mdiff ** 2
    val = (-4.0 * math.factorial(l) * math.factorial(l + params.nu)
           * math.sqrt(math.pi / (n * opa)) * (opa / n) ** (2 * l + params.nu + 1)
           * a * math.exp(expo))
    if branch is Branch.MINUS and params.nu % 2 == 1:
        val = -val
    return val


def eps_tilde(params: EnsembleParams, branch: Branch, l):
    return (2 * l + 1) * 0.5 * (params.mu_r - branch.sign * params.mu_l)


def build_skew_closed(params: EnsembleParams, branch: Branch, n_pairs=None) -> SkewSystem:
    """Even family from the double-Hermite sum; odd family from the recursion."""
    n, nu, a = params.n, params.nu, params.a
    s = branch.sign
    if n_pairs is None:
        n_pairs = n + 2
    lmax_p = max(nu + 2 * n + 2, nu + 2 * n_pairs + 2)
    ortho = build_ortho(params, branch, lmax_p)
    dt = DTildeOperator(params, branch)

    alphaL, betaL = s * math.sqrt(n / a ** 2), -math.sqrt(a ** 2 / n) * params.mu_l
    alphaR, betaR = math.sqrt(n / a ** 2), -math.sqrt(a ** 2 / n) * params.mu_r

    q_even, q_odd, o, etl = [], [], [], []
    for l in range(n_pairs + 1):
        pref = (s ** (l + nu)) * (n * a * a) ** (-0.5 * l) * (a * a / n) ** (0.5 * (l + nu))
        terms, wts = [], []
        for j in range(l + 1):
            cj = math.comb(l, j) * math.perm(l + params.nu, l - j)
            hl = compose_affine(hermite_e_poly(nu + j), alphaL, betaL)
            hr = compose_affine(hermite_e_poly(j), alphaR, betaR)
            terms.append(hl * hr)
            wts.append(cj * a ** (2 * j) * pref)
        qe = poly_fsum(terms, wts)
        et = eps_tilde(params, branch, l)
        qo = (qe * et - dt.apply(qe)) * (a * a / n)
        q_even.append(qe)
        q_odd.append(qo)
        o.append(o_norm(params, branch, l))
        etl.append(et)
    return SkewSystem(params=params, branch=branch, ortho=ortho,
                      q_even=q_even, q_odd=q_odd,
                      o=np.array(o), eps_tilde=np.array(etl))


def build_skew_pfaffian(ctx, l_max):
    """Even and odd families from the bordered-Pfaffian moment construction.

    Oracle-scale route: every product moment is evaluated by quadrature.
    The odd polynomials from this route are fixed only up to an admixture
    of the even one of the same pair; callers compare modulo that span.
    """
    from .skewlinalg import pfaffian, pfaffian_cofactors_lastcol

    nu = ctx.params.nu
    ortho = build_ortho(ctx.params, ctx.branch, nu + 2 * l_max + 2)
    pvec = [op.poly for op in ortho[nu:nu + 2 * l_max + 2]]
    m = len(pvec)
    S = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            S[i, j] = ctx.antisym_product(pvec[i], pvec[j])
            S[j, i] = -S[i, j]

    q_even, q_odd = [], []
    for l in range(l_max + 1):
        if l == 0:
            q_even.append(pvec[0])
            q_odd.append(pvec[1])
            continue
        denom = pfaffian(S[:2 * l, :2 * l])
        if abs(denom) < 1e-300:
            raise SingularNormalizationError(f"normalization Pfaffian ~ 0 at l={l}")
        cof = pfaffian_cofactors_lastcol(S[:2 * l + 1, :2 * l + 1])
        qe = poly_fsum([pvec[i] for i in range(2 * l + 1)], list(cof / denom))
        idx = list(range(2 * l)) + [2 * l + 1]
        cof_o = pfaffian_cofactors_lastcol(S[np.ix_(idx, idx)])
        qo = poly_fsum([pvec[i] for i in idx], list(cof_o / denom))
        q_even.append(qe)
        q_odd.append(qo)
    return q_even, q_odd


def phase_integral_q(params: EnsembleParams, branch: Branch, l, z,
                     tol=1e-9, n_start=64, n_cap=4096):
    """Even polynomial q_{nu+2l}(z) from the two-phase integral.

    Periodic trapezoid, node count doubled until converged; values are
    complex but carry vanishing imaginary part for real z.
    """
    n, nu, a = params.n, params.nu, params.a
    s = branch.sign
    z = complex(z)
    pref = (s ** (l + nu)) * math.factorial(l) * math.factorial(l + nu)
    cr = a * a * params.mu_r / n - z
    cl = a * a * params.mu_l / n - s * z

    def value(npts):
        phi = 2.0 * math.pi * np.arange(npts) / npts
        ur = np.exp(1j * phi)[:, None]
        ul = np.exp(1j * phi)[None, :]
        integ = np.exp(
            -(a * a) / (2.0 * n) * (ur ** 2 + ul ** 2)
            + (1.0 / n) * ur * ul
            - cr * ur - cl * ul
        ) * ur ** (-l) * ul ** (-(l + nu))
        return pref * integ.mean()

    npts = n_start
    prev = value(npts)
    while npts < n_cap:
        npts *= 2
        cur = value(npts)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError("phase integral did not converge")


def rodrigues_check(params: EnsembleParams, branch: Branch, l, npts=20):
    """Max relative deviation between the derivative-formula route and the
    closed-form even polynomial, on a sample grid.

    The auxiliary-variable derivative is expanded symbolically: the
    Gaussian factor through its derivative recurrence, the Hermite factor
    through the degree-lowering rule.  No numerical differentiation.
    """
    n, nu, a = params.n, params.nu, params.a
    s = branch.sign
    sys = build_skew_closed(params, branch, n_pairs=max(l, 1))
    q_ref = sys.q_even[l]

    # d_k(z) = (d/du)^k exp[-(a^2/2n)u^2 + (z - a^2 mu_r/n) u] at u = 0
    gamma = Poly([-a * a * params.mu_r / n, 1.0])
    dk = [Poly([1.0]), gamma]
    for k in range(1, l):
        dk.append(gamma * dk[k] - dk[k - 1] * (a * a / n * k))

    alphaL, betaL = s * math.sqrt(n / a ** 2), -math.sqrt(a ** 2 / n) * params.mu_l
    c = 1.0 / math.sqrt(n * a * a)
    m = l + nu
    pref = (s ** (l + nu)) * (a * a / n) ** (0.5 * (l + nu))
    total = Poly([0.0])
    for j in range(l + 1):
        he = compose_affine(hermite_e_poly(m - j), alphaL, betaL)
        w = math.comb(l, j) * (c ** j) * math.perm(m, j)
        total = total + (dk[l - j] * he) * w
    q_rod = total * pref

    zs = np.linspace(-2.0, 2.0, npts)
    ref = q_ref(zs)
    scale = max(1.0, float(np.max(np.abs(ref))))
    return float(np.max(np.abs(q_rod(zs) - ref)) / scale)


def eps_coeff(ctx, sys: SkewSystem, l):
    """Recursion coefficient eps_l, from quadrature scalar products."""
    if l in sys._eps_cache:
        return sys._eps_cache[l]
    p = sys.params
    nu, n, a = p.nu, p.n, p.a
    mdiff = p.mu_r - sys.branch.sign * p.mu_l
    t1 = ctx.scalar_product(sys.q(nu + 2 * l + 3), sys.p(nu + 2 * l + 1)) / sys.h(nu + 2 * l + 1)
    if nu + 2 * l - 1 >= nu:
        t2 = ctx.scalar_product(sys.q(nu + 2 * l + 1), sys.p(nu + 2 * l - 1)) / sys.h(nu + 2 * l - 1)
    elif nu + 2 * l - 1 >= 0:
        # q_{nu+1} is orthogonal to every p_j with j < nu
        t2 = 0.0
    else:
        t2 = 0.0
    val = n / a ** 2 * (t1 - t2) - (l + 1) ** 2 * mdiff ** 2 * a ** 2 / n
    sys._eps_cache[l] = val
    return val


def verify_odd_recursion(ctx, sys: SkewSystem, l):
    """Coefficient-wise residual of the odd-polynomial recursion at pair l."""
    p = sys.params
    n, a = p.n, p.a
    dt = DTildeOperator(p, sys.branch)
    lhs = dt.apply(sys.q_odd[l])
    rhs = (sys.q_even[l + 1] * (-n / a ** 2)
           + sys.q_odd[l] * (-sys.eps_tilde[l])
           + sys.q_even[l] * eps_coeff(ctx, sys, l))
    if l >= 1:
        rhs = rhs + sys.q_even[l - 1] * (-n / a ** 2 * sys.o_l(l) / sys.o_l(l - 1))
    diff = lhs - rhs
    scale = max(np.max(np.abs(lhs.coeffs)), np.max(np.abs(rhs.coeffs)), 1.0)
    return float(np.max(np.abs(diff.coeffs)) / scale)
