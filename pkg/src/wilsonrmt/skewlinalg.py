"""Pfaffians, skew-symmetric utilities and de Bruijn-style integration checks.

The Pfaffian is computed by Parlett-Reid tridiagonalization with partial
pivoting (O(n^3), real or complex); the combinatorial expansion is kept as
an oracle for small dimensions.  The de Bruijn checks replace integrals by
finite sums over a discrete measure, turning the two integration theorems
into exactly verifiable matrix identities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


class SkewSymmetryError(ValueError):
    pass


@dataclass(frozen=True)
class SkewMatrix:
    """Dense skew-symmetric matrix; only the upper triangle is trusted."""

    data: np.ndarray

    @staticmethod
    def from_dense(a, tol=1e-12):
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise SkewSymmetryError("matrix must be square")
        scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
        if np.max(np.abs(a + a.T)) > tol * scale:
            raise SkewSymmetryError("matrix is not skew-symmetric")
        u = np.triu(a, 1)
        return SkewMatrix(u - u.T)

    @property
    def dim(self):
        return self.data.shape[0]


def pfaffian(a, overwrite=False):
    """Pfaffian by Parlett-Reid elimination with partial pivoting.

    Accepts a dense skew-symmetric array or a SkewMatrix; complex entries
    are supported.  Odd dimension raises; Pf of the empty matrix is 1.
    """
    if isinstance(a, SkewMatrix):
        m = a.data.copy()
    else:
        m = SkewMatrix.from_dense(a).data.copy()
    n = m.shape[0]
    if n % 2 == 1:
        raise SkewSymmetryError("Pfaffian needs even dimension")
    if n == 0:
        return 1.0
    pf = 1.0 + 0.0j if np.iscomplexobj(m) else 1.0
    for k in range(0, n - 1, 2):
        col = np.abs(m[k + 1:, k])
        kp = k + 1 + int(np.argmax(col))
        if m[kp, k] == 0:
            return 0.0 * pf
        if kp != k + 1:
            m[[k + 1, kp], :] = m[[kp, k + 1], :]
            m[:, [k + 1, kp]] = m[:, [kp, k + 1]]
            pf = -pf
        pf = pf * m[k, k + 1]
        if k + 2 < n:
            tau = m[k, k + 2:] / m[k, k + 1]
            w = m[k + 2:, k + 1]
            m[k + 2:, k + 2:] += np.outer(tau, w) - np.outer(w, tau)
    return pf


def pfaffian_naive(a):
    """Recursive cofactor expansion; exponential, for small oracles only."""
    if isinstance(a, SkewMatrix):
        a = a.data
    a = np.asarray(a)
    n = a.shape[0]
    if n % 2 == 1:
        raise SkewSymmetryError("Pfaffian needs even dimension")
    if n == 0:
        return 1.0
    if n == 2:
        return a[0, 1]
    total = 0.0
    for j in range(1, n):
        keep = [i for i in range(1, n) if i != j]
        minor = a[np.ix_(keep, keep)]
        total += (-1.0) ** (j + 1) * a[0, j] * pfaffian_naive(minor)
    return total


def pfaffian_cofactors_lastcol(s):
    """Coefficients c_i with Pf([[S, v], [-v^T, 0]]) = sum_i c_i v_i.

    S must be skew-symmetric of odd dimension m; c_i = (-1)^i Pf(S with row
    and column i removed).
    """
    s = np.asarray(s)
    m = s.shape[0]
    out = np.empty(m, dtype=s.dtype)
    for i in range(m):
        keep = [j for j in range(m) if j != i]
        out[i] = (-1.0) ** i * pfaffian(s[np.ix_(keep, keep)])
    return out


def pfaffian_schur(a, b, c):
    """Both sides of Pf[[A, B], [-B^T, C]] = Pf(A) Pf(C + B^T A^{-1} B).

    Returns (left, right); the right factorization is the primary value.
    A must be invertible skew, C skew.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    c = np.asarray(c)
    top = np.hstack([a, b])
    bot = np.hstack([-b.T, c])
    left = pfaffian(np.vstack([top, bot]))
    try:
        ainv_b = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as err:
        raise SkewSymmetryError("singular leading block") from err
    schur = c + b.T @ ainv_b
    schur = 0.5 * (schur - schur.T)  # remove symmetric round-off
    right = pfaffian(a) * pfaffian(schur)
    return left, right


# ---------------------------------------------------------------------------
# de Bruijn-like theorems on discrete measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite support with masses; test functions are tabulated columns."""

    masses: np.ndarray

    @property
    def npoints(self):
        return len(self.masses)


def _det(m):
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 1.0
    return float(np.linalg.det(m))


def debruijn_pfaffian_check(dm, A, B, C, D, E, N1):
    """Residual of the determinant x Pfaffian integration identity.

    Tables: A is (N2, m) with rows the functions entering the first N1
    determinant rows; B is the constant (N2-N1, N2) block; C is an
    antisymmetric m x m kernel table; D is (2N3-N1, m); E is antisymmetric
    constant (2N3-N1, 2N3-N1).  Both sides are evaluated exactly on the
    discrete measure; the scaled absolute difference is returned.
    """
    w = np.asarray(dm.masses, dtype=float)
    m = dm.npoints
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float)
    E = np.asarray(E, dtype=float)
    N2 = A.shape[0]
    K = D.shape[0]  # 2*N3 - N1

    # brute force over all point assignments
    lhs = 0.0
    for tup in itertools.product(range(m), repeat=N1):
        det_rows = np.vstack([A[:, list(tup)].T, B])
        pf_top = np.hstack([C[np.ix_(tup, tup)], D[:, list(tup)].T])
        pf_bot = np.hstack([-D[:, list(tup)], E])
        pf_mat = np.vstack([pf_top, pf_bot])
        mass = float(np.prod(w[list(tup)]))
        lhs += mass * _det(det_rows) * pfaffian(pf_mat)

    # Pfaffian formula
    Aw = A * w[None, :]
    X = Aw @ C @ Aw.T
    Y = Aw @ D.T
    top = np.hstack([X, Y, B.T])
    mid = np.hstack([-Y.T, E, np.zeros((K, N2 - N1))])
    bot = np.hstack([-B, np.zeros((N2 - N1, K)), np.zeros((N2 - N1, N2 - N1))])
    big = np.vstack([top, mid, bot])
    big = 0.5 * (big - big.T)
    sign = (-1.0) ** (((N2 - N1) * (N1 + N2 - 1) // 2) % 2)
    rhs = sign * math.factorial(N1) * pfaffian(big)

    scale = max(1.0, abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale


def debruijn_determinant_check(dm, A, B, C, D, E, F, H, NR, NL):
    """Residual of the double-determinant integration identity.

    Tables: A, B are (N1, m); C is (N1-NR-NL, N1); D is the m x m two-point
    kernel; E is (N2-NL, m); F is (N2-NR, m); H is (N2-NR, N2-NL).
    """
    w = np.asarray(dm.masses, dtype=float)
    m = dm.npoints
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float)
    E = np.asarray(E, dtype=float)
    F = np.asarray(F, dtype=float)
    H = np.asarray(H, dtype=float)
    N1 = A.shape[0]
    N2L = E.shape[0]  # N2 - NL
    N2R = F.shape[0]  # N2 - NR

    lhs = 0.0
    for tr in itertools.product(range(m), repeat=NR):
        for tl in itertools.product(range(m), repeat=NL):
            det1 = np.vstack([A[:, list(tr)].T, B[:, list(tl)].T, C])
            d2 = np.zeros((NR + N2R, NL + N2L))
            d2[:NR, :NL] = D[np.ix_(tr, tl)]
            d2[:NR, NL:] = E[:, list(tr)].T
            d2[NR:, :NL] = F[:, list(tl)]
            d2[NR:, NL:] = H
            mass = float(np.prod(w[list(tr)]) * np.prod(w[list(tl)]))
            lhs += mass * _det(det1) * _det(d2)

    Aw = A * w[None, :]
    Bw = B * w[None, :]
    O = Aw @ D @ Bw.T
    O = O - O.T
    Q = F @ Bw.T                      # (N2-NR, N1)
    P = Aw @ E.T                      # (N1, N2-NL)
    NC = C.shape[0]                   # N1 - NR - NL
    z = np.zeros
    row1 = np.hstack([O, Q.T, P, C.T])
    row2 = np.hstack([-Q, z((N2R, N2R)), -H, z((N2R, NC))])
    row3 = np.hstack([-P.T, H.T, z((N2L, N2L)), z((N2L, NC))])
    row4 = np.hstack([-C, z((NC, N2R)), z((NC, N2L)), z((NC, NC))])
    big = np.vstack([row1, row2, row3, row4])
    big = 0.5 * (big - big.T)
    sig_exp = (N1 * (N1 - 1) // 2 + NR * (NR + 1) // 2
               + N2L * (N2L + 1) // 2)
    rhs = ((-1.0) ** (sig_exp % 2) * math.factorial(NL) * math.factorial(NR)
           * pfaffian(big))

    scale = max(1.0, abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale
