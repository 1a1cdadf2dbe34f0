"""Ensemble parameters, derived scales and sign-branch selection.

All other modules consume the immutable value types defined here.  The two
sign branches correspond to the Hermitian matrix (minus) and the
non-Hermitian one (plus); the lattice-spacing scales of the minus branch
only exist for a < 1 and are flagged invalid otherwise, without touching
the plus branch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum


class Branch(Enum):
    MINUS = "minus"   # Hermitian operator
    PLUS = "plus"     # non-Hermitian operator

    @property
    def sign(self):
        return 1.0 if self is Branch.PLUS else -1.0

    @staticmethod
    def parse(text):
        t = str(text).strip().lower()
        if t in ("minus", "-", "d5", "hermitian"):
            return Branch.MINUS
        if t in ("plus", "+", "dw", "nonhermitian", "non-hermitian"):
            return Branch.PLUS
        raise ValueError(f"unknown branch {text!r}")


class MinusBranchInvalidError(ValueError):
    """Minus-branch scales requested at a >= 1, where a_hat_minus is imaginary."""


@dataclass(frozen=True)
class EnsembleParams:
    """The five ensemble inputs: block dimension, index, lattice spacing, sources."""

    n: int
    nu: int
    a: float
    mu_r: float = 0.0
    mu_l: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if int(self.nu) != self.nu or self.nu < 0:
            raise ValueError("nu must be a non-negative integer")
        if not (self.a > 0):
            raise ValueError("a must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "nu", int(self.nu))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "mu_r", float(self.mu_r))
        object.__setattr__(self, "mu_l", float(self.mu_l))

    @property
    def dim(self):
        """Total matrix dimension 2n + nu."""
        return 2 * self.n + self.nu

    @staticmethod
    def from_dict(d):
        return EnsembleParams(
            n=d["n"], nu=d["nu"], a=d["a"],
            mu_r=d.get("mu_r", 0.0), mu_l=d.get("mu_l", 0.0),
        )

    @staticmethod
    def from_json(path):
        with open(path) as fh:
            return EnsembleParams.from_dict(json.load(fh))

    def to_dict(self):
        return {"n": self.n, "nu": self.nu, "a": self.a,
                "mu_r": self.mu_r, "mu_l": self.mu_l}


@dataclass(frozen=True)
class DerivedScales:
    """Closed-form constants derived from the ensemble inputs.

    The normalizations c_- and c_+ are stored as (log magnitude, sign) so
    that the factorial products stay representable up to n ~ 20.
    """

    a_hat_plus: float
    a_hat_minus: float          # nan when minus branch invalid (a >= 1)
    m6_plus: float
    m6_minus: float
    l7_plus: float
    l7_minus: float
    log_c_minus: float
    sign_c_minus: float
    log_c_plus: float
    sign_c_plus: float
    minus_valid: bool

    def a_hat(self, branch):
        if branch is Branch.PLUS:
            return self.a_hat_plus
        if not self.minus_valid:
            raise MinusBranchInvalidError("a_hat_minus undefined for a >= 1")
        return self.a_hat_minus

    def m6(self, branch):
        if branch is Branch.PLUS:
            return self.m6_plus
        if not self.minus_valid:
            raise MinusBranchInvalidError("m6_minus undefined for a >= 1")
        return self.m6_minus

    def l7(self, branch):
        if branch is Branch.PLUS:
            return self.l7_plus
        if not self.minus_valid:
            raise MinusBranchInvalidError("l7_minus undefined for a >= 1")
        return self.l7_minus


def _log_inv_c_common(n, nu):
    return (
        0.5 * n * math.log(16.0 * math.pi / n)
        + 0.5 * nu * math.log(2.0 * math.pi)
        + (-0.5 * nu * nu - n * (n + nu)) * math.log(n)
    )


def derive_scales(p: EnsembleParams) -> DerivedScales:
    """Compute a_hat_pm, m6_pm, l7_pm and the log-form normalizations c_-/c_+."""
    n, nu, a = p.n, p.nu, p.a
    ah_p2 = n * a * a / (2.0 * (1.0 + a * a))
    minus_valid = a < 1.0
    ah_m2 = n * a * a / (2.0 * (1.0 - a * a)) if minus_valid else math.nan

    msum, mdiff = p.mu_r + p.mu_l, p.mu_r - p.mu_l
    m6_p = 2.0 * ah_p2 / n * msum
    l7_p = 2.0 * ah_p2 / n * mdiff
    if minus_valid:
        m6_m = 2.0 * ah_m2 / n * msum
        l7_m = 2.0 * ah_m2 / n * mdiff
    else:
        m6_m = l7_m = math.nan

    # 1/c_- = (16 pi/n)^{n/2} (2 pi)^{nu/2} n^{-nu^2/2 - n(n+nu)} (2n+nu)!
    #         prod_{j<n} j!  prod_{j<n+nu} j!
    log_inv_cm = (
        _log_inv_c_common(n, nu)
        + math.lgamma(2 * n + nu + 1)
        + sum(math.lgamma(j + 1) for j in range(n))
        + sum(math.lgamma(j + 1) for j in range(n + nu))
    )
    # 1/c_+ carries an extra sign and runs the factorial products one further
    log_inv_cp = (
        _log_inv_c_common(n, nu)
        + sum(math.lgamma(j + 1) for j in range(n + 1))
        + sum(math.lgamma(j + 1) for j in range(n + nu + 1))
    )
    sign_cp = -1.0 if (nu * (nu - 1) // 2 + n * (n - 1) // 2) % 2 else 1.0

    return DerivedScales(
        a_hat_plus=math.sqrt(ah_p2),
        a_hat_minus=math.sqrt(ah_m2) if minus_valid else math.nan,
        m6_plus=m6_p, m6_minus=m6_m,
        l7_plus=l7_p, l7_minus=l7_m,
        log_c_minus=-log_inv_cm, sign_c_minus=1.0,
        log_c_plus=-log_inv_cp, sign_c_plus=sign_cp,
        minus_valid=minus_valid,
    )
