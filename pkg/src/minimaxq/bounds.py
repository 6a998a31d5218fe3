"""Closed-form finite-time error bounds for minimax Q-learning and their Monte Carlo check.

Every evaluator accepts a scalar or an array of step indices ``k``.

Notation: n = |S x A x B|, rho = 1 - alpha d_min (1 - gamma). The third terms
of the lower/upper/original-system bounds carry a factor n**e where the
printed exponent is 2/3; ``exponent_variant="three_halves"`` switches it to
3/2, which is what the norm-equivalence step producing that factor gives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

EXPONENTS = {"printed": 2.0 / 3.0, "three_halves": 1.5}


def decay_rate(alpha: float, d_min: float, gamma: float) -> float:
    """rho = 1 - alpha d_min (1 - gamma), guaranteed in (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < d_min <= 1.0:
        raise ParameterError(f"d_min must lie in (0, 1], got {d_min}")
    if not 0.0 <= gamma < 1.0:
        raise ParameterError(f"gamma must lie in [0, 1), got {gamma}")
    rho = 1.0 - alpha * d_min * (1.0 - gamma)
    assert 0.0 < rho < 1.0
    return rho


def constants(q0, gamma: float) -> tuple[float, float]:
    """(Q_max, W_max) = (max{1, ||Q0||_inf} / (1 - gamma), 9 / (1 - gamma)^2)."""
    q0_inf = float(np.max(np.abs(q0))) if np.ndim(q0) else abs(float(q0))
    return max(1.0, q0_inf) / (1.0 - gamma), 9.0 / (1.0 - gamma) ** 2


@dataclass(frozen=True)
class BoundParams:
    alpha: float
    gamma: float
    d_min: float
    d_max: float
    n: int
    q0_err_2: float
    q0_err_inf: float
    q0_inf: float = 1.0
    exponent_variant: str = "printed"

    def __post_init__(self):
        if self.exponent_variant not in EXPONENTS:
            raise ParameterError(f"exponent_variant must be one of {sorted(EXPONENTS)}")
        if not 0.0 < self.d_min <= self.d_max <= 1.0:
            raise ParameterError("need 0 < d_min <= d_max <= 1")
        decay_rate(self.alpha, self.d_min, self.gamma)

    @property
    def rho(self) -> float:
        return decay_rate(self.alpha, self.d_min, self.gamma)

    @property
    def q_max(self) -> float:
        return constants(self.q0_inf, self.gamma)[0]

    @property
    def w_max(self) -> float:
        return constants(self.q0_inf, self.gamma)[1]

    @property
    def exponent(self) -> float:
        return EXPONENTS[self.exponent_variant]

    @classmethod
    def from_problem(cls, spec, model, alpha, q0, q_star, exponent_variant="printed") -> BoundParams:
        from .game import occupation_frequency

        _, d_min, d_max = occupation_frequency(model)
        err = np.asarray(q0, dtype=float) - np.asarray(q_star, dtype=float)
        return cls(
            alpha=float(alpha),
            gamma=spec.discount,
            d_min=d_min,
            d_max=d_max,
            n=spec.n,
            q0_err_2=float(np.linalg.norm(err)),
            q0_err_inf=float(np.max(np.abs(err))),
            q0_inf=float(np.max(np.abs(q0))),
            exponent_variant=exponent_variant,
        )


def _k(k):
    return np.asarray(k, dtype=float)


def _steady_term(p: BoundParams, coef: float) -> float:
    """coef * d_max n alpha^(1/2) / (d_min^(3/2) (1 - gamma)^(5/2))."""
    return coef * p.d_max * p.n * math.sqrt(p.alpha) / (p.d_min**1.5 * (1.0 - p.gamma) ** 2.5)


def _transient_term(p: BoundParams, coef: float, k) -> np.ndarray:
    """coef * n^(3/2) rho^k / (1 - gamma)."""
    return coef * p.n**1.5 * p.rho ** _k(k) / (1.0 - p.gamma)


def _switching_term_eq5(p: BoundParams, k) -> np.ndarray:
    """(8 gamma d_max n^e / (1 - gamma)) * (1 / (d_min (1 - gamma))) * rho^(k/2 - 1)."""
    coef = 8.0 * p.gamma * p.d_max * p.n**p.exponent / (1.0 - p.gamma)
    return coef / (p.d_min * (1.0 - p.gamma)) * p.rho ** (_k(k) / 2.0 - 1.0)


def bound_thm1(k, p: BoundParams):
    """Mean 2-norm error of the lower-upper (fixed matrix) system."""
    first = 3.0 * math.sqrt(p.alpha) * p.n / (math.sqrt(p.d_min) * (1.0 - p.gamma) ** 1.5)
    return first + p.n * p.q0_err_2 * p.rho ** _k(k)


def bound_thm2(k, p: BoundParams):
    """Mean inf-norm error of the lower comparison system."""
    k = _k(k)
    third = 4.0 * p.alpha * p.gamma * p.d_max * p.n**p.exponent / (1.0 - p.gamma) * k * p.rho ** (k - 1.0)
    return _steady_term(p, 9.0) + _transient_term(p, 2.0, k) + third


def peak_factor(rho: float) -> float:
    """(-2 / ln rho) rho^(-1/ln rho - 1); dominates k rho^(k/2 - 1) over all k >= 0."""
    ln = math.log(rho)
    return (-2.0 / ln) * rho ** (-1.0 / ln - 1.0)


def bound_cor1(k, p: BoundParams, form: str = "eq4"):
    """Looser forms of :func:`bound_thm2`; ``eq4`` removes the k factor, ``eq5`` also removes 1/ln rho."""
    k = _k(k)
    if form == "eq4":
        coef = 4.0 * p.alpha * p.gamma * p.d_max * p.n**p.exponent / (1.0 - p.gamma)
        third = coef * peak_factor(p.rho) * p.rho ** (k / 2.0)
    elif form == "eq5":
        third = _switching_term_eq5(p, k)
    else:
        raise ValueError(f"form must be 'eq4' or 'eq5', got {form!r}")
    return _steady_term(p, 9.0) + _transient_term(p, 2.0, k) + third


def bound_thm4(k, p: BoundParams):
    """Mean inf-norm error of the upper comparison system (same form as ``bound_cor1(..., 'eq5')``)."""
    return _steady_term(p, 9.0) + _transient_term(p, 2.0, k) + _switching_term_eq5(p, k)


def bound_thm5(k, p: BoundParams):
    """Mean error of minimax Q-learning itself, with the constants exactly as stated.

    The third term is (24 gamma d_max n^e / (1 - gamma)) * (3 / (d_min (1 - gamma))) * rho^(k/2 - 1),
    i.e. nine times the third term of :func:`bound_thm4`.
    """
    k = _k(k)
    coef = 24.0 * p.gamma * p.d_max * p.n**p.exponent / (1.0 - p.gamma)
    third = coef * 3.0 / (p.d_min * (1.0 - p.gamma)) * p.rho ** (k / 2.0 - 1.0)
    return _steady_term(p, 27.0) + _transient_term(p, 6.0, k) + third


BOUNDS = {
    "thm1": bound_thm1,
    "thm2": bound_thm2,
    "cor1_eq4": lambda k, p: bound_cor1(k, p, "eq4"),
    "cor1_eq5": lambda k, p: bound_cor1(k, p, "eq5"),
    "thm4": bound_thm4,
    "thm5": bound_thm5,
}


def evaluate_all(ks, p: BoundParams) -> dict[str, np.ndarray]:
    ks = np.asarray(ks)
    return {name: np.broadcast_to(fn(ks, p), ks.shape).astype(float) for name, fn in BOUNDS.items()}


@dataclass
class BoundReport:
    which: str
    ks: np.ndarray
    margin: np.ndarray  # bound(k) - empirical(k)
    violations: list[int]  # k values with margin < -slack

    @property
    def ok(self) -> bool:
        return not self.violations


def empirical_vs_bound(empirical, p: BoundParams, which: str, ks=None, slack: float = 0.0) -> BoundReport:
    """Compare per-k empirical mean errors against bound ``which``."""
    empirical = np.asarray(empirical, dtype=float)
    if empirical.ndim != 1 or empirical.size == 0:
        raise ValueError("empirical curve must be a non-empty 1-D array")
    ks = np.arange(empirical.size) if ks is None else np.asarray(ks)
    if ks.shape != empirical.shape:
        raise ValueError(f"ks has shape {ks.shape}, empirical {empirical.shape}")
    if which not in BOUNDS:
        raise ValueError(f"unknown bound {which!r}; choose from {sorted(BOUNDS)}")
    margin = BOUNDS[which](ks, p) - empirical
    bad = [int(k) for k in ks[margin < -slack]]
    return BoundReport(which, ks, margin, bad)
