"""Minimum-support-fraction planner.

Given (k, L, M, N, sigma^2, gamma, alpha, tau_d), finds the smallest t such
that the approximate detection probability Q(f(t)) reaches tau_d while the
false-alarm level is held at alpha, via the KKT case analysis of the relaxed
integer program (scan-then-bisect on the continuous relaxation, then round).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import detector, specfun

ACHIEVED_AT_ONE = "AchievedAtOne"
INTERIOR = "Interior"
INFEASIBLE = "Infeasible"

_SCAN_POINTS = 512
_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class PlannerResult:
    status: str
    t_continuous: Optional[float]
    t_hat: Optional[int]
    pd_at_t_hat: Optional[float]
    k: int
    root_multiplicity: int = 0

    @property
    def fraction(self):
        return None if self.t_hat is None else self.t_hat / self.k


def f_of_t(t, inputs):
    """Design function f(t): the approximate detection probability is Q(f(t)).

    Combines the cube-formula threshold at level alpha with the Sankaran
    noncentral-cdf parametrization (h, p, m) evaluated at the equal-magnitude
    noncentrality approximation.
    """
    if not (0.0 < t <= inputs.k):
        raise ValueError(f"require 0 < t <= k, got t={t}")
    L = inputs.L
    sigma2 = inputs.noise_variance
    lam = detector.noncentrality_approx(t, inputs.k, L, inputs.M, inputs.N, inputs.gammas)
    tau0 = detector.threshold_sankaran(inputs.alpha, t, L, sigma2)
    tl = t * L
    denom_k = tl + lam
    if denom_k <= 0:
        raise ValueError("degenerate parameters: t*L + lambda_t must be positive")
    h = 1.0 - (2.0 / 3.0) * (tl + lam) * (tl + 3.0 * lam) / (tl + 2.0 * lam) ** 2
    p = (tl + 2.0 * lam) / (tl + lam) ** 2
    m = (h - 1.0) * (1.0 - 3.0 * h)
    num = (tau0 / (sigma2 * denom_k)) ** h - (1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p))
    den = h * math.sqrt(2.0 * p) * (1.0 + 0.5 * m * p)
    return num / den


def pd_approx(t, inputs):
    """Approximate detection probability Q(f(t))."""
    return specfun.gaussian_q(f_of_t(t, inputs))


def f_prime(t, inputs):
    """Central finite difference of f; only the sign is contractual."""
    if not (1.0 <= t <= inputs.k):
        raise ValueError(f"require 1 <= t <= k, got t={t}")
    h = max(1e-5, 1e-5 * t)
    lo, hi = t - h, t + h
    if lo < 1.0:
        return (f_of_t(t + h, inputs) - f_of_t(t, inputs)) / h
    if hi > inputs.k:
        return (f_of_t(t, inputs) - f_of_t(t - h, inputs)) / h
    return (f_of_t(hi, inputs) - f_of_t(lo, inputs)) / (2.0 * h)


def _bisect_crossing(g, lo, hi):
    """Bisect g (continuous, sign change across [lo, hi]) to a root."""
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if hi - lo < _BISECT_TOL:
            return mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_min_fraction(inputs):
    """KKT solution of the relaxed minimum-support-size problem, rounded.

    Branch 1: tau_d already met at t=1. Branch 2: smallest root of
    Q(f(t)) = tau_d on (1, k) at which Pd is nondecreasing (f' <= 0).
    Otherwise infeasible. The integer answer rounds the continuous root to
    the nearest integer, clamped to [1, k-1].
    """
    k = inputs.k
    if k <= 1:
        raise ValueError(f"require k > 1, got k={k}")
    tau_d = inputs.tau_d
    if tau_d <= pd_approx(1.0, inputs):
        return PlannerResult(ACHIEVED_AT_ONE, 1.0, 1, pd_approx(1.0, inputs), k)

    grid = np.linspace(1.0, float(k), _SCAN_POINTS)
    vals = np.array([pd_approx(t, inputs) - tau_d for t in grid])
    g = lambda t: pd_approx(t, inputs) - tau_d

    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(_bisect_crossing(g, grid[i], grid[i + 1]))
    if vals[-1] == 0.0:
        roots.append(grid[-1])

    feasible = [r for r in roots if f_prime(r, inputs) <= 1e-9]
    if not feasible:
        return PlannerResult(INFEASIBLE, None, None, None, k, root_multiplicity=len(roots))

    t_cont = min(feasible)
    t_hat = int(min(max(math.floor(t_cont + 0.5), 1), k - 1))
    return PlannerResult(INTERIOR, float(t_cont), t_hat, pd_approx(float(t_hat), inputs), k,
                         root_multiplicity=len(roots))


def min_fraction_map(tau_d_grid, alpha_grid, base_inputs):
    """Planner result per (tau_d, alpha) cell; infeasible cells included."""
    if len(tau_d_grid) == 0 or len(alpha_grid) == 0:
        raise ValueError("grids must be nonempty")
    out = []
    for tau_d in tau_d_grid:
        row = []
        for alpha in alpha_grid:
            inputs = detector.TheoryInputs(
                k=base_inputs.k, L=base_inputs.L, M=base_inputs.M, N=base_inputs.N,
                noise_variance=base_inputs.noise_variance, gammas=base_inputs.gammas,
                alpha=float(alpha), tau_d=float(tau_d))
            row.append(solve_min_fraction(inputs))
        out.append(row)
    return out
