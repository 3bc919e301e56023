"""Subspace projection machinery, the fused decision statistic, and the
exact/approximate theoretical false-alarm, detection, noncentrality and
threshold formulas."""

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import specfun

# singular directions below this relative tolerance are dropped
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class TheoryInputs:
    """Parameter bundle for the closed-form design formulas."""

    k: int
    L: int
    M: int
    N: int
    noise_variance: float
    gammas: tuple  # per-node SNRs ||s_j||^2 / sigma^2
    alpha: float
    tau_d: float

    def __post_init__(self):
        if not (1 <= self.k < self.N):
            raise ValueError("require 1 <= k < N")
        if self.M >= self.N:
            raise ValueError("require M < N")
        if self.noise_variance <= 0:
            raise ValueError("noise variance must be positive")
        if not (0.0 < self.alpha < 1.0) or not (0.0 < self.tau_d < 1.0):
            raise ValueError("alpha and tau_d must lie in (0, 1)")
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))

    @property
    def gamma_sum(self):
        return sum(self.gammas)


@dataclass(frozen=True)
class SubspaceProjector:
    """Orthogonal projector onto the span of a set of basis columns.

    Built from an orthonormal factor rather than the explicit normal-equation
    inverse; rank-deficient column sets fall back to pseudo-inverse behavior
    with the effective dimension reported.
    """

    ortho: np.ndarray  # (M, r) orthonormal columns spanning the subspace
    effective_dim: int
    rank_deficient: bool

    @classmethod
    def from_columns(cls, basis_columns):
        B = np.atleast_2d(np.asarray(basis_columns, dtype=float))
        if B.ndim != 2:
            raise ValueError("basis columns must form a 2-D array")
        M, t = B.shape
        if t == 0:
            return cls(np.zeros((M, 0)), 0, False)
        U, s, _ = np.linalg.svd(B, full_matrices=False)
        keep = s > _RANK_RTOL * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
        r = int(np.count_nonzero(keep))
        return cls(np.ascontiguousarray(U[:, :r]), r, r < t)

    @property
    def dim(self):
        return self.ortho.shape[0]

    def apply(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            raise ValueError(f"expected length-{self.dim} vector, got shape {y.shape}")
        return (y @ self.ortho) @ self.ortho.T


def projector_for_support(B, support):
    """Projector onto the span of the columns of ``B`` selected by a
    (1-based) SupportSet or index iterable."""
    cols = support.cols if hasattr(support, "cols") else np.asarray(support, dtype=int) - 1
    return SubspaceProjector.from_columns(B[:, cols])


def project(projector, y):
    return projector.apply(y)


def statistic(projectors, observations):
    """Fused decision statistic: sum over nodes of ||P_j y_j||^2."""
    if len(projectors) != observations.num_nodes:
        raise ValueError("one projector per node required")
    total = 0.0
    for proj, y in zip(projectors, observations.measurements):
        z = y @ proj.ortho
        total += float(z @ z)
    return total


def per_node_statistics(projectors, observations):
    out = []
    for proj, y in zip(projectors, observations.measurements):
        z = y @ proj.ortho
        out.append(float(z @ z))
    return out


def noncentrality_exact(signals, sensing, support_subset, noise_variance):
    """Exact noncentrality: sum_j ||P_j B_j s_j||^2 / sigma^2 with P_j the
    projector onto the columns of B_j selected by ``support_subset``."""
    if noise_variance <= 0:
        raise ValueError("noise_variance must be positive")
    if len(support_subset) == 0:
        return 0.0
    total = 0.0
    for j in range(sensing.num_nodes):
        B = sensing.operators[j]
        proj = projector_for_support(B, support_subset)
        z = (B @ signals.coefficients[j]) @ proj.ortho
        total += float(z @ z)
    return total / noise_variance


def noncentrality_approx(t, k, L, M, N, gammas):
    """Equal-magnitude approximation (M t / (N k)) (1 + (k - t)/M) sum_j gamma_j."""
    if t < 0 or t > k:
        raise ValueError(f"require 0 <= t <= k, got t={t}, k={k}")
    return (M * t / (N * k)) * (1.0 + (k - t) / M) * float(np.sum(gammas))


def pf_theoretical(tau0, T0, L, noise_variance):
    """Exact false-alarm probability 1 - F(T0 L / 2, tau0 / (2 sigma^2))."""
    if tau0 < 0:
        raise ValueError("tau0 must be nonnegative")
    return 1.0 - specfun.reg_lower_gamma(T0 * L / 2.0, tau0 / (2.0 * noise_variance))


def pd_theoretical(tau0, lam, T0, L, noise_variance):
    """Exact detection probability Q_{T0 L / 2}(sqrt(lambda), sqrt(tau0/sigma^2))."""
    if tau0 < 0 or lam < 0:
        raise ValueError("tau0 and lambda must be nonnegative")
    if tau0 == 0.0:
        return 1.0
    return specfun.marcum_q(T0 * L / 2.0, np.sqrt(lam), np.sqrt(tau0 / noise_variance))


def threshold_exact(alpha, T0, L, noise_variance):
    """Threshold making the exact false-alarm probability equal to alpha."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    return 2.0 * noise_variance * float(special.gammaincinv(T0 * L / 2.0, 1.0 - alpha))


def threshold_sankaran(alpha, t, L, noise_variance):
    """Cube-formula threshold sigma^2 t L ((1 - 2/(9tL)) + sqrt(2/(9tL)) Q^{-1}(alpha))^3."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    tl = t * L
    if tl < 1:
        raise ValueError(f"require t*L >= 1, got {tl}")
    c = 2.0 / (9.0 * tl)
    return noise_variance * tl * ((1.0 - c) + np.sqrt(c) * specfun.gaussian_q_inv(alpha)) ** 3
