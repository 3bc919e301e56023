"""Joint-sparse signal ensembles, row-orthonormal sensing operators, and
compressed observations under both hypotheses.

All generators take an explicit numpy Generator; nothing touches global RNG
state. Support indices are 1-based throughout the public surface.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

H0 = "H0"
H1 = "H1"


@dataclass(frozen=True)
class SupportSet:
    """Ordered collection of distinct 1-based column indices in [1, N]."""

    indices: tuple
    ambient_dim: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(set(idx)) != len(idx):
            raise ValueError("support indices must be distinct")
        if any(i < 1 or i > self.ambient_dim for i in idx):
            raise ValueError("support indices must lie in [1, N]")

    def __len__(self):
        return len(self.indices)

    @property
    def cols(self):
        """0-based column index array for matrix slicing."""
        return np.asarray(self.indices, dtype=int) - 1

    def as_set(self):
        return frozenset(self.indices)


@dataclass(frozen=True)
class SignalEnsemble:
    """L sparse coefficient vectors sharing one true support."""

    coefficients: np.ndarray  # (L, N)
    true_support: SupportSet
    coeff_range: tuple

    @property
    def num_nodes(self):
        return self.coefficients.shape[0]

    @property
    def ambient_dim(self):
        return self.coefficients.shape[1]


@dataclass(frozen=True)
class SensingEnsemble:
    """L row-orthonormal M x N measurement operators."""

    operators: np.ndarray  # (L, M, N)
    canonical_basis: bool = True

    @property
    def num_nodes(self):
        return self.operators.shape[0]

    @property
    def num_measurements(self):
        return self.operators.shape[1]

    @property
    def ambient_dim(self):
        return self.operators.shape[2]


@dataclass(frozen=True)
class ObservationSet:
    """L compressed measurement vectors with simulation bookkeeping."""

    measurements: np.ndarray  # (L, M)
    hypothesis: str
    noise_variance: float

    @property
    def num_nodes(self):
        return self.measurements.shape[0]


def substream(master_seed, *key):
    """Counter-based RNG substream: deterministic in (seed, key), independent
    of evaluation order across trials."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64DXSM(ss))


def draw_support(N, k, rng):
    """Draw k distinct support indices uniformly from [1, N]."""
    if not (1 <= k < N):
        raise ValueError(f"require 1 <= k < N, got k={k}, N={N}")
    idx = rng.choice(N, size=k, replace=False) + 1
    return SupportSet(tuple(sorted(int(i) for i in idx)), N)


def draw_signals(support, L, a, b, rng):
    """Draw L coefficient vectors with magnitudes uniform in [a, b] and
    equiprobable signs, all sharing ``support``."""
    if not (0 < a <= b):
        raise ValueError(f"require 0 < a <= b, got a={a}, b={b}")
    N = support.ambient_dim
    k = len(support)
    mags = rng.uniform(a, b, size=(L, k))
    signs = rng.choice([-1.0, 1.0], size=(L, k))
    coeffs = np.zeros((L, N))
    coeffs[:, support.cols] = mags * signs
    return SignalEnsemble(coeffs, support, (a, b))


def row_orthonormalize(G):
    """Orthonormalize the rows of each matrix in a (..., M, N) batch while
    preserving the row space.

    Cholesky whitening of the Gram matrix (B = chol(G G^T)^{-1} G) is
    dgemm-dominated and much faster here than per-matrix QR; falls back to
    QR on a (measure-zero) rank-deficient draw.
    """
    G = np.asarray(G, dtype=float)
    gram = G @ np.swapaxes(G, -1, -2)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        Q, R = np.linalg.qr(np.swapaxes(G, -1, -2))
        signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
        return np.ascontiguousarray(np.swapaxes(Q * signs[..., None, :], -1, -2))
    flat = chol.reshape((-1,) + chol.shape[-2:])
    inv = np.empty_like(flat)
    for j in range(flat.shape[0]):
        inv[j], _ = lapack.dtrtri(flat[j], lower=1)
    inv = np.tril(inv).reshape(chol.shape)
    return inv @ G


def draw_sensing(M, N, L, rng):
    """Draw L Gaussian M x N matrices and orthonormalize the rows."""
    if not (1 <= M < N):
        raise ValueError(f"require 1 <= M < N, got M={M}, N={N}")
    G = rng.standard_normal((L, M, N))
    return SensingEnsemble(row_orthonormalize(G))


def observe(signals, sensing, hypothesis, noise_variance, rng):
    """Compressed observations: B_j s_j + noise under H1, pure noise under H0."""
    if hypothesis not in (H0, H1):
        raise ValueError(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")
    if noise_variance <= 0:
        raise ValueError(f"noise_variance must be positive, got {noise_variance!r}")
    L = sensing.num_nodes
    M = sensing.num_measurements
    if signals.num_nodes != L or signals.ambient_dim != sensing.ambient_dim:
        raise ValueError("signal/sensing ensemble dimensions do not match")
    y = rng.standard_normal((L, M)) * np.sqrt(noise_variance)
    if hypothesis == H1:
        y = y + np.einsum("jmn,jn->jm", sensing.operators, signals.coefficients)
    return ObservationSet(y, hypothesis, float(noise_variance))


def snr_summary(signals, noise_variance):
    """Per-node SNRs gamma_j = ||s_j||^2 / sigma^2 and the average
    uncompressed SNR sum_j gamma_j / (L * N)."""
    if noise_variance <= 0:
        raise ValueError(f"noise_variance must be positive, got {noise_variance!r}")
    energies = np.sum(signals.coefficients ** 2, axis=1)
    gammas = energies / noise_variance
    L = signals.num_nodes
    N = signals.ambient_dim
    return gammas, float(np.sum(gammas) / (L * N))


def ensemble_bundle_to_dict(signals, sensing, observations=None):
    """JSON-serializable bundle of one trial's ensembles (golden-file tests)."""
    d = {
        "coefficients": signals.coefficients.tolist(),
        "true_support": list(signals.true_support.indices),
        "ambient_dim": signals.true_support.ambient_dim,
        "coeff_range": list(signals.coeff_range),
        "operators": sensing.operators.tolist(),
    }
    if observations is not None:
        d["measurements"] = observations.measurements.tolist()
        d["hypothesis"] = observations.hypothesis
        d["noise_variance"] = observations.noise_variance
    return d


def ensemble_bundle_from_dict(d):
    support = SupportSet(tuple(d["true_support"]), d["ambient_dim"])
    signals = SignalEnsemble(np.asarray(d["coefficients"]), support,
                             tuple(d["coeff_range"]))
    sensing = SensingEnsemble(np.asarray(d["operators"]))
    obs = None
    if "measurements" in d:
        obs = ObservationSet(np.asarray(d["measurements"]), d["hypothesis"],
                             d["noise_variance"])
    return signals, sensing, obs


def sigma_for_avg_snr(snr_db, k, N, a, b):
    """Noise variance giving a target average uncompressed SNR in dB for
    coefficients drawn uniformly from [-b,-a] U [a,b]."""
    mean_sq = (a * a + a * b + b * b) / 3.0
    gamma_bar = 10.0 ** (snr_db / 10.0)
    return k * mean_sq / (N * gamma_bar)
