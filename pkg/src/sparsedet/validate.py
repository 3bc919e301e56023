"""Always-on invariant suite behind the ``validate`` CLI subcommand.

Fast self-checks of the numerical core: special-function oracles, projector
algebra, OMP residual behavior, algorithm coincidence at L=1, fusion tally
equivalence, message accounting, and seed determinism of CSV output.
"""

import dataclasses
import tempfile

import numpy as np
from scipy import integrate

from . import detector, harness, model, omp, specfun


def _check_specfun():
    # quadrature oracle of the Gaussian Q defining integral
    val, _ = integrate.quad(lambda t: np.exp(-t * t / 2.0) / np.sqrt(2 * np.pi),
                            1.6449, np.inf)
    assert abs(specfun.gaussian_q(1.6449) - val) < 1e-10
    for x in np.linspace(-8, 8, 33):
        p = specfun.gaussian_q(x)
        if x >= -5.0:
            assert abs(specfun.gaussian_q_inv(p) - x) < 1e-10
        else:
            # float64 saturates Q(x) to 1 - few ulps here; the x-domain
            # identity is unrepresentable, so check the probability domain
            assert abs(specfun.gaussian_q(specfun.gaussian_q_inv(p)) - p) < 1e-15
    # Marcum complement identity on random triples
    rng = np.random.default_rng(7)
    for _ in range(20):
        df = 2 * rng.integers(1, 8)
        lam = float(rng.uniform(0, 20))
        x = float(rng.uniform(0, 40))
        lhs = 1.0 - specfun.ncchi2_cdf(df, lam, x)
        rhs = specfun.marcum_q(df / 2.0, np.sqrt(lam), np.sqrt(x))
        assert abs(lhs - rhs) < 1e-8
    # cdf monotone in x
    for df, lam in ((3.0, 0.0), (7.5, 4.0)):
        grid = np.linspace(0, 5 * df, 1000)
        vals = [specfun.ncchi2_cdf(df, lam, x) for x in grid]
        assert np.all(np.diff(vals) >= -1e-12)


def _check_projector():
    rng = np.random.default_rng(3)
    B = rng.standard_normal((6, 3))
    proj = detector.SubspaceProjector.from_columns(B)
    y = rng.standard_normal(6)
    py = proj.apply(y)
    assert np.linalg.norm(proj.apply(py) - py) < 1e-10
    assert abs(py @ py + (y - py) @ (y - py) - y @ y) < 1e-10


def _check_omp_monotone():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((8, 16))
    B /= np.linalg.norm(B, axis=0)
    y = rng.standard_normal(8)
    trace = omp.omp_select(y, B, 5)
    assert np.all(np.diff(trace.residual_norms) <= 1e-12)
    assert len(set(trace.selected.indices)) == trace.iterations


def _check_l1_coincidence():
    rng = np.random.default_rng(11)
    support = model.draw_support(32, 3, rng)
    signals = model.draw_signals(support, 1, 3.0, 4.0, rng)
    sensing = model.draw_sensing(12, 32, 1, rng)
    obs = model.observe(signals, sensing, model.H1, 1.0, rng)
    a = omp.somp_detect(obs, sensing, 3, 0.0).statistic
    b = omp.dist1_detect(obs, sensing, 3, 0.0).statistic
    c = omp.dist2_detect(obs, sensing, 3, 3, 0.0).statistic
    assert abs(a - b) < 1e-12 and abs(b - c) < 1e-12


def _check_fusion_tally():
    rng = np.random.default_rng(13)
    N = 20
    locals_ = [model.SupportSet(tuple(rng.choice(N, 3, replace=False) + 1), N)
               for _ in range(5)]
    fused = omp.fuse_supports(locals_, 4)
    counts = {}
    for s in locals_:
        for i in s.indices:
            counts[i] = counts.get(i, 0) + 1
    freqs = [counts[i] for i in fused.indices]
    assert freqs == sorted(freqs, reverse=True)
    assert len(fused) == min(len(counts), 4)
    missing_max = max((c for i, c in counts.items() if i not in fused.as_set()),
                      default=0)
    assert missing_max <= min(freqs)


def _check_messages():
    cfg = harness.ExperimentConfig(N=32, k=3, L=2, c_r=0.25, T0=2,
                                   noise_variance=1.0, trials=1, seed=1)
    rng = model.substream(cfg.seed, 0)
    support = model.draw_support(cfg.N, cfg.k, rng)
    signals = model.draw_signals(support, cfg.L, 3.0, 4.0, rng)
    sensing = model.draw_sensing(cfg.M, cfg.N, cfg.L, rng)
    obs = model.observe(signals, sensing, model.H1, 1.0, rng)
    assert omp.somp_detect(obs, sensing, cfg.T0, 0.0).messages_per_node == cfg.M
    assert omp.dist1_detect(obs, sensing, cfg.T0, 0.0).messages_per_node == 1
    assert omp.dist2_detect(obs, sensing, cfg.T0, cfg.k, 0.0).messages_per_node == cfg.T0 + 1


def _check_seed_determinism():
    cfg = harness.ExperimentConfig(N=32, k=3, L=2, c_r=0.25, T0=1,
                                   noise_variance=1.0, trials=20, seed=42,
                                   algorithms=(harness.SOMP, harness.DIST1))
    with tempfile.TemporaryDirectory() as d:
        paths = [f"{d}/a.csv", f"{d}/b.csv"]
        for p in paths:
            harness.write_roc_csv(p, harness.run_roc(cfg), cfg)
        blobs = [open(p, "rb").read() for p in paths]
        assert blobs[0] == blobs[1]


CHECKS = [
    ("specfun_oracles", _check_specfun),
    ("projector_idempotency_pythagoras", _check_projector),
    ("omp_residual_monotonicity", _check_omp_monotone),
    ("l1_algorithm_coincidence", _check_l1_coincidence),
    ("fuse_supports_tally", _check_fusion_tally),
    ("message_accounting", _check_messages),
    ("seed_determinism", _check_seed_determinism),
]


def run_validation(report=print):
    """Run every invariant check; returns True if all pass."""
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
            report(f"PASS {name}")
        except AssertionError as e:
            ok = False
            report(f"FAIL {name}: {e}")
    return ok
