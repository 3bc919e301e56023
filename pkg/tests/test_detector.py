"""Projector algebra, decision statistic, and the closed-form theory:
noncentralities, Pf/Pd, thresholds, and null/alternative calibration."""

import numpy as np
import pytest
from scipy import stats

from sparsedet import detector, harness, model, specfun


def test_projector_standard_basis():
    proj = detector.SubspaceProjector.from_columns(np.array([[1.0], [0.0]]))
    assert np.allclose(proj.apply(np.array([3.0, 4.0])), [3.0, 0.0])
    assert proj.effective_dim == 1 and not proj.rank_deficient


def test_projector_idempotent_and_pythagoras():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((6, 3))
    proj = detector.SubspaceProjector.from_columns(B)
    y = rng.standard_normal(6)
    py = proj.apply(y)
    assert np.linalg.norm(proj.apply(py) - py) < 1e-10
    assert abs(py @ py + (y - py) @ (y - py) - y @ y) < 1e-10
    # vector already in span is fixed
    z = B @ rng.standard_normal(3)
    assert np.linalg.norm(proj.apply(z) - z) < 1e-12


def test_projector_rank_deficiency():
    col = np.array([[1.0], [2.0], [0.0]])
    B = np.hstack([col, 2 * col])
    proj = detector.SubspaceProjector.from_columns(B)
    assert proj.rank_deficient and proj.effective_dim == 1
    empty = detector.SubspaceProjector.from_columns(np.zeros((4, 0)))
    assert empty.effective_dim == 0
    assert np.allclose(empty.apply(np.ones(4)), 0.0)


def test_projector_matches_normal_equations():
    # same operator as the explicit least-squares formula on a well
    # conditioned instance
    rng = np.random.default_rng(1)
    B = rng.standard_normal((8, 3))
    P = B @ np.linalg.solve(B.T @ B, B.T)
    proj = detector.SubspaceProjector.from_columns(B)
    y = rng.standard_normal(8)
    assert np.linalg.norm(proj.apply(y) - P @ y) < 1e-10


def test_statistic():
    rng = np.random.default_rng(2)
    proj = detector.SubspaceProjector.from_columns(np.array([[1.0], [0.0]]))
    obs = model.ObservationSet(np.array([[3.0, 4.0]]), model.H1, 1.0)
    assert detector.statistic([proj], obs) == pytest.approx(9.0)
    empty = detector.SubspaceProjector.from_columns(np.zeros((2, 0)))
    assert detector.statistic([empty], obs) == 0.0
    with pytest.raises(ValueError):
        detector.statistic([proj, proj], obs)
    # additivity across nodes on a random instance
    Y = rng.standard_normal((2, 6))
    projs = [detector.SubspaceProjector.from_columns(rng.standard_normal((6, 2)))
             for _ in range(2)]
    obs2 = model.ObservationSet(Y, model.H0, 1.0)
    per = detector.per_node_statistics(projs, obs2)
    assert detector.statistic(projs, obs2) == pytest.approx(sum(per), abs=1e-10)


def test_noncentrality_exact():
    rng = model.substream(3, 0)
    support = model.draw_support(32, 4, rng)
    sig = model.draw_signals(support, 3, 3.0, 4.0, rng)
    sens = model.draw_sensing(12, 32, 3, rng)
    # full support: projection changes nothing
    lam_full = detector.noncentrality_exact(sig, sens, support, 0.7)
    direct = sum(float(np.sum((sens.operators[j] @ sig.coefficients[j]) ** 2))
                 for j in range(3)) / 0.7
    assert abs(lam_full - direct) < 1e-10
    # empty subset
    assert detector.noncentrality_exact(sig, sens, model.SupportSet((), 32), 0.7) == 0.0
    # 1-sparse signal, disjoint subset: only leakage through non-orthogonal
    # columns remains, strictly below the full energy
    support1 = model.SupportSet((1,), 32)
    sig1 = model.draw_signals(support1, 3, 3.0, 3.0, rng)
    lam_disjoint = detector.noncentrality_exact(sig1, sens, model.SupportSet((2,), 32), 1.0)
    lam_own = detector.noncentrality_exact(sig1, sens, support1, 1.0)
    assert 0.0 <= lam_disjoint < 0.5 * lam_own


def test_noncentrality_nested_monotone():
    rng = model.substream(4, 0)
    support = model.draw_support(32, 5, rng)
    sig = model.draw_signals(support, 3, 3.0, 4.0, rng)
    sens = model.draw_sensing(12, 32, 3, rng)
    lams = [detector.noncentrality_exact(
        sig, sens, model.SupportSet(support.indices[:t], 32), 1.0)
        for t in range(6)]
    assert np.all(np.diff(lams) >= -1e-10)
    # pd at fixed threshold is nondecreasing along the nested chain
    tau = detector.threshold_exact(0.1, 5, 3, 1.0)
    pds = [detector.pd_theoretical(tau, lam, 5, 3, 1.0) for lam in lams]
    assert np.all(np.diff(pds) >= -1e-12)


def test_noncentrality_approx():
    gam = [150.0, 150.0, 150.0]
    # t=k reduction
    assert detector.noncentrality_approx(5, 5, 3, 25, 256, gam) == \
        pytest.approx((25 / 256) * 450.0)
    assert detector.noncentrality_approx(0, 5, 3, 25, 256, gam) == 0.0
    # hand arithmetic
    expect = (25 * 2 / (256 * 5)) * (1 + 3 / 25) * 450.0
    assert detector.noncentrality_approx(2, 5, 3, 25, 256, gam) == pytest.approx(expect)
    with pytest.raises(ValueError):
        detector.noncentrality_approx(6, 5, 3, 25, 256, gam)


def test_pf_pd_theoretical():
    assert detector.pf_theoretical(0.0, 2, 1, 1.0) == 1.0
    assert detector.pf_theoretical(2.0, 2, 1, 1.0) == pytest.approx(np.exp(-1.0))
    for tau in (0.5, 3.0, 9.0):
        assert detector.pf_theoretical(tau, 2, 3, 1.3) == pytest.approx(
            1.0 - specfun.chi2_cdf(6, tau / 1.3), abs=1e-12)
    # lambda = 0 reduces to pf
    assert detector.pd_theoretical(4.0, 0.0, 2, 1, 1.0) == pytest.approx(
        detector.pf_theoretical(4.0, 2, 1, 1.0), abs=1e-9)
    assert detector.pd_theoretical(0.0, 3.0, 2, 1, 1.0) == 1.0
    assert detector.pd_theoretical(10.0, 8.0, 1, 5, 1.0) == pytest.approx(
        1.0 - specfun.ncchi2_cdf(5, 8.0, 10.0), abs=1e-12)
    lams = np.linspace(0, 20, 30)
    vals = [detector.pd_theoretical(8.0, lam, 1, 5, 1.0) for lam in lams]
    assert np.all(np.diff(vals) >= -1e-12)


def test_threshold_exact():
    assert detector.threshold_exact(np.exp(-1.0), 2, 1, 1.0) == pytest.approx(2.0)
    assert detector.threshold_exact(0.999, 1, 2, 1.0) < 0.01
    rng = np.random.default_rng(5)
    for _ in range(20):
        alpha = float(rng.uniform(0.01, 0.5))
        T0 = int(rng.integers(1, 6))
        L = int(rng.integers(1, 8))
        tau = detector.threshold_exact(alpha, T0, L, 1.4)
        assert abs(detector.pf_theoretical(tau, T0, L, 1.4) - alpha) < 1e-9
    with pytest.raises(ValueError):
        detector.threshold_exact(0.0, 1, 1, 1.0)


def test_threshold_sankaran():
    # direct substitution at the Q^{-1}(0.5)=0 point
    assert detector.threshold_sankaran(0.5, 1, 9, 1.0) == pytest.approx(
        9.0 * (1 - 2.0 / 81.0) ** 3, abs=1e-12)
    # sigma^2 linearity
    assert detector.threshold_sankaran(0.1, 2, 3, 2.0) == pytest.approx(
        2.0 * detector.threshold_sankaran(0.1, 2, 3, 1.0))
    # agreement with the exact inverse
    for tL in (5, 8, 12, 20, 50):
        for alpha in (0.01, 0.05, 0.1, 0.2):
            approx = detector.threshold_sankaran(alpha, tL, 1, 1.0)
            exact = detector.threshold_exact(alpha, tL, 1, 1.0)
            assert abs(approx - exact) / exact < 0.03


def test_theory_inputs_validation():
    good = dict(k=5, L=3, M=25, N=256, noise_variance=1.0,
                gammas=(1.0, 1.0, 1.0), alpha=0.1, tau_d=0.9)
    detector.TheoryInputs(**good)
    for key, bad in (("k", 0), ("M", 300), ("noise_variance", 0.0),
                     ("alpha", 1.0), ("tau_d", 0.0)):
        with pytest.raises(ValueError):
            detector.TheoryInputs(**{**good, key: bad})


def test_known_support_null_ks():
    # with a data-independent projector the null statistic over sigma^2 is
    # exactly chi-squared with T0*L degrees of freedom
    rng = model.substream(6, 0)
    L, M, N, T0 = 3, 20, 40, 2
    sens = model.draw_sensing(M, N, L, rng)
    subset = model.SupportSet((4, 17), N)
    projs = [detector.projector_for_support(sens.operators[j], subset)
             for j in range(L)]
    Q = np.stack([p.ortho for p in projs])  # (L, M, T0)
    sigma2 = 1.6
    noise = rng.standard_normal((10_000, L, M)) * np.sqrt(sigma2)
    z = np.einsum("jmt,njm->njt", Q, noise)
    stats_null = np.sum(z ** 2, axis=(1, 2)) / sigma2
    assert stats.kstest(stats_null, "chi2", args=(T0 * L,)).pvalue > 0.01


def test_known_support_alternative_calibration():
    # empirical Pd at the exact-alpha threshold vs theory with exact
    # per-trial noncentrality, within 3-sigma binomial error
    cfg = harness.ExperimentConfig(N=64, k=4, L=3, c_r=0.25, T0=2,
                                   noise_variance=1.0, trials=2000, seed=21)
    s0, s1, lam = harness.run_known_support_calibration(cfg)
    alpha = 0.1
    t = cfg.T0
    tau = detector.threshold_exact(alpha, t, cfg.L, cfg.noise_variance)
    pf_emp = float(np.mean(s0[:, t - 1] >= tau))
    assert abs(pf_emp - alpha) < 3 * np.sqrt(alpha * (1 - alpha) / cfg.trials)
    pd_emp = float(np.mean(s1[:, t - 1] >= tau))
    pd_th = float(np.mean(stats.ncx2.sf(tau / cfg.noise_variance, t * cfg.L,
                                        lam[:, t - 1])))
    assert abs(pd_emp - pd_th) < 3 * np.sqrt(pd_th * (1 - pd_th) / cfg.trials) + 0.005
