"""Monte Carlo experiment driver.

Simulates the detectors under both hypotheses, sweeps empirical thresholds
over quantiles of the null statistics to produce ROC tables, and runs the
planner / first-pick-probability / known-vs-estimated-support experiment
presets. All randomness flows through counter-based substreams of one master
seed, so results do not depend on evaluation order.
"""

import dataclasses
import hashlib
import io
import json
import os
from dataclasses import dataclass

import numpy as np

from . import detector, model, omp, planner

KNOWN_SUPPORT = "known_support"
SOMP = "somp"
DIST1 = "dist1"
DIST2 = "dist2"
ML_IGNORE_SPARSITY = "ml_ignore_sparsity"

ALGORITHMS = (KNOWN_SUPPORT, SOMP, DIST1, DIST2, ML_IGNORE_SPARSITY)

THRESHOLD_GRID_POINTS = 129


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    k: int
    L: int
    c_r: float
    T0: int
    noise_variance: float
    coeff_range: tuple = (3.0, 4.0)
    trials: int = 2000
    seed: int = 0
    algorithms: tuple = (SOMP, DIST1, DIST2)
    threshold_policy: str = "sweep"  # sweep | exact_alpha | sankaran_alpha
    alpha: float = 0.1
    redraw_sensing: bool = True
    redraw_signals: bool = True

    @property
    def M(self):
        return int(round(self.c_r * self.N))

    def validate(self):
        def fail(path, msg):
            raise ConfigError(f"{path}: {msg}")

        if not (0.0 < self.c_r < 1.0):
            fail("c_r", f"must lie in (0, 1), got {self.c_r}")
        if not (1 <= self.k < self.N):
            fail("k", f"must satisfy 1 <= k < N, got k={self.k}, N={self.N}")
        if self.L < 1:
            fail("L", f"must be >= 1, got {self.L}")
        if not (1 <= self.T0 <= min(self.M, self.N)):
            fail("T0", f"must satisfy 1 <= T0 <= min(M, N), got {self.T0}")
        if self.T0 > self.k:
            fail("T0", f"must satisfy T0 <= k, got T0={self.T0}, k={self.k}")
        if self.noise_variance <= 0:
            fail("noise_variance", f"must be positive, got {self.noise_variance}")
        a, b = self.coeff_range
        if not (0 < a <= b):
            fail("coeff_range", f"must satisfy 0 < a <= b, got {self.coeff_range}")
        if self.trials < 1:
            fail("trials", f"must be >= 1, got {self.trials}")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                fail("algorithms", f"unknown algorithm {algo!r}")
        if self.threshold_policy not in ("sweep", "exact_alpha", "sankaran_alpha"):
            fail("threshold_policy", f"unknown policy {self.threshold_policy!r}")
        if not (0.0 < self.alpha < 1.0):
            fail("alpha", f"must lie in (0, 1), got {self.alpha}")
        return self

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown config field")
        d = dict(d)
        for key in ("coeff_range", "algorithms"):
            if key in d and isinstance(d[key], list):
                d[key] = tuple(d[key])
        try:
            cfg = cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None
        return cfg.validate()

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["coeff_range"] = list(self.coeff_range)
        d["algorithms"] = list(self.algorithms)
        return d


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    pf_empirical: float
    pd_empirical: float
    trials: int


MESSAGES_PER_NODE = {
    SOMP: lambda cfg: cfg.M,
    DIST1: lambda cfg: 1,
    DIST2: lambda cfg: cfg.T0 + 1,
    KNOWN_SUPPORT: lambda cfg: 1,
    ML_IGNORE_SPARSITY: lambda cfg: 1,
}


def _trial_statistics(cfg, trial, algorithms):
    """Statistics of every requested algorithm for one trial, under H0 and H1.

    Per-node OMP traces are shared between dist1 and dist2.
    """
    rng = model.substream(cfg.seed, trial)
    support = model.draw_support(cfg.N, cfg.k, rng)
    a, b = cfg.coeff_range
    signals = model.draw_signals(support, cfg.L, a, b, rng)
    sensing = model.draw_sensing(cfg.M, cfg.N, cfg.L, rng)
    obs = {
        model.H0: model.observe(signals, sensing, model.H0, cfg.noise_variance, rng),
        model.H1: model.observe(signals, sensing, model.H1, cfg.noise_variance, rng),
    }

    known_projs = None
    if KNOWN_SUPPORT in algorithms:
        pick = rng.choice(len(support), size=cfg.T0, replace=False)
        subset = model.SupportSet(tuple(support.indices[i] for i in sorted(pick)), cfg.N)
        known_projs = [detector.projector_for_support(sensing.operators[j], subset)
                       for j in range(cfg.L)]

    out = {}
    aux = {"support": support, "signals": signals, "sensing": sensing}
    for hyp, o in obs.items():
        stats = {}
        if KNOWN_SUPPORT in algorithms:
            stats[KNOWN_SUPPORT] = detector.statistic(known_projs, o)
        if SOMP in algorithms:
            stats[SOMP] = omp.somp_detect(o, sensing, cfg.T0, 0.0).statistic
        if DIST1 in algorithms or DIST2 in algorithms:
            traces = [omp.omp_select(o.measurements[j], sensing.operators[j], cfg.T0)
                      for j in range(cfg.L)]
            if DIST1 in algorithms:
                s = 0.0
                for j, tr in enumerate(traces):
                    proj = detector.projector_for_support(sensing.operators[j], tr.selected)
                    z = o.measurements[j] @ proj.ortho
                    s += float(z @ z)
                stats[DIST1] = s
            if DIST2 in algorithms:
                fused = omp.fuse_supports([tr.selected for tr in traces], cfg.k)
                s = 0.0
                for j in range(cfg.L):
                    proj = detector.projector_for_support(sensing.operators[j], fused)
                    z = o.measurements[j] @ proj.ortho
                    s += float(z @ z)
                stats[DIST2] = s
        if ML_IGNORE_SPARSITY in algorithms:
            # row-orthonormal B has full row rank, so the ML projector is the
            # identity on the measurement space and the statistic is the energy
            stats[ML_IGNORE_SPARSITY] = float(np.sum(o.measurements ** 2))
        out[hyp] = stats
    if KNOWN_SUPPORT in algorithms:
        aux["known_subset_lambda"] = detector.noncentrality_exact(
            signals, sensing, subset, cfg.noise_variance)
    return out, aux


def simulate(cfg, algorithms=None, collect_lambda=False):
    """Arrays of H0/H1 statistics per algorithm over all trials."""
    cfg.validate()
    algorithms = tuple(algorithms or cfg.algorithms)
    h0 = {a: np.empty(cfg.trials) for a in algorithms}
    h1 = {a: np.empty(cfg.trials) for a in algorithms}
    lambdas = np.empty(cfg.trials) if collect_lambda else None
    for trial in range(cfg.trials):
        stats, aux = _trial_statistics(cfg, trial, algorithms)
        for a in algorithms:
            h0[a][trial] = stats[model.H0][a]
            h1[a][trial] = stats[model.H1][a]
        if collect_lambda:
            lambdas[trial] = aux["known_subset_lambda"]
    return h0, h1, lambdas


def threshold_grid(h0_stats, points=THRESHOLD_GRID_POINTS):
    """Quantiles of the pooled null statistics; strictly increasing."""
    probs = np.linspace(0.001, 0.999, points)
    grid = np.quantile(np.asarray(h0_stats), probs)
    return np.unique(grid)


def roc_from_statistics(h0_stats, h1_stats, grid=None):
    h0_stats = np.asarray(h0_stats)
    h1_stats = np.asarray(h1_stats)
    if grid is None:
        grid = threshold_grid(h0_stats)
    n = len(h0_stats)
    points = []
    for tau in grid:
        pf = float(np.mean(h0_stats >= tau))
        pd = float(np.mean(h1_stats >= tau))
        points.append(RocPoint(float(tau), pf, pd, n))
    return points


def auc(points):
    """Trapezoid area under the empirical ROC, closed at (0,0) and (1,1)."""
    pf = np.array([p.pf_empirical for p in points])
    pd = np.array([p.pd_empirical for p in points])
    order = np.argsort(pf)
    pf = np.concatenate(([0.0], pf[order], [1.0]))
    pd = np.concatenate(([0.0], pd[order], [1.0]))
    return float(np.trapezoid(pd, pf))


def auc_from_statistics(h0_stats, h1_stats):
    return auc(roc_from_statistics(h0_stats, h1_stats))


def bootstrap_auc_se(h0_stats, h1_stats, resamples=100, seed=0):
    """Bootstrap standard error of the ROC AUC (resampling trials)."""
    rng = np.random.default_rng(seed)
    h0_stats = np.asarray(h0_stats)
    h1_stats = np.asarray(h1_stats)
    n = len(h0_stats)
    vals = np.empty(resamples)
    for i in range(resamples):
        idx0 = rng.integers(0, n, size=n)
        idx1 = rng.integers(0, n, size=n)
        vals[i] = auc_from_statistics(h0_stats[idx0], h1_stats[idx1])
    return float(np.std(vals, ddof=1))


def run_roc(cfg):
    """ROC table per selected algorithm.

    Threshold policy ``sweep`` uses null-statistic quantiles; the alpha
    policies additionally record a single calibrated point for the
    known-support detector (the only one with a valid closed-form null law).
    """
    cfg.validate()
    h0, h1, _ = simulate(cfg)
    curves = {}
    for algo in cfg.algorithms:
        if cfg.threshold_policy == "sweep":
            curves[algo] = roc_from_statistics(h0[algo], h1[algo])
        else:
            if cfg.threshold_policy == "exact_alpha":
                tau = detector.threshold_exact(cfg.alpha, cfg.T0, cfg.L, cfg.noise_variance)
            else:
                tau = detector.threshold_sankaran(cfg.alpha, cfg.T0, cfg.L, cfg.noise_variance)
            curves[algo] = roc_from_statistics(h0[algo], h1[algo], grid=np.array([tau]))
    return curves


def run_ml_baseline(cfg):
    """ROC of the sparsity-ignoring energy statistic."""
    cfg = dataclasses.replace(cfg, algorithms=(ML_IGNORE_SPARSITY,))
    return run_roc(cfg)[ML_IGNORE_SPARSITY]


def run_known_support_comparison(cfg):
    """Paired ROC tables: known partial support (random true T0-subset per
    trial) vs the S-OMP estimate of the same size."""
    cfg = dataclasses.replace(cfg, algorithms=(KNOWN_SUPPORT, SOMP))
    h0, h1, _ = simulate(cfg)
    return {
        KNOWN_SUPPORT: roc_from_statistics(h0[KNOWN_SUPPORT], h1[KNOWN_SUPPORT]),
        SOMP: roc_from_statistics(h0[SOMP], h1[SOMP]),
    }


def run_known_support_calibration(cfg, chunk=64):
    """Known-support statistics for every subset size T0 = 1..k in one pass.

    Per trial, the k true indices are randomly ordered and the per-node
    projector bases are QR-factorized once; prefix columns of the Q factor
    then give the statistics of all nested subset sizes simultaneously.
    Work is batched across trials for speed.

    Returns (stat_h0, stat_h1, lam): arrays of shape (trials, k) where column
    t-1 holds the fused statistic (resp. exact noncentrality) for T0 = t.
    """
    cfg.validate()
    k, L, M, N = cfg.k, cfg.L, cfg.M, cfg.N
    a, b = cfg.coeff_range
    sigma = np.sqrt(cfg.noise_variance)
    stat_h0 = np.empty((cfg.trials, k))
    stat_h1 = np.empty((cfg.trials, k))
    lam = np.empty((cfg.trials, k))
    for start in range(0, cfg.trials, chunk):
        size = min(chunk, cfg.trials - start)
        coeffs = np.empty((size, L, N))
        G = np.empty((size, L, M, N))
        n0 = np.empty((size, L, M))
        n1 = np.empty((size, L, M))
        cols = np.empty((size, k), dtype=int)
        for i in range(size):
            rng = model.substream(cfg.seed, start + i)
            support = model.draw_support(N, k, rng)
            signals = model.draw_signals(support, L, a, b, rng)
            coeffs[i] = signals.coefficients
            G[i] = rng.standard_normal((L, M, N))
            n0[i] = rng.standard_normal((L, M))
            n1[i] = rng.standard_normal((L, M))
            cols[i] = support.cols[rng.permutation(k)]
        ops = model.row_orthonormalize(G)
        basis = np.empty((size, L, M, k))
        for i in range(size):
            basis[i] = ops[i][:, :, cols[i]]
        Q, _ = np.linalg.qr(basis.reshape(size * L, M, k))
        Q = Q.reshape(size, L, M, k)
        sig_img = np.einsum("tjmn,tjn->tjm", ops, coeffs)
        y0 = sigma * n0
        y1 = sig_img + sigma * n1
        z0 = np.einsum("tjmk,tjm->tjk", Q, y0)
        z1 = np.einsum("tjmk,tjm->tjk", Q, y1)
        zs = np.einsum("tjmk,tjm->tjk", Q, sig_img)
        sl = slice(start, start + size)
        stat_h0[sl] = np.cumsum(z0 ** 2, axis=2).sum(axis=1)
        stat_h1[sl] = np.cumsum(z1 ** 2, axis=2).sum(axis=1)
        lam[sl] = np.cumsum(zs ** 2, axis=2).sum(axis=1) / cfg.noise_variance
    return stat_h0, stat_h1, lam


def expected_gammas(cfg):
    """Per-node SNRs under the expected coefficient power (a^2+ab+b^2)/3."""
    a, b = cfg.coeff_range
    mean_sq = (a * a + a * b + b * b) / 3.0
    g = cfg.k * mean_sq / cfg.noise_variance
    return tuple([g] * cfg.L)


def theory_inputs(cfg, alpha=None, tau_d=0.9):
    return detector.TheoryInputs(
        k=cfg.k, L=cfg.L, M=cfg.M, N=cfg.N, noise_variance=cfg.noise_variance,
        gammas=expected_gammas(cfg), alpha=alpha if alpha is not None else cfg.alpha,
        tau_d=tau_d)


def run_min_fraction_experiments(cfg, tau_d_grid, alpha_grid, empirical_trials=0):
    """Planner output per (tau_d, alpha) cell, optionally validated by the
    known-support detector with the planner-chosen size.

    Returns rows matching the minfrac.csv schema.
    """
    cfg.validate()
    rows = []
    for tau_d in tau_d_grid:
        for alpha in alpha_grid:
            inputs = theory_inputs(cfg, alpha=alpha, tau_d=tau_d)
            res = planner.solve_min_fraction(inputs)
            pd_emp = ""
            if res.t_hat is not None and empirical_trials > 0:
                sub = dataclasses.replace(cfg, T0=res.t_hat, alpha=alpha,
                                          trials=empirical_trials,
                                          algorithms=(KNOWN_SUPPORT,))
                tau = detector.threshold_exact(alpha, res.t_hat, cfg.L, cfg.noise_variance)
                _, h1_stats, _ = simulate(sub)
                pd_emp = float(np.mean(h1_stats[KNOWN_SUPPORT] >= tau))
            rows.append({
                "tau_d": tau_d, "alpha": alpha, "c_r": cfg.c_r, "k": cfg.k,
                "L": cfg.L, "t_hat": res.t_hat if res.t_hat is not None else "",
                "t_cont": res.t_continuous if res.t_continuous is not None else "",
                "status": res.status,
                "pd_approx": res.pd_at_t_hat if res.pd_at_t_hat is not None else "",
                "pd_empirical": pd_emp,
            })
    return rows


def run_p1_p2(cfg, c_r_values, trials=None):
    """First-iteration success probabilities over a compression-ratio sweep."""
    cfg.validate()
    trials = trials or cfg.trials
    a, b = cfg.coeff_range
    rows = []
    for c_r in c_r_values:
        M = int(round(c_r * cfg.N))
        p1, p2 = omp.estimate_p1_p2(cfg.N, cfg.k, cfg.L, M, a, b,
                                    cfg.noise_variance, trials, cfg.seed)
        rows.append({"c_r": c_r, "P1": p1, "P2": p2, "trials": trials})
    return rows


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def _header_comment(cfg, extra=None):
    meta = {"config": cfg.to_dict()}
    if extra:
        meta.update(extra)
    blob = json.dumps(meta, sort_keys=True)
    digest = hashlib.sha256(blob.encode()).hexdigest()[:16]
    return [f"# {blob}", f"# content_hash={digest}"]


def write_roc_csv(path, curves, cfg):
    lines = _header_comment(cfg, {"messages_per_node": {
        a: MESSAGES_PER_NODE[a](cfg) for a in curves}})
    lines.append("algo,threshold,pf,pd,trials")
    for algo, points in sorted(curves.items()):
        for p in points:
            lines.append(",".join([algo, _fmt(p.threshold), _fmt(p.pf_empirical),
                                   _fmt(p.pd_empirical), str(p.trials)]))
    _write_lines(path, lines)


def write_minfrac_csv(path, rows, cfg):
    lines = _header_comment(cfg)
    cols = ["tau_d", "alpha", "c_r", "k", "L", "t_hat", "t_cont", "status",
            "pd_approx", "pd_empirical"]
    lines.append(",".join(cols))
    for r in rows:
        lines.append(",".join(_fmt(r[c]) if r[c] != "" else "" for c in cols))
    _write_lines(path, lines)


def write_p1p2_csv(path, rows, cfg):
    lines = _header_comment(cfg)
    lines.append("c_r,P1,P2,trials")
    for r in rows:
        lines.append(",".join([_fmt(r["c_r"]), _fmt(r["P1"]), _fmt(r["P2"]),
                               str(r["trials"])]))
    _write_lines(path, lines)


def _write_lines(path, lines):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with io.open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
