"""Walk-forward Monte Carlo harness and the preset experiment battery.

One trial draws T observations from the true (mu, Sigma), forms the ridged
sample covariance, rebuilds the cluster tree from its correlation, allocates
every configured method, and scores the weights under the true moments.
Aggregation is a deterministic reduction keyed by trial index, so running
trials across worker threads cannot change any number. Diagnostic presets
(recovery identities, direction ladders, sweep counts, trajectories) share
the same table/export machinery.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import baselines, signal_trees
from .analysis import kappa_eff, trajectory
from .core import (
    CovarianceMatrix,
    Signal,
    WeightVector,
    kappa,
    markowitz_direct,
    to_correlation,
)
from .dendrogram import Dendrogram, build_tree
from .errors import ParameterError, SchurBreakdownError
from .metrics import dir_diag, dir_error, gross_leverage, sharpe, signed_cosine
from .solver import crisp_solve, sweeps_to_tolerance
from .synthetic import (
    DEFAULT_RIDGE,
    RegimeSpec,
    SignalSpec,
    gen_regime,
    gen_signal,
    sample_cov,
    sample_mean,
    sample_returns,
    sector_labels,
    worst_case_mu,
)

METHOD_IDS = (
    "one-over-n",
    "hrp",
    "cotton",
    "hrp-mu",
    "hsp",
    "hrp-sigma-mu",
    "crisp",
    "markowitz",
    "a1",
    "a2",
)

# volatility blowup relative to the oracle minimum-variance level that flags
# a trial as unstable (the dagger convention of the result tables)
INSTABILITY_VOL_MULTIPLE = 5.0


@dataclass(frozen=True)
class MethodSpec:
    """One allocator configuration: method id plus gamma / sweep budget."""

    method: str
    gamma: float = 0.5
    sweeps: int = 100

    def __post_init__(self):
        if self.method not in METHOD_IDS:
            raise ParameterError(f"unknown method id {self.method!r}")

    @property
    def key(self) -> tuple:
        return (self.method, self.gamma, self.sweeps)

    def label(self) -> str:
        if self.method in ("one-over-n", "hrp", "markowitz", "hsp"):
            return self.method
        return f"{self.method} g={self.gamma:g}"


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully populated experiment recipe."""

    name: str
    regime: RegimeSpec
    signal: SignalSpec
    methods: tuple[MethodSpec, ...] = ()
    t_values: tuple[int, ...] = (120,)
    trials: int = 40
    mu_estimator: str = "oracle"  # oracle | sample_mean | ic_noise
    seed: int = 42
    ridge: float = DEFAULT_RIDGE
    kind: str = "monte_carlo"
    ic: float = 0.05  # used only by the ic_noise estimator

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if self.mu_estimator not in ("oracle", "sample_mean", "ic_noise"):
            raise ParameterError(f"unknown mu estimator {self.mu_estimator!r}")


@dataclass(frozen=True)
class TrialOutcome:
    sharpe: float
    signed_cos: float
    leverage: float
    oos_vol: float
    unstable: bool


@dataclass(frozen=True)
class TrialRecord:
    t: int
    trial_index: int
    outcomes: dict


@dataclass(frozen=True)
class CellResult:
    """Aggregate of one (method, gamma, T) cell."""

    method: str
    gamma: float
    t: int
    trials: int
    mean_sharpe: float
    std_sharpe: float
    mean_cos: float
    frac_neg_cos: float
    mean_leverage: float
    instability: int


@dataclass(frozen=True)
class ExperimentTable:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    tables: tuple[ExperimentTable, ...]
    cells: tuple[CellResult, ...] = ()
    records: tuple[TrialRecord, ...] = ()


# ---------------------------------------------------------------------------
# Allocation dispatch and scoring
# ---------------------------------------------------------------------------


def allocate(
    m: MethodSpec,
    sigma: CovarianceMatrix,
    mu: Signal,
    tree: Optional[Dendrogram],
) -> WeightVector:
    """Run one configured allocator on an estimated (Sigma, mu, tree)."""
    if m.method == "one-over-n":
        return baselines.equal_weight(sigma.n)
    if m.method == "hrp":
        return baselines.hrp(sigma, tree)
    if m.method == "cotton":
        return baselines.cotton(sigma, tree, m.gamma)
    if m.method == "hrp-mu":
        return signal_trees.hrp_mu(sigma, mu, tree, m.gamma)
    if m.method == "hsp":
        return signal_trees.hsp(sigma, mu, tree)
    if m.method == "hrp-sigma-mu":
        return signal_trees.hrp_sigma_mu(sigma, mu, tree, m.gamma)
    if m.method == "crisp":
        ordering = tree.leaf_order if tree is not None else None
        return crisp_solve(sigma, mu, m.gamma, p_max=m.sweeps, ordering=ordering).weights
    if m.method == "markowitz":
        return markowitz_direct(sigma, mu)
    if m.method == "a1":
        return baselines.a1_sum_norm_mvo(sigma, mu, tree, m.gamma)
    if m.method == "a2":
        return baselines.a2_flat_ivp_tree(sigma, mu, tree, m.gamma)
    raise ParameterError(f"unknown method id {m.method!r}")


@dataclass(frozen=True)
class _Context:
    sigma_true: CovarianceMatrix
    mu_true: Signal
    sectors: np.ndarray
    w_star: np.ndarray
    oracle_minvar_vol: float
    minvar_mode: bool


def _make_context(spec: ExperimentSpec) -> _Context:
    sigma_true = gen_regime(spec.regime)
    sectors = sector_labels(spec.regime.n, spec.regime.sectors)
    mu_true = gen_signal(spec.signal, spec.regime.n, sectors=sectors, sigma=sigma_true)
    w_star = markowitz_direct(sigma_true, mu_true).values
    w_mv = baselines.direct_minvar(sigma_true).values
    w_mv = w_mv / w_mv.sum()
    oracle_vol = float(np.sqrt(w_mv @ sigma_true.entries @ w_mv))
    return _Context(
        sigma_true=sigma_true,
        mu_true=mu_true,
        sectors=sectors,
        w_star=w_star,
        oracle_minvar_vol=oracle_vol,
        minvar_mode=spec.signal.kind == "ones",
    )


def _score(ctx: _Context, w: WeightVector) -> TrialOutcome:
    v = w.values
    s_true = ctx.sigma_true.entries
    total = float(v.sum())
    if total == 0.0:
        return TrialOutcome(math.nan, math.nan, math.nan, math.inf, True)
    v_sum1 = v / total
    vol = float(np.sqrt(max(v_sum1 @ s_true @ v_sum1, 0.0)))
    if ctx.minvar_mode:
        sr = 1.0 / vol if vol > 0.0 else math.inf
    else:
        sr = sharpe(v, ctx.sigma_true, ctx.mu_true)
    lev = gross_leverage(v if w.norm_tag != "raw" else v_sum1)
    cos = signed_cosine(v, ctx.w_star)
    unstable = vol > INSTABILITY_VOL_MULTIPLE * ctx.oracle_minvar_vol
    return TrialOutcome(sr, cos, lev, vol, unstable)


def _run_trial(ctx: _Context, spec: ExperimentSpec, t: int, trial_index: int) -> TrialRecord:
    seed = np.random.SeedSequence([spec.seed, t, trial_index])
    returns = sample_returns(ctx.sigma_true, ctx.mu_true, t, seed)
    sigma_hat = sample_cov(returns, ridge=spec.ridge)
    if spec.mu_estimator == "oracle":
        mu_hat = ctx.mu_true
    elif spec.mu_estimator == "sample_mean":
        mu_hat = sample_mean(returns)
    else:  # ic_noise: true signal plus noise sized to the information coefficient
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, t, trial_index, 7]))
        scale = float(np.std(ctx.mu_true.values))
        noise_sd = scale * math.sqrt((1.0 - spec.ic**2) / spec.ic**2)
        mu_hat = Signal(ctx.mu_true.values + noise_sd * rng.standard_normal(ctx.mu_true.n))
    tree = build_tree(to_correlation(sigma_hat), "ward")

    outcomes = {}
    for m in spec.methods:
        try:
            w = allocate(m, sigma_hat, mu_hat, tree)
            outcomes[m.key] = _score(ctx, w)
        except SchurBreakdownError:
            outcomes[m.key] = TrialOutcome(math.nan, math.nan, math.nan, math.inf, True)
    return TrialRecord(t=t, trial_index=trial_index, outcomes=outcomes)


def run_trial(spec: ExperimentSpec, trial_index: int, t: Optional[int] = None) -> TrialRecord:
    """One full trial, reproducible from (spec.seed, t, trial_index) alone."""
    ctx = _make_context(spec)
    return _run_trial(ctx, spec, t if t is not None else spec.t_values[0], trial_index)


def _aggregate(spec: ExperimentSpec, records: list[TrialRecord]) -> list[CellResult]:
    cells: list[CellResult] = []
    for m in sorted(spec.methods, key=lambda s: s.key):
        for t in sorted(set(spec.t_values)):
            outs = [r.outcomes[m.key] for r in records if r.t == t]
            good = [o for o in outs if not math.isnan(o.sharpe)]
            shs = np.array([o.sharpe for o in good])
            coss = np.array([o.signed_cos for o in good])
            levs = np.array([o.leverage for o in good])
            cells.append(
                CellResult(
                    method=m.method,
                    gamma=m.gamma,
                    t=t,
                    trials=len(outs),
                    mean_sharpe=float(shs.mean()) if len(good) else math.nan,
                    std_sharpe=float(shs.std(ddof=1)) if len(good) > 1 else 0.0,
                    mean_cos=float(coss.mean()) if len(good) else math.nan,
                    frac_neg_cos=float((coss < 0).mean()) if len(good) else math.nan,
                    mean_leverage=float(levs.mean()) if len(good) else math.nan,
                    instability=sum(1 for o in outs if o.unstable),
                )
            )
    return cells


def _cells_table(name: str, cells: list[CellResult]) -> ExperimentTable:
    cols = (
        "method",
        "gamma",
        "t",
        "trials",
        "mean_sharpe",
        "std_sharpe",
        "mean_cos",
        "frac_neg_cos",
        "mean_leverage",
        "instability",
    )
    rows = tuple(
        (
            c.method,
            c.gamma,
            c.t,
            c.trials,
            c.mean_sharpe,
            c.std_sharpe,
            c.mean_cos,
            c.frac_neg_cos,
            c.mean_leverage,
            c.instability,
        )
        for c in cells
    )
    return ExperimentTable(name=name, columns=cols, rows=rows)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentResult:
    """Execute the experiment; trials are parallel-safe, aggregation ordered."""
    if spec.kind != "monte_carlo":
        runner = _DIAGNOSTIC_RUNNERS.get(spec.kind)
        if runner is None:
            raise ParameterError(f"unknown experiment kind {spec.kind!r}")
        return runner(spec)

    ctx = _make_context(spec)
    work = [(t, i) for t in spec.t_values for i in range(spec.trials)]
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_run_trial, ctx, spec, t, i): (t, i) for (t, i) in work
            }
            records_map = {}
            for fut in concurrent.futures.as_completed(futures):
                t, i = futures[fut]
                records_map[(t, i)] = fut.result()
        records = [records_map[key] for key in work]
    else:
        records = [_run_trial(ctx, spec, t, i) for (t, i) in work]

    cells = _aggregate(spec, records)
    table = _cells_table("cells", cells)
    return ExperimentResult(
        spec=spec, tables=(table,), cells=tuple(cells), records=tuple(records)
    )


# ---------------------------------------------------------------------------
# Reference instance with a non-monotone exact shrinkage trajectory
# ---------------------------------------------------------------------------


def nonmonotone_instance() -> tuple[CovarianceMatrix, Signal]:
    """4-asset instance whose exact shrinkage trajectory has an interior bump."""
    sigma = CovarianceMatrix(
        np.array(
            [
                [1.055, 0.078, -0.711, -1.874],
                [0.078, 6.058, -0.379, 1.775],
                [-0.711, -0.379, 1.036, 2.063],
                [-1.874, 1.775, 2.063, 6.477],
            ]
        )
    )
    mu = Signal(np.array([-1.695, 0.271, 0.322, -0.500]))
    return sigma, mu


# ---------------------------------------------------------------------------
# Diagnostic preset runners
# ---------------------------------------------------------------------------


def _sum1(w: WeightVector) -> np.ndarray:
    return w.values / w.values.sum()


def _run_recovery(spec: ExperimentSpec) -> ExperimentResult:
    sigma = gen_regime(spec.regime)
    ones = Signal(np.ones(spec.regime.n))
    tree = build_tree(to_correlation(sigma), "ward")
    w_hrp = _sum1(baselines.hrp(sigma, tree))

    comparisons = [
        ("cotton g=0", baselines.cotton(sigma, tree, 0.0)),
        ("flat-ivp-tree g=0 mu=1", baselines.a2_flat_ivp_tree(sigma, ones, tree, 0.0)),
        ("sum-norm-mvo g=0 mu=1", baselines.a1_sum_norm_mvo(sigma, ones, tree, 0.0)),
        ("hrp-mu g=0 mu=1", signal_trees.hrp_mu(sigma, ones, tree, 0.0)),
        ("hrp-sigma-mu g=0 mu=1", signal_trees.hrp_sigma_mu(sigma, ones, tree, 0.0)),
    ]
    rows = []
    for label, w in comparisons:
        v = _sum1(w)
        rel = float(np.linalg.norm(v - w_hrp) / np.linalg.norm(w_hrp))
        cos = signed_cosine(v, w_hrp)
        verdict = "match" if rel < 1e-12 else ("approx" if cos > 0.98 else "differ")
        rows.append((label, rel, cos, verdict))
    table = ExperimentTable("recovery", ("comparison", "rel_diff", "cos", "verdict"), tuple(rows))
    return ExperimentResult(spec=spec, tables=(table,))


def _run_minvar_direction(spec: ExperimentSpec) -> ExperimentResult:
    sigma = gen_regime(spec.regime)
    ones = Signal(np.ones(spec.regime.n))
    tree = build_tree(to_correlation(sigma), "ward")
    target = markowitz_direct(sigma, ones).values
    gammas = (0.0, 0.3, 0.5, 0.7, 1.0)
    rows = []
    for g in gammas:
        entries = {
            "cotton": baselines.cotton(sigma, tree, g).values,
            "crisp_p200": crisp_solve(
                sigma, ones, g, p_max=200, eps=1e-300, ordering=tree.leaf_order
            ).weights.values,
            "flat_ivp_tree": baselines.a2_flat_ivp_tree(sigma, ones, tree, g).values,
            "hrp_mu": signal_trees.hrp_mu(sigma, ones, tree, g).values,
            "sum_norm_mvo": baselines.a1_sum_norm_mvo(sigma, ones, tree, g).values,
        }
        rows.append((g, *(dir_error(v, target) for v in entries.values())))
    cols = ("gamma", "cotton", "crisp_p200", "flat_ivp_tree", "hrp_mu", "sum_norm_mvo")
    return ExperimentResult(spec=spec, tables=(ExperimentTable("minvar_direction", cols, tuple(rows)),))


def _run_graduated(spec: ExperimentSpec) -> ExperimentResult:
    n = spec.regime.n
    panels = [
        ("base_gaussian", RegimeSpec("block_sector", n=n, seed=spec.seed), SignalSpec("gaussian", seed=7)),
        ("factor_k3", RegimeSpec("factor", n=n, k=3, seed=spec.seed), SignalSpec("gaussian", seed=7)),
        ("hedged", RegimeSpec("hedged_tight_blocks", n=n, seed=spec.seed), SignalSpec("gaussian", seed=7)),
        ("hedged_worst_mu", RegimeSpec("hedged_tight_blocks", n=n, seed=spec.seed), SignalSpec("worst_case", restarts=8)),
    ]
    rows = []
    for label, regime, sig in panels:
        sigma = gen_regime(regime)
        sectors = sector_labels(regime.n, regime.sectors)
        mu = gen_signal(sig, regime.n, sectors=sectors, sigma=sigma)
        tree = build_tree(to_correlation(sigma), "ward")
        target = markowitz_direct(sigma, mu).values
        row = [label, kappa(to_correlation(sigma)), dir_diag(sigma, mu)]
        for g in (0.0, 1.0):
            row.append(dir_error(baselines.a1_sum_norm_mvo(sigma, mu, tree, g).values, target))
        for g in (0.0, 1.0):
            w = crisp_solve(sigma, mu, g, p_max=200, eps=1e-300, ordering=tree.leaf_order)
            row.append(dir_error(w.weights.values, target))
        rows.append(tuple(row))
    cols = (
        "panel",
        "kappa_c",
        "dir_diag",
        "sum_norm_mvo_g0",
        "sum_norm_mvo_g1",
        "crisp_p200_g0",
        "crisp_p200_g1",
    )
    return ExperimentResult(spec=spec, tables=(ExperimentTable("graduated", cols, tuple(rows)),))


def _run_worst_case(spec: ExperimentSpec) -> ExperimentResult:
    n = spec.regime.n
    cases = [
        ("hedged", RegimeSpec("hedged_tight_blocks", n=n, seed=spec.seed)),
        ("hedged_tighter", RegimeSpec("hedged_tight_blocks", n=n, seed=spec.seed + 1, sectors=4)),
    ]
    rows = []
    for label, regime in cases:
        sigma = gen_regime(regime)
        mu, val = worst_case_mu(sigma, restarts=spec.signal.restarts, seed=spec.seed)
        eigs, vecs = np.linalg.eigh(sigma.entries)
        v_min = vecs[:, 0]
        cos_min = abs(float(mu.values @ v_min))
        rows.append((label, kappa(sigma.entries), kappa(to_correlation(sigma)), val, cos_min))
    cols = ("case", "kappa_sigma", "kappa_c", "dir_diag", "cos_mu_vmin")
    return ExperimentResult(spec=spec, tables=(ExperimentTable("worst_case", cols, tuple(rows)),))


def _run_sweep_rate(spec: ExperimentSpec) -> ExperimentResult:
    sigma = gen_regime(spec.regime)
    corr_eigs = to_correlation(sigma).eigenvalues
    gammas = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0)
    n_signals = 5
    rows = []
    for g in gammas:
        counts = []
        for s in range(n_signals):
            mu = gen_signal(SignalSpec("gaussian", seed=100 + s), spec.regime.n)
            counts.append(sweeps_to_tolerance(sigma, mu, g, 1e-10).sweeps)
        rows.append((g, kappa_eff(corr_eigs, g), float(np.mean(counts))))
    cols = ("gamma", "kappa_eff", "mean_sweeps_to_1e-10")
    return ExperimentResult(spec=spec, tables=(ExperimentTable("sweep_rate", cols, tuple(rows)),))


def _run_trajectory(spec: ExperimentSpec) -> ExperimentResult:
    sigma, mu = nonmonotone_instance()
    grid = np.array([0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0])
    points = trajectory(sigma, mu, grid, p=200)
    rows = tuple((p.gamma, p.dir_exact, p.dir_finite_sweep, p.dir_slack) for p in points)
    cols = ("gamma", "dir_exact", "dir_finite_sweep", "dir_slack")
    return ExperimentResult(spec=spec, tables=(ExperimentTable("trajectory", cols, rows),))


def _run_adaptive_calibration(spec: ExperimentSpec) -> ExperimentResult:
    n = spec.regime.n
    regimes = [
        ("block", RegimeSpec("block_sector", n=n, seed=spec.seed)),
        ("equicorr", RegimeSpec("equicorr", n=n, rho=0.6, seed=spec.seed)),
    ]
    t_over_n = (0.6, 2.0)
    ics = (0.05, 0.10)
    grid = np.linspace(0.0, 1.0, 11)
    rows = []
    for regime_label, regime in regimes:
        kappa_c = kappa(to_correlation(gen_regime(regime)))
        for ratio in t_over_n:
            t = max(int(round(ratio * n)), 3)
            for ic in ics:
                sub = replace(
                    spec,
                    regime=regime,
                    signal=SignalSpec("gaussian", seed=11),
                    methods=tuple(MethodSpec("crisp", gamma=float(g)) for g in grid),
                    t_values=(t,),
                    mu_estimator="ic_noise",
                    ic=ic,
                    kind="monte_carlo",
                )
                res = run_experiment(sub)
                sharpes = {c.gamma: c.mean_sharpe for c in res.cells}
                best_gamma = max(sharpes, key=sharpes.get)
                peak = sharpes[best_gamma]
                plateau = np.mean([1.0 if sharpes[g] >= 0.98 * peak else 0.0 for g in sharpes])
                nsr = kappa_c**2 * n / (t * ic**2)
                rows.append(
                    (regime_label, t, ic, nsr, best_gamma, float(plateau), sharpes[0.5])
                )
    cols = ("regime", "t", "ic", "nsr", "gamma_star_empirical", "plateau_width", "sharpe_at_g0.5")
    return ExperimentResult(spec=spec, tables=(ExperimentTable("adaptive_calibration", cols, tuple(rows)),))


def _run_sweep_regularization(spec: ExperimentSpec) -> ExperimentResult:
    gammas = (0.3, 0.5, 0.7, 1.0)
    sweeps = (1, 5, 10, 50, 100, 500)
    rows = []
    for g in gammas:
        for p in sweeps:
            sub = replace(
                spec,
                methods=(MethodSpec("crisp", gamma=g, sweeps=p),),
                kind="monte_carlo",
            )
            res = run_experiment(sub)
            for c in res.cells:
                rows.append((g, p, c.t, c.mean_sharpe, c.std_sharpe))
    cols = ("gamma", "sweeps", "t", "mean_sharpe", "std_sharpe")
    return ExperimentResult(
        spec=spec, tables=(ExperimentTable("sweep_regularization", cols, tuple(rows)),)
    )


_DIAGNOSTIC_RUNNERS: dict[str, Callable[[ExperimentSpec], ExperimentResult]] = {
    "recovery": _run_recovery,
    "minvar_direction": _run_minvar_direction,
    "graduated": _run_graduated,
    "worst_case": _run_worst_case,
    "sweep_rate": _run_sweep_rate,
    "trajectory": _run_trajectory,
    "adaptive_calibration": _run_adaptive_calibration,
    "sweep_regularization": _run_sweep_regularization,
}


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

PRESET_NAMES = (
    "recovery",
    "minvar_direction",
    "graduated",
    "worst_case",
    "sweep_rate",
    "trajectory",
    "oos_sensitivity",
    "oos_structural",
    "oos_minvar",
    "sweep_regularization",
    "adaptive_calibration",
)


def preset(name: str, full: bool = False, seed: int = 42) -> ExperimentSpec:
    """Named experiment recipe at desk scale; ``full`` restores larger runs."""
    base100 = RegimeSpec("block_sector", n=100, seed=seed)
    base200 = RegimeSpec("block_sector", n=200, seed=seed)
    ones = SignalSpec("ones")
    gauss = SignalSpec("gaussian", seed=7)
    tilt = SignalSpec("sector_tilt")

    if name == "recovery":
        return ExperimentSpec(name, base200, ones, kind="recovery", seed=seed)
    if name == "minvar_direction":
        return ExperimentSpec(name, base200, ones, kind="minvar_direction", seed=seed)
    if name == "graduated":
        return ExperimentSpec(name, base200, gauss, kind="graduated", seed=seed)
    if name == "worst_case":
        return ExperimentSpec(
            name,
            RegimeSpec("hedged_tight_blocks", n=100, seed=seed),
            SignalSpec("worst_case", restarts=32 if full else 16),
            kind="worst_case",
            seed=seed,
        )
    if name == "sweep_rate":
        return ExperimentSpec(name, base100, gauss, kind="sweep_rate", seed=seed)
    if name == "trajectory":
        return ExperimentSpec(name, base100, gauss, kind="trajectory", seed=seed)

    if name == "oos_sensitivity":
        methods = (
            MethodSpec("one-over-n"),
            MethodSpec("hrp"),
            MethodSpec("markowitz"),
            MethodSpec("hrp-mu", 0.5),
            MethodSpec("hrp-mu", 1.0),
            MethodSpec("hrp-sigma-mu", 0.5),
            MethodSpec("hrp-sigma-mu", 1.0),
            MethodSpec("crisp", 0.3),
            MethodSpec("crisp", 0.5),
            MethodSpec("crisp", 0.7),
            MethodSpec("crisp", 1.0),
        )
        return ExperimentSpec(
            name,
            base100,
            gauss,
            methods=methods,
            t_values=(120,),
            trials=80 if full else 40,
            seed=seed,
        )
    if name == "oos_structural":
        methods = (
            MethodSpec("one-over-n"),
            MethodSpec("hrp"),
            MethodSpec("markowitz"),
            MethodSpec("hrp-mu", 1.0),
            MethodSpec("hrp-sigma-mu", 0.5),
            MethodSpec("hrp-sigma-mu", 1.0),
            MethodSpec("crisp", 0.5),
            MethodSpec("crisp", 0.7),
            MethodSpec("crisp", 1.0),
        )
        return ExperimentSpec(
            name,
            base100,
            tilt,
            methods=methods,
            t_values=(60, 120, 240),
            trials=80 if full else 40,
            seed=seed,
        )
    if name == "oos_minvar":
        methods = (
            MethodSpec("one-over-n"),
            MethodSpec("hrp"),
            MethodSpec("cotton", 0.5),
            MethodSpec("cotton", 0.7),
            MethodSpec("cotton", 1.0),
            MethodSpec("hrp-mu", 1.0),
            MethodSpec("hrp-sigma-mu", 1.0),
            MethodSpec("crisp", 0.5),
            MethodSpec("crisp", 0.7),
            MethodSpec("crisp", 1.0),
            MethodSpec("markowitz"),
        )
        return ExperimentSpec(
            name,
            base100,
            ones,
            methods=methods,
            t_values=(60, 120, 240, 500),
            trials=80 if full else 40,
            seed=seed,
        )
    if name == "sweep_regularization":
        return ExperimentSpec(
            name,
            base100,
            gauss,
            t_values=(60, 200),
            trials=200 if full else 40,
            mu_estimator="ic_noise",
            ic=0.05,
            kind="sweep_regularization",
            seed=seed,
        )
    if name == "adaptive_calibration":
        return ExperimentSpec(
            name,
            RegimeSpec("block_sector", n=100 if full else 60, seed=seed),
            gauss,
            trials=100 if full else 20,
            kind="adaptive_calibration",
            seed=seed,
        )
    raise ParameterError(f"unknown preset {name!r}; valid: {', '.join(PRESET_NAMES)}")


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.6g}"
    return str(x)


def export(table: ExperimentTable, format: str = "csv") -> bytes:
    """Serialize a table: header row, six significant digits, stable order."""
    if format not in ("csv", "tsv", "text"):
        raise ParameterError(f"unknown export format {format!r}")
    if format in ("csv", "tsv"):
        buf = io.StringIO()
        writer = csv.writer(buf, delimiter="," if format == "csv" else "\t", lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_fmt(x) for x in row])
        return buf.getvalue().encode("utf-8")
    widths = [
        max(len(str(c)), *(len(_fmt(r[i])) for r in table.rows)) if table.rows else len(str(c))
        for i, c in enumerate(table.columns)
    ]
    lines = ["  ".join(str(c).ljust(widths[i]) for i, c in enumerate(table.columns))]
    for row in table.rows:
        lines.append("  ".join(_fmt(x).ljust(widths[i]) for i, x in enumerate(row)))
    return ("\n".join(lines) + "\n").encode("utf-8")
