"""Command-line front end.

Subcommands: ``allocate`` (one allocation from CSV inputs or a generated
regime, with direction/Sharpe diagnostics against the direct solve),
``experiment`` (named preset battery written as CSV/TSV/text tables),
``trajectory`` (shrinkage-grid direction errors), ``worst-mu`` (adversarial
signal search), and ``gen`` (write a synthetic covariance/signal to CSV).

Covariance files are headerless CSV, N rows by N columns; signals are N x 1.
Flags override an optional ``key = value`` config file, which overrides the
built-in defaults. The CRISP_ALLOC_RESULTS_DIR environment variable overrides
the results root.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import default_gamma_grid, trajectory
from .core import CovarianceMatrix, Signal, markowitz_direct, to_correlation
from .dendrogram import build_tree
from .errors import AllocationError
from .experiments import (
    PRESET_NAMES,
    MethodSpec,
    allocate,
    export,
    nonmonotone_instance,
    preset,
    run_experiment,
)
from .metrics import direction_report, sharpe
from .solver import (
    ConstraintSet,
    FactorModel,
    crisp_projected,
    crisp_solve,
    crisp_solve_stream,
)
from .synthetic import (
    RegimeSpec,
    SignalSpec,
    gen_regime,
    gen_signal,
    sector_labels,
    worst_case_mu,
)

_CLI_METHODS = (
    "one-over-n",
    "hrp",
    "cotton",
    "hrp-mu",
    "hsp",
    "hrp-sigma-mu",
    "crisp",
    "crisp-stream",
    "crisp-projected",
    "markowitz",
    "a1",
    "a2",
)


class CliError(Exception):
    pass


def _read_matrix(path: str) -> np.ndarray:
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                cells = line.split(",")
                try:
                    rows.append([float(c) for c in cells])
                except ValueError as exc:
                    bad = next(i for i, c in enumerate(cells) if not _is_float(c))
                    raise CliError(
                        f"{path}:{lineno}:{bad + 1}: not a number: {cells[bad]!r}"
                    ) from exc
                if len(rows[-1]) != len(rows[0]):
                    raise CliError(f"{path}:{lineno}: ragged row width")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CliError(f"{path}: empty file")
    return np.asarray(rows, dtype=float)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _write_matrix(path: str, m: np.ndarray) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] == 1 and m.shape[1] > 1:
        m = m.T
    lines = [",".join(f"{x:.17g}" for x in row) for row in m]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_kv_spec(text: str) -> tuple[str, dict]:
    """'kind:key=val,key=val' -> (kind, params)."""
    kind, _, rest = text.partition(":")
    params: dict = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise CliError(f"bad spec item {item!r} (want key=value)")
            params[key.strip()] = val.strip()
    return kind.strip(), params


def _regime_from_string(text: str, n: int, seed: int) -> RegimeSpec:
    kind, params = _parse_kv_spec(text)
    aliases = {
        "block": "block_sector",
        "block_sector": "block_sector",
        "factor": "factor",
        "equicorr": "equicorr",
        "spiked": "spiked",
        "hedged": "hedged_tight_blocks",
        "hedged_tight_blocks": "hedged_tight_blocks",
        "wide_vol": "wide_vol",
    }
    if kind not in aliases:
        raise CliError(f"unknown regime {kind!r}; valid: {', '.join(sorted(set(aliases)))}")
    kwargs = {"kind": aliases[kind], "n": n, "seed": seed}
    if "k" in params:
        kwargs["k"] = int(params["k"])
    if "rho" in params:
        kwargs["rho"] = float(params["rho"])
    if "sectors" in params:
        kwargs["sectors"] = int(params["sectors"])
    if aliases[kind] == "wide_vol":
        kwargs["vol_range"] = (0.05, 1.0)
    return RegimeSpec(**kwargs)


def _signal_from_string(text: str, seed: int) -> SignalSpec:
    kind, params = _parse_kv_spec(text)
    aliases = {
        "ones": "ones",
        "gaussian": "gaussian",
        "tilt": "sector_tilt",
        "sector_tilt": "sector_tilt",
        "worst": "worst_case",
        "worst_case": "worst_case",
    }
    if kind not in aliases:
        raise CliError(f"unknown signal {kind!r}; valid: {', '.join(sorted(set(aliases)))}")
    kwargs = {"kind": aliases[kind], "seed": seed}
    if "sigma" in params:
        kwargs["sigma_mu"] = float(params["sigma"])
    if "restarts" in params:
        kwargs["restarts"] = int(params["restarts"])
    return SignalSpec(**kwargs)


def _load_config(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _results_root(args) -> Path:
    env = os.environ.get("CRISP_ALLOC_RESULTS_DIR")
    if env:
        return Path(env)
    return Path(args.out) if args.out else Path("results")


def _build_inputs(args):
    """(sigma, mu, sectors) from CSV paths or a generated regime."""
    if args.cov:
        sigma = CovarianceMatrix(_read_matrix(args.cov))
        sectors = sector_labels(sigma.n, 5)
    elif args.regime:
        spec = _regime_from_string(args.regime, args.n, args.seed)
        sigma = gen_regime(spec)
        sectors = sector_labels(spec.n, spec.sectors)
    else:
        raise CliError("need --cov FILE or --regime SPEC")
    if args.mu:
        mu = Signal(_read_matrix(args.mu).reshape(-1))
        if mu.n != sigma.n:
            raise CliError("signal length does not match covariance size")
    elif args.signal:
        sig = _signal_from_string(args.signal, args.seed)
        mu = gen_signal(sig, sigma.n, sectors=sectors, sigma=sigma)
    else:
        mu = Signal(np.ones(sigma.n))
    return sigma, mu, sectors


def cmd_allocate(args) -> int:
    sigma, mu, sectors = _build_inputs(args)
    tree = build_tree(to_correlation(sigma), "ward")
    if args.method == "crisp-stream":
        k = args.factors
        eigs, vecs = np.linalg.eigh(sigma.entries)
        top = vecs[:, -k:] * np.sqrt(eigs[-k:])
        idio = np.diag(sigma.entries) - (top**2).sum(axis=1)
        fm = FactorModel(top, np.eye(k), np.maximum(idio, 1e-10))
        w = crisp_solve_stream(fm, mu, args.gamma, p_max=args.sweeps, eps=args.eps).weights
    elif args.method == "crisp-projected":
        cs = ConstraintSet(lower=np.zeros(sigma.n), budget=1.0)
        w = crisp_projected(sigma, mu, args.gamma, p=args.sweeps, constraints=cs, eps=args.eps).weights
    elif args.method == "crisp":
        w = crisp_solve(
            sigma, mu, args.gamma, p_max=args.sweeps, eps=args.eps, ordering=tree.leaf_order
        ).weights
    else:
        w = allocate(MethodSpec(args.method, args.gamma, args.sweeps), sigma, mu, tree)

    w_star = markowitz_direct(sigma, mu)
    rep = direction_report(w.values, w_star.values)
    print(f"method: {args.method}  gamma: {args.gamma:g}  n: {sigma.n}")
    print("weights:", " ".join(f"{x:.6g}" for x in w.values))
    print(
        f"dir_error_vs_direct: {rep.dir_error:.6g}  signed_cos: {rep.signed_cosine:.6g}  "
        f"sign_match: {rep.sign_match_fraction:.6g}"
    )
    print(f"sharpe: {sharpe(w.values, sigma, mu):.6g}  sharpe_direct: {sharpe(w_star.values, sigma, mu):.6g}")
    if args.out:
        _write_matrix(args.out, w.values)
        print(f"wrote {args.out}")
    return 0


def cmd_experiment(args) -> int:
    if args.preset not in PRESET_NAMES:
        print(f"unknown preset {args.preset!r}", file=sys.stderr)
        print("valid presets: " + ", ".join(PRESET_NAMES), file=sys.stderr)
        return 2
    spec = preset(args.preset, full=args.full, seed=args.seed)
    if args.trials is not None and spec.kind in (
        "monte_carlo",
        "sweep_regularization",
        "adaptive_calibration",
    ):
        spec = dataclasses.replace(spec, trials=args.trials)
    root = _results_root(args) / args.preset
    try:
        result = run_experiment(spec, jobs=args.jobs)
    except AllocationError as exc:
        root.mkdir(parents=True, exist_ok=True)
        (root / "FAILED.txt").write_text(f"{exc}\n", encoding="utf-8")
        print(f"experiment failed: {exc}; partial results at {root}", file=sys.stderr)
        return 1
    root.mkdir(parents=True, exist_ok=True)
    for table in result.tables:
        path = root / f"{table.name}.{args.format if args.format != 'text' else 'txt'}"
        path.write_bytes(export(table, args.format))
        print(f"wrote {path}")
        for row in table.rows:
            print("  " + " ".join(f"{x:.6g}" if isinstance(x, float) else str(x) for x in row))
    return 0


def cmd_trajectory(args) -> int:
    if args.example == "nonmonotone":
        sigma, mu = nonmonotone_instance()
    else:
        sigma, mu, _ = _build_inputs(args)
    points = trajectory(sigma, mu, default_gamma_grid(args.grid), p=args.sweeps)
    print("gamma dir_exact dir_finite_sweep dir_slack")
    for p in points:
        print(f"{p.gamma:.3f} {p.dir_exact:.6g} {p.dir_finite_sweep:.6g} {p.dir_slack:.6g}")
    if args.out:
        rows = [(p.gamma, p.dir_exact, p.dir_finite_sweep, p.dir_slack) for p in points]
        _write_matrix(args.out, np.array(rows))
        print(f"wrote {args.out}")
    return 0


def cmd_worst_mu(args) -> int:
    sigma, _, _ = _build_inputs(args)
    mu, val = worst_case_mu(sigma, restarts=args.restarts, seed=args.seed)
    print(f"dir_diag: {val:.6g}")
    print("mu:", " ".join(f"{x:.6g}" for x in mu.values))
    if args.out:
        _write_matrix(args.out, mu.values)
        print(f"wrote {args.out}")
    return 0


def cmd_gen(args) -> int:
    spec = _regime_from_string(args.regime, args.n, args.seed)
    sigma = gen_regime(spec)
    if not args.out:
        raise CliError("gen needs --out FILE")
    _write_matrix(args.out, sigma.entries)
    print(f"wrote {args.out} ({sigma.n} x {sigma.n})")
    if args.signal:
        sig = _signal_from_string(args.signal, args.seed)
        mu = gen_signal(sig, sigma.n, sectors=sector_labels(spec.n, spec.sectors), sigma=sigma)
        mu_path = args.mu_out or (str(Path(args.out).with_suffix("")) + "_mu.csv")
        _write_matrix(mu_path, mu.values)
        print(f"wrote {mu_path} ({sigma.n} x 1)")
    return 0


def _add_common_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cov", help="covariance CSV (N x N, headerless)")
    p.add_argument("--mu", help="signal CSV (N x 1)")
    p.add_argument("--regime", help="regime spec, e.g. block or factor:k=3")
    p.add_argument("--signal", help="signal spec, e.g. gaussian:sigma=0.02")
    p.add_argument("--n", type=int, default=100, help="assets for generated regimes")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="optional key = value config file")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", help="output path (or results root for experiments)")
    common.add_argument("--format", choices=("csv", "tsv", "text"), default="csv")
    common.add_argument("--jobs", type=int, default=1, help="experiment worker threads")

    parser = argparse.ArgumentParser(
        prog="crisp-alloc",
        description="Hierarchical and iterative shrinkage portfolio allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_alloc = sub.add_parser("allocate", help="run one allocation", parents=[common])
    _add_common_io(p_alloc)
    p_alloc.add_argument("--method", choices=_CLI_METHODS, required=True)
    p_alloc.add_argument("--gamma", type=float, default=0.5)
    p_alloc.add_argument("--sweeps", type=int, default=100)
    p_alloc.add_argument("--eps", type=float, default=1e-8)
    p_alloc.add_argument("--factors", type=int, default=3, help="factor count for crisp-stream")
    p_alloc.set_defaults(func=cmd_allocate)

    p_exp = sub.add_parser("experiment", help="run a named experiment preset", parents=[common])
    p_exp.add_argument("preset", help="preset name; see --list via invalid name")
    p_exp.add_argument("--trials", type=int, default=None)
    p_exp.add_argument("--full", action="store_true", help="restore full-scale runs")
    p_exp.set_defaults(func=cmd_experiment)

    p_traj = sub.add_parser("trajectory", help="shrinkage-grid direction errors", parents=[common])
    _add_common_io(p_traj)
    p_traj.add_argument("--example", choices=("nonmonotone",), help="built-in instance")
    p_traj.add_argument("--sweeps", type=int, default=200)
    p_traj.add_argument("--grid", type=int, default=21)
    p_traj.set_defaults(func=cmd_trajectory)

    p_worst = sub.add_parser("worst-mu", help="adversarial signal search", parents=[common])
    _add_common_io(p_worst)
    p_worst.add_argument("--restarts", type=int, default=32)
    p_worst.set_defaults(func=cmd_worst_mu)

    p_gen = sub.add_parser("gen", help="write a synthetic covariance to CSV", parents=[common])
    p_gen.add_argument("--regime", required=True)
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--signal", help="also write a signal")
    p_gen.add_argument("--mu-out", help="signal output path")
    p_gen.set_defaults(func=cmd_gen)

    subparsers = {
        "allocate": p_alloc,
        "experiment": p_exp,
        "trajectory": p_traj,
        "worst-mu": p_worst,
        "gen": p_gen,
    }
    return parser, subparsers


def _typed_defaults(p: argparse.ArgumentParser, cfg: dict) -> dict:
    """Convert config-file strings through each option's declared type."""
    out = {}
    for action in p._actions:
        if action.dest in cfg:
            raw = cfg[action.dest]
            if isinstance(action, argparse._StoreTrueAction):
                out[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    out[action.dest] = action.type(raw)
                except ValueError as exc:
                    raise CliError(f"config value for {action.dest}: {exc}") from exc
            else:
                out[action.dest] = raw
    return out


def _find_config(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    # config precedence: flags > config file > defaults
    cfg_path = _find_config(argv)
    if cfg_path:
        try:
            cfg = _load_config(cfg_path)
            known = set()
            for p_sub in subparsers.values():
                known |= {a.dest for a in p_sub._actions}
            bad = set(cfg) - known
            if bad:
                raise CliError(f"unknown config keys: {', '.join(sorted(bad))}")
            for p_sub in subparsers.values():
                p_sub.set_defaults(**_typed_defaults(p_sub, cfg))
        except CliError as exc:
            print(str(exc), file=sys.stderr)
            return 2
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (CliError, AllocationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
