"""Experiment orchestration: configs, multi-run pipelines, CSV/JSON output.

A config names a system, an observable, the orders q, the run layout and
an estimation mode.  Every (q, run) cell is an independent work unit:
run r uses seed ``master_seed XOR r`` and its trajectories use jumped
sub-streams, so results are reproducible regardless of scheduling.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analytic import (IntervalModel, check_genericity, doubling_branches,
                       dq_self_similar, theta_q_interval)
from .dynamics import make_system, run_seed
from .errors import ConfigError, ObsmatchError
from .evt import (SpectrumResult, aggregate_runs, dq_from_gumbel, estimate_ei,
                  fit_gumbel, hq_from_theta, theta_from_gumbel)
from .matching import MatchConfig, block_maxima, y_process
from .observables import resolve_observable

MODES = ("estimate_dq", "estimate_ei", "analytic", "genericity", "all")

CSV_COLUMNS = ("kind", "system", "observable", "q", "run_count", "mean", "std",
               "n_total", "block_size", "quantile", "K", "seed")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    observable: object  # catalog name or inline mapping
    q_list: tuple[int, ...]
    n_total: int
    system_params: dict = field(default_factory=dict)
    block_size: int = 50_000
    quantile: float = 0.99999
    K: int = 5
    runs: int = 10
    master_seed: int = 0
    metric: str = "sup"
    mode: str = "all"
    noise: float | None = None  # doubling-map jitter; None keeps the system default
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a JSON object")
        data = dict(raw)
        system = data.pop("system", None)
        params = dict(data.pop("system_params", {}) or {})
        if isinstance(system, dict):
            params = dict(system.get("params", {}) or {})
            system = system.get("name")
        if not isinstance(system, str):
            raise ConfigError("system: expected a name (or {name, params})")
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        for key in data:
            if key not in known:
                raise ConfigError(f"{key}: unknown config field")
        try:
            cfg = cls(system=system, system_params=params,
                      q_list=tuple(int(q) for q in data.pop("q_list", ())),
                      **data)
        except TypeError as err:
            raise ConfigError(f"config: {err}") from err
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.q_list:
            raise ConfigError("q_list: must be a nonempty list of integers >= 2")
        if any(q < 2 for q in self.q_list):
            raise ConfigError("q_list: every q must be >= 2")
        if self.runs < 1:
            raise ConfigError("runs: must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode: unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode != "analytic":
            if self.n_total < 1:
                raise ConfigError("n_total: must be >= 1")
            if self.mode in ("estimate_dq", "all") and self.n_total < 2 * self.block_size:
                raise ConfigError(
                    f"n_total: dimension estimation needs n_total >= 2 * block_size "
                    f"({self.n_total} < {2 * self.block_size})")
            if not 0.0 < self.quantile < 1.0:
                raise ConfigError("quantile: must lie in (0, 1)")
            if self.K < 1:
                raise ConfigError("K: must be >= 1")
        if self.metric not in ("sup", "euclidean"):
            raise ConfigError("metric: must be 'sup' or 'euclidean'")
        try:
            make_system(self.system, self._effective_params())
        except ValueError as err:
            raise ConfigError(f"system: {err}") from err
        try:
            resolve_observable(self.observable)
        except (ValueError, KeyError) as err:
            raise ConfigError(f"observable: {err}") from err

    def _effective_params(self) -> dict:
        params = dict(self.system_params)
        if self.system == "doubling" and self.noise is not None:
            params["noise"] = self.noise
        return params

    def to_dict(self) -> dict:
        out = asdict(self)
        out["q_list"] = list(self.q_list)
        return out


# default jitter for long doubling runs; counters mantissa depletion and
# stays far below every threshold scale in use
ESTIMATION_NOISE = 1e-12


def _build(config: ExperimentConfig):
    params = config._effective_params()
    if config.system == "doubling" and "noise" not in params \
            and config.mode not in ("analytic", "genericity"):
        params["noise"] = ESTIMATION_NOISE
    return make_system(config.system, params), resolve_observable(config.observable)


def run_cell(config: ExperimentConfig, q: int, run: int) -> dict:
    """One (q, run) work unit; returns the per-run estimates."""
    system, obs = _build(config)
    seed = run_seed(config.master_seed, run)
    cfg = MatchConfig(q=q, n_total=config.n_total, block_size=config.block_size,
                      metric=config.metric)
    series = y_process(system, obs, cfg, seed)
    out: dict = {"seed": seed}
    if config.mode in ("estimate_dq", "all"):
        params = fit_gumbel(block_maxima(series))
        dq = dq_from_gumbel(params, q)
        out["dq"] = dq
        out["theta_gumbel"] = theta_from_gumbel(params, q, config.block_size, dq)
        out["gumbel_location"] = params.location
        out["gumbel_scale"] = params.scale
    if config.mode in ("estimate_ei", "all"):
        est = estimate_ei(series, config.quantile, config.K)
        out["theta"] = est.theta_hat
        out["p_hat"] = est.p_hat
        out["exceedances"] = est.exceedance_count
        if est.theta_hat < 1.0:
            out["hq"] = hq_from_theta(est.theta_hat, q)
    return out


def _worker(cfg_dict: dict, q: int, run: int):
    config = ExperimentConfig.from_dict(cfg_dict)
    try:
        return q, run, run_cell(config, q, run), None
    except Exception as err:  # noqa: BLE001 - recorded per the partial-failure policy
        return q, run, None, f"{type(err).__name__}: {err}"


def analytic_rows(config: ExperimentConfig) -> list[SpectrumResult]:
    """Oracle values, where a closed form exists for the configured system."""
    rows = []
    system, obs = _build(config)
    for q in config.q_list:
        if config.system == "gasket":
            weights = system.params["weights"]
            rows.append(SpectrumResult(q=q, estimate_mean=dq_self_similar(weights, 0.5, q),
                                       estimate_std=0.0, run_count=1, kind="dq_analytic",
                                       metadata=_meta(config)))
        elif config.system == "doubling" and obs.branches is not None:
            model = IntervalModel(doubling_branches(), obs.branches)
            rows.append(SpectrumResult(q=q, estimate_mean=theta_q_interval(model, q),
                                       estimate_std=0.0, run_count=1, kind="theta_analytic",
                                       metadata=_meta(config)))
            # a piecewise C1 observation of an a.c. measure keeps it a.c.,
            # so the image measure has dimension 1 at every order
            rows.append(SpectrumResult(q=q, estimate_mean=1.0, estimate_std=0.0,
                                       run_count=1, kind="dq_analytic",
                                       metadata=_meta(config)))
    return rows


def _meta(config: ExperimentConfig) -> dict:
    name = config.observable if isinstance(config.observable, str) \
        else config.observable.get("name", "inline")
    return {"system": config.system, "observable": name}


@dataclass
class RunSummary:
    config: ExperimentConfig
    results: dict            # (kind, q) -> SpectrumResult
    per_run: dict            # (q, run) -> estimate dict
    failures: list
    rows: list = field(default_factory=list)
    csv_path: str | None = None
    manifest_path: str | None = None
    wall_time_s: float = 0.0


def run_experiment(config: ExperimentConfig, threads: int | None = None,
                   out_dir: str | None = None, quiet: bool = False) -> RunSummary:
    """Execute every (q, run) cell, aggregate across runs, write CSV + manifest."""
    t0 = time.perf_counter()
    per_run: dict = {}
    failures: list = []
    results: dict = {}

    if config.mode == "genericity":
        return _run_genericity(config, out_dir, quiet, t0)

    if config.mode != "analytic":
        cells = [(q, r) for q in config.q_list for r in range(config.runs)]
        threads = threads or min(len(cells), os.cpu_count() or 1)
        if threads > 1 and len(cells) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(_worker, config.to_dict(), q, r) for q, r in cells]
                outcomes = [f.result() for f in futures]
        else:
            outcomes = [_worker(config.to_dict(), q, r) for q, r in cells]
        for q, r, out, err in sorted(outcomes, key=lambda o: (o[0], o[1])):
            if err is None:
                per_run[(q, r)] = out
            else:
                failures.append({"q": q, "run": r, "error": err})
                if not quiet:
                    print(f"run (q={q}, run={r}) failed: {err}", file=sys.stderr)
        if len(per_run) < (len(cells) + 1) // 2:
            raise RuntimeError(
                f"{len(failures)} of {len(cells)} runs failed; fewer than half succeeded")

        scalar_keys = ("dq", "theta_gumbel", "theta", "hq")
        for q in config.q_list:
            runs_q = [per_run[(q, r)] for r in range(config.runs) if (q, r) in per_run]
            if not runs_q:
                continue
            for key in scalar_keys:
                vals = [o[key] for o in runs_q if key in o]
                if vals:
                    results[(key, q)] = aggregate_runs(vals, kind=key, q=q,
                                                       metadata=_meta(config))
            if runs_q and "p_hat" in runs_q[0]:
                for k in range(1, config.K):
                    vals = [o["p_hat"][k] for o in runs_q]
                    results[(f"p{k}", q)] = aggregate_runs(vals, kind=f"p{k}", q=q,
                                                           metadata=_meta(config))

    if config.mode in ("analytic", "all"):
        for row in analytic_rows(config):
            results[(row.kind, row.q)] = row
        if config.mode == "all":
            for q in config.q_list:
                for est_kind, ana_kind in (("dq", "dq_analytic"), ("theta", "theta_analytic")):
                    est = results.get((est_kind, q))
                    ana = results.get((ana_kind, q))
                    if est is not None and ana is not None:
                        results[(est_kind + "_delta", q)] = SpectrumResult(
                            q=q, estimate_mean=est.estimate_mean - ana.estimate_mean,
                            estimate_std=est.estimate_std, run_count=est.run_count,
                            kind=est_kind + "_delta", metadata=_meta(config))

    summary = RunSummary(config=config, results=results, per_run=per_run,
                         failures=failures)
    summary.rows = [_result_row(config, res) for _, res in sorted(results.items())]
    summary.wall_time_s = time.perf_counter() - t0
    _write_outputs(summary, out_dir, quiet)
    return summary


def _run_genericity(config: ExperimentConfig, out_dir, quiet, t0) -> RunSummary:
    _, obs = _build(config)
    if config.system != "doubling" or obs.branches is None:
        raise ConfigError("mode: genericity checking needs the doubling map "
                          "with a piecewise observable")
    model = IntervalModel(doubling_branches(), obs.branches)
    report = check_genericity(model, sample_count=config.n_total or 10_000,
                              k_max=config.K, seed=config.master_seed)
    summary = RunSummary(config=config, results={}, per_run={}, failures=[])
    summary.wall_time_s = time.perf_counter() - t0
    paths = _output_paths(config, out_dir)
    if paths:
        report_path = paths["manifest"].replace("manifest", "genericity") \
            if "manifest" in paths else os.path.join(paths["dir"], "genericity.json")
        with open(report_path, "w") as fh:
            json.dump({
                "sample_count": report.sample_count,
                "k_max": report.k_max,
                "h1_violation_fraction": report.h1_violation_fraction,
                "h1_witnesses": [list(w) for w in report.h1_witnesses],
                "h2_violation_fractions": list(report.h2_violation_fractions),
                "h2_witnesses": [list(w) for w in report.h2_witnesses],
                "clean": report.clean,
            }, fh, indent=2)
        summary.manifest_path = report_path
        if not quiet:
            print(f"genericity report written to {report_path}")
    summary.results["report"] = report
    return summary


def _result_row(config: ExperimentConfig, res: SpectrumResult) -> dict:
    return {
        "kind": res.kind,
        "system": res.metadata.get("system", config.system),
        "observable": res.metadata.get("observable", ""),
        "q": res.q,
        "run_count": res.run_count,
        "mean": res.estimate_mean,
        "std": res.estimate_std,
        "n_total": config.n_total,
        "block_size": config.block_size,
        "quantile": config.quantile,
        "K": config.K,
        "seed": config.master_seed,
    }


def _output_paths(config: ExperimentConfig, out_dir: str | None) -> dict:
    outputs = dict(config.outputs or {})
    if out_dir:
        outputs.setdefault("csv", os.path.join(out_dir, "results.csv"))
        outputs.setdefault("manifest", os.path.join(out_dir, "manifest.json"))
        outputs["csv"] = os.path.join(out_dir, os.path.basename(outputs["csv"]))
        outputs["manifest"] = os.path.join(out_dir, os.path.basename(outputs["manifest"]))
        outputs["dir"] = out_dir
    elif outputs:
        outputs.setdefault("dir", os.path.dirname(outputs.get("csv", ".")) or ".")
    return outputs


def _write_outputs(summary: RunSummary, out_dir: str | None, quiet: bool) -> None:
    paths = _output_paths(summary.config, out_dir)
    if not paths:
        return
    os.makedirs(paths.get("dir", "."), exist_ok=True)
    if "csv" in paths:
        emit_results(summary.rows, paths["csv"])
        summary.csv_path = paths["csv"]
        if not quiet:
            print(f"wrote {len(summary.rows)} rows to {paths['csv']}")
    if "manifest" in paths:
        manifest = {
            "config": summary.config.to_dict(),
            "versions": {"obsmatch": __version__, "numpy": np.__version__,
                         "python": sys.version.split()[0]},
            "wall_time_s": summary.wall_time_s,
            "created_unix": time.time(),
            "per_run_seeds": {str(r): run_seed(summary.config.master_seed, r)
                              for r in range(summary.config.runs)},
            "failures": summary.failures,
            "csv": summary.csv_path,
        }
        with open(paths["manifest"], "w") as fh:
            json.dump(manifest, fh, indent=2)
        summary.manifest_path = paths["manifest"]


def _format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_results(rows, path, append: bool = False) -> None:
    """Write result rows as CSV; floats carry 17 significant digits."""
    try:
        new_file = not (append and os.path.exists(path) and os.path.getsize(path) > 0)
        with open(path, "a" if append else "w") as fh:
            if new_file:
                fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_format_value(row[c]) for c in CSV_COLUMNS) + "\n")
    except OSError as err:
        raise ObsmatchError(f"cannot write results to {path}: {err}") from err


_INT_COLUMNS = {"q", "run_count", "n_total", "block_size", "K", "seed"}
_FLOAT_COLUMNS = {"mean", "std", "quantile"}


def parse_results(path) -> list[dict]:
    """Read back a results CSV into typed row dictionaries."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != list(CSV_COLUMNS):
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row = dict(zip(CSV_COLUMNS, parts))
            for col in _INT_COLUMNS:
                row[col] = int(row[col])
            for col in _FLOAT_COLUMNS:
                row[col] = float(row[col])
            rows.append(row)
    return rows


def replay(manifest_path: str, threads: int | None = None,
           out_dir: str | None = None, quiet: bool = False) -> RunSummary:
    """Re-run an experiment from its manifest; reproduces the CSV bit for bit."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    config = ExperimentConfig.from_dict(manifest["config"])
    return run_experiment(config, threads=threads, out_dir=out_dir, quiet=quiet)


def _load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err}") from err
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="obsmatch",
        description="Estimate image-measure dimensions and extremal indices "
                    "from matching statistics of observed trajectories.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_arg="config"):
        p.add_argument(config_arg, help="JSON experiment config")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's master_seed")
        p.add_argument("--quiet", action="store_true")

    for name, help_text in (("run", "run the config's mode"),
                            ("analytic", "evaluate oracles only"),
                            ("genericity", "check the twin conditions"),
                            ("validate", "validate a config and exit")):
        add_common(sub.add_parser(name, help=help_text))
    rp = sub.add_parser("replay", help="re-run an experiment from its manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out-dir", default=None)
    rp.add_argument("--threads", type=int, default=None)
    rp.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            replay(args.manifest, threads=args.threads, out_dir=args.out_dir,
                   quiet=args.quiet)
            return EXIT_OK
        config = _load_config(args.config)
        if args.seed is not None:
            config = ExperimentConfig.from_dict(
                {**config.to_dict(), "master_seed": args.seed})
        if args.command == "validate":
            if not args.quiet:
                print(f"{args.config}: valid ({config.mode} mode, "
                      f"q={list(config.q_list)}, runs={config.runs})")
            return EXIT_OK
        if args.command == "analytic":
            config = ExperimentConfig.from_dict({**config.to_dict(), "mode": "analytic"})
        elif args.command == "genericity":
            config = ExperimentConfig.from_dict({**config.to_dict(), "mode": "genericity"})
        summary = run_experiment(config, threads=args.threads,
                                 out_dir=args.out_dir, quiet=args.quiet)
        if not args.quiet:
            for row in summary.rows:
                print(f"{row['kind']} q={row['q']}: mean={row['mean']:.6g} "
                      f"std={row['std']:.3g} (runs={row['run_count']})")
        return EXIT_OK
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ObsmatchError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
