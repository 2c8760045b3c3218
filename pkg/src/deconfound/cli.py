"""Command-line entry point.

    deconfound generate   --config run.toml --out DIR
    deconfound pcss       --data X.csv --m 1 --out DIR
    deconfound score      --data X.csv --parent-sets sets.json --kind decamfound --out DIR
    deconfound bench      --config task.toml --out DIR
    deconfound mse-report --config grid.toml --out DIR

Every run writes ``manifest.json`` next to its outputs. Exit codes: 0 on
success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bench import TaskSpec, run_task, summarize
from .gp import GpFitError, KernelFactorizationError
from .io import (
    column_names,
    dataset_to_json,
    file_digest,
    load_config,
    read_matrix_csv,
    save_dataset_csv,
    write_json,
    write_matrix_csv,
)
from .pcss import EigenDecompositionError, PcssConfig, max_mse, pcss
from .scm import DegenerateVarianceError, ScmConfig, generate
from .scores import ScoreKind, Scorer, SingularConditioningError
from .seeding import derive_seed

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (
    np.linalg.LinAlgError,
    GpFitError,
    KernelFactorizationError,
    SingularConditioningError,
    DegenerateVarianceError,
    EigenDecompositionError,
    FloatingPointError,
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    out: Path
    global_seed: int = 0
    workers: int = 1
    fmt: str = "csv"
    sections: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name) or {})


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    seed: int
    seeds: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


def _build(cls, values: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown field")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _require(cfg: dict, key: str, path: str):
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"{path}.{key}: required")
    return cfg[key]


def _input_path(value, path: str) -> Path:
    p = Path(value)
    if not p.exists():
        raise ConfigError(f"{path}: no such file {p}")
    return p


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.written: list[Path] = []
        self.manifest = RunManifest(cfg.command, {"sections": cfg.sections, "paths": {k: str(v) for k, v in cfg.paths.items()}},
                                    __version__, cfg.global_seed)

    def track(self, *paths):
        self.written.extend(Path(p) for p in paths)

    def phase(self, name: str, t0: float):
        self.manifest.timings[name] = round(time.perf_counter() - t0, 6)

    def finish(self) -> RunManifest:
        self.manifest.outputs = {p.name: file_digest(p) for p in self.written}
        write_json(self.cfg.out / "manifest.json", dataclasses.asdict(self.manifest))
        return self.manifest

    def cleanup(self):
        for p in self.written:
            p.unlink(missing_ok=True)


def _cmd_generate(run: _Run):
    cfg = run.cfg
    scm_cfg = _build(ScmConfig, cfg.section("scm"), "scm")
    N = int(_require(cfg.section("generate"), "N", "generate"))
    seed = derive_seed(cfg.global_seed, "generate")
    run.manifest.seeds["generate"] = seed
    t0 = time.perf_counter()
    inst, data = generate(scm_cfg, N, seed)
    run.phase("generate", t0)
    if cfg.fmt == "json":
        p = cfg.out / "dataset.json"
        p.write_text(dataset_to_json(data, inst.dag) + "\n")
        run.track(p)
    else:
        run.track(*save_dataset_csv(data, cfg.out))
    dag_path = cfg.out / "dag.json"
    dag_path.write_text(inst.dag.to_json() + "\n")
    run.track(dag_path)


def _cmd_pcss(run: _Run):
    cfg = run.cfg
    sec = cfg.section("pcss")
    data_path = _input_path(cfg.paths.get("data") or _require(sec, "data", "pcss"), "pcss.data")
    sec.pop("data", None)
    pc = _build(PcssConfig, sec, "pcss")
    X, _ = read_matrix_csv(data_path)
    t0 = time.perf_counter()
    try:
        res = pcss(X, pc)
    except ValueError as exc:
        raise ConfigError(f"pcss: {exc}") from exc
    run.phase("pcss", t0)
    run.track(
        write_matrix_csv(cfg.out / "S_hat.csv", res.S_hat, column_names("s", X.shape[1])),
        write_matrix_csv(cfg.out / "residuals.csv", res.residuals(X), column_names("x", X.shape[1])),
        write_json(cfg.out / "spectrum.json",
                   {"eigenvalues": res.eigenvalues.tolist(), "suggested_m": res.suggested_m()}),
    )


def _cmd_score(run: _Run):
    cfg = run.cfg
    sec = cfg.section("score")
    data_path = _input_path(cfg.paths.get("data") or _require(sec, "data", "score"), "score.data")
    sets_path = _input_path(cfg.paths.get("parent_sets") or _require(sec, "parent_sets", "score"), "score.parent_sets")
    try:
        kind = ScoreKind(cfg.paths.get("kind") or _require(sec, "kind", "score"))
    except ValueError as exc:
        raise ConfigError(f"score.kind: {exc}") from exc
    X, _ = read_matrix_csv(data_path)
    s_path = cfg.paths.get("s_hat") or sec.get("s_hat")
    h_path = cfg.paths.get("h") or sec.get("h")
    S_hat = read_matrix_csv(_input_path(s_path, "score.s_hat"))[0] if s_path else None
    H = read_matrix_csv(_input_path(h_path, "score.h"))[0] if h_path else None
    if kind.needs_s_hat and S_hat is None:
        S_hat = pcss(X, PcssConfig(M=int(sec.get("M", 1)))).S_hat
    if kind is ScoreKind.CAM_OBS and H is None:
        raise ConfigError("score.h: required for cam_obs")
    try:
        sets = json.loads(Path(sets_path).read_text())
        requests = [(int(r["target"]), [int(i) for i in r["parents"]]) for r in sets]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"score.parent_sets: malformed ({exc})") from exc
    scorer = Scorer(X, S_hat, H, gp_iters=int(sec.get("gp_iters", 100)), gp_step=float(sec.get("gp_step", 0.01)))
    t0 = time.perf_counter()
    out = []
    for j, P in requests:
        if not (0 <= j < X.shape[1]) or any(not 0 <= i < X.shape[1] or i == j for i in P):
            raise ConfigError(f"score.parent_sets: invalid entry target={j} parents={P}")
        v = scorer.score(kind, j, P)
        out.append({
            "target": j,
            "parents": sorted(P),
            "log_score": v.log_score,
            "hypers": None if v.fitted_hypers is None else v.fitted_hypers.to_dict(),
        })
    run.phase("score", t0)
    run.track(write_json(cfg.out / "scores.json", out))


def _task_spec(sec: dict, global_seed: int) -> TaskSpec:
    sec = dict(sec)
    scm_cfg = _build(ScmConfig, sec.pop("scm", {}), "bench.scm")
    n_seeds = sec.pop("n_seeds", None)
    if "seeds" not in sec:
        sec["seeds"] = [derive_seed(global_seed, "bench", i) for i in range(int(n_seeds or 1))]
    sec["scm"] = scm_cfg
    return _build(TaskSpec, sec, "bench")


def _cmd_bench(run: _Run):
    cfg = run.cfg
    spec = _task_spec(cfg.section("bench"), cfg.global_seed)
    run.manifest.seeds["bench"] = list(spec.seeds)
    t0 = time.perf_counter()
    reports = run_task(spec, workers=cfg.workers)
    run.phase("bench", t0)
    report_path = write_json(cfg.out / "report.json", {
        "task": spec.task.value,
        "summary": summarize(reports),
        "replicates": [r.to_dict() for r in reports],
    })
    csv_path = cfg.out / "report.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seed", "metric", "value"])
        for r in reports:
            for method, seed, metric, value in r.rows():
                w.writerow([method, seed, metric, repr(float(value))])
    run.track(report_path, csv_path)


def _cmd_mse_report(run: _Run):
    cfg = run.cfg
    sec = cfg.section("mse_report")
    ps = [int(v) for v in sec.get("p", [250, 500, 1000])]
    sigmas = [float(v) for v in sec.get("sigma_h_sq", [0.2, 0.4, 0.6])]
    ratio = float(sec.get("ratio", 2.0))
    n_seeds = int(sec.get("n_seeds", 10))
    M = int(sec.get("M", 1))
    base = {k: v for k, v in sec.items() if k not in {"p", "sigma_h_sq", "ratio", "n_seeds", "M"}}
    rows = []
    seeds_used = []
    t0 = time.perf_counter()
    for s2 in sigmas:
        for p in ps:
            N = int(round(p / ratio))
            scm_cfg = _build(ScmConfig, {**base, "p": p, "sigma_h_sq": s2}, "mse_report")
            for r in range(n_seeds):
                seed = derive_seed(cfg.global_seed, f"mse-report/{p}/{s2}", r)
                seeds_used.append(seed)
                inst, data = generate(scm_cfg, N, seed)
                cols = data.known_s_columns() if inst.is_linear else inst.confounder_only_nodes()
                if len(cols) == 0:
                    continue
                S_hat = pcss(data.X, PcssConfig(M=M)).S_hat
                rows.append([p, N, s2, r, max_mse(S_hat, data.S_true, cols),
                             max_mse(np.zeros_like(data.X), data.S_true, cols)])
    run.phase("mse-report", t0)
    run.manifest.seeds["mse-report"] = seeds_used
    csv_path = cfg.out / "mse_report.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "N", "sigma_h_sq", "replicate", "max_mse", "zero_estimator_mse"])
        for row in rows:
            w.writerow(row[:4] + [repr(row[4]), repr(row[5])])
    summary = [
        {"p": p, "sigma_h_sq": s2, "median_max_mse": float(np.median([r[4] for r in rows if r[0] == p and r[2] == s2]))}
        for s2 in sigmas for p in ps if any(r[0] == p and r[2] == s2 for r in rows)
    ]
    run.track(csv_path, write_json(cfg.out / "mse_summary.json", summary))


_DISPATCH = {
    "generate": _cmd_generate,
    "pcss": _cmd_pcss,
    "score": _cmd_score,
    "bench": _cmd_bench,
    "mse-report": _cmd_mse_report,
}


def run(config: RunConfig) -> RunManifest:
    """Execute one command; outputs from a failed run are removed."""
    if config.command not in _DISPATCH:
        raise ConfigError(f"command: unknown command {config.command!r}")
    if config.fmt not in ("csv", "json"):
        raise ConfigError("format: must be csv or json")
    try:
        config.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"out: cannot create {config.out} ({exc})") from exc
    r = _Run(config)
    try:
        _DISPATCH[config.command](r)
        return r.finish()
    except BaseException:
        r.cleanup()
        raise


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML or JSON run configuration")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--workers", type=int, default=None, help="worker processes (hint)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
    ap = argparse.ArgumentParser(prog="deconfound", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate a confounded SCM dataset")
    p = sub.add_parser("pcss", parents=[common], help="estimate sufficient statistics")
    p.add_argument("--data", type=Path)
    p.add_argument("--m", type=int, dest="M")
    p = sub.add_parser("score", parents=[common], help="score parent sets")
    p.add_argument("--data", type=Path)
    p.add_argument("--parent-sets", type=Path)
    p.add_argument("--kind", choices=[k.value for k in ScoreKind])
    p.add_argument("--s-hat", type=Path)
    p.add_argument("--h", type=Path)
    sub.add_parser("bench", parents=[common], help="run an evaluation task")
    sub.add_parser("mse-report", parents=[common], help="max-MSE of PCSS across a (p, sigma_h^2) grid")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError(f"config: no such file {args.config}")
        try:
            raw = load_config(args.config)
        except ValueError as exc:
            raise ConfigError(f"config: cannot parse {args.config} ({exc})") from exc
    sections = {k: v for k, v in raw.items() if isinstance(v, dict)}
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    workers = args.workers if args.workers is not None else int(raw.get("workers", 1))
    fmt = args.fmt or raw.get("format", "csv")
    paths = {}
    for name in ("data", "parent_sets", "kind", "s_hat", "h"):
        value = getattr(args, name, None)
        if value is not None:
            paths[name] = value
    if getattr(args, "M", None) is not None:
        sections.setdefault("pcss", {})["M"] = args.M
    return RunConfig(args.command, args.out, seed, workers, fmt, sections, paths)


def main(argv: Optional[list[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        manifest = run(config_from_args(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        # unreadable or malformed input files
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(manifest.outputs, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
