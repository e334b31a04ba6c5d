"""Batch entry point: single runs, parameter sweeps, metric extraction, serving.

Output layout is one directory per run: manifest.json (config + hashes),
summary.csv (one row per replicate x generation), replicate_<k>.jsonl
(generation records) and events_<k>.jsonl (flat attempt-event log). Replicates
are scheduled over a process pool; files and summary rows are emitted in
replicate order, so outputs are byte-identical at any parallelism.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import SimConfig, Trajectory, run_simulation
from .events import read_events_jsonl, state_size, write_events_jsonl
from .metrics import (FEATURE_COLUMNS, behavioral_feature_table, consecutive_similarity,
                      entropy_by_state, mean_state_entropy, repertoire_series, spearman_rho,
                      strategy_proportions, unique_actions_by_state)
from .semantic import load_similarity_csv
from .task import load_task_tree, default_task_tree

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

SUMMARY_FIELDS = ("replicate", "generation", "repertoire_instant", "repertoire_cumulative",
                  "mean_score", "n_semantic_social", "n_semantic_individual",
                  "n_random_social", "n_random_individual")

QUANTILE_METHOD = "median_unbiased"


class ConfigError(Exception):
    pass


def _config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _load_config(path: str) -> SimConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return SimConfig.from_json(text)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _summary_rows(traj: Trajectory, replicate: int) -> list[list]:
    rows = []
    for rec in traj.records:
        scores = [a["score"] for a in rec.agents]
        rows.append([
            replicate,
            rec.generation,
            rec.repertoire_instant,
            rec.repertoire_cumulative,
            f"{np.mean(scores):.6f}",
            rec.strategy_counts.get("semantic_social", 0),
            rec.strategy_counts.get("semantic_individual", 0),
            rec.strategy_counts.get("random_social", 0),
            rec.strategy_counts.get("random_individual", 0),
        ])
    return rows


def _run_replicate(args: tuple) -> tuple:
    cfg_doc, replicate, out_dir = args
    cfg = SimConfig.from_dict(cfg_doc)
    traj = run_simulation(cfg, replicate=replicate)
    out = Path(out_dir)
    traj.write_jsonl(out / f"replicate_{replicate}.jsonl")
    write_events_jsonl((ev for rec in traj.records for ev in rec.events),
                       out / f"events_{replicate}.jsonl")
    return replicate, _summary_rows(traj, replicate)


def _write_summary(path: Path, rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        writer.writerows(rows)


def run_config(cfg: SimConfig, out_dir: Path, jobs: int = 1) -> None:
    """Run all replicates of a config and write the standard output layout."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_doc = cfg.to_dict()
    manifest = {
        "config": cfg_doc,
        "config_sha256": _config_hash(cfg_doc),
        "code_version": __version__,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tasks = [(cfg_doc, k, str(out_dir)) for k in range(cfg.replicates)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_replicate, tasks))
    else:
        results = [_run_replicate(t) for t in tasks]
    rows = []
    for _rep, reprows in sorted(results, key=lambda r: r[0]):
        rows.extend(reprows)
    _write_summary(out_dir / "summary.csv", rows)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
        errors = cfg.validate()
        if errors:
            raise ConfigError("; ".join(errors))
    try:
        run_config(cfg, Path(args.out), jobs=args.jobs)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# -- sweeps -------------------------------------------------------------------


def _load_sweep(path: str) -> tuple[SimConfig, dict, int, int]:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sweep spec is not valid JSON: {exc}") from None
    unknown = sorted(set(doc) - {"base", "axes", "replicates", "max_runs"})
    if unknown:
        raise ConfigError(f"unknown sweep keys: {', '.join(unknown)}")
    base = SimConfig.from_dict(doc.get("base", {}))
    axes = doc.get("axes", {})
    for field in axes:
        if field not in SimConfig.__dataclass_fields__:
            raise ConfigError(f"sweep axis {field!r} is not a config field")
        if not isinstance(axes[field], list) or not axes[field]:
            raise ConfigError(f"sweep axis {field!r} must be a non-empty list of values")
    replicates = int(doc.get("replicates", base.replicates))
    max_runs = int(doc.get("max_runs", 10_000))
    n_cells = int(np.prod([len(v) for v in axes.values()])) if axes else 1
    if n_cells * replicates > max_runs:
        raise ConfigError(f"sweep of {n_cells} cells x {replicates} replicates exceeds max_runs={max_runs}")
    return base, axes, replicates, max_runs


def _sweep_cells(base: SimConfig, axes: dict) -> list[tuple[int, dict, SimConfig]]:
    import itertools

    fields = sorted(axes)
    cells = []
    for idx, values in enumerate(itertools.product(*(axes[f] for f in fields))):
        assignment = dict(zip(fields, values))
        doc = {**base.to_dict(), **assignment}
        cells.append((idx, assignment, SimConfig.from_dict(doc)))
    return cells


def cmd_sweep(args: argparse.Namespace) -> int:
    base, axes, replicates, _cap = _load_sweep(args.sweep)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    try:
        cells = _sweep_cells(base, axes)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    fields = sorted(axes)
    tasks = []
    for idx, _assignment, cfg in cells:
        cfg_doc = {**cfg.to_dict(), "replicates": replicates}
        cell_dir = out_root / f"cell_{idx}"
        cell_dir.mkdir(exist_ok=True)
        for k in range(replicates):
            tasks.append((cfg_doc, k, str(cell_dir)))
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_replicate, tasks))
    else:
        results = [_run_replicate(t) for t in tasks]
    by_dir: dict[str, list] = {}
    for (cfg_doc, k, cell_dir), (rep, rows) in zip(tasks, results):
        by_dir.setdefault(cell_dir, []).append((rep, rows))

    summary_rows = []
    cell_rows = []
    for idx, assignment, cfg in cells:
        cell_dir = str(out_root / f"cell_{idx}")
        rows = []
        for rep, reprows in sorted(by_dir[cell_dir]):
            rows.extend(reprows)
        _write_summary(Path(cell_dir) / "summary.csv", rows)
        finals = [r for r in rows if r[1] == cfg.generations]
        rep_final = np.array([float(r[3]) for r in finals])
        score_final = np.array([float(r[4]) for r in finals])
        for r in rows:
            summary_rows.append([idx] + [assignment[f] for f in fields] + r)
        q = lambda a, p: float(np.quantile(a, p, method=QUANTILE_METHOD))
        cell_rows.append([idx] + [assignment[f] for f in fields] + [
            f"{q(rep_final, 0.25):.6f}", f"{q(rep_final, 0.5):.6f}", f"{q(rep_final, 0.75):.6f}",
            f"{q(score_final, 0.25):.6f}", f"{q(score_final, 0.5):.6f}", f"{q(score_final, 0.75):.6f}",
        ])
    with open(out_root / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell"] + fields + list(SUMMARY_FIELDS))
        writer.writerows(summary_rows)
    with open(out_root / "cells.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell"] + fields + ["repertoire_q1", "repertoire_median", "repertoire_q3",
                                             "score_q1", "score_median", "score_q3"])
        writer.writerows(cell_rows)
    manifest = {
        "base_config": base.to_dict(),
        "axes": axes,
        "replicates": replicates,
        "config_sha256": _config_hash({"base": base.to_dict(), "axes": axes, "replicates": replicates}),
        "code_version": __version__,
    }
    (out_root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# -- analysis ------------------------------------------------------------------


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_analyze(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    events = []
    needs_logs = args.entropy or args.unique_actions or args.consecutive or args.features
    if needs_logs:
        try:
            for path in args.logs:
                events.extend(read_events_jsonl(path))
        except OSError as exc:
            print(f"io error: {exc}", file=sys.stderr)
            return EXIT_IO
        except ValueError as exc:
            print(f"malformed log: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    tree = load_task_tree(args.tree) if args.tree else default_task_tree()

    if args.entropy:
        per_state = entropy_by_state(events)
        rows = [[s, state_size(s), f"{per_state[s]:.12g}"] for s in sorted(per_state)]
        _write_csv(out_dir / "entropy.csv", ["state_hash", "inventory_size", "entropy_nats"], rows)
        print(f"mean state entropy (weighted): {mean_state_entropy(events):.6f}")
    if args.unique_actions:
        rows = unique_actions_by_state(events)
        _write_csv(out_dir / "unique_actions.csv",
                   ["actor_id", "state_hash", "inventory_size", "unique_count", "unique_normalized"],
                   [[r["actor_id"], r["state_hash"], r["inventory_size"], r["unique_count"],
                     f"{r['unique_normalized']:.12g}"] for r in rows])
    if args.consecutive:
        sim = load_similarity_csv(args.similarity) if args.similarity else None
        if sim is None:
            print("--consecutive requires --similarity", file=sys.stderr)
            return EXIT_CONFIG
        rows = consecutive_similarity(events, sim)
        _write_csv(out_dir / "consecutive_similarity.csv",
                   ["actor_id", "attempt_index", "prior_success", "mean_similarity"],
                   [[r["actor_id"], r["attempt_index"], int(r["prior_success"]),
                     f"{r['mean_similarity']:.12g}"] for r in rows])
    if args.features:
        sem = load_similarity_csv(args.similarity) if args.similarity else None
        structural = load_similarity_csv(args.structural) if args.structural else None
        color = load_similarity_csv(args.color) if args.color else None
        rng = np.random.default_rng(args.feature_seed)
        rows = behavioral_feature_table(events, tree, sem, structural, color, k=args.alternatives, rng=rng)
        _write_csv(out_dir / "features.csv",
                   ["actor_id", "attempt_index", "is_actual", "combination"] + list(FEATURE_COLUMNS),
                   [r.as_csv_row() for r in rows])
    if args.spearman:
        a = load_similarity_csv(args.spearman[0])
        b = load_similarity_csv(args.spearman[1])
        print(f"{spearman_rho(a, b):.12g}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="craftevo",
                                     description="innovation-task simulator and analysis harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run all replicates of one config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None, help="override master_seed")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid")
    p_sweep.add_argument("--sweep", required=True, help="sweep spec JSON")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="extract metrics from event logs")
    p_an.add_argument("logs", nargs="*", help="AttemptEvent JSONL files")
    p_an.add_argument("--out", default=".")
    p_an.add_argument("--tree", default=None, help="task tree JSON (default: bundled tree)")
    p_an.add_argument("--entropy", action="store_true")
    p_an.add_argument("--unique-actions", dest="unique_actions", action="store_true")
    p_an.add_argument("--consecutive", action="store_true")
    p_an.add_argument("--features", action="store_true")
    p_an.add_argument("--alternatives", type=int, default=10, help="sampled alternatives per attempt")
    p_an.add_argument("--feature-seed", dest="feature_seed", type=int, default=0)
    p_an.add_argument("--similarity", default=None, help="semantic similarity CSV")
    p_an.add_argument("--structural", default=None, help="structural similarity CSV")
    p_an.add_argument("--color", default=None, help="color similarity CSV")
    p_an.add_argument("--spearman", nargs=2, metavar=("A", "B"),
                      help="two similarity CSVs; prints Spearman rho")
    p_an.set_defaults(func=cmd_analyze)

    p_serve = sub.add_parser("serve", help="start the live session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
