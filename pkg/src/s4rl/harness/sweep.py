"""Augmentation and limited-data sweeps, seed aggregation, and CSV / plot-data output."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ..agent.config import S4rlConfig
from ..augment import parse_augment
from ..errors import ConfigurationError, S4rlError
from .config import ExperimentConfig
from .run import materialize_dataset, read_run_metrics, run_seed

log = logging.getLogger(__name__)

CSV_VERSION_LINE = "# s4rl-sweep-csv v1"
CSV_COLUMNS = ("task", "agent", "setting", "seed", "score", "stderr")
WORKERS_ENV = "S4RL_WORKERS"


@dataclass
class Cell:
    task: str
    agent: str
    setting: str
    seed: int
    score: float = float("nan")
    error: str | None = None


@dataclass
class SweepReport:
    """Final normalised scores on a grid of task x agent x setting x seed.

    ``kind`` is ``"augmentation"`` (every agent/setting pair is a competing
    column, ranked within each task) or ``"limited-data"`` (agents compete
    within each task and data fraction).
    """

    kind: str
    cells: list[Cell] = field(default_factory=list)
    settings: list[str] = field(default_factory=list)

    def _order(self):
        agents = list(dict.fromkeys(c.agent for c in self.cells))
        tasks = list(dict.fromkeys(c.task for c in self.cells))
        settings = self.settings or list(dict.fromkeys(c.setting for c in self.cells))
        return tasks, agents, settings

    def sorted_cells(self) -> list[Cell]:
        tasks, agents, settings = self._order()
        key = lambda c: (tasks.index(c.task), agents.index(c.agent),
                         settings.index(c.setting) if c.setting in settings else len(settings), c.seed)
        return sorted(self.cells, key=key)

    def groups(self) -> dict[tuple[str, str, str], list[Cell]]:
        out: dict[tuple[str, str, str], list[Cell]] = {}
        for c in self.sorted_cells():
            out.setdefault((c.task, c.agent, c.setting), []).append(c)
        return out

    def stats(self) -> dict[tuple[str, str, str], dict]:
        """Per (task, agent, setting): mean, standard error and count of finished seeds."""
        out = {}
        for key, cells in self.groups().items():
            s = np.array([c.score for c in cells if c.error is None and math.isfinite(c.score)])
            n = len(s)
            mean = float(s.mean()) if n else float("nan")
            se = float(s.std(ddof=1) / math.sqrt(n)) if n > 1 else (0.0 if n == 1 else float("nan"))
            out[key] = {"mean": mean, "stderr": se, "n": n, "failed": len(cells) - n}
        return out

    def average_score(self) -> dict[tuple[str, str], float]:
        """Mean over tasks of the per-task mean, for every (agent, setting) column."""
        acc: dict[tuple[str, str], list[float]] = {}
        for (task, agent, setting), st in self.stats().items():
            acc.setdefault((agent, setting), []).append(st["mean"])
        return {k: float(np.mean(v)) for k, v in acc.items()}

    def rankings(self) -> dict[tuple, dict[tuple[str, str], float]]:
        """Rank 1 = best mean; tied means share the average of their ranks."""
        by_group: dict[tuple, dict[tuple[str, str], float]] = {}
        for (task, agent, setting), st in self.stats().items():
            g = (task,) if self.kind == "augmentation" else (task, setting)
            by_group.setdefault(g, {})[(agent, setting)] = st["mean"]
        out = {}
        for g, cols in by_group.items():
            keys = list(cols)
            means = np.array([cols[k] for k in keys])
            # failed columns rank last
            means = np.where(np.isfinite(means), means, -np.inf)
            ranks = rankdata(-means, method="average")
            out[g] = {k: float(r) for k, r in zip(keys, ranks)}
        return out

    def average_ranking(self) -> dict[tuple[str, str], float]:
        acc: dict[tuple[str, str], list[float]] = {}
        for ranks in self.rankings().values():
            for k, r in ranks.items():
                acc.setdefault(k, []).append(r)
        return {k: float(np.mean(v)) for k, v in acc.items()}

    def series(self) -> dict[str, dict]:
        """Per agent: x = setting, y = mean score (averaged over tasks), with stderr."""
        tasks, agents, settings = self._order()
        st = self.stats()
        out = {}
        for a in agents:
            xs, ys, ses, per_seed = [], [], [], []
            for s in settings:
                keys = [(t, a, s) for t in tasks if (t, a, s) in st]
                if not keys:
                    continue
                xs.append(_x_value(s))
                ys.append(float(np.mean([st[k]["mean"] for k in keys])))
                ses.append(float(np.mean([st[k]["stderr"] for k in keys])))
                per_seed.append({str(c.seed): c.score for k in keys for c in self.groups()[k]})
            out[a] = {"x": xs, "y": ys, "stderr": ses, "per_seed": per_seed}
        return out

    def errors(self) -> list[dict]:
        return [vars(c) for c in self.sorted_cells() if c.error is not None]


def _x_value(setting: str):
    try:
        return float(setting)
    except ValueError:
        return setting


# -- emission ------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "nan" if not math.isfinite(x) else repr(float(x))


def _finite_or_null(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite_or_null(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_null(v) for v in obj]
    return obj


def emit(report: SweepReport, prefix, formats=("csv", "plot")) -> list[Path]:
    """Write ``<prefix>.csv`` (one row per cell) and ``<prefix>.plot.json``."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    st = report.stats()
    if "csv" in formats:
        path = prefix.with_name(prefix.name + ".csv")
        with open(path, "w", newline="") as fh:
            fh.write(CSV_VERSION_LINE + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for c in report.sorted_cells():
                se = st[(c.task, c.agent, c.setting)]["stderr"]
                w.writerow([c.task, c.agent, c.setting, c.seed,
                            _fmt(c.score if c.error is None else float("nan")), _fmt(se)])
        written.append(path)
    if "plot" in formats:
        path = prefix.with_name(prefix.name + ".plot.json")
        payload = {
            "format": "s4rl-plot-data", "version": 1, "kind": report.kind,
            "series": report.series(),
            "average_score": [{"agent": a, "setting": s, "value": v}
                              for (a, s), v in report.average_score().items()],
            "average_ranking": [{"agent": a, "setting": s, "value": v}
                                for (a, s), v in report.average_ranking().items()],
            "errors": report.errors(),
        }
        path.write_text(json.dumps(_finite_or_null(payload), indent=1, allow_nan=False))
        written.append(path)
    return written


def parse_csv(path, kind: str = "augmentation") -> SweepReport:
    """Rebuild the report grid from an emitted CSV."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != CSV_VERSION_LINE:
            raise ConfigurationError(f"{path}: expected {CSV_VERSION_LINE!r}, got {first!r}")
        rows = list(csv.DictReader(fh))
    cells = [Cell(r["task"], r["agent"], r["setting"], int(r["seed"]), float(r["score"]),
                  None if math.isfinite(float(r["score"])) else "failed") for r in rows]
    settings = list(dict.fromkeys(c.setting for c in cells))
    return SweepReport(kind, cells, settings)


# -- sweeps ----------------------------------------------------------------------------

def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def agent_variant(base: ExperimentConfig, label: str) -> ExperimentConfig:
    """``cql`` -> baseline; ``s4rl`` -> base S4RL settings; ``s4rl:<augment>`` -> that augmentation."""
    agent = base.agent
    if label == "cql":
        new = type(agent)(**{**vars(agent), "algo": "cql"})
    elif label == "s4rl":
        new = type(agent)(**{**vars(agent), "algo": "s4rl"})
    elif label.startswith("s4rl:"):
        kind = parse_augment(label[len("s4rl:"):])
        s4 = S4rlConfig(kind, agent.s4rl.count, agent.s4rl.augment_targets, agent.s4rl.augment_policy)
        new = type(agent)(**{**vars(agent), "algo": "s4rl", "s4rl": s4})
    else:
        raise ConfigurationError(f"unknown agent label {label!r}; use cql, s4rl or s4rl:<augment>")
    return base.with_(agent=new)


def _cell_job(args):
    cfg_dict, seed = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    m = run_seed(cfg, seed)
    return m.final_score


def _run_cells(jobs: list[tuple[Cell, ExperimentConfig]], workers: int) -> None:
    payload = [(cfg.to_dict(), cell.seed) for cell, cfg in jobs]
    if workers <= 1:
        results = []
        for p in payload:
            try:
                results.append(_cell_job(p))
            except S4rlError as exc:
                results.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_cell_job, p) for p in payload]
            results = []
            for f in futs:
                try:
                    results.append(f.result())
                except Exception as exc:  # worker failures are recorded per cell
                    results.append(exc)
    for (cell, _), res in zip(jobs, results):
        if isinstance(res, Exception):
            cell.error = f"{type(res).__name__}: {res}"
            log.warning("cell %s/%s/%s seed %d failed: %s", cell.task, cell.agent, cell.setting,
                        cell.seed, cell.error)
        else:
            cell.score = res


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in ".-" else "_" for ch in text)


def _write_manifest(out: Path, report: SweepReport, jobs) -> None:
    manifest = {"kind": report.kind, "settings": report.settings,
                "cells": [{"task": c.task, "agent": c.agent, "setting": c.setting, "seed": c.seed,
                           "dir": str(Path(cfg.output_dir) / f"seed_{c.seed}")} for c, cfg in jobs]}
    (out / "sweep.json").write_text(json.dumps(manifest, indent=1))


def sweep_augmentations(base: ExperimentConfig | list[ExperimentConfig], kinds: list[str],
                        workers: int | None = None, include_baseline: bool = False,
                        output_dir=None, cache_dir=None) -> SweepReport:
    """Every augmentation kind (and optionally the CQL baseline) on every task and seed.

    Each base config is one task; tasks are named ``<env>/<split>``.
    """
    bases = base if isinstance(base, list) else [base]
    if not kinds:
        raise ConfigurationError("sweep_augmentations: need at least one augmentation kind")
    kinds = [str(parse_augment(k)) for k in kinds]
    out = Path(output_dir or bases[0].output_dir)
    columns = ([("cql", "none")] if include_baseline else []) + [("s4rl", k) for k in kinds]
    report = SweepReport("augmentation", settings=[s for _, s in columns])
    jobs = []
    for b in bases:
        task = f"{b.env}/{b.dataset.split}" if b.dataset.path is None else f"{b.env}/{Path(b.dataset.path).stem}"
        b = materialize_dataset(b, out / "datasets", cache_dir)
        for agent, setting in columns:
            label = "cql" if agent == "cql" else f"s4rl:{setting}"
            cfg = agent_variant(b, label)
            cfg = cfg.with_(output_dir=str(out / "cells" / _slug(f"{task}__{agent}__{setting}")))
            for seed in b.seeds:
                cell = Cell(task, agent, setting, seed)
                report.cells.append(cell)
                jobs.append((cell, cfg))
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, report, jobs)
    _run_cells(jobs, worker_count(workers))
    return report


def sweep_limited_data(base: ExperimentConfig | list[ExperimentConfig], fractions: list[float],
                       agents: tuple[str, ...] = ("cql", "s4rl"), workers: int | None = None,
                       output_dir=None, cache_dir=None) -> SweepReport:
    """Each agent on subsampled copies of the dataset, one per fraction."""
    bases = base if isinstance(base, list) else [base]
    fractions = [float(f) for f in fractions]
    if not fractions or any(not 0.0 < f <= 1.0 for f in fractions):
        raise ConfigurationError("sweep_limited_data: fractions must lie in (0, 1]")
    out = Path(output_dir or bases[0].output_dir)
    report = SweepReport("limited-data", settings=[f"{f:g}" for f in fractions])
    jobs = []
    for b in bases:
        task = f"{b.env}/{b.dataset.split}" if b.dataset.path is None else f"{b.env}/{Path(b.dataset.path).stem}"
        full = materialize_dataset(b, out / "datasets", cache_dir)
        for f in fractions:
            if f == 1.0:
                fb = full
            else:
                rec = full.dataset
                sub = type(rec)(**{**vars(rec), "fraction": f,
                                   "subsample_seed": b.dataset.subsample_seed
                                   if b.dataset.subsample_seed is not None else b.dataset.seed})
                fb = materialize_dataset(full.with_(dataset=sub), out / "datasets" / f"f{f:g}",
                                         cache_dir)
            for label in agents:
                cfg = agent_variant(fb, label)
                name = "cql" if label == "cql" else (label if label != "s4rl" else
                                                     f"s4rl-{b.agent.s4rl.kind}")
                cfg = cfg.with_(output_dir=str(out / "cells" / _slug(f"{task}__{name}__f{f:g}")))
                for seed in b.seeds:
                    cell = Cell(task, name, f"{f:g}", seed)
                    report.cells.append(cell)
                    jobs.append((cell, cfg))
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, report, jobs)
    _run_cells(jobs, worker_count(workers))
    return report


def report_from_dir(directory) -> SweepReport:
    """Merge per-cell metric files of a sweep directory into a report."""
    directory = Path(directory)
    mpath = directory / "sweep.json"
    if not mpath.exists():
        raise ConfigurationError(f"{directory}: no sweep.json manifest")
    manifest = json.loads(mpath.read_text())
    report = SweepReport(manifest["kind"], settings=manifest["settings"])
    for c in manifest["cells"]:
        m = read_run_metrics(c["dir"])
        cell = Cell(c["task"], c["agent"], c["setting"], c["seed"])
        if m is None or not m.records:
            cell.error = "missing"
        else:
            cell.score = m.final_score
            if not m.complete:
                cell.error = f"incomplete (last step {m.records[-1]['step']})"
        report.cells.append(cell)
    return report
