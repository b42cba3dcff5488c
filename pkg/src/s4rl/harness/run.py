"""Per-seed training runs with periodic evaluation and checkpoint/resume."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import load_agent, make_agent, mean_action, save_agent, train_step
from ..core.rng import SeededRng
from ..dataset import OfflineDataset, load, make_split, save, subsample
from ..envs import make_env, reference_scores, rollout_returns
from ..errors import ConfigurationError, TrainingHalted
from .config import ExperimentConfig

log = logging.getLogger(__name__)

# interval means of these training diagnostics are stored with each evaluation
TRAIN_KEYS = ("critic_loss", "bellman_mse", "cql_reg", "conservative_gap", "q_data",
              "policy_loss", "log_prob", "alpha")


@dataclass
class RunMetrics:
    seed: int
    records: list[dict] = field(default_factory=list)
    wall_time: float = 0.0
    complete: bool = False

    @property
    def final_score(self) -> float:
        return self.records[-1]["normalized_score"] if self.records else float("nan")

    def streams(self) -> list[dict]:
        """Records without timing, for determinism comparisons."""
        return [dict(r) for r in self.records]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "records": self.records, "wall_time": self.wall_time,
                "complete": self.complete, "final_score": self.final_score}


# -- datasets --------------------------------------------------------------------------

def resolve_dataset(cfg: ExperimentConfig, cache_dir=None) -> OfflineDataset:
    """Load the configured dataset file, or build it from the split recipe."""
    rec = cfg.dataset
    if rec.path is not None:
        ds = load(rec.path)
        if ds.spec.name != cfg.env:
            raise ConfigurationError(f"dataset.path: file holds {ds.spec.name!r} data, "
                                     f"experiment.env is {cfg.env!r}")
    else:
        ds = make_split(cfg.env, rec.split, SeededRng(rec.seed), rec.transitions, cache_dir=cache_dir)
    if rec.fraction < 1.0:
        sseed = rec.seed if rec.subsample_seed is None else rec.subsample_seed
        ds = subsample(ds, rec.fraction, SeededRng(sseed).split(f"fraction:{rec.fraction!r}"),
                       rec.per_episode)
    return ds


def materialize_dataset(cfg: ExperimentConfig, directory, cache_dir=None) -> ExperimentConfig:
    """Write the resolved dataset to ``directory`` and return a config pointing at it."""
    if cfg.dataset.path is not None and cfg.dataset.fraction == 1.0:
        return cfg
    ds = resolve_dataset(cfg, cache_dir)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rec = cfg.dataset
    name = f"{cfg.env}-{rec.split}-n{rec.transitions}-s{rec.seed}-f{rec.fraction:g}.s4rlds"
    path = directory / name
    save(ds, path)
    new_rec = type(rec)(path=str(path), split=rec.split, transitions=rec.transitions,
                        seed=rec.seed, fraction=1.0, per_episode=False)
    return cfg.with_(dataset=new_rec)


# -- evaluation ------------------------------------------------------------------------

def evaluate(env, policy, episodes: int, rng: SeededRng) -> tuple[float, float]:
    """Mean raw return of the deterministic mean action, and its normalised score."""
    raw = rollout_returns(env, lambda s, _r: mean_action(policy, s), rng, episodes)
    mean = float(raw.mean())
    return mean, float(reference_scores(env).normalize(mean))


# -- single seed -----------------------------------------------------------------------

def _seed_dir(cfg: ExperimentConfig, seed: int) -> Path:
    return Path(cfg.output_dir) / f"seed_{seed}"


def _write_metrics(path: Path, records: list[dict]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    tmp.replace(path)


def _json_safe(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


def run_seed(cfg: ExperimentConfig, seed: int, dataset: OfflineDataset | None = None,
             resume: bool = True, stop_after: int | None = None) -> RunMetrics:
    """Train one seed, evaluating at step 0 and every ``eval_every`` steps.

    Metrics and a checkpoint are written at each evaluation, so an interrupted
    run resumes from its last evaluation. ``stop_after`` halts after the first
    evaluation at or beyond that step (used to exercise resume).
    """
    ds = resolve_dataset(cfg) if dataset is None else dataset
    env = make_env(cfg.env)
    if ds.spec.name != env.spec.name:
        raise ConfigurationError(f"dataset is for {ds.spec.name!r}, experiment.env is {cfg.env!r}")
    out = _seed_dir(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.npz"
    metrics_path = out / "metrics.jsonl"
    fingerprint = cfg.training_fingerprint()
    rng = SeededRng(seed)

    records: list[dict] = []
    wall = 0.0
    if resume and ckpt.exists():
        agent, header, _ = load_agent(ckpt)
        user = header["extra"]["user"]
        if user.get("fingerprint") != fingerprint:
            raise ConfigurationError(f"{ckpt}: checkpoint was written by a different config; "
                                     f"remove it or change experiment.output_dir")
        records = user["records"]
        wall = user.get("wall_time", 0.0)
        if user.get("complete"):
            _write_metrics(metrics_path, records)
            return RunMetrics(seed, records, wall, True)
        log.info("seed %d: resuming at step %d", seed, agent.step)
    else:
        agent = make_agent(env.spec, cfg.agent, rng.split("init"))

    t0 = time.perf_counter()
    acc: dict[str, list[float]] = {}

    def checkpoint(complete: bool):
        save_agent(ckpt, agent, seed, {"fingerprint": fingerprint, "records": records,
                                       "wall_time": wall + time.perf_counter() - t0,
                                       "complete": complete})
        _write_metrics(metrics_path, records)

    def evaluate_now():
        raw, norm = evaluate(env, agent.policy, cfg.eval_episodes, rng.split(f"eval:{agent.step}"))
        rec = {"step": agent.step, "raw_return": raw, "normalized_score": norm}
        for k in TRAIN_KEYS:
            vals = acc.get(k)
            rec[k] = _json_safe(float(np.mean(vals))) if vals else None
        records.append(rec)
        acc.clear()

    if not records:
        evaluate_now()
        checkpoint(cfg.steps == 0)
    while agent.step < cfg.steps:
        if stop_after is not None and agent.step >= stop_after:
            return RunMetrics(seed, records, wall + time.perf_counter() - t0, False)
        t = agent.step
        try:
            diag = train_step(agent, ds, rng.split(f"step:{t}"))
        except TrainingHalted as exc:
            raise TrainingHalted(exc.step, exc.term,
                                 f"seed {seed}, config {cfg.name!r}, output {out}") from exc
        for k in TRAIN_KEYS:
            if k in diag:
                acc.setdefault(k, []).append(diag[k])
        if agent.step % cfg.eval_every == 0 or agent.step == cfg.steps:
            evaluate_now()
            checkpoint(agent.step == cfg.steps)
    wall += time.perf_counter() - t0
    metrics = RunMetrics(seed, records, wall, True)
    (out / "final.json").write_text(json.dumps(metrics.to_dict(), sort_keys=True, indent=1))
    return metrics


def run(cfg: ExperimentConfig, resume: bool = True) -> list[RunMetrics]:
    """Train every configured seed on one shared dataset."""
    ds = resolve_dataset(cfg)
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    return [run_seed(cfg, s, ds, resume) for s in cfg.seeds]


def read_run_metrics(seed_dir) -> RunMetrics | None:
    seed_dir = Path(seed_dir)
    final = seed_dir / "final.json"
    if final.exists():
        d = json.loads(final.read_text())
        return RunMetrics(d["seed"], d["records"], d["wall_time"], d["complete"])
    m = seed_dir / "metrics.jsonl"
    if m.exists():
        seed = int(seed_dir.name.split("_")[-1])
        recs = [json.loads(line) for line in m.read_text().splitlines() if line.strip()]
        return RunMetrics(seed, recs, 0.0, False)
    return None
