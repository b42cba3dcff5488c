"""Experiment configuration: an INI file with one section per concern.

Example::

    [experiment]
    env = pointmass2d
    steps = 100000
    eval_every = 5000
    eval_episodes = 20
    seeds = 0, 1, 2, 3, 4
    output_dir = runs/pm-medium-replay

    [dataset]
    split = medium-replay
    transitions = 20000
    seed = 0

    [agent]
    algo = s4rl

    [s4rl]
    kind = gauss:3e-3
    count = 2

Every field of the agent, ``cql`` and ``s4rl`` sections is optional and
defaults to the library defaults.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..agent.config import AgentConfig, CqlConfig, S4rlConfig
from ..agent.learner import config_from_dict, config_to_dict
from ..augment import parse_augment
from ..dataset import SPLIT_KINDS
from ..envs import REGISTRY
from ..errors import ConfigurationError


@dataclass
class DatasetRecipe:
    path: str | None = None
    split: str = "medium-replay"
    transitions: int = 20000
    seed: int = 0
    fraction: float = 1.0
    per_episode: bool = False
    subsample_seed: int | None = None


@dataclass
class ExperimentConfig:
    env: str = "pointmass2d"
    dataset: DatasetRecipe = field(default_factory=DatasetRecipe)
    agent: AgentConfig = field(default_factory=AgentConfig)
    steps: int = 100000
    eval_every: int = 5000
    eval_episodes: int = 20
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    output_dir: str = "runs/default"
    name: str = "experiment"

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ConfigurationError("experiment.seeds: at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("experiment.seeds: duplicate seed")
        if self.steps < 0:
            raise ConfigurationError("experiment.steps: must be >= 0")
        if self.eval_every < 1:
            raise ConfigurationError("experiment.eval_every: must be >= 1")
        if self.eval_episodes < 1:
            raise ConfigurationError("experiment.eval_episodes: must be >= 1")
        if self.env not in REGISTRY:
            raise ConfigurationError(f"experiment.env: unknown environment {self.env!r}")
        d = self.dataset
        if d.path is None and d.split not in SPLIT_KINDS:
            raise ConfigurationError(f"dataset.split: unknown split {d.split!r}")
        if d.path is not None and not Path(d.path).exists():
            raise ConfigurationError(f"dataset.path: {d.path} does not exist")
        if not 0.0 < d.fraction <= 1.0:
            raise ConfigurationError("dataset.fraction: must lie in (0, 1]")
        if d.transitions < 1:
            raise ConfigurationError("dataset.transitions: must be >= 1")

    def with_(self, **kw) -> ExperimentConfig:
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "env": self.env, "dataset": vars(self.dataset).copy(),
            "agent": config_to_dict(self.agent), "steps": self.steps,
            "eval_every": self.eval_every, "eval_episodes": self.eval_episodes,
            "seeds": list(self.seeds), "output_dir": self.output_dir, "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        d["dataset"] = DatasetRecipe(**d["dataset"])
        d["agent"] = config_from_dict(d["agent"])
        return cls(**d)

    def training_fingerprint(self) -> str:
        """Hash of everything that affects a seed's training trajectory."""
        d = self.to_dict()
        for k in ("seeds", "output_dir", "name"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# -- INI parsing ---------------------------------------------------------------------

def _bool(section, key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"{section}.{key}: expected a boolean, got {text!r}")


def _convert(section: str, key: str, text: str, kind):
    try:
        if kind is bool:
            return _bool(section, key, text)
        if kind == "ints":
            return tuple(int(x) for x in text.replace(",", " ").split())
        if kind == "optfloat":
            return None if text.strip().lower() in ("", "none") else float(text)
        if kind == "optint":
            return None if text.strip().lower() in ("", "none") else int(text)
        if kind == "optstr":
            return None if text.strip().lower() in ("", "none") else text.strip()
        if kind == "augment":
            return parse_augment(text.strip())
        if kind == "grid":
            return None if text.strip().lower() in ("", "none") else json.loads(text)
        return kind(text.strip())
    except ConfigurationError as exc:
        if str(exc).startswith(f"{section}.{key}"):
            raise
        raise ConfigurationError(f"{section}.{key}: {exc}") from None
    except (ValueError, json.JSONDecodeError):
        raise ConfigurationError(f"{section}.{key}: cannot parse {text!r}") from None


_SCHEMA = {
    "experiment": {"env": str, "steps": int, "eval_every": int, "eval_episodes": int,
                   "seeds": "ints", "output_dir": str, "name": str},
    "dataset": {"path": "optstr", "split": str, "transitions": int, "seed": int,
                "fraction": float, "per_episode": bool, "subsample_seed": "optint"},
    "agent": {"algo": str, "hidden": "ints", "batch_size": int, "critic_lr": float,
              "policy_lr": float, "gamma": "optfloat", "tau": float, "alpha": float,
              "auto_alpha": bool, "alpha_lr": float, "target_entropy": "optfloat"},
    "cql": {"n_actions": int, "weight": float, "temperature": float, "push_up": str,
            "action_grid": "grid"},
    "s4rl": {"kind": "augment", "count": int, "augment_targets": bool, "augment_policy": bool},
}


def _section(cp, name: str) -> dict:
    if not cp.has_section(name):
        return {}
    out = {}
    for key, text in cp.items(name):
        if key not in _SCHEMA[name]:
            raise ConfigurationError(f"{name}.{key}: unknown field; expected one of "
                                     f"{sorted(_SCHEMA[name])}")
        out[key] = _convert(name, key, text, _SCHEMA[name][key])
    return out


def _build(name, cls, kw):
    try:
        return cls(**kw)
    except ConfigurationError as exc:
        msg = str(exc)
        raise ConfigurationError(msg if "." in msg.split(":")[0] else f"{name}: {msg}") from None


def parse_config(text: str, base_dir: str | Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax: {exc}") from None
    unknown = set(cp.sections()) - set(_SCHEMA)
    if unknown:
        raise ConfigurationError(f"unknown config section(s) {sorted(unknown)}")
    exp = _section(cp, "experiment")
    ds = _section(cp, "dataset")
    if ds.get("path") and base_dir is not None and not Path(ds["path"]).is_absolute():
        ds["path"] = str(Path(base_dir) / ds["path"])
    if exp.get("output_dir") and base_dir is not None and not Path(exp["output_dir"]).is_absolute():
        exp["output_dir"] = str(Path(base_dir) / exp["output_dir"])
    cql = _build("cql", CqlConfig, _section(cp, "cql"))
    s4 = _build("s4rl", S4rlConfig, _section(cp, "s4rl"))
    agent = _build("agent", AgentConfig, {**_section(cp, "agent"), "cql": cql, "s4rl": s4})
    return _build("experiment", ExperimentConfig,
                  {**exp, "dataset": DatasetRecipe(**ds), "agent": agent})


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    return parse_config(path.read_text(), path.parent)


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that ``parse_config`` maps back to an equal config."""
    cp = configparser.ConfigParser(interpolation=None)
    d = cfg.to_dict()
    fmt = lambda v: "none" if v is None else (" ".join(map(str, v)) if isinstance(v, (list, tuple))
                                              else str(v))
    cp["experiment"] = {k: fmt(d[k]) for k in _SCHEMA["experiment"]}
    cp["dataset"] = {k: fmt(v) for k, v in d["dataset"].items()}
    a = d["agent"]
    cp["agent"] = {k: fmt(a[k]) for k in _SCHEMA["agent"]}
    cql = dict(a["cql"])
    cql["action_grid"] = "none" if cql["action_grid"] is None else json.dumps(cql["action_grid"])
    cp["cql"] = {k: fmt(v) if k != "action_grid" else v for k, v in cql.items()}
    cp["s4rl"] = {k: fmt(v) for k, v in a["s4rl"].items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
