"""Stochastic state transformations used for local exploration around dataset states.

Every transformation returns states clamped into the environment's box, so
outputs are always valid members of the state space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.rng import SeededRng
from .envs import EnvSpec
from .errors import ConfigurationError


@dataclass(frozen=True)
class Identity:
    def __str__(self):
        return "identity"


@dataclass(frozen=True)
class GaussianNoise:
    sigma: float = 3e-3

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"GaussianNoise sigma must be > 0, got {self.sigma}")

    def __str__(self):
        return f"gauss:{self.sigma:g}"


@dataclass(frozen=True)
class UniformNoise:
    alpha: float = 1e-3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"UniformNoise alpha must be > 0, got {self.alpha}")

    def __str__(self):
        return f"uniform:{self.alpha:g}"


@dataclass(frozen=True)
class AmplitudeScale:
    lo: float = 0.98
    hi: float = 1.02
    per_dim: bool = False

    def __post_init__(self):
        if not 0 < self.lo <= self.hi:
            raise ConfigurationError(f"AmplitudeScale needs 0 < lo <= hi, got ({self.lo}, {self.hi})")

    def __str__(self):
        return f"ampscale:{self.lo:g}:{self.hi:g}" + (":perdim" if self.per_dim else "")


@dataclass(frozen=True)
class DimDropout:
    def __str__(self):
        return "dimdrop"


@dataclass(frozen=True)
class StateSwitch:
    """Swap one pair of same-kind dimensions; ``groups=None`` uses the env's pairs."""

    groups: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.groups is not None:
            _check_groups(self.groups)

    def __str__(self):
        if self.groups is None:
            return "switch"
        return "switch:" + ",".join(f"{a}-{b}" for a, b in self.groups)


@dataclass(frozen=True)
class MixUp:
    beta_alpha: float = 0.4

    def __post_init__(self):
        if not self.beta_alpha > 0:
            raise ConfigurationError(f"MixUp beta_alpha must be > 0, got {self.beta_alpha}")

    def __str__(self):
        return f"mixup:{self.beta_alpha:g}"


AugmentKind = Identity | GaussianNoise | UniformNoise | AmplitudeScale | DimDropout | StateSwitch | MixUp


def _check_groups(groups):
    if not groups:
        raise ConfigurationError("StateSwitch needs at least one dimension pair")
    seen = set()
    for pair in groups:
        if len(pair) != 2 or pair[0] == pair[1]:
            raise ConfigurationError(f"bad switch pair {pair}")
        if seen & set(pair):
            raise ConfigurationError(f"switch pairs overlap at {pair}")
        seen |= set(pair)


def parse_augment(text: str) -> AugmentKind:
    """Parse ``gauss:3e-3``, ``uniform:1e-3``, ``ampscale:0.98:1.02``, ``dimdrop``,
    ``switch``, ``mixup:0.4`` or ``identity``."""
    parts = text.strip().lower().split(":")
    head, args = parts[0], parts[1:]
    try:
        if head in ("identity", "none"):
            return Identity()
        if head in ("gauss", "gaussian"):
            return GaussianNoise(float(args[0])) if args else GaussianNoise()
        if head == "uniform":
            return UniformNoise(float(args[0])) if args else UniformNoise()
        if head == "ampscale":
            per_dim = "perdim" in args
            nums = [float(a) for a in args if a != "perdim"]
            return AmplitudeScale(*nums, per_dim=per_dim) if nums else AmplitudeScale(per_dim=per_dim)
        if head == "dimdrop":
            return DimDropout()
        if head == "switch":
            if not args:
                return StateSwitch()
            pairs = tuple(tuple(int(i) for i in p.split("-")) for p in args[0].split(","))
            return StateSwitch(pairs)
        if head == "mixup":
            return MixUp(float(args[0])) if args else MixUp()
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigurationError(f"cannot parse augmentation {text!r}: {exc}") from None
    raise ConfigurationError(f"unknown augmentation {text!r}")


def validate(state, spec: EnvSpec) -> bool:
    """True iff every coordinate lies inside the closed state box."""
    s = np.asarray(state, dtype=np.float64)
    return bool(np.all(s >= spec.low) and np.all(s <= spec.high))


def augment_states(states, next_states, kind: AugmentKind, spec: EnvSpec, rng: SeededRng,
                   mix_lambda=None, clamp: bool = True) -> np.ndarray:
    """Apply one draw of ``kind`` to each row of ``states``.

    ``next_states`` is only read by MixUp. ``mix_lambda`` pins MixUp's
    coefficient (scalar or per-row) instead of sampling it.
    """
    s = np.asarray(states, dtype=np.float64)
    n, d = s.shape
    if isinstance(kind, Identity):
        out = s.copy()
    elif isinstance(kind, GaussianNoise):
        out = s + kind.sigma * rng.standard_normal((n, d))
    elif isinstance(kind, UniformNoise):
        out = s + rng.uniform(-kind.alpha, kind.alpha, (n, d))
    elif isinstance(kind, AmplitudeScale):
        shape = (n, d) if kind.per_dim else (n, 1)
        out = s * rng.uniform(kind.lo, kind.hi, shape)
    elif isinstance(kind, DimDropout):
        out = s.copy()
        out[np.arange(n), rng.integers(0, d, n)] = 0.0
    elif isinstance(kind, StateSwitch):
        groups = kind.groups if kind.groups is not None else spec.switch_groups
        _check_groups(groups)
        pairs = np.asarray(groups, dtype=np.int64)
        if pairs.max() >= d:
            raise ConfigurationError(f"switch pair index out of range for {d}-D state")
        pick = pairs[rng.integers(0, len(pairs), n)]
        rows = np.arange(n)
        out = s.copy()
        out[rows, pick[:, 0]] = s[rows, pick[:, 1]]
        out[rows, pick[:, 1]] = s[rows, pick[:, 0]]
    elif isinstance(kind, MixUp):
        if next_states is None:
            raise ConfigurationError("MixUp needs the next state")
        s2 = np.asarray(next_states, dtype=np.float64)
        if mix_lambda is None:
            lam = rng.beta(kind.beta_alpha, kind.beta_alpha, (n, 1))
        else:
            lam = np.broadcast_to(np.asarray(mix_lambda, dtype=np.float64).reshape(-1, 1), (n, 1))
        out = lam * s + (1.0 - lam) * s2
    else:
        raise ConfigurationError(f"unsupported augmentation {kind!r}")
    if clamp:
        np.clip(out, spec.low, spec.high, out=out)
    return out


def augment(s_t, s_next, kind: AugmentKind, spec: EnvSpec, rng: SeededRng, mix_lambda=None):
    """Single-state version of ``augment_states``."""
    s_t = np.asarray(s_t, dtype=np.float64)
    nxt = None if s_next is None else np.asarray(s_next, dtype=np.float64)[None, :]
    return augment_states(s_t[None, :], nxt, kind, spec, rng, mix_lambda)[0]


def augment_batch(states, next_states, kind: AugmentKind, spec: EnvSpec, rng: SeededRng,
                  count: int) -> np.ndarray:
    """``count`` independent draws per state, shaped ``(count, n, d)``."""
    if count < 1:
        raise ConfigurationError(f"augmentation count must be >= 1, got {count}")
    if isinstance(kind, Identity):
        s = np.asarray(states, dtype=np.float64)
        return np.broadcast_to(np.clip(s, spec.low, spec.high), (count,) + s.shape).copy()
    return np.stack([augment_states(states, next_states, kind, spec, rng.split(f"draw{i}"))
                     for i in range(count)])
