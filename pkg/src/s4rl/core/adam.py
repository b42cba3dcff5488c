"""Adam with bias correction, operating in place on parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ShapeError
from . import backend as _be


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    names: list[str] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8, names=None):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   0, lr, beta1, beta2, eps, list(names or []))

    def copy(self) -> AdamState:
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v], self.step,
                         self.lr, self.beta1, self.beta2, self.eps, list(self.names))

    def to_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"{prefix}/m{i}"] = m
            out[f"{prefix}/v{i}"] = v
        return out

    def hyper(self) -> dict:
        return {"step": self.step, "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "n": len(self.m), "names": self.names}

    @classmethod
    def from_arrays(cls, prefix: str, hyper: dict, arrays) -> AdamState:
        n = hyper["n"]
        return cls([np.array(arrays[f"{prefix}/m{i}"]) for i in range(n)],
                   [np.array(arrays[f"{prefix}/v{i}"]) for i in range(n)],
                   hyper["step"], hyper["lr"], hyper["beta1"], hyper["beta2"], hyper["eps"],
                   list(hyper.get("names", [])))


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """One Adam update, applied in place; returns ``(params, state)``.

    All gradients are checked before any parameter moves, so a NaN leaves
    both parameters and moments untouched.
    """
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError(f"adam_step: {len(params)} params, {len(grads)} grads, "
                         f"{len(state.m)} moment slots")
    for i, (p, g, m) in enumerate(zip(params, grads, state.m)):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"adam_step: slot {i} shapes {p.shape}/{g.shape}/{m.shape}")
        if not np.isfinite(g).all():
            name = state.names[i] if i < len(state.names) else f"param[{i}]"
            raise NumericalError(f"non-finite gradient in {name}")
    state.step += 1
    k = _be.kernels
    for p, g, m, v in zip(params, grads, state.m, state.v):
        k.adam_update(p, np.ascontiguousarray(g), m, v, state.lr, state.beta1, state.beta2,
                      state.eps, state.step)
    return params, state
