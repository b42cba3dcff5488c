"""Dense feed-forward networks with exact reverse-mode gradients."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DatasetFormatError, NumericalError, ShapeError
from . import backend as _be
from .rng import SeededRng

_ACT_CODES = {"linear": 0, "relu": 1, "tanh": 2}
CHECKPOINT_VERSION = 1


@dataclass
class DenseNet:
    """Stack of affine layers; hidden layers use ``activations[i]``, the last is linear."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigurationError("DenseNet needs one bias per weight and at least one layer")
        if len(self.activations) != len(self.weights) - 1:
            raise ConfigurationError(
                f"expected {len(self.weights) - 1} hidden activations, got {len(self.activations)}"
            )
        for a in self.activations:
            if a not in ("relu", "tanh"):
                raise ConfigurationError(f"unknown activation {a!r}")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ShapeError(f"layer {i}: weight {W.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != W.shape[0]:
                raise ShapeError(
                    f"layer {i}: input width {W.shape[0]} != previous output "
                    f"{self.weights[i - 1].shape[1]}"
                )

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    @property
    def in_width(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_width(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def param_names(self) -> list[str]:
        names = []
        for i in range(len(self.weights)):
            names.extend((f"layer{i}.weight", f"layer{i}.bias"))
        return names

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self) -> DenseNet:
        return DenseNet([W.copy() for W in self.weights],
                        [b.copy() for b in self.biases], tuple(self.activations))

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise ShapeError(f"flat vector has shape {vec.shape}, need ({self.n_params},)")
        pos = 0
        for p in self.params():
            p[...] = vec[pos:pos + p.size].reshape(p.shape)
            pos += p.size

    def load_from(self, other: DenseNet) -> None:
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src


def init_dense(sizes, activation: str, rng: SeededRng, out_scale: float = 1.0) -> DenseNet:
    """Uniform fan-in initialisation, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ConfigurationError(f"invalid layer sizes {sizes}")
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        if i == len(sizes) - 2:
            bound *= out_scale
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return DenseNet(weights, biases, (activation,) * (len(sizes) - 2))


@dataclass
class Tape:
    """Activations recorded by ``forward``: layer inputs plus the final output."""

    values: list[np.ndarray] = field(default_factory=list)
    vector: bool = False

    @property
    def input(self) -> np.ndarray:
        return self.values[0]


def _as_rows(x, width: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    vector = x.ndim == 1
    if vector:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ConfigurationError(f"input width {x.shape[-1]} does not match network input {width}")
    return np.ascontiguousarray(x), vector


def forward(net: DenseNet, x) -> tuple[np.ndarray, Tape]:
    """Evaluate ``net`` on a vector or a batch of row vectors."""
    h, vector = _as_rows(x, net.in_width)
    k = _be.kernels
    tape = Tape([h], vector)
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        act = 0 if i == last else _ACT_CODES[net.activations[i]]
        h = k.dense_forward(h, W, b, act)
        tape.values.append(h)
    if not np.isfinite(h).all():
        raise NumericalError("network produced non-finite output (check inputs and weights)")
    return (h[0] if vector else h), tape


def predict(net: DenseNet, x) -> np.ndarray:
    return forward(net, x)[0]


def backward(net: DenseNet, tape: Tape, output_grad, need_input_grad: bool = False):
    """Reverse pass. Returns ``(grads, input_grad)``; grads align with ``net.params()``."""
    g = np.asarray(output_grad, dtype=np.float64)
    if tape.vector and g.ndim == 1:
        g = g[None, :]
    if len(tape.values) != len(net.weights) + 1 or g.shape != tape.values[-1].shape:
        raise ShapeError(
            f"output_grad shape {np.shape(output_grad)} does not match recorded output "
            f"{tape.values[-1].shape}"
        )
    g = np.ascontiguousarray(g)
    k = _be.kernels
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))
    last = len(net.weights) - 1
    for i in range(last, -1, -1):
        act = 0 if i == last else _ACT_CODES[net.activations[i]]
        need_gx = i > 0 or need_input_grad
        g_in, gW, gb = k.dense_backward(tape.values[i], net.weights[i], tape.values[i + 1],
                                        g, act, need_gx)
        grads[2 * i], grads[2 * i + 1] = gW, gb
        g = g_in
    if need_input_grad and tape.vector:
        g = g[0]
    return grads, (g if need_input_grad else None)


def zeros_like_params(net: DenseNet) -> list[np.ndarray]:
    return [np.zeros_like(p) for p in net.params()]


def add_grads(acc: list[np.ndarray], more: list[np.ndarray], scale: float = 1.0) -> list[np.ndarray]:
    for a, m in zip(acc, more):
        if scale == 1.0:
            a += m
        else:
            a += scale * m
    return acc


# -- checkpoints -----------------------------------------------------------------

def _net_meta(net: DenseNet) -> dict:
    return {"sizes": list(net.sizes), "activations": list(net.activations)}


def pack_nets(nets: dict[str, DenseNet]) -> tuple[dict, dict[str, np.ndarray]]:
    meta, arrays = {}, {}
    for key, net in nets.items():
        meta[key] = _net_meta(net)
        for pname, p in zip(net.param_names(), net.params()):
            arrays[f"{key}/{pname}"] = p
    return meta, arrays


def unpack_nets(meta: dict, arrays) -> dict[str, DenseNet]:
    nets = {}
    for key, m in meta.items():
        n_layers = len(m["sizes"]) - 1
        weights = [np.array(arrays[f"{key}/layer{i}.weight"], dtype=np.float64) for i in range(n_layers)]
        biases = [np.array(arrays[f"{key}/layer{i}.bias"], dtype=np.float64) for i in range(n_layers)]
        net = DenseNet(weights, biases, tuple(m["activations"]))
        if list(net.sizes) != list(m["sizes"]):
            raise DatasetFormatError(f"checkpoint net {key!r}: stored shapes disagree with metadata")
        nets[key] = net
    return nets


def save_checkpoint(path, nets: dict[str, DenseNet], seed: int, extra: dict | None = None,
                    extra_arrays: dict[str, np.ndarray] | None = None) -> None:
    """Write networks to an ``.npz`` container with a JSON metadata record."""
    meta, arrays = pack_nets(nets)
    header = {"format": "s4rl-checkpoint", "version": CHECKPOINT_VERSION, "seed": int(seed),
              "nets": meta, "extra": extra or {}}
    arrays = dict(arrays)
    for k, v in (extra_arrays or {}).items():
        arrays[f"extra/{k}"] = v
    arrays["__meta__"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict[str, DenseNet], dict, dict[str, np.ndarray]]:
    """Inverse of ``save_checkpoint``; returns ``(nets, header, extra_arrays)``."""
    with np.load(path, allow_pickle=False) as z:
        if "__meta__" not in z.files:
            raise DatasetFormatError(f"{path}: not an s4rl checkpoint")
        header = json.loads(bytes(z["__meta__"]).decode("utf-8"))
        if header.get("format") != "s4rl-checkpoint" or header.get("version") != CHECKPOINT_VERSION:
            raise DatasetFormatError(f"{path}: unsupported checkpoint version {header.get('version')}")
        nets = unpack_nets(header["nets"], z)
        extra = {k[len("extra/"):]: np.array(z[k]) for k in z.files if k.startswith("extra/")}
    return nets, header, extra
