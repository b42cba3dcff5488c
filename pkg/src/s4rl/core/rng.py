"""Seeded, splittable random streams on top of numpy's PCG64."""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class SeededRng:
    """A deterministic random stream identified by ``(seed, path)``.

    ``split(label)`` derives a child from the identity alone, so it never
    consumes or perturbs draws of the parent, and the same label always
    yields the same child stream.
    """

    __slots__ = ("seed", "path", "gen")

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(path)
        seq = np.random.SeedSequence(
            entropy=self.seed, spawn_key=tuple(_label_key(p) for p in self.path)
        )
        self.gen = np.random.Generator(np.random.PCG64(seq))

    def split(self, label) -> SeededRng:
        return SeededRng(self.seed, self.path + (str(label),))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, path={'/'.join(self.path) or '<root>'})"

    # thin delegation for the draws the package uses
    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self.gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def beta(self, a, b, size=None):
        return self.gen.beta(a, b, size)

    def choice(self, a, size=None, replace=True):
        return self.gen.choice(a, size=size, replace=replace)

    def permutation(self, x):
        return self.gen.permutation(x)

    def get_state(self) -> dict:
        return {"seed": self.seed, "path": list(self.path),
                "bit_generator": self.gen.bit_generator.state}

    @classmethod
    def from_state(cls, state: dict) -> SeededRng:
        rng = cls(state["seed"], tuple(state["path"]))
        rng.gen.bit_generator.state = state["bit_generator"]
        return rng


def rng_split(rng: SeededRng, label) -> SeededRng:
    return rng.split(label)
