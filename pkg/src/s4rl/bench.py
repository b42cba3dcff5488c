"""Timing of the compiled kernels against the numpy fallback.

Each kernel is run on the same inputs under both backends; results are
checked for agreement before timing so a fast-but-wrong kernel cannot win.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .core import backend
from .core.rng import SeededRng


def _best(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    # median is robust to scheduler noise on shared machines
    return float(np.median(times))


def kernel_cases(rows: int, width: int = 64, in_width: int = 6, seed: int = 0):
    g = SeededRng(seed)
    x = g.standard_normal((rows, in_width))
    W1 = g.standard_normal((in_width, width)) * 0.3
    b1 = g.standard_normal(width) * 0.1
    W2 = g.standard_normal((width, width)) * 0.1
    b2 = g.standard_normal(width) * 0.1
    h1 = np.maximum(x @ W1 + b1, 0.0)
    h2 = np.tanh(h1 @ W2 + b2)
    gh = g.standard_normal(h2.shape)
    p = g.standard_normal((width, width))
    grad = g.standard_normal((width, width))
    return {
        "dense_forward relu": lambda k: k.dense_forward(x, W1, b1, 1),
        "dense_forward tanh": lambda k: k.dense_forward(h1, W2, b2, 2),
        "dense_backward tanh": lambda k: k.dense_backward(h1, W2, h2, gh, 2),
        "adam_update 64x64": lambda k: k.adam_update(p.copy(), grad, np.zeros_like(p),
                                                      np.zeros_like(p), 3e-4, 0.9, 0.999, 1e-8, 1),
        "polyak_update 64x64": lambda k: k.polyak_update(p.copy(), grad, 0.005),
    }


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    if a is None:
        return b is None
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def train_step_time(backend_name: str, steps: int = 20, batch_size: int = 256) -> float:
    from .agent import AgentConfig, make_agent, s4rl_gaussian, train_step
    from .dataset import collect
    from .envs import make_env, random_policy

    env = make_env("pointmass2d")
    ds = collect(env, random_policy(env), 20, SeededRng(0))
    with backend.using(backend_name):
        agent = make_agent(env.spec, AgentConfig(batch_size=batch_size, s4rl=s4rl_gaussian()),
                           SeededRng(1))
        train_step(agent, ds, SeededRng(2).split("warm"))
        t = time.perf_counter()
        for i in range(steps):
            train_step(agent, ds, SeededRng(2).split(f"step:{i}"))
        return (time.perf_counter() - t) / steps


def run(rows: int = 2816, repeat: int = 50, train_steps: int = 20) -> list[dict]:
    names = sorted(backend.AVAILABLE)
    rows_out = []
    for case, fn in kernel_cases(rows).items():
        outs = {n: fn(backend.AVAILABLE[n]) for n in names}
        ok = all(_agree(outs[names[0]], outs[n]) for n in names[1:])
        res = {"case": case, "agree": ok}
        for n in names:
            res[n] = _best(lambda: fn(backend.AVAILABLE[n]), repeat)
        rows_out.append(res)
    if train_steps:
        res = {"case": "train_step s4rl b256", "agree": True}
        for n in names:
            res[n] = train_step_time(n, train_steps)
        rows_out.append(res)
    return rows_out


def format_table(results: list[dict]) -> str:
    names = [k for k in ("python", "ext") if k in results[0]]
    head = f"{'case':<24s}" + "".join(f"{n + ' (us)':>14s}" for n in names)
    if len(names) == 2:
        head += f"{'speedup':>10s}"
    lines = [head + "  agree"]
    for r in results:
        line = f"{r['case']:<24s}" + "".join(f"{r[n] * 1e6:14.1f}" for n in names)
        if len(names) == 2:
            line += f"{r['python'] / r['ext']:10.2f}"
        lines.append(line + f"  {'yes' if r['agree'] else 'NO'}")
    return "\n".join(lines)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=2816, help="batch rows per kernel call")
    p.add_argument("--repeat", type=int, default=50)
    p.add_argument("--train-steps", type=int, default=20)
    args = p.parse_args(argv)
    print(f"active backend: {backend.name}; available: {', '.join(sorted(backend.AVAILABLE))}")
    results = run(args.rows, args.repeat, args.train_steps)
    print(format_table(results))
    return 0 if all(r["agree"] for r in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
