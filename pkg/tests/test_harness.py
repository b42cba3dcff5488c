import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from s4rl.agent import AgentConfig, CqlConfig, S4rlConfig, s4rl_gaussian
from s4rl.augment import GaussianNoise, Identity
from s4rl.core import SeededRng
from s4rl.dataset import collect, load, save
from s4rl.envs import make_env, random_policy, reference_scores
from s4rl.errors import ConfigurationError, TrainingHalted
from s4rl.harness import (Cell, DatasetRecipe, ExperimentConfig, SweepReport, agent_variant,
                          dump_config, emit, load_config, parse_config, parse_csv, read_run_metrics,
                          report_from_dir, resolve_dataset, run, run_seed, sweep_augmentations,
                          sweep_limited_data)
from s4rl.harness.sweep import worker_count

ENV = make_env("pointmass2d")


@pytest.fixture(scope="module")
def data_path(tmp_path_factory):
    ds = collect(ENV, random_policy(ENV), 10, SeededRng(5), split="random", behavior="uniform")
    return str(save(ds, tmp_path_factory.mktemp("data") / "pm-random.s4rlds"))


def tiny(data_path, out, **kw):
    base = dict(env="pointmass2d", dataset=DatasetRecipe(path=data_path),
                agent=AgentConfig(hidden=(16, 16), batch_size=32, s4rl=s4rl_gaussian()),
                steps=40, eval_every=20, eval_episodes=3, seeds=(0,), output_dir=str(out))
    base.update(kw)
    return ExperimentConfig(**base)


# -- configuration -----------------------------------------------------------------------

FULL_INI = """
[experiment]
env = pendulum
steps = 1000
eval_every = 250
eval_episodes = 7
seeds = 3, 4
output_dir = out
name = demo

[dataset]
split = medium-expert
transitions = 4000
seed = 11
fraction = 0.25

[agent]
algo = cql
hidden = 32 32
batch_size = 128
alpha = 0.1
auto_alpha = yes

[cql]
weight = 5
n_actions = 6
action_grid = [[-1.0], [0.0], [1.0]]

[s4rl]
kind = uniform:2e-3
count = 4
"""


def test_parse_full_config(tmp_path):
    cfg = parse_config(FULL_INI, base_dir=tmp_path)
    assert cfg.env == "pendulum" and cfg.seeds == (3, 4) and cfg.name == "demo"
    assert cfg.output_dir == str(tmp_path / "out")
    assert cfg.dataset == DatasetRecipe(split="medium-expert", transitions=4000, seed=11, fraction=0.25)
    a = cfg.agent
    assert (a.algo, a.hidden, a.batch_size, a.alpha, a.auto_alpha) == ("cql", (32, 32), 128, 0.1, True)
    assert a.cql.weight == 5.0 and a.cql.n_actions == 6 and a.cql.action_grid.shape == (3, 1)
    assert str(a.s4rl.kind) == "uniform:0.002" and a.s4rl.count == 4


def test_defaults_when_sections_missing():
    cfg = parse_config("[experiment]\nenv = pointmass2d\n")
    assert cfg.agent == AgentConfig() and cfg.steps == 100000 and cfg.seeds == (0, 1, 2, 3, 4)


def test_dump_config_roundtrip(tmp_path):
    cfg = parse_config(FULL_INI, base_dir=tmp_path)
    back = parse_config(dump_config(cfg))
    assert back.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("text,field", [
    ("[experiment]\nsteps = -1\n", "experiment.steps"),
    ("[experiment]\nseeds =\n", "experiment.seeds"),
    ("[experiment]\nenv = hopper\n", "experiment.env"),
    ("[experiment]\neval_every = x\n", "experiment.eval_every"),
    ("[dataset]\nsplit = expert\n", "dataset.split"),
    ("[dataset]\nfraction = 1.5\n", "dataset.fraction"),
    ("[dataset]\npath = /nonexistent/file.s4rlds\n", "dataset.path"),
    ("[agent]\nbatch_size = 0\n", "agent.batch_size"),
    ("[agent]\nauto_alpha = maybe\n", "agent.auto_alpha"),
    ("[agent]\nlearning_rate = 1\n", "agent.learning_rate"),
    ("[cql]\nweight = -1\n", "cql.weight"),
    ("[s4rl]\nkind = blur\n", "s4rl.kind"),
    ("[s4rl]\ncount = 0\n", "s4rl.count"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigurationError, match=field.replace(".", r"\.")):
        parse_config(text)


def test_unknown_section_and_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="section"):
        parse_config("[optimizer]\nlr = 1\n")
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "none.ini")


def test_fingerprint_ignores_seeds_and_paths(data_path, tmp_path):
    a = tiny(data_path, tmp_path / "a")
    assert a.training_fingerprint() == a.with_(seeds=(9,), output_dir="x", name="y").training_fingerprint()
    assert a.training_fingerprint() != a.with_(steps=41).training_fingerprint()


# -- runs ------------------------------------------------------------------------------------

def test_zero_step_smoke(data_path, tmp_path):
    m = run_seed(tiny(data_path, tmp_path, steps=0), 0)
    assert m.complete and len(m.records) == 1 and m.records[0]["step"] == 0
    rec = m.records[0]
    assert math.isfinite(rec["normalized_score"])
    assert rec["normalized_score"] == pytest.approx(reference_scores(ENV).normalize(rec["raw_return"]))


def test_metrics_files_and_eval_points(data_path, tmp_path):
    cfg = tiny(data_path, tmp_path, steps=50)
    m = run_seed(cfg, 0)
    assert [r["step"] for r in m.records] == [0, 20, 40, 50]
    assert m.records[1]["critic_loss"] is not None and m.records[0]["critic_loss"] is None
    lines = (tmp_path / "seed_0" / "metrics.jsonl").read_text().splitlines()
    assert [json.loads(x) for x in lines] == m.records
    back = read_run_metrics(tmp_path / "seed_0")
    assert back.records == m.records and back.complete and back.final_score == m.final_score


def test_same_config_same_metrics(data_path, tmp_path):
    a = run_seed(tiny(data_path, tmp_path / "a"), 0)
    b = run_seed(tiny(data_path, tmp_path / "b"), 0)
    assert a.records == b.records


def test_resume_matches_uninterrupted(data_path, tmp_path):
    full = run_seed(tiny(data_path, tmp_path / "full", steps=60), 0)
    cfg = tiny(data_path, tmp_path / "part", steps=60)
    part = run_seed(cfg, 0, stop_after=20)
    assert not part.complete and part.records[-1]["step"] == 20
    assert read_run_metrics(tmp_path / "part" / "seed_0").complete is False
    assert run_seed(cfg, 0).records == full.records
    # a finished run is reloaded, not retrained
    assert run_seed(cfg, 0).records == full.records


def test_resume_rejects_changed_config(data_path, tmp_path):
    run_seed(tiny(data_path, tmp_path, steps=20), 0, stop_after=0)
    with pytest.raises(ConfigurationError, match="different config"):
        run_seed(tiny(data_path, tmp_path, steps=20, agent=AgentConfig(hidden=(8,))), 0)


def test_identity_run_matches_cql_run(data_path, tmp_path):
    ident = tiny(data_path, tmp_path / "i", agent=AgentConfig(hidden=(16, 16), batch_size=32,
                                                              s4rl=S4rlConfig(Identity(), 1)))
    cql = agent_variant(ident, "cql").with_(output_dir=str(tmp_path / "c"))
    assert cql.agent.algo == "cql"
    assert run_seed(ident, 0).records == run_seed(cql, 0).records


def test_run_all_seeds_and_isolation(data_path, tmp_path):
    a = run(tiny(data_path, tmp_path / "a", seeds=(0, 1)))
    b = run(tiny(data_path, tmp_path / "b", seeds=(0, 2)))
    assert a[0].records == b[0].records and a[1].records != b[1].records


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_halt_carries_context(data_path, tmp_path):
    ds = load(data_path)
    ds.rewards = ds.rewards.copy()
    ds.rewards[:] = 1e308
    with pytest.raises(TrainingHalted, match="seed 0"):
        run_seed(tiny(data_path, tmp_path, agent=AgentConfig(hidden=(16, 16), batch_size=32,
                                                             critic_lr=1e3)), 0, dataset=ds)


def test_dataset_env_mismatch(data_path, tmp_path):
    with pytest.raises(ConfigurationError, match="dataset"):
        run_seed(tiny(data_path, tmp_path, env="pendulum"), 0)


def test_resolve_dataset_fraction(data_path, tmp_path):
    cfg = tiny(data_path, tmp_path, dataset=DatasetRecipe(path=data_path, fraction=0.05))
    ds = resolve_dataset(cfg)
    assert len(ds) == math.ceil(0.05 * 1000) and ds.provenance["fraction"] == 0.05


# -- reports ---------------------------------------------------------------------------------

def _report():
    scores = {("t1", "a"): [10.0, 12.0], ("t1", "b"): [12.0, 13.0], ("t1", "c"): [5.0, 6.0],
              ("t2", "a"): [1.0, 2.0], ("t2", "b"): [3.0, 4.0], ("t2", "c"): [3.0, 4.0]}
    cells = [Cell(t, "s4rl", k, seed, v) for (t, k), vals in scores.items() for seed, v in enumerate(vals)]
    return SweepReport("augmentation", cells, ["a", "b", "c"]), scores


def _independent_ranks(means):
    """Average ranks with ties sharing the mean of their positions (1 = best)."""
    order = sorted(means, key=lambda k: -means[k])
    ranks = {}
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and means[order[j + 1]] == means[order[i]]:
            j += 1
        for k in order[i:j + 1]:
            ranks[k] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def test_stats_and_ranks_against_independent_aggregation():
    rep, scores = _report()
    st = rep.stats()
    for (t, k), vals in scores.items():
        s = st[(t, "s4rl", k)]
        assert s["mean"] == pytest.approx(np.mean(vals), abs=1e-12)
        assert s["stderr"] == pytest.approx(np.std(vals, ddof=1) / math.sqrt(2), abs=1e-12)
    per_task = {t: _independent_ranks({k: np.mean(v) for (tt, k), v in scores.items() if tt == t})
                for t in ("t1", "t2")}
    assert per_task["t2"] == {"b": 1.5, "c": 1.5, "a": 3.0}
    avg = rep.average_ranking()
    for k in "abc":
        assert avg[("s4rl", k)] == pytest.approx((per_task["t1"][k] + per_task["t2"][k]) / 2)
    assert sorted(rep.rankings()[("t1",)].values()) == [1.0, 2.0, 3.0]
    score = rep.average_score()
    assert score[("s4rl", "a")] == pytest.approx((11.0 + 1.5) / 2)


def test_failed_cells_rank_last():
    rep, _ = _report()
    for c in rep.cells:
        if c.setting == "a":
            c.error, c.score = "boom", float("nan")
    assert rep.rankings()[("t1",)][("s4rl", "a")] == 3.0
    assert rep.stats()[("t1", "s4rl", "a")]["failed"] == 2
    assert len(rep.errors()) == 4


def test_emit_csv_roundtrip_and_means(tmp_path):
    rep, _ = _report()
    csv_path, plot_path = emit(rep, tmp_path / "rep")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "# s4rl-sweep-csv v1" and lines[1] == "task,agent,setting,seed,score,stderr"
    back = parse_csv(csv_path)
    assert [(c.task, c.agent, c.setting, c.seed, c.score) for c in back.sorted_cells()] == \
        [(c.task, c.agent, c.setting, c.seed, c.score) for c in rep.sorted_cells()]
    # re-aggregate straight from the CSV rows
    with open(csv_path) as fh:
        next(fh)
        rows = list(csv.DictReader(fh))
    for key, st in rep.stats().items():
        vals = [float(r["score"]) for r in rows if (r["task"], r["agent"], r["setting"]) == key]
        assert abs(np.mean(vals) - st["mean"]) < 1e-9
    plot = json.loads(plot_path.read_text())
    assert plot["kind"] == "augmentation" and plot["series"]["s4rl"]["x"] == ["a", "b", "c"]


def test_emit_is_deterministic(tmp_path):
    # tasks and agents keep their sweep order; seeds within a cell group are sorted
    rep, _ = _report()
    swapped = sorted(rep.cells, key=lambda c: (c.task, c.setting, -c.seed))
    a, _ = emit(rep, tmp_path / "a")
    b, _ = emit(SweepReport(rep.kind, swapped, rep.settings), tmp_path / "b")
    c, _ = emit(rep, tmp_path / "c")
    assert a.read_text() == b.read_text() == c.read_text()


def test_empty_report_header_only(tmp_path):
    path, plot = emit(SweepReport("limited-data"), tmp_path / "e")
    assert path.read_text().splitlines() == ["# s4rl-sweep-csv v1", "task,agent,setting,seed,score,stderr"]
    assert json.loads(plot.read_text())["series"] == {}


def test_nan_scores_written_as_null_in_plot(tmp_path):
    rep = SweepReport("augmentation", [Cell("t", "s4rl", "a", 0, error="x")], ["a"])
    _, plot = emit(rep, tmp_path / "n")
    assert json.loads(plot.read_text())["series"]["s4rl"]["y"] == [None]


def test_parse_csv_rejects_unversioned(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("task,agent\n")
    with pytest.raises(ConfigurationError):
        parse_csv(p)


# -- sweeps ----------------------------------------------------------------------------------

def test_augmentation_sweep_identity_equals_baseline(data_path, tmp_path):
    base = tiny(data_path, tmp_path, steps=20, agent=AgentConfig(hidden=(16, 16), batch_size=32,
                                                                 s4rl=S4rlConfig(Identity(), 1)))
    rep = sweep_augmentations(base, ["identity"], include_baseline=True)
    st = rep.stats()
    assert list(rep.settings) == ["none", "identity"]
    assert st[("pointmass2d/pm-random", "cql", "none")]["mean"] == \
        st[("pointmass2d/pm-random", "s4rl", "identity")]["mean"]
    again = report_from_dir(tmp_path)
    assert [c.score for c in again.sorted_cells()] == [c.score for c in rep.sorted_cells()]


def test_augmentation_sweep_three_kinds_ranked(data_path, tmp_path):
    base = tiny(data_path, tmp_path, steps=20, seeds=(0, 1))
    rep = sweep_augmentations(base, ["gauss:3e-3", "uniform:1e-3", "dimdrop"])
    ranks = rep.rankings()[("pointmass2d/pm-random",)]
    assert sorted(ranks.values()) == sorted(_independent_ranks(
        {k: v["mean"] for k, v in {k[2]: s for k, s in rep.stats().items()}.items()}).values())
    assert len(rep.cells) == 6 and not rep.errors()
    with pytest.raises(ConfigurationError):
        sweep_augmentations(base, [])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_failing_cell_does_not_stop_sweep(data_path, tmp_path):
    ds = load(data_path)
    ds.rewards = np.full(len(ds), 1e308)
    bad = save(ds, tmp_path / "bad.s4rlds")
    base = tiny(str(bad), tmp_path / "sw", steps=20, agent=AgentConfig(hidden=(16, 16), batch_size=32,
                                                                        critic_lr=1e3))
    rep = sweep_augmentations(base, ["gauss", "dimdrop"])
    assert len(rep.cells) == 2 and len(rep.errors()) == 2
    assert "TrainingHalted" in rep.errors()[0]["error"]


def test_limited_data_sweep_sizes_and_series(data_path, tmp_path):
    base = tiny(data_path, tmp_path, steps=20, seeds=(0, 1))
    rep = sweep_limited_data(base, [0.05, 0.5, 1.0])
    assert len(rep.cells) == 3 * 2 * 2
    for f in (0.05, 0.5):
        (p,) = (tmp_path / "datasets" / f"f{f:g}").glob("*.s4rlds")
        assert len(load(p)) == math.ceil(f * 1000)
    series = rep.series()
    assert set(series) == {"cql", "s4rl-gauss:0.003"}
    assert series["cql"]["x"] == [0.05, 0.5, 1.0]
    assert sum(len(s["per_seed"][i]) for s in series.values() for i in range(3)) == 12


def test_limited_data_full_fraction_matches_plain_run(data_path, tmp_path):
    base = tiny(data_path, tmp_path / "sw", steps=20)
    rep = sweep_limited_data(base, [1.0], agents=("s4rl",))
    plain = run_seed(base.with_(output_dir=str(tmp_path / "plain")), 0)
    assert rep.cells[0].score == plain.final_score
    with pytest.raises(ConfigurationError):
        sweep_limited_data(base, [0.0])


def test_agent_variant_labels(data_path, tmp_path):
    base = tiny(data_path, tmp_path)
    assert agent_variant(base, "s4rl:mixup:0.2").agent.s4rl.kind == parse_kind("mixup:0.2")
    assert agent_variant(base, "s4rl").agent.s4rl == base.agent.s4rl
    with pytest.raises(ConfigurationError):
        agent_variant(base, "bc")


def parse_kind(text):
    from s4rl.augment import parse_augment
    return parse_augment(text)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("S4RL_WORKERS", "3")
    assert worker_count() == 3 and worker_count(0) == 1
    monkeypatch.delenv("S4RL_WORKERS")
    assert worker_count() == 1


def test_parallel_sweep_matches_serial(data_path, tmp_path):
    base = tiny(data_path, tmp_path / "s", steps=20, seeds=(0, 1))
    serial = sweep_augmentations(base, ["gauss"], workers=1)
    par = sweep_augmentations(base.with_(output_dir=str(tmp_path / "p")), ["gauss"], workers=2)
    assert [c.score for c in serial.sorted_cells()] == [c.score for c in par.sorted_cells()]
