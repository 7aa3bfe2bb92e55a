import json
import math
import shutil

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseorder.catalog import load_catalog
from phaseorder.config import ConfigError, load_config, parse_config
from phaseorder.explorer import Campaign, EmptySelectionError, select_top
from phaseorder.journal import Journal
from phaseorder.model import ModelError

from _records import make_record
from conftest import FIXTURES, write_config

SMALL = {"thread_sets": ["serial", 2], "random_count": 8, "model_count": 8, "rescreen_reps": 2}


def brute_force_top(records, fraction_num, fraction_den):
    valid = [r for r in records if r.valid]
    n = -(-len(valid) * fraction_num // fraction_den)
    ranked = sorted(valid, key=lambda r: (r.mean_energy_j, r.mean_time_ms, r.index))
    return {r.key for r in ranked[:n]}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 3), st.booleans()), min_size=1, max_size=120))
def test_select_top_matches_brute_force(rows):
    # small integer energies force many ties
    records = [make_record(i, float(e), float(t + 1), valid=v) for i, (e, t, v) in enumerate(rows)]
    if not any(v for *_, v in rows):
        with pytest.raises(EmptySelectionError):
            select_top(records, 0.05)
        return
    got = select_top(records, 0.05)
    assert {r.key for r in got} == brute_force_top(records, 1, 20)
    assert [r.mean_energy_j for r in got] == sorted(r.mean_energy_j for r in got)


@pytest.mark.parametrize("valid,fraction,expected", [
    (1000, 0.05, 50), (41, 0.05, 3), (40, 0.05, 2), (1, 0.05, 1), (30, 0.1, 3), (7, 1.0, 7),
])
def test_selection_count_is_ceiling(valid, fraction, expected):
    records = [make_record(i, float(i)) for i in range(valid)] + [make_record(10_000, 0.0, valid=False)]
    assert len(select_top(records, fraction)) == expected


def test_select_top_rejects_bad_fraction():
    with pytest.raises(ValueError):
        select_top([make_record(0, 1.0)], 0)


@pytest.fixture(scope="module")
def small_campaign(tmp_path_factory):
    d = tmp_path_factory.mktemp("camp")
    shutil.copytree(FIXTURES, d, dirs_exist_ok=True)
    cfg_path = write_config(d, plan=SMALL)
    camp = Campaign(load_config(cfg_path))
    camp.start()
    results = camp.run()
    return cfg_path, camp, results


def test_campaign_completes(small_campaign):
    _, camp, results = small_campaign
    assert set(results) == {"alpha", "beta", "gamma"}
    for res in results.values():
        valid = sum(r.valid for r in res.screened)
        assert len(res.screened) == 8
        assert len(res.rescreened) == math.ceil(0.05 * valid)
        assert all(len(r.samples) == 2 for r in res.rescreened if r.valid)
        assert res.complete
    assert Journal(camp.journal.root).read_json("state/complete.json")["complete"]


def test_baseline_is_argmin(small_campaign):
    _, _, results = small_campaign
    for res in results.values():
        row = res.baseline
        assert len(row.grid) == 2 * 4
        valid = [r for r in row.grid if r.valid]
        assert row.best.mean_energy_j == min(r.mean_energy_j for r in valid)
    beta = results["beta"].baseline
    serial = [r for r in beta.grid if r.exec.threads is None]
    # beta is built so that O2 is the most frugal level and O3 the fastest
    assert min(serial, key=lambda r: r.mean_energy_j).level == "O2"
    assert min(serial, key=lambda r: r.mean_time_ms).level == "O3"


def test_leave_one_out_models(small_campaign):
    _, camp, _ = small_campaign
    seeds = camp.journal.read_json("state/seeds.json")
    for name in ("alpha", "beta", "gamma"):
        labels = [l for l, _ in camp.journal.read_json(f"models/{name}.json")["training_set"]]
        assert name not in labels
        assert sorted(labels) == sorted(set(seeds) - {name})


def test_rerun_measures_nothing(small_campaign):
    cfg_path, camp, results = small_campaign
    before = {p.name: p.read_bytes() for p in (camp.journal.root / "records").iterdir()}
    again = Campaign(load_config(cfg_path))
    again.start(resume=True)
    rerun = again.run()
    assert again.measured == 0
    after = {p.name: p.read_bytes() for p in (camp.journal.root / "records").iterdir()}
    assert after == before
    assert {k: [r.key for r in v.rescreened] for k, v in rerun.items()} == \
        {k: [r.key for r in v.rescreened] for k, v in results.items()}


def test_existing_journal_requires_resume(small_campaign):
    cfg_path, _, _ = small_campaign
    with pytest.raises(ConfigError):
        Campaign(load_config(cfg_path)).start(resume=False)


def test_interrupted_campaign_resumes(fixture_dir, monkeypatch):
    cfg_path = write_config(fixture_dir, plan={**SMALL, "thread_sets": ["serial"]})
    camp = Campaign(load_config(cfg_path))
    camp.start()
    real_finish = Campaign._finish
    calls = {"n": 0}

    def dying_finish(self, prep):
        calls["n"] += 1
        if calls["n"] > 15:
            raise KeyboardInterrupt
        return real_finish(self, prep)

    monkeypatch.setattr(Campaign, "_finish", dying_finish)
    with pytest.raises(KeyboardInterrupt):
        camp.run()
    monkeypatch.undo()
    journal = Journal(camp.journal.root)
    done = {p.name: p.read_bytes() for p in (journal.root / "records").iterdir()}
    assert len(done) == 15

    resumed = Campaign(load_config(cfg_path))
    resumed.start(resume=True)
    resumed.run()
    records = {p.name: p.read_bytes() for p in (journal.root / "records").iterdir()}
    assert all(records[k] == v for k, v in done.items())
    keys = [e["key"] for e in journal.index()]
    assert len(keys) == len(set(keys)) == len(records)
    assert resumed.measured <= len(records) - 15


def test_single_kernel_is_rejected(fixture_dir):
    cfg_path = write_config(fixture_dir, plan=SMALL)
    cfg = load_config(cfg_path)
    cfg.kernels = cfg.kernels[:1]
    camp = Campaign(cfg)
    camp.start()
    with pytest.raises(ModelError):
        camp.run()


def test_seed_changes_random_batch(tmp_path):
    data = json.loads((FIXTURES / "campaign.json").read_text())
    seqs = {}
    for seed in ("s1", "s2"):
        data["seed"] = seed
        data["plan"].pop("seed", None)
        cfg = parse_config(data, FIXTURES)
        cfg.journal = tmp_path / seed
        seqs[seed] = [s.names for s in Campaign(cfg, catalog=load_catalog()).random_sequences()]
    assert seqs["s1"] != seqs["s2"]
