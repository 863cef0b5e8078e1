import csv

import numpy as np
import pytest

from reggames.experiments import (
    ExperimentConfig,
    aggregate,
    run,
    run_sample,
    sample_rng,
)
from reggames.game import GameSize


def _cfg(**kw):
    base = dict(experiment="oddness", game_class="identical", size=GameSize((2, 3)), samples=30, master_seed=7)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(experiment="nope")
    with pytest.raises(ValueError):
        _cfg(samples=0)
    with pytest.raises(ValueError):
        _cfg(size=GameSize((5, 2)))
    assert _cfg(size=GameSize((5, 2)), max_actions=5).size.shape == (5, 2)


def test_sample_streams_are_counter_based():
    a = sample_rng(11, 3).standard_normal(4)
    b = sample_rng(11, 3).standard_normal(4)
    c = sample_rng(11, 4).standard_normal(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    # a row does not depend on what ran before it
    cfg = _cfg()
    assert run_sample(cfg, 5) == run_sample(cfg, 5)


def test_reports_bit_identical(tmp_path):
    cfg = _cfg()
    p1, j1 = run(cfg, workers=1).write(tmp_path / "a")
    p2, j2 = run(cfg, workers=1).write(tmp_path / "b")
    assert p1.read_bytes() == p2.read_bytes()
    assert j1.read_bytes() == j2.read_bytes()


def test_parallel_matches_serial():
    cfg = _cfg(samples=16)
    assert run(cfg, workers=1).rows == run(cfg, workers=2).rows


def test_canary_is_sample_zero_and_flagged():
    rep = run(_cfg(samples=5), workers=1)
    assert rep.rows[0]["canary"] is True and rep.rows[0]["sample"] == 0
    assert rep.aggregates["canary_flagged_irregular"] is True
    assert rep.aggregates["samples"] == 5
    # no canary outside identical-payoff runs
    rep = run(_cfg(game_class="weighted", samples=5), workers=1)
    assert rep.rows[0]["sample"] == 1 and "canary_flagged_irregular" not in rep.aggregates


def test_aggregates_recomputable_from_rows():
    rep = run(_cfg(experiment="regularity_rate", game_class="exact", samples=20), workers=1)
    assert aggregate(rep.config, rep.rows) == rep.aggregates
    assert rep.passed


def test_csv_layout(tmp_path):
    rep = run(_cfg(samples=4, output_path=str(tmp_path / "odd")), workers=1)
    rows = list(csv.DictReader(open(tmp_path / "odd.csv")))
    assert [int(r["sample"]) for r in rows] == [0, 1, 2, 3, 4]
    assert rows[1]["odd"] == "True"
    assert (tmp_path / "odd.json").exists()
    assert rep.passed


@pytest.mark.parametrize("name", ["rank_sweep", "lmatrix_sweep"])
def test_sweeps_have_no_failures(name):
    rep = run(_cfg(experiment=name, size=GameSize((3, 3, 2)), samples=60), workers=1)
    assert rep.passed
    assert rep.aggregates["errors"] == 0


def test_roundtrip_and_triangle():
    rep = run(_cfg(experiment="potential_roundtrip", game_class="weighted", samples=15), workers=1)
    assert rep.passed and rep.aggregates["max_weight_ratio_error"] < 1e-8
    rep = run(_cfg(experiment="equivalence_triangle", game_class="weighted", samples=15), workers=1)
    assert rep.passed and rep.aggregates["disagreements"] == 0


def test_general_three_player_is_a_per_sample_error():
    rep = run(_cfg(game_class="general", size=GameSize((2, 2, 2)), samples=2), workers=1)
    assert rep.aggregates["errors"] == 2
    assert not rep.passed
