"""The experiment grid: completeness, caching, digests, aggregation."""

import json

import numpy as np
import pytest

from robustamc.config import ExperimentConfig
from robustamc.errors import ConfigurationError, GridMismatchError, InputShapeError
from robustamc.grid import (
    CLEAN_ATTACK_ID,
    aggregate_ser,
    run_grid,
    seed_cells,
    ser,
    validate_grid,
)

from conftest import MINI_CONFIG


# ---------------------------------------------------------------------------
# ser / aggregate_ser on synthetic rows


def test_ser_counts_symbol_errors():
    preds = np.array([0, 1, 2, 3])
    truth = np.array([0, 1, 0, 0])
    assert ser(preds, truth) == pytest.approx(0.5)


def test_ser_rejects_shape_mismatch():
    with pytest.raises(InputShapeError):
        ser(np.array([0, 1]), np.array([0, 1, 2]))


def _toy_rows():
    return [
        {"offline": "clean", "online": "none", "shots": 0, "snr_db": 0.0,
         "attack": CLEAN_ATTACK_ID, "ser": 0.5, "n": 10, "seed": 0},
        {"offline": "clean", "online": "none", "shots": 0, "snr_db": 0.0,
         "attack": "pgd@sub", "ser": 0.8, "n": 10, "seed": 0},
        {"offline": "clean", "online": "none", "shots": 0, "snr_db": 10.0,
         "attack": "pgd@sub", "ser": 0.4, "n": 30, "seed": 0},
        {"offline": "clean", "online": "none", "shots": 0, "snr_db": 10.0,
         "attack": "pgd@sub", "ser": 0.2, "n": 10, "seed": 1},
    ]


def test_aggregate_ser_is_frame_weighted():
    rows = _toy_rows()
    want = (0.8 * 10 + 0.4 * 30 + 0.2 * 10) / 50
    assert aggregate_ser(rows, "clean", "none", 0) == pytest.approx(want)


def test_aggregate_ser_clean_and_seed_and_snr_filters():
    rows = _toy_rows()
    assert aggregate_ser(rows, "clean", "none", 0, attacked=False) == pytest.approx(0.5)
    assert aggregate_ser(rows, "clean", "none", 0, seed=1) == pytest.approx(0.2)
    want_hi = (0.4 * 30 + 0.2 * 10) / 40
    assert aggregate_ser(rows, "clean", "none", 0, min_snr=10.0) == pytest.approx(want_hi)


def test_aggregate_ser_raises_when_nothing_matches():
    with pytest.raises(InputShapeError):
        aggregate_ser(_toy_rows(), "scratch", "none", 0)


def test_seed_cells_enumerates_the_full_plan(mini_cfg):
    cells = seed_cells(mini_cfg)
    assert len(cells) == 4 * (1 + 2 * len(mini_cfg.online.shots))
    assert ("meta_adversarial", "none", 0) in cells
    assert ("scratch", "dann", 2) in cells


# ---------------------------------------------------------------------------
# the mini end-to-end grid


def test_grid_rows_complete_and_well_formed(mini_grid):
    cfg, out, rows, _ = mini_grid
    validate_grid(cfg, rows)  # must not raise
    attacks = {r["attack"] for r in rows}
    assert CLEAN_ATTACK_ID in attacks
    assert len(attacks) == 1 + cfg.tasks.holdout
    assert {r["seed"] for r in rows} == set(cfg.evaluation.seeds)
    assert {float(r["snr_db"]) for r in rows} == {0.0, 10.0}
    for r in rows:
        assert 0.0 <= r["ser"] <= 1.0
        assert r["n"] > 0


def test_grid_row_volume_matches_eval_sets(mini_grid):
    cfg, out, rows, _ = mini_grid
    n_eval_sets = 1 + cfg.tasks.holdout
    test_frames = cfg.dataset.target.test_per_class * 7
    per_cell = [
        r for r in rows
        if r["offline"] == "clean" and r["online"] == "none"
        and r["shots"] == 0 and r["seed"] == 0
    ]
    assert sum(r["n"] for r in per_cell) == n_eval_sets * test_frames


def test_grid_resume_returns_identical_rows(mini_grid):
    cfg, out, rows, _ = mini_grid
    again = run_grid(cfg, out, resume=True)
    assert json.dumps(rows, sort_keys=True) == json.dumps(again, sort_keys=True)


def test_grid_refuses_conflicting_config_in_same_directory(mini_grid):
    cfg, out, _, _ = mini_grid
    other = dict(MINI_CONFIG)
    other["attacks"] = {"methods": ["fgsm", "pgd"], "pgd_steps": 4, "psr_db": -12.0}
    cfg2 = ExperimentConfig.from_dict(other)
    with pytest.raises(GridMismatchError):
        run_grid(cfg2, out, resume=True)


def test_grid_detects_stale_cell_digests(mini_grid):
    cfg, out, _, _ = mini_grid
    cell = sorted((out / "cells").glob("seed0_clean_none_*.json"))[0]
    original = cell.read_text()
    try:
        payload = json.loads(original)
        payload["config_digest"] = "0" * 16
        cell.write_text(json.dumps(payload))
        with pytest.raises(GridMismatchError):
            run_grid(cfg, out, resume=True)
    finally:
        cell.write_text(original)


def test_validate_grid_flags_missing_cells(mini_grid):
    cfg, _, rows, _ = mini_grid
    partial = [r for r in rows if not (r["offline"] == "scratch" and r["online"] == "dann")]
    with pytest.raises(ConfigurationError):
        validate_grid(cfg, partial)


# ---------------------------------------------------------------------------
# efficiency probe


def test_efficiency_probe_covers_every_pair(mini_grid):
    cfg, out, _, eff = mini_grid
    assert len(eff) == len(cfg.evaluation.seeds) * 4 * len(cfg.efficiency.online_strategies)
    for r in eff:
        assert r["offline"] in ("scratch", "clean", "adversarial", "meta_adversarial")
        assert r["online"] in cfg.efficiency.online_strategies
        assert isinstance(r["reached"], bool)
        assert 1 <= r["shots"] <= cfg.efficiency.cap
        assert r["samples"] == r["shots"] * 7
        assert 0.0 <= r["threshold"] <= 1.0
    # the threshold is common within a seed
    for seed in cfg.evaluation.seeds:
        ts = {r["threshold"] for r in eff if r["seed"] == seed}
        assert len(ts) == 1


def test_efficiency_probe_resume_is_stable(mini_grid):
    cfg, out, _, eff = mini_grid
    from robustamc.grid import efficiency_probe

    again = efficiency_probe(cfg, out, resume=True)
    assert json.dumps(eff, sort_keys=True) == json.dumps(again, sort_keys=True)
