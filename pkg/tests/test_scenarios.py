import csv
import math

import pytest

from oracles import recount_grid
from termloan.config import default_config
from termloan.payoffs import STRUCTURES, DiscountConfig
from termloan.scenarios import (
    AXES,
    CheckpointError,
    apply_perturbation,
    build_grid,
    emit_report,
    multipliers,
    run_grid,
    scenario_seed,
)


def small_config(**kw):
    return default_config(n_paths=100, horizon=0.25, steps_per_year=52, **kw)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ----------------------------------------------------------------- grid


def test_default_multipliers():
    assert multipliers() == (0.5, 0.6, 0.7, 0.8, 0.9, 1.1, 1.2, 1.3, 1.4, 1.5)


def test_single_axis_single_level_count():
    grid = build_grid(small_config(), axes=["availability_vol"], iteration_levels=[5000])
    assert len(grid) == 11
    assert grid.scenarios[0].axis == "base"


def test_zero_axes_gives_one_base_per_level():
    grid = build_grid(small_config(), axes=[], iteration_levels=range(5000, 50_001, 5000))
    assert len(grid) == 10
    assert {s.axis for s in grid.scenarios} == {"base"}
    assert [s.iterations for s in grid.scenarios] == list(range(5000, 50_001, 5000))


def test_default_grid_count_matches_recount():
    grid = build_grid(small_config())
    expected = recount_grid(len(AXES), 5, 10)
    print(f"default grid: {len(grid)} scenarios")
    assert len(grid) == expected == 710


def test_ids_dense_and_enumeration_stable():
    a = build_grid(small_config(), axes=["payment_up", "expiration"], iteration_levels=[10, 20])
    b = build_grid(small_config(), axes=["payment_up", "expiration"], iteration_levels=[10, 20])
    assert [s.id for s in a.scenarios] == list(range(len(a)))
    assert a.scenarios == b.scenarios


def test_unknown_axis_and_bad_levels_rejected():
    with pytest.raises(ValueError, match="axis"):
        build_grid(small_config(), axes=["moon_phase"])
    with pytest.raises(ValueError, match="iteration"):
        build_grid(small_config(), iteration_levels=[0])


def test_perturbations_touch_only_their_input():
    cfg = small_config()
    vol = apply_perturbation(cfg, "availability_vol", 1.5)
    assert vol.system.spec("A").vol == pytest.approx(cfg.system.spec("A").vol * 1.5)
    assert vol.system.spec("S") == cfg.system.spec("S")
    assert apply_perturbation(cfg, "expiration", 0.5).horizon == cfg.horizon * 0.5
    assert apply_perturbation(cfg, "payment_down", 2).contract.payoff_down == (2.0,)
    assert apply_perturbation(cfg, "interest_rate", 0.5).discount.rate == cfg.discount.rate * 0.5


def test_out_of_domain_perturbation_is_an_explicit_invalid_row(tmp_path):
    cfg = small_config(discount=DiscountConfig(-0.8))
    grid = build_grid(cfg, axes=["interest_rate"], iteration_levels=[50])
    bad = [s for s in grid.scenarios if not s.valid]
    assert [s.multiplier for s in bad] == [1.3, 1.4, 1.5]
    res = run_grid(grid, ["constant"], tmp_path / "ck.tsv")
    rows = {r.scenario_id: r for r in res.rows}
    assert len(rows) == len(grid)
    assert all(math.isnan(rows[s.id].estimate) and not rows[s.id].valid for s in bad)
    emit_report(res, tmp_path / "out")
    written = read_rows(tmp_path / "out" / "constant.csv")
    assert len(written) == len(grid)
    assert written[-1]["estimate"] == "nan"


# ------------------------------------------------------------------ run


def test_seed_depends_only_on_master_and_id():
    assert scenario_seed(42, 7) == scenario_seed(42, 7)
    assert len({scenario_seed(42, i) for i in range(1000)}) == 1000
    assert scenario_seed(42, 7) != scenario_seed(43, 7)


def test_rows_cover_grid_times_structures(tmp_path):
    grid = build_grid(small_config(), axes=["availability_start", "payment_down"], steps=2,
                      iteration_levels=[60, 80])
    res = run_grid(grid, STRUCTURES, tmp_path / "ck.tsv", master_seed=5)
    assert res.complete and res.computed == len(grid)
    assert len(res.rows) == len(grid) * len(STRUCTURES)
    paths = emit_report(res, tmp_path / "out")
    data_rows = sum(len(read_rows(p)) for p in paths if p.name != "summary.csv")
    assert data_rows == len(grid) * len(STRUCTURES)


def test_rerun_over_complete_checkpoint_computes_nothing(tmp_path):
    grid = build_grid(small_config(), axes=["availability_vol"], steps=1, iteration_levels=[50])
    first = run_grid(grid, ["constant", "desk_profit"], tmp_path / "ck.tsv")
    emit_report(first, tmp_path / "a")
    again = run_grid(grid, ["constant", "desk_profit"], tmp_path / "ck.tsv")
    emit_report(again, tmp_path / "b")
    assert again.computed == 0
    for name in ("constant.csv", "desk_profit.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_count_does_not_change_results(tmp_path):
    grid = build_grid(small_config(), axes=["availability_vol"], steps=2, iteration_levels=[40])
    serial = run_grid(grid, ["constant", "borrow_rate"], tmp_path / "a.tsv", workers=1)
    parallel = run_grid(grid, ["constant", "borrow_rate"], tmp_path / "b.tsv", workers=2)
    emit_report(serial, tmp_path / "a")
    emit_report(parallel, tmp_path / "b")
    for name in ("constant.csv", "borrow_rate.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_partial_last_record_is_truncated(tmp_path):
    grid = build_grid(small_config(), axes=["availability_vol"], steps=1, iteration_levels=[50])
    ck = tmp_path / "ck.tsv"
    full = run_grid(grid, ["constant"], tmp_path / "full.tsv")
    run_grid(grid, ["constant"], ck, max_scenarios=1)
    with open(ck, "a") as fh:
        fh.write("1\tconstant\t0.12")  # crash mid-record
    resumed = run_grid(grid, ["constant"], ck)
    assert resumed.computed == 2
    assert [r.estimate for r in resumed.rows] == [r.estimate for r in full.rows]
    assert ck.read_text().endswith("\n")


def test_corrupted_record_reports_offset(tmp_path):
    grid = build_grid(small_config(), axes=[], iteration_levels=[30, 40])
    ck = tmp_path / "ck.tsv"
    run_grid(grid, ["constant"], ck)
    lines = ck.read_text().splitlines(keepends=True)
    offset = len(lines[0])
    lines[1] = "0\tconstant\tnot-a-number\t0.1\t5\n"
    ck.write_text("".join(lines))
    with pytest.raises(CheckpointError, match=f"offset {offset}"):
        run_grid(grid, ["constant"], ck)


def test_master_seed_mismatch_rejected(tmp_path):
    grid = build_grid(small_config(), axes=[], iteration_levels=[30])
    run_grid(grid, ["constant"], tmp_path / "ck.tsv", master_seed=1)
    with pytest.raises(CheckpointError, match="master seed"):
        run_grid(grid, ["constant"], tmp_path / "ck.tsv", master_seed=2)


def test_unknown_structure_rejected():
    grid = build_grid(small_config(), axes=[], iteration_levels=[30])
    with pytest.raises(ValueError):
        run_grid(grid, ["butterfly"])


# --------------------------------------------------------------- report


def test_single_scenario_report(tmp_path):
    grid = build_grid(small_config(), axes=[], iteration_levels=[30])
    res = run_grid(grid, ["constant"])
    (path, summary) = emit_report(res, tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0] == "scenario_id,axis,multiplier,iterations,estimate,std_error,annualized_rate,wall_ms"
    assert len(lines) == 2
    assert lines[1].endswith(",")  # wall_ms blank by default
    assert summary.name == "summary.csv"


def test_empty_axis_filter_emits_all_rows(tmp_path):
    grid = build_grid(small_config(), axes=["availability_vol", "expiration"], steps=1, iteration_levels=[30])
    res = run_grid(grid, ["constant"])
    emit_report(res, tmp_path / "all", axes=[])
    emit_report(res, tmp_path / "vol", axes=["availability_vol"])
    assert len(read_rows(tmp_path / "all" / "constant.csv")) == 5
    assert len(read_rows(tmp_path / "vol" / "constant.csv")) == 3


def test_timing_column_and_summary(tmp_path):
    grid = build_grid(small_config(), axes=["availability_vol"], steps=2, iteration_levels=[30])
    res = run_grid(grid, ["constant"])
    emit_report(res, tmp_path, record_timing=True)
    rows = read_rows(tmp_path / "constant.csv")
    assert all(float(r["wall_ms"]) > 0 for r in rows)
    summary = read_rows(tmp_path / "summary.csv")
    assert [r["row"] for r in summary] == ["min", "max", "base"]
    ests = [float(r["estimate"]) for r in rows if r["axis"] == "availability_vol"]
    assert float(summary[0]["estimate"]) == min(ests)
    assert float(summary[1]["estimate"]) == max(ests)


def test_empty_results_rejected(tmp_path):
    grid = build_grid(small_config(), axes=[], iteration_levels=[30])
    res = run_grid(grid, ["constant"], tmp_path / "ck.tsv", max_scenarios=0)
    with pytest.raises(ValueError, match="no results"):
        emit_report(res, tmp_path / "out")
