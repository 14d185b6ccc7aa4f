"""Perturbation grids over valuation inputs, with checkpoint and resume.

Each scenario scales one input of a base configuration by a multiplier
and is valued with a given number of Monte Carlo paths.  Scenario seeds
are derived from ``(master_seed, scenario_id)`` so results do not depend
on worker count or completion order, and a resumed run reproduces an
uninterrupted one exactly.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import DEFAULT_SEED, ValuationConfig
from .payoffs import STRUCTURES, annualized_rate, value_structure
from .processes import Kind, PathBundle, simulate_system

log = logging.getLogger(__name__)

AXES = (
    "availability_drift",
    "availability_start",
    "availability_vol",
    "interest_rate",
    "payment_down",
    "payment_up",
    "expiration",
)

DEFAULT_ITERATIONS = tuple(range(5000, 50_001, 5000))
REPORT_HEADER = ["scenario_id", "axis", "multiplier", "iterations", "estimate",
                 "std_error", "annualized_rate", "wall_ms"]


def _scale_availability(cfg: ValuationConfig, field: str, m: float) -> ValuationConfig:
    system = cfg.system
    for spec in cfg.system.gbm_specs:
        if spec.kind is Kind.AVAILABILITY:
            system = system.replace_spec(spec.kind, spec.security, **{field: getattr(spec, field) * m})
    return cfg.with_(system=system)


def apply_perturbation(cfg: ValuationConfig, axis: str, m: float) -> ValuationConfig:
    """Base configuration with one input multiplied by ``m``."""
    if axis == "base":
        return cfg
    if axis == "availability_drift":
        return _scale_availability(cfg, "drift", m)
    if axis == "availability_start":
        return _scale_availability(cfg, "start", m)
    if axis == "availability_vol":
        return _scale_availability(cfg, "vol", m)
    if axis == "interest_rate":
        return cfg.with_(discount=replace(cfg.discount, rate=cfg.discount.rate * m))
    if axis == "payment_down":
        c = cfg.contract
        return cfg.with_(contract=replace(c, payoff_down=tuple(k * m for k in c.payoff_down)))
    if axis == "payment_up":
        c = cfg.contract
        return cfg.with_(contract=replace(c, payoff_up=tuple(k * m for k in c.payoff_up)))
    if axis == "expiration":
        return cfg.with_(horizon=cfg.horizon * m)
    raise ValueError(f"unknown perturbation axis {axis!r}")


def multipliers(steps: int = 5, step_size: float = 0.1) -> tuple[float, ...]:
    """``1 - k*step`` and ``1 + k*step`` for ``k = steps..1`` and ``1..steps``."""
    down = [round(1 - k * step_size, 12) for k in range(steps, 0, -1)]
    up = [round(1 + k * step_size, 12) for k in range(1, steps + 1)]
    return tuple(down + up)


@dataclass(frozen=True)
class Scenario:
    id: int
    axis: str
    multiplier: float
    iterations: int
    valid: bool = True
    reason: str = ""


@dataclass
class ScenarioGrid:
    base: ValuationConfig
    axes: tuple[str, ...]
    multipliers: tuple[float, ...]
    iteration_levels: tuple[int, ...]
    scenarios: list[Scenario]

    def __len__(self) -> int:
        return len(self.scenarios)

    def config_for(self, scenario: Scenario) -> ValuationConfig:
        cfg = apply_perturbation(self.base, scenario.axis, scenario.multiplier)
        cfg.grid  # noqa: B018  (validates the perturbed horizon)
        return cfg.with_(n_paths=scenario.iterations)


def build_grid(base: ValuationConfig, axes=AXES, steps: int = 5, step_size: float = 0.1,
               iteration_levels=DEFAULT_ITERATIONS) -> ScenarioGrid:
    """Enumerate base plus every (axis, multiplier) under each iteration level.

    Ids are dense and follow a fixed order: iteration level, then the base
    scenario, then axes in the given order, then multipliers ascending.
    Perturbations that leave a parameter's domain are kept and marked invalid.
    """
    axes = tuple(axes)
    for a in axes:
        if a not in AXES:
            raise ValueError(f"unknown perturbation axis {a!r}; expected one of {AXES}")
    levels = tuple(int(n) for n in iteration_levels)
    if not levels or any(n < 1 for n in levels):
        raise ValueError("iteration levels must be positive integers")
    mults = multipliers(steps, step_size) if axes else ()
    scenarios: list[Scenario] = []
    for n in levels:
        for axis, m in [("base", 1.0)] + [(a, m) for a in axes for m in mults]:
            sc = Scenario(len(scenarios), axis, m, n)
            try:
                apply_perturbation(base, axis, m).grid  # noqa: B018
            except ValueError as exc:
                sc = replace(sc, valid=False, reason=str(exc))
            scenarios.append(sc)
    grid = ScenarioGrid(base, axes, mults, levels, scenarios)
    log.info("scenario grid: %d scenarios (%d axes x %d multipliers + base) x %d iteration levels",
             len(scenarios), len(axes), len(mults), len(levels))
    return grid


def scenario_seed(master_seed: int, scenario_id: int) -> int:
    """Stable 64-bit seed for one scenario."""
    ss = np.random.SeedSequence([int(master_seed), int(scenario_id)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def simulate_config(cfg: ValuationConfig, n_paths: int | None = None, seed: int | None = None,
                    workers: int = 1) -> PathBundle:
    """Paths for every process in ``cfg``, one step past the horizon."""
    return simulate_system(cfg.system, cfg.grid, n_paths or cfg.n_paths,
                           cfg.seed if seed is None else seed,
                           locate_mode=cfg.locate_mode, extra_steps=1, workers=workers)


def value_config(cfg: ValuationConfig, structures=None, bundle: PathBundle | None = None,
                 workers: int = 1) -> list:
    bundle = simulate_config(cfg, workers=workers) if bundle is None else bundle
    return [value_structure(s, bundle, cfg.contract, cfg.discount, **cfg.options)
            for s in (structures or cfg.structures)]


# ------------------------------------------------------------ checkpoint


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class Record:
    scenario_id: int
    structure: str
    estimate: float
    std_error: float
    seed: int

    def line(self) -> str:
        return f"{self.scenario_id}\t{self.structure}\t{self.estimate!r}\t{self.std_error!r}\t{self.seed}\n"


class Checkpoint:
    """Append-only log of ``scenario_id, structure, estimate, std_error, seed``.

    The first line records the master seed.  A final line without a
    newline (a crash mid-write) is dropped; any other malformed line
    aborts with its byte offset.
    """

    def __init__(self, path, master_seed: int):
        self.path = Path(path)
        self.master_seed = int(master_seed)
        self.records: dict[tuple[int, str], Record] = {}
        if self.path.exists():
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w") as fh:
                fh.write(f"#master_seed\t{self.master_seed}\n")

    def _load(self) -> None:
        data = self.path.read_bytes()
        end = data.rfind(b"\n") + 1
        if end < len(data):
            log.warning("dropping partial checkpoint record at offset %d", end)
            with open(self.path, "r+b") as fh:
                fh.truncate(end)
            data = data[:end]
        offset = 0
        for raw in data.splitlines(keepends=True):
            line = raw.decode("utf-8", errors="replace").rstrip("\n")
            if offset == 0 and line.startswith("#master_seed"):
                seed = int(line.split("\t")[1])
                if seed != self.master_seed:
                    raise CheckpointError(
                        f"checkpoint {self.path} was written with master seed {seed}, "
                        f"not {self.master_seed}"
                    )
            else:
                rec = self._parse(line, offset)
                self.records[(rec.scenario_id, rec.structure)] = rec
            offset += len(raw)
        if not data:
            with open(self.path, "w") as fh:
                fh.write(f"#master_seed\t{self.master_seed}\n")

    def _parse(self, line: str, offset: int) -> Record:
        parts = line.split("\t")
        try:
            if len(parts) != 5 or parts[1] not in STRUCTURES:
                raise ValueError(line)
            return Record(int(parts[0]), parts[1], float(parts[2]), float(parts[3]), int(parts[4]))
        except ValueError:
            raise CheckpointError(
                f"corrupted checkpoint record at byte offset {offset} of {self.path}: {line!r}"
            ) from None

    def __contains__(self, key) -> bool:
        return key in self.records

    def append(self, records) -> None:
        with open(self.path, "a") as fh:
            for rec in records:
                fh.write(rec.line())
                self.records[(rec.scenario_id, rec.structure)] = rec
            fh.flush()
            os.fsync(fh.fileno())


# ------------------------------------------------------------- running


@dataclass
class GridRow:
    scenario_id: int
    axis: str
    multiplier: float
    iterations: int
    structure: str
    estimate: float
    std_error: float
    annualized_rate: float | None
    wall_ms: float | None
    valid: bool = True


@dataclass
class GridResult:
    grid: ScenarioGrid
    structures: tuple[str, ...]
    rows: list[GridRow]
    computed: int
    complete: bool

    def for_structure(self, structure: str) -> list[GridRow]:
        return [r for r in self.rows if r.structure == structure]


def _evaluate(args):
    cfg, scenario_id, structures, seed = args
    t0 = time.perf_counter()
    bundle = simulate_config(cfg, seed=seed)
    sim_ms = (time.perf_counter() - t0) * 1e3
    out = []
    for s in structures:
        t1 = time.perf_counter()
        res = value_structure(s, bundle, cfg.contract, cfg.discount, **cfg.options)
        out.append((s, res.estimate, res.std_error, sim_ms + (time.perf_counter() - t1) * 1e3))
    return scenario_id, out


def _annualized(cfg: ValuationConfig | None, estimate: float) -> float | None:
    if cfg is None or not math.isfinite(estimate):
        return None
    notional = cfg.notional()
    if not notional:
        return None
    return annualized_rate(estimate, 1.0, notional, cfg.horizon)


def run_grid(grid: ScenarioGrid, structures=STRUCTURES, checkpoint_path=None, workers: int = 1,
             master_seed: int = DEFAULT_SEED, max_scenarios: int | None = None) -> GridResult:
    """Value every scenario for every structure, resuming from a checkpoint.

    ``max_scenarios`` stops after that many newly computed scenarios, which
    is how an interrupted run is reproduced in tests.
    """
    structures = tuple(structures)
    for s in structures:
        if s not in STRUCTURES:
            raise ValueError(f"unknown structure {s!r}")
    ckpt = Checkpoint(checkpoint_path, master_seed) if checkpoint_path else None
    done = (lambda sid, s: (sid, s) in ckpt) if ckpt else (lambda sid, s: False)

    todo = []
    for sc in grid.scenarios:
        missing = tuple(s for s in structures if not done(sc.id, s))
        if missing:
            todo.append((sc, missing))
    if max_scenarios is not None:
        todo = todo[:max_scenarios]

    fresh: dict[tuple[int, str], tuple[float, float, float | None]] = {}
    invalid_records, jobs = [], []
    for sc, missing in todo:
        seed = scenario_seed(master_seed, sc.id)
        cfg = None
        if sc.valid:
            try:
                cfg = grid.config_for(sc)
            except ValueError:
                cfg = None
        if cfg is None:
            for s in missing:
                fresh[(sc.id, s)] = (math.nan, math.nan, None)
            invalid_records += [Record(sc.id, s, math.nan, math.nan, seed) for s in missing]
        else:
            jobs.append((cfg, sc.id, missing, seed))
    if ckpt and invalid_records:
        ckpt.append(invalid_records)

    def sink(result):
        sid, values = result
        seed = scenario_seed(master_seed, sid)
        for s, est, se, ms in values:
            fresh[(sid, s)] = (est, se, ms)
        if ckpt:
            ckpt.append(Record(sid, s, est, se, seed) for s, est, se, _ in values)

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(_evaluate, jobs):
                sink(result)
    else:
        for job in jobs:
            sink(_evaluate(job))

    rows = []
    complete = True
    for sc in grid.scenarios:
        cfg = grid.config_for(sc) if sc.valid else None
        for s in structures:
            if (sc.id, s) in fresh:
                est, se, ms = fresh[(sc.id, s)]
            elif ckpt and (sc.id, s) in ckpt:
                rec = ckpt.records[(sc.id, s)]
                est, se, ms = rec.estimate, rec.std_error, None
            else:
                complete = False
                continue
            valid = sc.valid and math.isfinite(est)
            rows.append(GridRow(sc.id, sc.axis, sc.multiplier, sc.iterations, s, est, se,
                                _annualized(cfg, est) if valid else None, ms, valid))
    return GridResult(grid, structures, rows, computed=len(jobs), complete=complete)


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def emit_report(results: GridResult, out_dir, *, record_timing: bool = False,
                axes=None) -> list[Path]:
    """Write one CSV per structure plus ``summary.csv``.

    ``wall_ms`` is left blank unless ``record_timing`` is set, so repeated
    runs with the same seed produce byte-identical files.  ``axes`` limits
    the rows written; None or empty writes all.
    """
    if not results.rows:
        raise ValueError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keep = (lambda r: True) if not axes else (lambda r: r.axis in axes or r.axis == "base")
    paths = []
    for s in results.structures:
        path = out / f"{s}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for r in results.for_structure(s):
                if not keep(r):
                    continue
                w.writerow([r.scenario_id, r.axis, repr(r.multiplier), r.iterations,
                            _fmt(r.estimate), _fmt(r.std_error), _fmt(r.annualized_rate),
                            _fmt(r.wall_ms) if record_timing else ""])
        paths.append(path)
    path = out / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["structure", "axis", "row", "scenario_id", "multiplier", "iterations", "estimate"])
        for s, axis, label, r in summarize_rows(results):
            w.writerow([s, axis, label, r.scenario_id, repr(r.multiplier), r.iterations, _fmt(r.estimate)])
    paths.append(path)
    return paths


def summarize_rows(results: GridResult):
    """(structure, axis, 'min'|'max'|'base', row) for every structure and axis."""
    out = []
    top = max(results.grid.iteration_levels)
    for s in results.structures:
        rows = [r for r in results.for_structure(s) if r.valid]
        base = [r for r in rows if r.axis == "base" and r.iterations == top]
        for axis in results.grid.axes:
            along = [r for r in rows if r.axis == axis]
            if not along:
                continue
            out.append((s, axis, "min", min(along, key=lambda r: (r.estimate, r.scenario_id))))
            out.append((s, axis, "max", max(along, key=lambda r: (r.estimate, -r.scenario_id))))
            if base:
                out.append((s, axis, "base", base[0]))
    return out
