"""Command-line bindings for the library workflows.

Every subcommand reads the shared JSON config (see ``termloan.config``),
applies flag overrides, calls the library and writes the same files the
library writers produce.  Exit status is 0 on success, 1 on a domain
error and 2 on a usage error.  Errors are reported on stderr as a single
line ``error: module=<name> message=<text>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from . import closed_form, historical, inventory, payoffs, scenarios
from .config import DEFAULT_SEED, ValuationConfig, load_config
from .processes import Kind, ProcessSpec

WORKERS_ENV = "TERMLOAN_WORKERS"


class UsageError(Exception):
    pass


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="termloan", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON configuration file")
        sp.add_argument("--seed", type=int, help=f"master seed (config value, else {DEFAULT_SEED})")
        sp.add_argument("--workers", type=_positive_int,
                        help=f"worker processes (default ${WORKERS_ENV} or 1)")
        sp.add_argument("--out", help="output directory, created if absent")
        sp.add_argument("--structure", action="append", choices=payoffs.STRUCTURES,
                        help="valuation structure; repeat for several (default: config list)")

    sp = sub.add_parser("simulate", help="simulate paths and write paths.csv")
    common(sp)
    sp.add_argument("--paths", type=_positive_int, help="number of paths (overrides config)")

    sp = sub.add_parser("value", help="value structures on simulated paths")
    common(sp)
    sp.add_argument("--paths", type=_positive_int, help="number of paths (overrides config)")

    sp = sub.add_parser("closed-form", help="closed-form binary put value, optionally a grid")
    common(sp, config_required=False)
    for name in closed_form.AXES:
        sp.add_argument(f"--{name}", type=float, help=f"closed-form input {name}")
    sp.add_argument("--grid", action="store_true",
                    help="also write closed_form_grid.csv over +-10%% steps to --out")

    sp = sub.add_parser("historical", help="value on rescaled partitions of a historical series")
    common(sp)
    sp.add_argument("--partitions", type=_positive_int, help="partition count (overrides config)")
    sp.add_argument("--overlap", type=float, help="window overlap fraction in [0, 1)")

    sp = sub.add_parser("inventory", help="retailer P&L and demand-barrier payoffs")
    common(sp)
    sp.add_argument("--paths", type=_positive_int, help="number of paths (overrides config)")

    sp = sub.add_parser("grid", help="run the perturbation grid with checkpoint and resume")
    common(sp)
    sp.add_argument("--checkpoint", help="checkpoint file (default <out>/checkpoint.tsv)")
    sp.add_argument("--record-timing", action="store_true",
                    help="fill wall_ms (makes outputs differ between runs)")
    return p


def _load(args) -> ValuationConfig:
    if not args.config:
        raise UsageError("--config is required")
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        cfg = load_config(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "paths", None):
        changes["n_paths"] = args.paths
    if args.structure:
        changes["structures"] = tuple(args.structure)
    return cfg.with_(**changes) if changes else cfg


def _out(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(results, out: Path | None, name: str = "results.csv") -> None:
    text = payoffs.format_results(results)
    sys.stdout.write(text)
    if out is not None:
        payoffs.write_results(results, out / name)


def cmd_simulate(args, workers: int) -> None:
    cfg = _load(args)
    bundle = scenarios.simulate_config(cfg, workers=workers)
    out = _out(args) or Path(".")
    bundle.to_csv(out / "paths.csv")
    print(f"wrote {bundle.n_paths} paths x {bundle.n_times} steps to {out / 'paths.csv'}")


def cmd_value(args, workers: int) -> None:
    cfg = _load(args)
    _emit(scenarios.value_config(cfg, workers=workers), _out(args))


def cmd_closed_form(args, workers: int) -> None:
    raw = {}
    if args.config:
        section = _load(args).raw.get("closed_form")
        if section is None:
            raise UsageError("config has no 'closed_form' section")
        raw.update(section)
    for name in closed_form.AXES:
        if getattr(args, name) is not None:
            raw[name] = getattr(args, name)
    missing = [n for n in ("A0", "H", "mu", "sigma") if n not in raw]
    if missing:
        raise UsageError(f"closed-form needs {', '.join('--' + m for m in missing)}")
    inputs = closed_form.BinaryPutInputs(**raw)
    print(repr(closed_form.binary_put_closed_form(inputs)))
    if args.grid:
        out = _out(args) or Path(".")
        closed_form.closed_form_grid(inputs, scenarios.multipliers()).to_csv(out / "closed_form_grid.csv")


def _section(cfg: ValuationConfig, name: str) -> dict:
    section = cfg.raw.get(name)
    if section is None:
        raise UsageError(f"config has no '{name}' section")
    return dict(section)


def cmd_historical(args, workers: int) -> None:
    cfg = _load(args)
    h = _section(cfg, "historical")
    series = {}
    for key, kind in (("availability_csv", Kind.AVAILABILITY), ("price_csv", Kind.PRICE)):
        if key not in h:
            raise UsageError(f"historical section needs '{key}'")
        series[kind] = historical.HistoricalSeries.from_csv(cfg.base_dir / h[key], kind)
    extra = {k: historical.HistoricalSeries.from_csv(cfg.base_dir / f, k)
             for k, f in h.get("extra_csv", {}).items()}
    spec = historical.PartitionSpec(
        args.partitions or h.get("partitions", 10),
        h.get("overlap", 0.0) if args.overlap is None else args.overlap,
    )
    structures = args.structure or [h.get("structure", "stock_holding")]
    out = _out(args)
    results = []
    for s in structures:
        res = historical.value_historical(
            series[Kind.AVAILABILITY], series[Kind.PRICE], cfg.contract, spec, s, cfg.discount,
            starts=h.get("starts"), extra=extra, steps_per_year=cfg.steps_per_year, **cfg.options,
        )
        results.append(res.result)
        if out is not None:
            res.pnl_to_csv(out / f"pnl_{s}.csv")
    _emit(results, out)


def cmd_inventory(args, workers: int) -> None:
    cfg = _load(args)
    inv = _section(cfg, "inventory")
    demand_spec = ProcessSpec(Kind.DEMAND, **inv.pop("demand", {"start": 100.0, "vol": 0.3}))
    modes = inv.pop("modes", ["constant"])
    direction = inv.pop("direction", "down")
    jumps = inv.pop("jumps", {})
    params = inventory.InventoryParams(**inv)
    demand = inventory.simulate_demand(demand_spec, cfg.grid, cfg.n_paths, cfg.seed, **jumps)
    results = [inventory.retailer_pnl(demand, params, cfg.discount)]
    results += [inventory.value_demand_breach(demand, params, cfg.discount, m, direction) for m in modes]
    _emit(results, _out(args))


def cmd_grid(args, workers: int) -> None:
    cfg = _load(args)
    g = _section(cfg, "grid") if "grid" in cfg.raw else {}
    grid = scenarios.build_grid(
        cfg,
        axes=g.get("axes", scenarios.AXES),
        steps=g.get("steps", 5),
        step_size=g.get("step_size", 0.1),
        iteration_levels=g.get("iteration_levels", scenarios.DEFAULT_ITERATIONS),
    )
    out = _out(args) or Path(".")
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.tsv"
    print(f"{len(grid)} scenarios x {len(cfg.structures)} structures", file=sys.stderr)
    result = scenarios.run_grid(grid, cfg.structures, ckpt, workers=workers, master_seed=cfg.seed)
    for path in scenarios.emit_report(result, out, record_timing=args.record_timing):
        print(path)


COMMANDS = {
    "simulate": cmd_simulate,
    "value": cmd_value,
    "closed-form": cmd_closed_form,
    "historical": cmd_historical,
    "inventory": cmd_inventory,
    "grid": cmd_grid,
}


def _module_of(exc: BaseException) -> str:
    """Innermost ``termloan`` module in the traceback."""
    name = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("termloan."):
            name = mod.split(".", 1)[1]
    return name


def _fail(module: str, message: str, code: int) -> int:
    message = " ".join(str(message).split())
    print(f"error: module={module} message={message}", file=sys.stderr)
    return code


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        workers = args.workers or _default_workers()
        COMMANDS[args.command](args, workers)
    except UsageError as exc:
        return _fail("cli", exc, 2)
    except FileNotFoundError as exc:
        return _fail("cli", f"file not found: {exc.filename}", 2)
    except (ValueError, KeyError, scenarios.CheckpointError) as exc:
        return _fail(_module_of(exc), exc, 1)
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
