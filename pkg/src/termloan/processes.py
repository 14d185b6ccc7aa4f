"""Correlated GBM and locate-process simulation.

Paths are generated with the exact log scheme

    X[t+1] = X[t] * exp((mu - sigma**2 / 2) * tau + sigma * sqrt(tau) * Z)

where ``Z`` is a correlated standard-normal vector obtained from a
lower-triangular factor of the correlation matrix.  Every path draws from
its own random stream keyed on ``(seed, path_index)`` so the output does
not depend on how the paths are split across workers.
"""

from __future__ import annotations

import csv
import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CHOLESKY_JITTER = 1e-10
TRADING_DAYS = 252

# Stream identifiers mixed into the per-path seed so that GBM draws,
# locate draws and jump draws never share random numbers.
_STREAM_GBM = 0
_STREAM_LOCATE = 1
_STREAM_JUMP = 2


class Kind(str, enum.Enum):
    PRICE = "S"
    AVAILABILITY = "A"
    BORROW_RATE = "Q"
    INVENTORY = "I"
    OTHER_SUPPLY = "O"
    BORROW_BOOK = "B"
    EXCLUSIVE_USED = "E"
    EXCLUSIVE_POOL = "P"
    EXCLUSIVE = "EP"
    LOAN_BOOK = "L"
    DEMAND = "H"
    LOCATE = "D"

    def __str__(self) -> str:
        return self.value


def as_kind(value) -> Kind:
    if isinstance(value, Kind):
        return value
    try:
        return Kind(value)
    except ValueError:
        pass
    try:
        return Kind[str(value).upper()]
    except KeyError:
        raise ValueError(f"unknown process kind {value!r}") from None


@dataclass(frozen=True)
class ProcessSpec:
    """One GBM quantity, or a locate process when ``kind`` is ``D``.

    Locate specs carry ``rate`` (Poisson arrival rate per step) and/or
    ``mean``/``sd`` (absolute-normal parameters) instead of drift and vol.
    """

    kind: Kind
    start: float = 1.0
    drift: float = 0.0
    vol: float = 0.0
    security: int = 0
    rate: float | None = None
    mean: float | None = None
    sd: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        if self.security < 0:
            raise ValueError(f"security index must be >= 0, got {self.security}")
        if self.is_locate:
            if self.rate is not None and self.rate < 0:
                raise ValueError(f"locate arrival rate must be >= 0, got {self.rate}")
            if self.sd is not None and self.sd < 0:
                raise ValueError(f"locate sd must be >= 0, got {self.sd}")
            return
        if not self.start > 0:
            raise ValueError(
                f"{self.label}: GBM start must be positive, got {self.start}"
            )
        if self.vol < 0:
            raise ValueError(f"{self.label}: vol must be nonnegative, got {self.vol}")

    @property
    def is_locate(self) -> bool:
        return self.kind is Kind.LOCATE

    @property
    def label(self) -> tuple[Kind, int]:
        return (self.kind, self.security)


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_years(cls, horizon: float, steps_per_year: int = TRADING_DAYS) -> "TimeGrid":
        """Grid of ``round(horizon * steps_per_year)`` steps (at least one)."""
        return cls(horizon, max(1, int(round(horizon * steps_per_year))))

    @property
    def step(self) -> float:
        return self.horizon / self.n_steps

    def times(self, extra_steps: int = 0) -> np.ndarray:
        return np.arange(self.n_steps + 1 + extra_steps) * self.step


def _leading_minor_failure(corr: np.ndarray, tol: float) -> int | None:
    """Smallest k whose leading k x k block is not PSD, or None."""
    for k in range(1, corr.shape[0] + 1):
        if np.linalg.eigvalsh(corr[:k, :k]).min() < -tol:
            return k
    return None


def correlation_factor(corr) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T`` equal to ``corr``.

    Singular but PSD matrices are factored after adding a small diagonal
    jitter.  Raises ValueError naming the first non-PSD leading minor.
    """
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError(f"correlation must be square, got shape {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise ValueError("correlation entries must lie in [-1, 1]")
    k = _leading_minor_failure(corr, CHOLESKY_JITTER)
    if k is not None:
        raise ValueError(
            f"correlation matrix is not positive semi-definite: "
            f"leading minor of order {k} (rows/cols 0..{k - 1}) fails"
        )
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(corr + CHOLESKY_JITTER * np.eye(len(corr)))


@dataclass(frozen=True)
class CorrelatedSystem:
    """GBM specs with the correlation of their driving Brownian motions.

    Locate specs may be listed too; they are excluded from the correlation.
    """

    specs: tuple[ProcessSpec, ...]
    correlation: np.ndarray | None = None

    def __post_init__(self):
        specs = tuple(self.specs)
        object.__setattr__(self, "specs", specs)
        labels = [s.label for s in specs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate process labels in {labels}")
        n = len(self.gbm_specs)
        corr = np.eye(n) if self.correlation is None else np.array(self.correlation, dtype=float)
        if corr.shape != (n, n):
            raise ValueError(
                f"correlation shape {corr.shape} does not match {n} GBM specs"
            )
        corr.setflags(write=False)
        object.__setattr__(self, "correlation", corr)
        if n:
            object.__setattr__(self, "_factor", correlation_factor(corr))

    @property
    def gbm_specs(self) -> tuple[ProcessSpec, ...]:
        return tuple(s for s in self.specs if not s.is_locate)

    @property
    def locate_specs(self) -> tuple[ProcessSpec, ...]:
        return tuple(s for s in self.specs if s.is_locate)

    @property
    def factor(self) -> np.ndarray:
        return self._factor

    def spec(self, kind, security: int = 0) -> ProcessSpec:
        label = (as_kind(kind), security)
        for s in self.specs:
            if s.label == label:
                return s
        raise KeyError(f"no process {label[0].value}[{security}] in system")

    def replace_spec(self, kind, security: int = 0, **changes) -> "CorrelatedSystem":
        from dataclasses import replace

        label = (as_kind(kind), security)
        if all(s.label != label for s in self.specs):
            raise KeyError(f"no process {label[0].value}[{security}] in system")
        specs = tuple(replace(s, **changes) if s.label == label else s for s in self.specs)
        return CorrelatedSystem(specs, self.correlation)


@dataclass(frozen=True)
class PathBundle:
    """Simulated or hand-built series, indexed ``values[path, variable, time]``."""

    values: np.ndarray
    grid: TimeGrid
    labels: tuple[tuple[Kind, int], ...]
    seed: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"values must be 3-d [path, variable, time], got {values.ndim}-d")
        labels = tuple((as_kind(k), int(i)) for k, i in self.labels)
        if values.shape[1] != len(labels):
            raise ValueError(f"{len(labels)} labels for {values.shape[1]} variables")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate variable labels")
        if values.shape[2] < self.grid.n_steps + 1:
            raise ValueError(
                f"time axis has {values.shape[2]} points, grid needs {self.grid.n_steps + 1}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        if np.any(values < 0):
            raise ValueError("path values must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: j for j, lab in enumerate(labels)})

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[2]

    @property
    def n_securities(self) -> int:
        return 1 + max(i for _, i in self.labels) if self.labels else 0

    def has(self, kind, security: int = 0) -> bool:
        return (as_kind(kind), security) in self._index

    def series(self, kind, security: int = 0) -> np.ndarray:
        """``(n_paths, n_times)`` view of one variable."""
        label = (as_kind(kind), security)
        try:
            return self.values[:, self._index[label], :]
        except KeyError:
            raise ValueError(f"path bundle has no {label[0].value}[{security}] series") from None

    def merge(self, other: "PathBundle") -> "PathBundle":
        """Stack the variables of two bundles built on the same grid."""
        if other.grid != self.grid or other.values.shape[::2] != self.values.shape[::2]:
            raise ValueError("cannot merge bundles with different grids or path counts")
        return PathBundle(
            np.concatenate([self.values, other.values], axis=1),
            self.grid,
            self.labels + other.labels,
            self.seed,
        )

    def with_series(self, kind, security: int, data) -> "PathBundle":
        data = np.asarray(data, dtype=float)
        if data.shape != (self.n_paths, self.n_times):
            raise ValueError(f"series shape {data.shape} != {(self.n_paths, self.n_times)}")
        return PathBundle(
            np.concatenate([self.values, data[:, None, :]], axis=1),
            self.grid,
            self.labels + ((as_kind(kind), security),),
            self.seed,
        )

    def to_csv(self, path) -> None:
        """Write long-format rows ``path,variable,step,value``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "variable", "step", "value"])
            for p in range(self.n_paths):
                for j, (kind, sec) in enumerate(self.labels):
                    name = f"{kind.value}:{sec}"
                    for t, v in enumerate(self.values[p, j]):
                        w.writerow([p, name, t, repr(float(v))])

    @classmethod
    def from_csv(cls, path, grid: TimeGrid) -> "PathBundle":
        rows: dict[tuple[int, str], dict[int, float]] = {}
        names: list[str] = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                name = rec["variable"]
                if name not in names:
                    names.append(name)
                rows.setdefault((int(rec["path"]), name), {})[int(rec["step"])] = float(rec["value"])
        n_paths = 1 + max(p for p, _ in rows)
        n_times = 1 + max(max(d) for d in rows.values())
        values = np.zeros((n_paths, len(names), n_times))
        for (p, name), d in rows.items():
            for t, v in d.items():
                values[p, names.index(name), t] = v
        labels = tuple((n.split(":")[0], int(n.split(":")[1])) for n in names)
        return cls(values, grid, labels)


def path_rng(seed: int, path: int, stream: int = _STREAM_GBM) -> np.random.Generator:
    """Independent generator for one path; depends only on its arguments."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(path)))
    return np.random.Generator(np.random.PCG64(ss))


def _gbm_block(args) -> np.ndarray:
    (factor, starts, drifts, vols, tau, n_increments, seed, first, last) = args
    n_vars = len(starts)
    z = np.empty((last - first, n_vars, n_increments))
    for k, p in enumerate(range(first, last)):
        z[k] = path_rng(seed, p).standard_normal((n_vars, n_increments))
    # Fixed-order elementwise combination keeps results independent of block size.
    corr = np.zeros_like(z)
    for i in range(n_vars):
        for j in range(i + 1):
            if factor[i, j] != 0.0:
                corr[:, i] += factor[i, j] * z[:, j]
    z = corr
    incr = ((drifts - 0.5 * vols**2) * tau)[None, :, None] + (vols * np.sqrt(tau))[None, :, None] * z
    logs = np.concatenate([np.zeros((last - first, n_vars, 1)), np.cumsum(incr, axis=2)], axis=2)
    return starts[None, :, None] * np.exp(logs)


_MAX_BLOCK = 2048


def _blocks(n_paths: int, workers: int) -> list[tuple[int, int]]:
    # Capped so peak memory stays a small multiple of the output size.
    size = min(_MAX_BLOCK, max(1, -(-n_paths // max(1, workers))))
    return [(a, min(a + size, n_paths)) for a in range(0, n_paths, size)]


def simulate_gbm_paths(
    system: CorrelatedSystem,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    extra_steps: int = 0,
    workers: int = 1,
) -> PathBundle:
    """Simulate every GBM spec of ``system`` on ``grid``.

    Parameters
    ----------
    extra_steps
        Points simulated past the horizon.  Payoffs that read ``S[T+1]``
        need ``extra_steps=1``.
    workers
        Number of processes.  The output is bit-identical for any value.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    specs = system.gbm_specs
    if not specs:
        raise ValueError("system has no GBM processes to simulate")
    starts = np.array([s.start for s in specs])
    drifts = np.array([s.drift for s in specs])
    vols = np.array([s.vol for s in specs])
    n_incr = grid.n_steps + extra_steps
    jobs = [
        (system.factor, starts, drifts, vols, grid.step, n_incr, seed, a, b)
        for a, b in _blocks(n_paths, workers)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_gbm_block, jobs))
    else:
        parts = [_gbm_block(j) for j in jobs]
    values = np.concatenate(parts, axis=0)
    return PathBundle(values, grid, tuple(s.label for s in specs), seed)


def simulate_locates(
    spec: ProcessSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    mode: str = "abs_normal",
    *,
    extra_steps: int = 0,
) -> PathBundle:
    """Per-step locate counts, Poisson(rate) or |Normal(mean, sd**2)|."""
    if not spec.is_locate:
        raise ValueError(f"simulate_locates needs a locate spec, got kind {spec.kind.value}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    n_t = grid.n_steps + 1 + extra_steps
    out = np.empty((n_paths, 1, n_t))
    if mode == "poisson":
        if spec.rate is None or spec.rate < 0:
            raise ValueError(f"poisson locates need a nonnegative rate, got {spec.rate}")
        for p in range(n_paths):
            out[p, 0] = path_rng(seed, p, _STREAM_LOCATE).poisson(spec.rate, n_t)
    elif mode == "abs_normal":
        if spec.mean is None or spec.sd is None:
            raise ValueError("abs_normal locates need mean and sd")
        for p in range(n_paths):
            out[p, 0] = np.abs(path_rng(seed, p, _STREAM_LOCATE).normal(spec.mean, spec.sd, n_t))
    else:
        raise ValueError(f"unknown locate mode {mode!r}")
    return PathBundle(out, grid, (spec.label,), seed)


def simulate_system(
    system: CorrelatedSystem,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    locate_mode: str = "abs_normal",
    extra_steps: int = 0,
    workers: int = 1,
) -> PathBundle:
    """GBM paths plus any locate processes of ``system`` in one bundle."""
    bundle = simulate_gbm_paths(system, grid, n_paths, seed, extra_steps=extra_steps, workers=workers)
    for spec in system.locate_specs:
        mode = "poisson" if spec.mean is None else locate_mode
        bundle = bundle.merge(
            simulate_locates(spec, grid, n_paths, seed, mode, extra_steps=extra_steps)
        )
    return bundle


@dataclass(frozen=True)
class KindRange:
    drift: tuple[float, float]
    vol: tuple[float, float]
    start: tuple[float, float]


@dataclass(frozen=True)
class ParameterRanges:
    """Uniform ranges from which per-security parameters are drawn."""

    kinds: dict = field(default_factory=dict)
    locate_mean: tuple[float, float] | None = None
    locate_sd: tuple[float, float] | None = None

    def __post_init__(self):
        kinds = {as_kind(k): (v if isinstance(v, KindRange) else KindRange(**v)) for k, v in self.kinds.items()}
        object.__setattr__(self, "kinds", kinds)
        for kind, r in kinds.items():
            for name in ("drift", "vol", "start"):
                _check_range(f"{kind.value}.{name}", getattr(r, name))
            if r.vol[0] < 0:
                raise ValueError(f"{kind.value}.vol range must be nonnegative")
            if r.start[0] <= 0:
                raise ValueError(f"{kind.value}.start range must be positive")
        for name in ("locate_mean", "locate_sd"):
            if getattr(self, name) is not None:
                _check_range(name, getattr(self, name))
        if (self.locate_mean is None) != (self.locate_sd is None):
            raise ValueError("locate_mean and locate_sd must be given together")
        if self.locate_sd is not None and self.locate_sd[0] < 0:
            raise ValueError("locate_sd range must be nonnegative")


def _check_range(name: str, pair) -> None:
    if len(pair) != 2:
        raise ValueError(f"{name}: range must be a (lo, hi) pair, got {pair!r}")
    lo, hi = pair
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ValueError(f"{name}: invalid range ({lo}, {hi})")


def sample_parameter_seed(
    ranges: ParameterRanges, n_securities: int, seed: int
) -> list[CorrelatedSystem]:
    """Draw each security's drift, vol and start uniformly from ``ranges``.

    Returns one independent (identity-correlated) system per security.
    """
    if n_securities < 1:
        raise ValueError(f"n_securities must be >= 1, got {n_securities}")
    if not ranges.kinds:
        raise ValueError("no variable ranges given")
    rng = np.random.default_rng(seed)
    systems = []
    for _ in range(n_securities):
        specs = [
            ProcessSpec(
                kind,
                start=rng.uniform(*r.start),
                drift=rng.uniform(*r.drift),
                vol=rng.uniform(*r.vol),
            )
            for kind, r in ranges.kinds.items()
        ]
        if ranges.locate_mean is not None:
            specs.append(
                ProcessSpec(
                    Kind.LOCATE,
                    mean=rng.uniform(*ranges.locate_mean),
                    sd=rng.uniform(*ranges.locate_sd),
                )
            )
        systems.append(CorrelatedSystem(tuple(specs)))
    return systems


SUPPLY_CHAIN = (
    (Kind.INVENTORY,),
    (Kind.EXCLUSIVE_USED,),
    (Kind.EXCLUSIVE_POOL,),
    (Kind.BORROW_BOOK,),
    (Kind.OTHER_SUPPLY,),
)


@dataclass(frozen=True)
class Violation:
    path: int
    step: int
    level: int
    security: int = 0


def _chain_levels(bundle: PathBundle, security: int) -> list[tuple[int, np.ndarray]]:
    """Cumulative supply for each checkable level of the five-level chain.

    A combined ``EP`` series stands in for ``E`` and ``P`` together, so the
    ``I + E`` level is skipped when only the combined series exists.
    """
    has = lambda k: bundle.has(k, security)  # noqa: E731
    zero = np.zeros((bundle.n_paths, bundle.n_times))
    get = lambda k: bundle.series(k, security) if has(k) else zero  # noqa: E731
    inv = get(Kind.INVENTORY)
    split = has(Kind.EXCLUSIVE_USED) or has(Kind.EXCLUSIVE_POOL)
    levels = [(1, inv)]
    if split:
        e = inv + get(Kind.EXCLUSIVE_USED)
        levels.append((2, e))
        ep = e + get(Kind.EXCLUSIVE_POOL)
    else:
        ep = inv + get(Kind.EXCLUSIVE)
    levels.append((3, ep))
    b = ep + get(Kind.BORROW_BOOK)
    levels.append((4, b))
    levels.append((5, b + get(Kind.OTHER_SUPPLY)))
    return levels


def validate_supply_chain(bundle: PathBundle) -> list[Violation]:
    """Every (path, step, level) where the loan book exceeds cumulative supply.

    Returns an empty list when there is no loan book or no components
    (availability simulated as one exogenous aggregate).
    """
    components = (Kind.INVENTORY, Kind.EXCLUSIVE_USED, Kind.EXCLUSIVE_POOL,
                  Kind.EXCLUSIVE, Kind.BORROW_BOOK, Kind.OTHER_SUPPLY)
    out: list[Violation] = []
    for sec in range(bundle.n_securities):
        if not bundle.has(Kind.LOAN_BOOK, sec):
            continue
        if not any(bundle.has(k, sec) for k in components):
            continue
        loans = bundle.series(Kind.LOAN_BOOK, sec)
        for level, supply in _chain_levels(bundle, sec):
            for p, t in zip(*np.nonzero(loans > supply)):
                out.append(Violation(int(p), int(t), level, sec))
    out.sort(key=lambda v: (v.security, v.path, v.step, v.level))
    return out


def aggregate_availability(bundle: PathBundle, securities: Iterable[int] | None = None) -> PathBundle:
    """Append ``A = I + E + P + B + O`` built from simulated components."""
    secs = range(bundle.n_securities) if securities is None else securities
    for sec in secs:
        total = np.zeros((bundle.n_paths, bundle.n_times))
        for kind in (Kind.INVENTORY, Kind.EXCLUSIVE_USED, Kind.EXCLUSIVE_POOL,
                     Kind.EXCLUSIVE, Kind.BORROW_BOOK, Kind.OTHER_SUPPLY):
            if bundle.has(kind, sec):
                total = total + bundle.series(kind, sec)
        bundle = bundle.with_series(Kind.AVAILABILITY, sec, total)
    return bundle


def log_increment_correlation(bundle: PathBundle, labels: Sequence | None = None) -> np.ndarray:
    """Sample correlation of pooled log-increments across variables."""
    idx = range(len(bundle.labels)) if labels is None else [bundle.labels.index((as_kind(k), i)) for k, i in labels]
    incr = np.diff(np.log(bundle.values[:, list(idx), : bundle.grid.n_steps + 1]), axis=2)
    flat = np.moveaxis(incr, 1, 0).reshape(len(list(idx)), -1)
    return np.corrcoef(flat)
