"""Closed-form cash-or-nothing American binary put on availability."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import special

AXES = ("A0", "H", "mu", "sigma", "K", "T")


@dataclass(frozen=True)
class BinaryPutInputs:
    A0: float
    H: float
    mu: float
    sigma: float
    K: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))
        if not (self.A0 > 0 and self.H > 0):
            raise ValueError(f"A0 and H must be positive, got A0={self.A0}, H={self.H}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def a(self) -> float:
        return math.log(self.H / self.A0) / self.sigma

    @property
    def xi(self) -> float:
        return self.mu / self.sigma - self.sigma / 2

    @property
    def b_squared(self) -> float:
        return self.xi**2 + 2 * self.mu


def erf(x):
    """Error function, exactly odd in its argument."""
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * special.erf(np.abs(x))
    return float(out) if out.ndim == 0 else out


def _sgn(x: float) -> float:
    return (x > 0) - (x < 0)


def binary_put_closed_form(inputs: BinaryPutInputs) -> float:
    """Value of a binary put paying ``K`` when availability first touches ``H``.

    ``a = log(H/A0)/sigma``, ``xi = mu/sigma - sigma/2``, ``b = sqrt(xi^2 + 2 mu)``::

        K/2 e^{a(xi-b)} {1 + sgn(a) erf((bT-a)/sqrt(2T))
                         + e^{2ab} [1 - sgn(a) erf((bT+a)/sqrt(2T))]}

    This equals ``K E[exp(-mu tau) 1{tau <= T}]`` for the first-passage
    time ``tau``, i.e. the drift doubles as the discount rate.
    """
    p = inputs
    if p.b_squared < 0:
        raise ValueError(f"xi^2 + 2 mu = {p.b_squared:.6g} < 0: b would be complex")
    if p.H >= p.A0:
        if p.H > p.A0:
            warnings.warn("H >= A0: binary put is exercised immediately", stacklevel=2)
        return float(p.K)
    a, xi, b, t = p.a, p.xi, math.sqrt(p.b_squared), p.T
    s = _sgn(a)
    root = math.sqrt(2 * t)
    first = 1 + s * erf((b * t - a) / root)
    second = math.exp(2 * a * b) * (1 - s * erf((b * t + a) / root))
    return float(p.K / 2 * math.exp(a * (xi - b)) * (first + second))


def asset_or_nothing_put(inputs: BinaryPutInputs) -> float:
    """Asset-or-nothing variant: the cash value scaled by the strike."""
    return binary_put_closed_form(inputs) * inputs.H


@dataclass
class GridCell:
    axis: str
    multiplier: float
    value: float
    domain_ok: bool


@dataclass
class ClosedFormGrid:
    base: BinaryPutInputs
    cells: list[GridCell]

    def axis(self, name: str) -> list[GridCell]:
        return [c for c in self.cells if c.axis == name]

    def monotonicity(self) -> dict[str, str]:
        """Per-axis label: nondecreasing, nonincreasing, constant or mixed."""
        out = {}
        for name in dict.fromkeys(c.axis for c in self.cells):
            vals = [c.value for c in sorted(self.axis(name), key=lambda c: c.multiplier) if c.domain_ok]
            diffs = np.diff(vals)
            if np.all(diffs == 0):
                out[name] = "constant"
            elif np.all(diffs >= 0):
                out[name] = "nondecreasing"
            elif np.all(diffs <= 0):
                out[name] = "nonincreasing"
            else:
                out[name] = "mixed"
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["axis", "multiplier", "value", "domain_ok"])
            for c in self.cells:
                w.writerow([c.axis, repr(c.multiplier), repr(c.value), str(c.domain_ok).lower()])


def closed_form_grid(base: BinaryPutInputs, multipliers) -> ClosedFormGrid:
    """Per-axis sweep: each axis is scaled by each multiplier, others fixed.

    ``multipliers`` is either one sequence applied to every axis or a dict
    mapping axis names to their own sequences.  Out-of-domain cells are
    kept with ``value = nan`` and ``domain_ok = False``.
    """
    if not isinstance(multipliers, dict):
        multipliers = {name: multipliers for name in AXES}
    names = {f.name for f in fields(BinaryPutInputs)}
    cells = []
    for axis, mults in multipliers.items():
        if axis not in names:
            raise ValueError(f"unknown closed-form axis {axis!r}")
        for m in mults:
            try:
                inputs = replace(base, **{axis: getattr(base, axis) * m})
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    value = binary_put_closed_form(inputs)
                cells.append(GridCell(axis, float(m), value, True))
            except ValueError:
                cells.append(GridCell(axis, float(m), float("nan"), False))
    return ClosedFormGrid(base, cells)
