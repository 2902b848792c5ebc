"""Frequency sweeps, discrete relative L-infinity errors and MORscores."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from somor import numerics
from somor.errors import EmptyCurve, SingularOperator, PoleAtFrequency, ZeroReference
from somor.system import assemble_input, assemble_operator


@dataclass(frozen=True)
class FrequencyGrid:
    """Angular frequencies (rad/s) on the imaginary axis, strictly increasing."""

    omega: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("frequency grid is empty")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)

    @classmethod
    def linspace_hz(cls, f_min, f_max, points):
        return cls(2 * math.pi * np.linspace(f_min, f_max, points))

    @classmethod
    def from_hz(cls, freqs):
        return cls(2 * math.pi * np.asarray(freqs, dtype=float))

    @property
    def s(self):
        return 1j * self.omega

    @property
    def hz(self):
        return self.omega / (2 * math.pi)

    def __len__(self):
        return self.omega.size


@dataclass(frozen=True)
class Sweep:
    """Transfer values ``values[i] = H(i omega_i)`` (N x p x m); flagged points are NaN."""

    grid: FrequencyGrid
    values: np.ndarray
    flagged: tuple = ()


def sweep(model, grid: FrequencyGrid) -> Sweep:
    sys = getattr(model, "system", model)
    vals = np.full((len(grid), sys.p, sys.m), np.nan + 0j)
    flagged = []
    for i, s in enumerate(grid.s):
        try:
            lu = numerics.factorize(assemble_operator(sys, s))
            vals[i] = sys.output @ numerics.lu_solve(lu, assemble_input(sys, s))
        except (SingularOperator, PoleAtFrequency):
            flagged.append(i)
    return Sweep(grid, vals, tuple(flagged))


def pointwise_norms(values):
    """Spectral norm of every p x m sample."""
    values = np.asarray(values)
    if values.shape[1] == 1 or values.shape[2] == 1:
        return np.linalg.norm(values.reshape(values.shape[0], -1), axis=1)
    return np.linalg.norm(values, ord=2, axis=(1, 2))


def pointwise_error(fom: Sweep, rom: Sweep):
    """Absolute spectral-norm error at every grid point (NaN where flagged)."""
    return pointwise_norms(_values(fom) - _values(rom))


def _values(sw):
    return sw.values if isinstance(sw, Sweep) else np.asarray(sw)


def linf_rel_error(fom, rom):
    """max_w ||H - Hr||_2 / max_w ||H||_2 over the grid, flagged points skipped."""
    H, Hr = _values(fom), _values(rom)
    if H.shape != Hr.shape:
        raise ValueError(f"sweeps differ in shape: {H.shape} vs {Hr.shape}")
    ref = pointwise_norms(H)
    err = pointwise_norms(H - Hr)
    ok = np.isfinite(ref)
    if not ok.any() or np.max(ref[ok]) == 0:
        raise ZeroReference("reference transfer function vanishes on the grid")
    if np.any(~np.isfinite(err[ok])):
        # a reduced model singular where the FOM is not counts as total failure
        return math.inf
    return float(np.max(err[ok]) / np.max(ref[ok]))


@dataclass(frozen=True)
class ErrorCurve:
    """Error-per-order samples ``(r, eps(r))`` plus optional build times."""

    r: np.ndarray
    eps: np.ndarray
    seconds: np.ndarray | None = None

    def __post_init__(self):
        r = np.asarray(self.r, dtype=int).ravel()
        e = np.asarray(self.eps, dtype=float).ravel()
        if r.size != e.size:
            raise ValueError("r and eps must have the same length")
        if np.any(np.diff(r) <= 0):
            raise ValueError("orders must be distinct and increasing")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "eps", e)
        if self.seconds is not None:
            object.__setattr__(self, "seconds", np.asarray(self.seconds, dtype=float).ravel())

    def clamped(self, floor):
        e = np.where(np.isfinite(self.eps), self.eps, 1.0)
        return np.clip(e, floor, 1.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "eps", "seconds"])
        secs = self.seconds if self.seconds is not None else np.zeros(self.r.size)
        for r, e, t in zip(self.r, self.eps, secs):
            w.writerow([int(r), repr(float(e)), repr(float(t))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([int(x["r"]) for x in rows], [float(x["eps"]) for x in rows],
                   [float(x["seconds"]) for x in rows])


@dataclass(frozen=True)
class MorScore:
    score: float
    eps: float
    r_max: int


def _log_floor(eps):
    v = math.log10(eps)
    # guard against log10(1e-6) landing a hair below -6
    return round(v) if abs(v - round(v)) < 1e-9 else math.floor(v)


def normalized_curve(curve: ErrorCurve, eps, r_max):
    """Points ``(r / r_max, log10(eps(r)) / floor(log10(eps)))`` with the (0, 0) anchor."""
    x = np.concatenate([[0.0], curve.r / r_max])
    y = np.concatenate([[0.0], np.log10(curve.clamped(eps)) / _log_floor(eps)])
    if curve.r.size and curve.r[0] == 0:
        x, y = x[1:], y[1:]
    return x, y


def morscore(curve: ErrorCurve, eps=1e-16, r_max=None) -> MorScore:
    """Trapezoidal area below the normalized error graph."""
    if curve.r.size == 0:
        raise EmptyCurve("error curve has no samples")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if r_max is None:
        r_max = int(curve.r[-1])
    if curve.r[-1] > r_max or curve.r[0] < 0:
        raise ValueError(f"curve orders must lie in [0, r_max={r_max}]")
    x, y = normalized_curve(curve, eps, r_max)
    area = float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))
    return MorScore(min(max(area, 0.0), 1.0), eps, r_max)
