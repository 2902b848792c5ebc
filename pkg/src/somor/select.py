"""Expansion-point selection and compression of presampled candidate bases."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from somor import numerics
from somor.errors import Exhausted, RankDeficient
from somor.interp import PresampleBasis, ShiftPlan
from somor.metrics import (ErrorCurve, Sweep, linf_rel_error, pointwise_error,
                           pointwise_norms, sweep)
from somor.reduce import VARIANTS, make_pair, project, realify  # noqa: F401  (realify re-exported)

log = logging.getLogger(__name__)

# absolute increase of the grid error tolerated when accepting a greedy block
MONOTONE_SLACK = 1e-12


@dataclass
class SelectionResult:
    """Compressed basis (or bases) plus how it was obtained.

    ``shifts`` lists the chosen expansion points; ``provenance`` the presample
    columns behind V where that is meaningful; ``history`` one record per
    greedy iteration.
    """

    V: np.ndarray
    method: str
    W: np.ndarray | None = None
    shifts: tuple = ()
    provenance: tuple = ()
    history: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def r(self):
        return self.V.shape[1]


def equi_shifts(f_min, f_max, count, extra=()) -> ShiftPlan:
    """Equidistant shifts in [f_min, f_max] Hz, preceded by the ``extra`` guesses."""
    if not f_min < f_max:
        raise ValueError("f_min must be smaller than f_max")
    if count < 1:
        raise ValueError("count must be positive")
    base = [f_min] if count == 1 else list(np.linspace(f_min, f_max, count))
    return ShiftPlan.from_hz([float(f) for f in extra] + base)


def equi_for_order(f_min, f_max, r, extra=()) -> ShiftPlan:
    """Shifts for one-column-per-shift equi reduction of order ``r``.

    Small orders (r at most the number of extras) use exactly the first ``r``
    extras; otherwise all extras plus ``r - len(extra)`` equidistant shifts.
    """
    extra = list(extra)
    if r < 1:
        raise ValueError("r must be positive")
    if r <= len(extra):
        return ShiftPlan.from_hz(extra[:r])
    return equi_shifts(f_min, f_max, r - len(extra), extra)


def _columns(pre):
    return pre.columns if isinstance(pre, PresampleBasis) else np.atleast_2d(np.asarray(pre))


def avg_compress(pre, r) -> SelectionResult:
    """Leading ``r`` orthonormal columns of a column-pivoted QR of the presample."""
    A = _columns(pre)
    qr = numerics.qr_pivoted(A)
    if r < 1 or r > qr.rank:
        raise RankDeficient(f"requested r={r} exceeds numerical rank {qr.rank} of the presample")
    prov = ()
    if isinstance(pre, PresampleBasis):
        prov = tuple(pre.provenance[i] for i in qr.pivot[:r])
    return SelectionResult(qr.Q[:, :r], "avg", provenance=prov,
                           shifts=getattr(pre, "shifts", ()))


def minrel_compress(pre, r) -> SelectionResult:
    """Leading ``r`` left singular vectors of the presample."""
    f = numerics.svd(_columns(pre))
    U, _, _ = numerics.svd_truncate(f, r)
    return SelectionResult(U, "minrel", shifts=getattr(pre, "shifts", ()))


def compress(method, right=None, left=None, r=None, real=False):
    """Compress right and/or left presamples independently to the same ``r``.

    With ``real=True`` the presamples are realified (n x 2q) first.
    """
    fn = {"avg": avg_compress, "minrel": minrel_compress}[method]
    out = {}
    for side, pre in (("V", right), ("W", left)):
        if pre is None:
            continue
        if real:
            pre = pre.realified() if isinstance(pre, PresampleBasis) else np.hstack(
                [np.real(pre), np.imag(pre)])
        out[side] = fn(pre, r)
    res = out.get("V") or out.get("W")
    return SelectionResult(out["V"].V if "V" in out else None, method,
                           W=out["W"].V if "W" in out else None, shifts=res.shifts,
                           provenance=res.provenance)


def _nearest(shifts, omega, chosen):
    """Index of the unselected shift nearest ``omega``; ties go to the lower frequency."""
    best, best_key = None, None
    for i, s in enumerate(shifts):
        if i in chosen:
            continue
        key = (abs(s.imag - omega), s.imag)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


def _basis(blocks, idx, real):
    B = np.hstack([blocks[i] for i in idx])
    return realify(B) if real else numerics.orth(B)


def greedy_linf(sys, fom: Sweep, right_blocks, r_target, variant="osimaginput",
                left_blocks=None, tol=0.0, monotone=True) -> tuple[SelectionResult, ErrorCurve]:
    """Greedy discrete-L-infinity shift selection over presampled blocks.

    ``right_blocks``/``left_blocks`` map a shift (complex, rad/s) to the
    candidate columns associated with it.  Starting from the shift nearest
    the grid point of largest ``||H||``, each iteration reduces with the
    selected blocks, measures the relative error on the grid of ``fom`` and
    tries the unused shift nearest the worst grid point.  With ``monotone``
    a candidate whose ROM raises the grid error by more than
    :data:`MONOTONE_SLACK` is rejected (and not retried) and the next-nearest
    unused shift is tried instead, so accepted errors never increase.
    Stops when the basis reaches ``r_target`` columns or the error drops
    below ``tol``.  Raises :class:`Exhausted` (carrying the partial result,
    stop reason ``exhausted`` or ``stalled``) if every block is used first.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown projection variant {variant!r}")
    two_sided = variant.startswith("ts")
    output_only = variant.endswith("output")
    if (two_sided or output_only) and left_blocks is None:
        raise ValueError(f"{variant} needs left candidate blocks")
    src = left_blocks if output_only else right_blocks
    shifts = list(src.keys())
    if two_sided and set(left_blocks) != set(right_blocks):
        raise ValueError("left and right blocks must share their shifts")
    real = "real" in variant
    grid = fom.grid

    ref = pointwise_norms(fom.values)
    ref = np.where(np.isfinite(ref), ref, -np.inf)

    def evaluate(idx):
        keys = [shifts[i] for i in idx]
        V = _basis(right_blocks, keys, real) if not output_only else None
        W = _basis(left_blocks, keys, real) if (two_sided or output_only) else None
        pair = make_pair(variant, V, W, r_target)
        rom = project(sys, pair, provenance={"method": "linf", "shifts": len(keys)})
        rsw = sweep(rom, grid)
        perr = pointwise_error(fom, rsw)
        # flagged FOM points never win; a ROM blowing up elsewhere always does
        perr = np.where(np.isfinite(ref), np.where(np.isfinite(perr), perr, np.inf), -np.inf)
        return pair, linf_rel_error(fom, rsw), perr

    def record(pair, err, perr, shift, accepted):
        history.append({"iteration": len(history), "r": pair.r, "eps": err,
                        "shift_hz": shift.imag / (2 * math.pi),
                        "worst_hz": grid.hz[int(np.argmax(perr))], "accepted": accepted})
        log.info("greedy iteration %d: r=%d eps=%.3e%s", len(history) - 1, pair.r, err,
                 "" if accepted else " (rejected)")

    history = []
    chosen = [_nearest(shifts, grid.omega[int(np.argmax(ref))], set())]
    used = set(chosen)
    pair, err, perr = evaluate(chosen)
    record(pair, err, perr, shifts[chosen[-1]], True)
    while True:
        result = SelectionResult(pair.V, "linf", W=pair.W,
                                 shifts=tuple(shifts[i] for i in chosen), history=history)
        if pair.r >= r_target:
            result.stop_reason = "r_target"
            return result, history_curve(history)
        if err <= tol:
            result.stop_reason = "tolerance"
            return result, history_curve(history)
        omega = grid.omega[int(np.argmax(perr))]
        rejected = 0
        while True:
            nxt = _nearest(shifts, omega, used)
            if nxt is None:
                # "stalled": every remaining block was tried and raised the error
                result.stop_reason = "stalled" if rejected else "exhausted"
                raise Exhausted(f"{result.stop_reason} with all {len(shifts)} blocks used at "
                                f"r={pair.r} < {r_target}",
                                result=(result, history_curve(history)))
            used.add(nxt)
            t_pair, t_err, t_perr = evaluate(chosen + [nxt])
            accepted = not monotone or t_err <= err + MONOTONE_SLACK
            record(t_pair, t_err, t_perr, shifts[nxt], accepted)
            rejected += not accepted
            if accepted:
                chosen.append(nxt)
                pair, err, perr = t_pair, t_err, t_perr
                break


def history_curve(history) -> ErrorCurve:
    """Error curve from the accepted greedy steps; repeated orders keep their last error."""
    by_r = {}
    for h in history:
        if not h.get("accepted", True):
            continue
        by_r[h["r"]] = h["eps"]
    rs = sorted(by_r)
    return ErrorCurve(rs, [by_r[r] for r in rs])
