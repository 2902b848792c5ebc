import math

import numpy as np
import pytest

from somor.errors import Exhausted, RankDeficient
from somor.interp import ShiftPlan, interp_basis_right, presample
from somor.metrics import FrequencyGrid, linf_rel_error, sweep
from somor.reduce import make_pair, project
from somor.select import (avg_compress, compress, equi_for_order, equi_shifts, greedy_linf,
                          minrel_compress, realify)
from somor.system import eval_transfer

from conftest import chain, principal_angle_sin


def test_equi_shifts_arithmetic():
    assert np.allclose(equi_shifts(1, 250, 5).hz, [1, 63.25, 125.5, 187.75, 250])
    assert np.allclose(equi_shifts(1, 250, 1).hz, [1])


def test_equi_shifts_with_extras():
    plan = equi_shifts(1, 250, 80, [46, 47, 48, 50])
    assert len(plan.shifts) == 84
    assert np.allclose(plan.hz[:4], [46, 47, 48, 50])


@pytest.mark.parametrize("r", [1, 2, 3, 4])
def test_small_orders_use_first_extras(r):
    plan = equi_for_order(1, 250, r, [46, 47, 48, 50])
    assert np.allclose(plan.hz, [46, 47, 48, 50][:r])


def test_larger_orders_keep_all_extras():
    plan = equi_for_order(1, 250, 10, [46, 47, 48, 50])
    assert len(plan.shifts) == 10 and np.allclose(plan.hz[:4], [46, 47, 48, 50])


def test_avg_handles_duplicates_and_rank():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((30, 5))
    sel = avg_compress(np.hstack([A, A]), 5)
    assert principal_angle_sin(sel.V, A) < 1e-10
    with pytest.raises(RankDeficient):
        avg_compress(np.hstack([A, A]), 6)


@pytest.mark.parametrize("fn", [avg_compress, minrel_compress])
def test_compressed_basis_lies_in_presample_span(fn):
    sys = chain(40, seed=2)
    pre = presample(sys, "sp", 2j * math.pi * np.linspace(5, 200, 8), "input", order=2)
    sel = fn(pre, 12)
    assert np.allclose(sel.V.conj().T @ sel.V, np.eye(12), atol=1e-12)
    coef = np.linalg.lstsq(pre.columns, sel.V, rcond=None)[0]
    assert np.linalg.norm(pre.columns @ coef - sel.V) < 1e-10


def test_minrel_exact_span_and_tie_break():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((20, 3))
    X = B @ rng.standard_normal((3, 9))
    sel = minrel_compress(X, 3)
    assert principal_angle_sin(sel.V, B) < 1e-10
    with pytest.raises(RankDeficient):
        minrel_compress(X, 4)
    # two orthogonal equal-norm columns: the dominant direction is the SVD's choice
    e = np.eye(4)[:, :2]
    U = np.linalg.svd(e, full_matrices=False)[0][:, :1]
    assert principal_angle_sin(minrel_compress(e, 1).V, U) < 1e-12


def test_avg_beats_worst_single_shift_basis():
    # band with about a dozen modes, so that r = 20 can resolve it
    sys = chain(40, seed=4)
    grid = FrequencyGrid.linspace_hz(1, 120, 150)
    fom = sweep(sys, grid)
    shifts = 2j * math.pi * np.linspace(1, 120, 20)
    pre = presample(sys, "sp", shifts, "input", order=2)
    sel = avg_compress(pre, 20)
    err_avg = linf_rel_error(fom, sweep(project(sys, make_pair("osimaginput", V=sel.V)), grid))
    worst = 0.0
    for s in shifts[::4]:
        V = interp_basis_right(sys, ShiftPlan((s,), (19,)))
        err = linf_rel_error(fom, sweep(project(sys, make_pair("osimaginput", V=V)), grid))
        worst = max(worst, err)
    assert err_avg <= worst
    assert err_avg < 1e-3


def test_compress_realified_two_sided():
    sys = chain(30, seed=1)
    shifts = 2j * math.pi * np.linspace(5, 200, 6)
    R = presample(sys, "standard", shifts, "input")
    L = presample(sys, "standard", shifts, "output")
    sel = compress("avg", R, L, 8, real=True)
    assert sel.V.shape == sel.W.shape == (30, 8)
    assert not np.iscomplexobj(sel.V) and not np.iscomplexobj(sel.W)


def test_realify_seeded_complex_basis_gives_conjugate_symmetry():
    sys = chain(30, seed=5)
    rng = np.random.default_rng(2)
    V = realify(rng.standard_normal((30, 4)) + 1j * rng.standard_normal((30, 4)))
    rom = project(sys, make_pair("osrealinput", V=V))
    for s in 2j * math.pi * np.array([3.0, 40.0, 170.0]):
        assert np.allclose(rom.transfer(np.conj(s)), np.conj(rom.transfer(s)), rtol=1e-10)


def blocks_for(sys, shifts, side="input"):
    pre = presample(sys, "standard", shifts, side)
    return {shifts[i]: B for i, B in pre.blocks().items()}


def test_greedy_exact_rom_stops_after_one_block():
    sys = chain(4, seed=0)
    grid = FrequencyGrid.linspace_hz(1, 100, 40)
    fom = sweep(sys, grid)
    eye = {1j: np.eye(4)}
    sel, curve = greedy_linf(sys, fom, eye, r_target=10, tol=1e-10)
    assert len(sel.shifts) == 1 and sel.stop_reason == "tolerance"
    assert curve.eps[0] < 1e-10


def test_greedy_second_shift_is_error_argmax():
    sys = chain(30, seed=3)
    grid = FrequencyGrid.linspace_hz(1, 250, 300)
    fom = sweep(sys, grid)
    shifts = tuple(grid.s)
    sel, curve = greedy_linf(sys, fom, blocks_for(sys, shifts), r_target=2)
    # oracle: exhaustive evaluation of the first ROM on every grid point
    first = project(sys, make_pair("osimaginput", V=blocks_for(sys, (sel.shifts[0],))[sel.shifts[0]]))
    errs = [np.linalg.norm(eval_transfer(sys, s) - first.transfer(s), 2) for s in grid.s]
    assert sel.shifts[1] == grid.s[int(np.argmax(errs))]


def test_greedy_history_and_exhaustion():
    sys = chain(20, seed=1)
    grid = FrequencyGrid.linspace_hz(1, 250, 80)
    fom = sweep(sys, grid)
    shifts = tuple(2j * math.pi * np.array([10.0, 50.0, 120.0]))
    with pytest.raises(Exhausted) as info:
        greedy_linf(sys, fom, blocks_for(sys, shifts), r_target=10)
    sel, curve = info.value.result
    assert sel.stop_reason == "exhausted" and len(sel.history) == 3
    assert list(curve.r) == [1, 2, 3]


def test_greedy_two_sided_blocks():
    sys = chain(30, seed=3)
    grid = FrequencyGrid.linspace_hz(1, 250, 100)
    fom = sweep(sys, grid)
    shifts = tuple(2j * math.pi * np.linspace(1, 250, 30))
    sel, curve = greedy_linf(sys, fom, blocks_for(sys, shifts), 8, "tsreal",
                             left_blocks=blocks_for(sys, shifts, "output"))
    assert sel.r == 8 and sel.W is not None and not np.iscomplexobj(sel.V)
    assert np.all(np.diff(curve.r) > 0)


@pytest.mark.parametrize("seed", [0, 3])
def test_greedy_accepted_errors_never_increase(seed):
    sys = chain(30, seed=seed)
    grid = FrequencyGrid.linspace_hz(1, 250, 120)
    fom = sweep(sys, grid)
    shifts = tuple(grid.s)
    try:
        sel, curve = greedy_linf(sys, fom, blocks_for(sys, shifts), 12, "tsreal",
                                 left_blocks=blocks_for(sys, shifts, "output"))
    except Exhausted as exc:
        sel, curve = exc.result
    assert np.all(np.diff(curve.eps) <= 1e-12)
    accepted = [h for h in sel.history if h["accepted"]]
    assert len(accepted) == len(sel.shifts)


def test_plain_greedy_accepts_every_block():
    sys = chain(30, seed=0)
    grid = FrequencyGrid.linspace_hz(1, 250, 120)
    fom = sweep(sys, grid)
    sel, _ = greedy_linf(sys, fom, blocks_for(sys, tuple(grid.s)), 10, monotone=False)
    assert all(h["accepted"] for h in sel.history) and len(sel.history) == len(sel.shifts)


def test_greedy_duplicate_block_is_accepted_then_exhausts():
    sys = chain(20, seed=1)
    grid = FrequencyGrid.linspace_hz(1, 250, 80)
    fom = sweep(sys, grid)
    s = 2j * math.pi * 60.0
    block = blocks_for(sys, (s,))[s]
    # the same columns under a second key leave the error unchanged
    with pytest.raises(Exhausted) as info:
        greedy_linf(sys, fom, {s: block, s + 1j: block}, r_target=5)
    sel, curve = info.value.result
    assert sel.stop_reason == "exhausted" and len(sel.shifts) == 2
    assert list(curve.r) == [1]


def test_greedy_reports_stall():
    sys = chain(30, seed=0)
    grid = FrequencyGrid.linspace_hz(1, 250, 300)
    fom = sweep(sys, grid)
    with pytest.raises(Exhausted) as info:
        greedy_linf(sys, fom, blocks_for(sys, tuple(grid.s)), r_target=30)
    sel, curve = info.value.result
    assert sel.stop_reason == "stalled"
    assert any(not h["accepted"] for h in sel.history)
    assert np.all(np.diff(curve.eps) <= 1e-12)
