import math
import warnings

import numpy as np
import pytest
import scipy.linalg as sla

from somor.errors import Breakdown, UnsupportedSpec
from somor.interp import (ShiftPlan, _soar, interp_basis_left, interp_basis_right, moments,
                          presample, soar_basis, sp_order, taylor_solutions)
from somor.reduce import make_pair, project
from somor.system import eval_transfer

from conftest import chain, principal_angle_sin, random_second_order, rel


def contour_moments(sys, s0, order, radius, points=128):
    """Taylor coefficients from the trapezoidal Cauchy integral on a circle."""
    theta = 2 * math.pi * np.arange(points) / points
    z = radius * np.exp(1j * theta)
    H = np.array([eval_transfer(sys, s0 + zk) for zk in z])
    return np.array([np.mean(H * np.exp(-1j * j * theta)[:, None, None], axis=0) / radius**j
                     for j in range(order + 1)])


def quadratic_eigs(sys):
    M, C, K = (sum(t.matrix for t in getattr(sys, k)) for k in ("mass", "damping", "stiffness"))
    n = M.shape[0]
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-K, -C]])
    E = np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), M]])
    return sla.eigvals(A, E)


def test_shift_plan_conversion():
    plan = ShiftPlan.from_hz([1.0, 50.0])
    assert plan.shifts[1] == pytest.approx(2j * math.pi * 50)
    assert np.allclose(plan.hz, [1.0, 50.0])
    assert ShiftPlan.from_dict(plan.to_dict()) == plan
    with pytest.raises(ValueError):
        ShiftPlan((1j,), (0, 1))


def test_recurrence_matches_contour_oracle():
    sys = chain(20, seed=4)
    s0 = 2j * math.pi * 30
    radius = 0.4 * np.min(np.abs(quadratic_eigs(sys) - s0))
    ref = contour_moments(sys, s0, 5, radius)
    got = moments(sys, s0, 5)
    for j in range(6):
        assert abs(got[j, 0, 0] - ref[j, 0, 0]) * radius**j <= 1e-9 * abs(ref[0, 0, 0])


def test_recurrence_for_frequency_dependent_terms():
    sys = chain(16, "chainC", seed=2)
    s0 = 2j * math.pi * 60
    radius = 0.3 * np.min(np.abs(quadratic_eigs(sys) - s0))
    ref = contour_moments(sys, s0, 3, radius)
    got = moments(sys, s0, 3)
    for j in range(4):
        assert abs(got[j, 0, 0] - ref[j, 0, 0]) * radius**j <= 1e-8 * abs(ref[0, 0, 0])


def test_two_sided_interpolation_exact_at_shifts():
    sys = random_second_order(40, m=2, p=2, seed=3)
    plan = ShiftPlan((0.5j, 2j, 4j))
    rom = project(sys, make_pair("tsimag", interp_basis_right(sys, plan),
                                 interp_basis_left(sys, plan)))
    for s in plan.shifts:
        assert rel(rom.transfer(s), eval_transfer(sys, s)) < 1e-10


def test_hermite_moments_two_sided():
    # right order k and left order theta match derivatives up to k + theta + 1
    sys = random_second_order(30, seed=5)
    s0 = 1.5j
    V = interp_basis_right(sys, ShiftPlan((s0,), (1,)))
    W = interp_basis_left(sys, ShiftPlan((s0,), (1,)))
    rom = project(sys, make_pair("tsimag", V, W))
    full, red = moments(sys, s0, 4), moments(rom, s0, 4)
    for j in range(4):
        assert abs(full[j, 0, 0] - red[j, 0, 0]) <= 1e-8 * abs(full[j, 0, 0])
    assert abs(full[4, 0, 0] - red[4, 0, 0]) > 1e-6 * abs(full[4, 0, 0])


def test_left_solutions_use_adjoint():
    sys = random_second_order(12, m=1, p=2, seed=8, complex_=True)
    s0 = 0.3 + 1j
    Y = taylor_solutions(sys, s0, 0, "output")[0]
    K = sys.operator(s0)
    assert np.allclose(K.conj().T @ Y, sys.output.conj().T)


def test_soar_spans_second_order_krylov_space():
    sys = random_second_order(25, seed=2)
    s0 = 0.8j
    K = sys.operator(s0)
    M = sys.mass[0].matrix
    C = sys.damping[0].matrix
    A = -np.linalg.solve(K, 2 * s0 * M + C)
    B = -np.linalg.solve(K, M)
    v = [np.linalg.solve(K, sys.inputs[0].matrix[:, 0])]
    v.append(A @ v[0])
    for _ in range(4):
        v.append(A @ v[-1] + B @ v[-2])
    Q = soar_basis(sys, s0, 6)
    assert np.allclose(Q.conj().T @ Q, np.eye(6), atol=1e-12)
    assert principal_angle_sin(Q, np.column_stack(v)) < 1e-8


def test_soar_moment_matching():
    sys = random_second_order(30, seed=6)
    s0 = 1.2j
    rom = project(sys, make_pair("osimaginput", V=soar_basis(sys, s0, 5)))
    full, red = moments(sys, s0, 6), moments(rom, s0, 6)
    for j in range(5):
        assert abs(full[j, 0, 0] - red[j, 0, 0]) <= 1e-8 * abs(full[j, 0, 0])


def test_soar_deflation_warns():
    # a 3-dof system cannot support a 6-dimensional Krylov space
    sys = random_second_order(3, seed=1)
    with pytest.warns(RuntimeWarning, match="deflation"):
        Q = soar_basis(sys, 1j, 6)
    assert Q.shape[1] <= 3


def test_soar_zero_start_breaks_down():
    with pytest.raises(Breakdown):
        _soar(lambda q, p: q, np.zeros(4), 3, 1e-10)


def test_sp_order_rules():
    assert sp_order(chain(10), [1j, 2j]) == 2
    shifts = 2j * math.pi * np.linspace(1, 250, 20)
    ell = sp_order(chain(20, "chainC"), shifts)
    assert 2 <= ell <= 10


def test_presample_provenance():
    sys = random_second_order(20, m=2, seed=0)
    pre = presample(sys, "sp", [1j, 2j], "input", order=2)
    assert pre.q == 2 * 3 * 2
    assert pre.provenance[0] == (0, 0, 0)
    assert set(pre.blocks()) == {0, 1}
    assert np.allclose(np.linalg.norm(pre.columns, axis=0), 1.0)
    real = pre.realified()
    assert real.q == 2 * pre.q and not np.iscomplexobj(real.columns)
    std = presample(sys, "standard", [1j, 2j], "output")
    assert std.q == 2


def test_presample_soa_requires_k():
    sys = random_second_order(10, seed=0)
    with pytest.raises(UnsupportedSpec):
        presample(sys, "soa", [1j], "input")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pre = presample(sys, "soa", [1j, 2j], "input", k=3)
    assert pre.q == 6
    with pytest.raises(UnsupportedSpec):
        presample(sys, "bogus", [1j], "input")
