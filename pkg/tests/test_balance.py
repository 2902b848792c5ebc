import numpy as np
import pytest
import scipy.linalg as sla

from somor.balance import (SOBT_VARIANTS, dominant_onesided, first_order_realize, gramian_factors,
                           sobt, sobt_bases)
from somor.errors import NotConstantCoefficient, RankDeficient, UnstablePencil
from somor.metrics import FrequencyGrid, linf_rel_error, sweep
from somor.reduce import project
from somor.system import StructuredSystem, eval_transfer

from conftest import chain, oscillator, random_second_order, rel

GRID = FrequencyGrid.linspace_hz(1, 250, 100)


@pytest.fixture(scope="module")
def chain30_factors():
    sys = chain(30, seed=3)
    fo = first_order_realize(sys)
    return sys, fo, gramian_factors(fo)


def test_first_order_blocks_scalar():
    fo = first_order_realize(oscillator())
    assert np.array_equal(fo.A, [[0, 1], [-1, -1]])
    assert np.array_equal(fo.E, np.eye(2))
    assert np.array_equal(fo.B, [[0], [1]])
    assert np.array_equal(fo.D, [[1, 0]])


def test_first_order_eigenvalues_match_quadratic():
    sys = chain(3, seed=7)
    fo = first_order_realize(sys)
    ev = sla.eigvals(fo.A, fo.E)
    M, C, K = fo.M, fo.C, fo.K
    # companion linearization of the quadratic eigenproblem as the oracle
    n = 3
    comp = np.block([[np.zeros((n, n)), np.eye(n)],
                     [-np.linalg.solve(M, K), -np.linalg.solve(M, C)]])
    ref = np.linalg.eigvals(comp)
    for lam in ev:
        assert np.min(np.abs(ref - lam)) < 1e-10 * abs(lam)


@pytest.mark.parametrize("kind", ["chainA-hysteretic", "cavityB", "chainC"])
def test_first_order_rejects_nonconstant(kind):
    with pytest.raises(NotConstantCoefficient):
        first_order_realize(chain(10, kind))


def test_first_order_rejects_complex():
    sys = random_second_order(4, seed=0, complex_=True)
    with pytest.raises(NotConstantCoefficient):
        first_order_realize(sys)


def test_scalar_gramians():
    fac = gramian_factors(first_order_realize(oscillator()))
    assert np.allclose(fac.R @ fac.R.T, 0.5 * np.eye(2), atol=1e-12)
    assert max(fac.residuals) < 1e-10


def test_symmetric_system_has_equal_gramians():
    M = np.diag([1.0, 2.0, 1.5])
    K = np.array([[4.0, -1, 0], [-1, 5, -2], [0, -2, 6]])
    C = 0.1 * M + 0.05 * K
    F = np.array([[1.0], [0.0], [0.5]])
    sys = StructuredSystem(mass=[np.eye(3)], damping=[C], stiffness=[K], inputs=[F],
                           output=F.T)
    fac = gramian_factors(first_order_realize(sys))
    # with M = I, F = G^T the velocity-position structure makes P and Q share
    # their position blocks
    P = fac.R @ fac.R.T
    Q = fac.L @ fac.L.T
    assert np.allclose(P[:3, :3], Q[3:, 3:], atol=1e-10)


def test_residuals_chain(chain30_factors):
    _, _, fac = chain30_factors
    assert fac.residuals[0] < 1e-8 and fac.residuals[1] < 1e-8
    assert fac.R_p.shape[0] == fac.R_v.shape[0] == 30


def test_unstable_pencil():
    sys = StructuredSystem(mass=[np.eye(2)], damping=[-0.1 * np.eye(2)], stiffness=[np.eye(2)],
                           inputs=[np.ones((2, 1))], output=np.ones((1, 2)))
    with pytest.raises(UnstablePencil):
        gramian_factors(first_order_realize(sys))


@pytest.mark.parametrize("variant", SOBT_VARIANTS)
def test_scalar_full_order_is_exact(variant):
    sys = oscillator(m=1.0, c=0.4, k=2.0, f=1.0, g=1.0)
    rom = sobt(sys, None, variant, 1)
    for s in 1j * np.linspace(0.05, 5, 50):
        assert rel(rom.transfer(s), eval_transfer(sys, s)) < 1e-10


@pytest.mark.parametrize("variant", ["v", "vpm", "pm", "pv"])
def test_mass_biorthogonality(chain30_factors, variant):
    sys, fo, fac = chain30_factors
    W, V = sobt_bases(fo, fac, variant, 10)
    assert np.allclose(W.T @ fo.M @ V, np.eye(10), atol=1e-10)


def test_fv_is_one_sided(chain30_factors):
    sys, fo, fac = chain30_factors
    W, V = sobt_bases(fo, fac, "fv", 8)
    assert np.array_equal(W, V)


@pytest.mark.parametrize("variant", SOBT_VARIANTS)
def test_all_variants_reduce_real(chain30_factors, variant):
    sys, fo, fac = chain30_factors
    rom = sobt(sys, fac, variant, 10, fo)
    assert rom.r == 10
    for t in rom.system.mass + rom.system.damping + rom.system.stiffness:
        assert not np.iscomplexobj(t.matrix)
    err = linf_rel_error(sweep(sys, GRID), sweep(rom, GRID))
    assert np.isfinite(err)


def test_so_full_rank_reproduces_transfer(chain30_factors):
    sys, fo, fac = chain30_factors
    rom = sobt(sys, fac, "so", 60, fo)
    assert rom.provenance["r"] == rom.r
    assert linf_rel_error(sweep(sys, GRID), sweep(rom, GRID)) < 1e-8


def test_effective_rank_reported(chain30_factors):
    sys, fo, fac = chain30_factors
    rom = sobt(sys, fac, "v", 1000, fo)
    assert rom.r <= 30


def test_dominant_onesided(chain30_factors):
    sys, fo, fac = chain30_factors
    fom = sweep(sys, GRID)
    errs = {}
    for r in (5, 10):
        pair = dominant_onesided(fac, "controllability", r)
        assert np.array_equal(pair.V, pair.W)
        assert np.allclose(pair.V.T @ pair.V, np.eye(r), atol=1e-12)
        errs[r] = linf_rel_error(fom, sweep(project(sys, pair), GRID))
    assert np.isfinite(errs[10]) and errs[10] <= errs[5]
    qr = dominant_onesided(fac, "controllability", 5, method="qr")
    assert qr.r == 5
    with pytest.raises(RankDeficient):
        dominant_onesided(fac, "observability", 10**4)


def test_dominant_observability_matches_kronecker_gramian():
    sys = chain(6, seed=2)
    fo = first_order_realize(sys)
    fac = gramian_factors(fo)
    # oracle: dense Kronecker solve of A^T Q E + E^T Q A + D^T D = 0
    N = fo.A.shape[0]
    lhs = np.kron(fo.E.T, fo.A.T) + np.kron(fo.A.T, fo.E.T)
    Q = np.linalg.solve(lhs, -(fo.D.T @ fo.D).reshape(-1, order="F")).reshape(N, N, order="F")
    Q = 0.5 * (Q + Q.T)
    w, U = np.linalg.eigh(Q[:6, :6])
    Uo = U[:, np.argsort(w)[::-1][:2]]
    Vo = dominant_onesided(fac, "observability", 2).V
    assert np.linalg.norm(Vo - Uo @ (Uo.T @ Vo)) < 1e-6
    assert np.linalg.norm(Q - fac.L @ fac.L.T) < 1e-8 * np.linalg.norm(Q)
