"""Second-order balanced truncation (SOBT) of constant-coefficient systems.

The second-order system ``M x'' + C x' + K x = F u, y = G x`` is written in
first-order form with

    E = [[I, 0], [0, M]],  A = [[0, I], [-K, -C]],  B = [0; F],  D = [G, 0],

whose Gramians ``P = R R^T`` and ``Q = L L^T`` are split into position rows
(``R_p``, ``L_p``) and velocity rows (``R_v``, ``L_v``).  Each variant forms
one or two small SVDs of products of these blocks and projects the
second-order matrices with the scaled singular vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from somor import numerics
from somor.errors import NotConstantCoefficient, RankDeficient, SingularCoupling
from somor.reduce import ProjectionPair, ReducedModel, project
from somor.system import StructuredSystem

SOBT_VARIANTS = ("v", "fv", "vpm", "pm", "pv", "vp", "p", "so")
SIGMA_TOL = 1e-12
COUPLING_COND_MAX = 1e12


@dataclass(frozen=True)
class FirstOrderRealization:
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    F: np.ndarray
    G: np.ndarray

    @property
    def n(self):
        return self.M.shape[0]


def _constant_sum(terms, n, cols, name):
    total = np.zeros((n, cols))
    for t in terms:
        c = t.coeff
        if not c.is_constant:
            raise NotConstantCoefficient(f"{name} term has frequency-dependent coefficient {c.tag}")
        val = complex(c(1.0))
        if val.imag != 0 or np.iscomplexobj(t.matrix) and np.any(t.matrix.imag != 0):
            raise NotConstantCoefficient(f"{name} term is complex-valued")
        total += val.real * np.real(t.matrix)
    return total


def first_order_realize(sys: StructuredSystem) -> FirstOrderRealization:
    """Linearization of a real constant-coefficient Case-A system."""
    if sys.case != "A" or sys.nonlinear:
        raise NotConstantCoefficient(f"Case {sys.case} systems have no constant first-order form")
    n = sys.n
    M = _constant_sum(sys.mass, n, n, "mass")
    C = _constant_sum(sys.damping, n, n, "damping")
    K = _constant_sum(sys.stiffness, n, n, "stiffness")
    F = _constant_sum(sys.inputs, n, sys.m, "input")
    if np.iscomplexobj(sys.output) and np.any(sys.output.imag != 0):
        raise NotConstantCoefficient("output matrix is complex-valued")
    G = np.real(sys.output).astype(float)
    Z, I = np.zeros((n, n)), np.eye(n)
    E = np.block([[I, Z], [Z, M]])
    A = np.block([[Z, I], [-K, -C]])
    B = np.vstack([np.zeros((n, sys.m)), F])
    D = np.hstack([G, np.zeros((sys.p, n))])
    return FirstOrderRealization(E, A, B, D, M, C, K, F, G)


@dataclass(frozen=True)
class PartitionedGramianFactors:
    """``P = R R^T`` and ``Q = L L^T`` with position/velocity row blocks."""

    R: np.ndarray
    L: np.ndarray
    n: int
    residuals: tuple = (0.0, 0.0)

    @property
    def R_p(self):
        return self.R[: self.n]

    @property
    def R_v(self):
        return self.R[self.n:]

    @property
    def L_p(self):
        return self.L[: self.n]

    @property
    def L_v(self):
        return self.L[self.n:]


def gramian_factors(fo: FirstOrderRealization) -> PartitionedGramianFactors:
    """Solve both Lyapunov equations of the first-order pencil (raises UnstablePencil)."""
    R = numerics.lyapunov_solve(fo.A, fo.E, fo.B, "controllability")
    L = numerics.lyapunov_solve(fo.A, fo.E, fo.D.T, "observability")
    res = (numerics.lyapunov_residual(fo.A, fo.E, R, fo.B, "controllability"),
           numerics.lyapunov_residual(fo.A, fo.E, L, fo.D.T, "observability"))
    return PartitionedGramianFactors(R, L, fo.n, res)


def _effective(f: numerics.SvdFactors, r):
    k = f.rank(SIGMA_TOL)
    if k == 0:
        raise RankDeficient("Gramian factor product is zero")
    return min(r, k)


def _scaled(X, Y, s):
    return X / np.sqrt(s), Y / np.sqrt(s)


def sobt_bases(fo: FirstOrderRealization, fac: PartitionedGramianFactors, variant, r):
    """``(W, V)`` of a projection variant, already scaled by ``Sigma^{-1/2}``."""
    M = fo.M
    Lp, Lv, Rp, Rv = fac.L_p, fac.L_v, fac.R_p, fac.R_v

    def minv_t(X):
        return numerics.solve_linear(M.T, X)

    # (SVD giving Sigma and T, SVD giving U, left source, right source)
    spec = {
        "v": (Lv.T @ M @ Rv, None, Lv, Rv),
        "fv": (Lp.T @ Rp, None, None, Rp),
        "vpm": (Lp.T @ Rv, None, "mLp", Rv),
        "pm": (Lp.T @ Rp, None, "mLp", Rp),
        "pv": (Lv.T @ M @ Rp, None, Lv, Rp),
        "vp": (Lp.T @ Rv, Lv.T @ M @ Rp, Lv, Rv),
        "p": (Lp.T @ Rp, Lv.T @ M @ Rv, Lv, Rp),
    }
    if variant not in spec:
        raise ValueError(f"unknown SOBT variant {variant!r}")
    X, Xu, left, right = spec[variant]
    f = numerics.svd(X)
    fu = numerics.svd(Xu) if Xu is not None else f
    k = _effective(f, r)
    if Xu is not None:
        k = min(k, _effective(fu, r))
    s = f.s[:k]
    V = right @ f.T[:, :k] / np.sqrt(s)
    if left is None:
        W = V
    elif isinstance(left, str):
        W = minv_t(Lp) @ fu.U[:, :k] / np.sqrt(s)
    else:
        W = left @ fu.U[:, :k] / np.sqrt(s)
    return W, V


def _so(sys, fo, fac, r):
    fp = numerics.svd(fac.L_p.T @ fac.R_p)
    fv = numerics.svd(fac.L_v.T @ fo.M @ fac.R_v)
    k = min(_effective(fp, r), _effective(fv, r))
    Wp = fac.L_p @ fp.U[:, :k] / np.sqrt(fp.s[:k])
    Vp = fac.R_p @ fp.T[:, :k] / np.sqrt(fp.s[:k])
    Wv = fac.L_v @ fv.U[:, :k] / np.sqrt(fv.s[:k])
    Vv = fac.R_v @ fv.T[:, :k] / np.sqrt(fv.s[:k])
    S = Wp.T @ Vv
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > COUPLING_COND_MAX:
        raise SingularCoupling(f"coupling matrix is numerically singular (cond {cond:.2e})")
    Sinv = np.linalg.inv(S)
    rom = StructuredSystem(
        mass=[S @ (Wv.T @ fo.M @ Vv) @ Sinv],
        damping=[S @ (Wv.T @ fo.C @ Vv) @ Sinv],
        stiffness=[S @ (Wv.T @ fo.K @ Vp)],
        inputs=[S @ (Wv.T @ fo.F)],
        output=fo.G @ Vp,
        case=sys.case,
        test_frequency=sys.test_frequency,
    )
    return ReducedModel(rom, {"method": "sobt", "variant": "so", "r": k,
                              "coupling_cond": float(cond)})


def sobt(sys: StructuredSystem, factors: PartitionedGramianFactors | None, variant, r,
         fo: FirstOrderRealization | None = None) -> ReducedModel:
    """Balanced-truncation ROM of order at most ``r`` for one variant.

    Singular values below ``1e-12 sigma_1`` are dropped, so the effective
    order (``provenance['r']``) may be smaller than requested.
    """
    if variant not in SOBT_VARIANTS:
        raise ValueError(f"unknown SOBT variant {variant!r}")
    if r < 1:
        raise ValueError("r must be positive")
    fo = fo or first_order_realize(sys)
    factors = factors or gramian_factors(fo)
    if variant == "so":
        return _so(sys, fo, factors, r)
    W, V = sobt_bases(fo, factors, variant, r)
    return project(sys, ProjectionPair(V, W, f"sobt-{variant}"), orthonormalize=False,
                   provenance={"method": "sobt", "variant": variant})


def dominant_onesided(factors: PartitionedGramianFactors, side="controllability", r=1,
                      method="svd") -> ProjectionPair:
    """Orthonormal basis of the dominant position subspace of one Gramian factor, W = V."""
    if side == "controllability":
        X = factors.R_p
    elif side == "observability":
        X = factors.L_p
    else:
        raise ValueError(f"unknown side {side!r}")
    if method == "svd":
        f = numerics.svd(X)
        V, _, _ = numerics.svd_truncate(f, r)
    elif method == "qr":
        qr = numerics.qr_pivoted(X)
        if r < 1 or r > qr.rank:
            raise RankDeficient(f"requested r={r} exceeds numerical rank {qr.rank}")
        V = qr.Q[:, :r]
    else:
        raise ValueError(f"unknown method {method!r}")
    return ProjectionPair(V, V.copy(), f"sobt-dominant-{side}")
