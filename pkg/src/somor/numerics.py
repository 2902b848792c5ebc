"""Dense linear algebra used throughout: LU solves, pivoted QR, SVD, Lyapunov."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from somor.errors import RankDeficient, SingularE, SingularOperator, UnstablePencil

RANK_TOL = 1e-12
LYAP_TOL = 1e-8
# reciprocal condition below which an LU factorization is treated as singular
RCOND_MIN = 1e2 * np.finfo(float).eps


def factorize(A):
    """LU factorization with a rank check; returns scipy's ``(lu, piv)``."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"square matrix required, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SingularOperator("operator has non-finite entries")
    with warnings.catch_warnings():
        # singularity is reported below as SingularOperator
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    anorm = np.linalg.norm(A, 1)
    if anorm == 0 or diag.min() == 0:
        raise SingularOperator("operator is exactly singular", condition=np.inf)
    # cheap condition estimate from the LU diagonal
    rcond = diag.min() / diag.max()
    if rcond < RCOND_MIN:
        raise SingularOperator(f"operator is numerically singular (cond ~ {1 / rcond:.2e})",
                               condition=1 / rcond)
    return lu, piv


def lu_solve(lu, B, trans=0):
    """Solve with a factorization from :func:`factorize`; ``trans=2`` is A^H."""
    return sla.lu_solve(lu, B, trans=trans, check_finite=False)


def solve_linear(A, B):
    B = np.asarray(B)
    return lu_solve(factorize(A), B)


@dataclass(frozen=True)
class PivotedQr:
    Q: np.ndarray
    R: np.ndarray
    pivot: np.ndarray
    rank: int


def qr_pivoted(A, tol=RANK_TOL) -> PivotedQr:
    """Economy column-pivoted QR ``A[:, pivot] = Q R``."""
    A = np.atleast_2d(np.asarray(A))
    if A.size == 0:
        return PivotedQr(np.zeros((A.shape[0], 0), A.dtype), np.zeros((0, A.shape[1])),
                         np.arange(A.shape[1]), 0)
    Q, R, piv = sla.qr(A, mode="economic", pivoting=True, check_finite=False)
    d = np.abs(np.diag(R))
    rank = int(np.count_nonzero(d > tol * d[0])) if d.size and d[0] > 0 else 0
    return PivotedQr(Q, R, piv, rank)


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    s: np.ndarray
    T: np.ndarray  # A = U diag(s) T^H

    def rank(self, tol=RANK_TOL):
        if self.s.size == 0 or self.s[0] == 0:
            return 0
        return int(np.count_nonzero(self.s > tol * self.s[0]))


def svd(A) -> SvdFactors:
    U, s, Vh = sla.svd(np.atleast_2d(A), full_matrices=False, check_finite=False,
                       lapack_driver="gesvd")
    return SvdFactors(U, s, Vh.conj().T)


def svd_truncate(f: SvdFactors, r, tol=RANK_TOL):
    """Leading ``r`` singular triplets ``(U1, s1, T1)``."""
    if r < 1 or r > f.rank(tol):
        raise RankDeficient(f"requested r={r} exceeds numerical rank {f.rank(tol)}")
    return f.U[:, :r], f.s[:r], f.T[:, :r]


def orth(A, tol=RANK_TOL, dtol=1e-10):
    """Orthonormal basis of range(A), dropping numerically dependent columns.

    Column order is preserved in the sense that the first ``k`` basis vectors
    span the first independent columns of ``A`` (Gram-Schmidt semantics).
    """
    A = np.atleast_2d(np.asarray(A))
    if A.shape[1] == 0:
        return A.copy()
    scale = np.linalg.norm(A, axis=0).max()
    if scale == 0:
        return A[:, :0].copy()
    Q = np.zeros_like(A, dtype=np.result_type(A, float))
    k = 0
    for j in range(A.shape[1]):
        v = A[:, j].astype(Q.dtype, copy=True)
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        for _ in range(2):
            v -= Q[:, :k] @ (Q[:, :k].conj().T @ v)
        nr = np.linalg.norm(v)
        if nr <= max(dtol * nv, tol * scale):
            continue
        Q[:, k] = v / nr
        k += 1
    return Q[:, :k]


def lyapunov_solve(A, E, Z, side="controllability"):
    """Factor ``R`` (N x N) of the Gramian with ``P = R R^T``.

    controllability:  A P E^T + E P A^T + Z Z^T = 0
    observability:    A^T P E + E^T P A + Z Z^T = 0

    The pencil is reduced to standard form with E^{-1} and solved by the
    Bartels-Stewart method; the factor comes from a symmetric eigen
    decomposition of the (PSD) solution.
    """
    A = np.asarray(A, dtype=float)
    E = np.asarray(E, dtype=float)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] != A.shape[0]:
        Z = Z.T
    if side not in ("controllability", "observability"):
        raise ValueError(f"unknown side {side!r}")
    try:
        luE = factorize(E)
    except SingularOperator as exc:
        raise SingularE("E is singular") from exc
    ev = sla.eigvals(A, E)
    if not np.all(np.isfinite(ev)) or np.max(ev.real) >= 0:
        raise UnstablePencil(f"pencil has eigenvalue with real part {np.max(ev.real):.3e}")
    if side == "controllability":
        At = lu_solve(luE, A)
        Zt = lu_solve(luE, Z)
        P = sla.solve_continuous_lyapunov(At, -Zt @ Zt.T)
    else:
        # (A E^{-1})^T P + P (A E^{-1}) = -(E^{-T} Z)(E^{-T} Z)^T
        AEi = lu_solve(luE, A.T, trans=1).T
        Zt = lu_solve(luE, Z, trans=1)
        P = sla.solve_continuous_lyapunov(AEi.T, -Zt @ Zt.T)
    P = 0.5 * (P + P.T)
    w, U = np.linalg.eigh(P)
    w = np.clip(w, 0.0, None)
    return U * np.sqrt(w)


def lyapunov_residual(A, E, R, Z, side="controllability"):
    """Relative Frobenius residual of the Lyapunov equation for ``P = R R^T``."""
    P = R @ R.T
    ZZ = Z @ Z.T
    if side == "controllability":
        res = A @ P @ E.T + E @ P @ A.T + ZZ
    else:
        res = A.T @ P @ E + E.T @ P @ A + ZZ
    return np.linalg.norm(res) / np.linalg.norm(ZZ)
