"""AAA rational fits of scalar frequency functions and their shifted realizations.

A barycentric approximant

    r(s) = sum_j w_j f_j / (s - s_j)  /  sum_j w_j / (s - s_j)

is rewritten as ``r(s) = a (D + s E)^{-1} b`` and, about an expansion point
``s0``, as ``r(s) = a (I - (s - s0) Dt)^{-1} bt`` with

    Dt = -(D + s0 E)^{-1} E,    bt = (D + s0 E)^{-1} b,

so the Taylor coefficients at ``s0`` are ``c_j = a Dt^j bt``.  These feed the
series expansion of a Case-C operator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from somor import numerics
from somor.errors import MissingRealization, SingularOperator, SingularShift
from somor.system import StructuredSystem, operator_taylor

SUPPORT_TOL = 1e-13


@dataclass(frozen=True)
class BarycentricApproximant:
    support: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    residual: float = 0.0
    converged: bool = True

    @property
    def q(self):
        return self.support.size

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        z = s.ravel()
        scale = max(np.max(np.abs(self.support)), 1.0)
        diff = z[:, None] - self.support[None, :]
        hit = np.abs(diff) <= SUPPORT_TOL * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            C = 1.0 / diff
            r = (C @ (self.weights * self.values)) / (C @ self.weights)
        rows, cols = np.nonzero(hit)
        r[rows] = self.values[cols]
        return r.reshape(s.shape) if s.ndim else r[0]

    def matrices(self):
        """``(a, b, D, E)`` of the matrix form ``a (D + s E)^{-1} b``."""
        q = self.q
        a = (self.weights * self.values)[None, :]
        b = np.zeros((q, 1), dtype=complex)
        b[0, 0] = 1.0
        D = np.zeros((q, q), dtype=complex)
        E = np.zeros((q, q))
        D[0, :] = self.weights
        for i in range(1, q):
            D[i, i - 1] = -self.support[i - 1]
            D[i, i] = self.support[i]
            E[i, i - 1] = 1.0
            E[i, i] = -1.0
        return a, b, D, E

    def at(self, s0) -> "MatrixRealization":
        """Shifted matrix realization about ``s0``."""
        return to_matrix_realization(self, s0)

    def poles(self):
        """Poles from the (q+1)-dimensional arrowhead pencil; not filtered."""
        q = self.q
        B = np.eye(q + 1, dtype=complex)
        B[0, 0] = 0
        A = np.zeros((q + 1, q + 1), dtype=complex)
        A[0, 1:] = self.weights
        A[1:, 0] = 1
        A[np.arange(1, q + 1), np.arange(1, q + 1)] = self.support
        ev = sla.eigvals(A, B)
        return ev[np.isfinite(ev)]

    def to_json(self):
        def pairs(x):
            return [[float(v.real), float(v.imag)] for v in np.asarray(x, dtype=complex)]
        return json.dumps({"support": pairs(self.support), "values": pairs(self.values),
                           "weights": pairs(self.weights), "residual": float(self.residual),
                           "converged": bool(self.converged)})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)

        def arr(k):
            return np.array([complex(re, im) for re, im in d[k]])
        return cls(arr("support"), arr("values"), arr("weights"), d["residual"], d["converged"])


def aaa_fit(points, values, tol=1e-12, q_max=60) -> BarycentricApproximant:
    """Greedy AAA fit of samples ``values[i] = phi(points[i])``.

    Stops once the largest residual over non-support samples is at most
    ``tol * max|values|`` or ``q_max`` support points are used.  On reaching
    ``q_max`` without convergence the best approximant seen is returned with
    ``converged=False``.
    """
    Z = np.asarray(points, dtype=complex).ravel()
    F = np.asarray(values, dtype=complex).ravel()
    if Z.size != F.size:
        raise ValueError("points and values differ in length")
    if np.unique(Z).size < 2:
        raise ValueError("AAA needs at least two distinct sample points")
    fmax = np.max(np.abs(F))
    thresh = tol * (fmax if fmax > 0 else 1.0)
    mask = np.ones(Z.size, dtype=bool)
    R = np.full(F.shape, np.mean(F))
    support = []
    best = None
    for _ in range(min(q_max, Z.size - 1)):
        # argmax picks the smallest index among ties
        j = int(np.argmax(np.where(mask, np.abs(F - R), -1.0)))
        support.append(j)
        mask[j] = False
        zj, fj = Z[support], F[support]
        C = 1.0 / (Z[mask, None] - zj[None, :])
        L = F[mask, None] * C - C * fj[None, :]
        _, _, Vh = np.linalg.svd(L, full_matrices=True)
        w = Vh[-1].conj()
        N = C @ (w * fj)
        Dn = C @ w
        R = F.copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            R[mask] = N / Dn
        err = np.max(np.abs(F[mask] - R[mask])) if mask.any() else 0.0
        if not np.isfinite(err):
            err = np.inf
        cand = BarycentricApproximant(zj.copy(), fj.copy(), w, float(err), bool(err <= thresh))
        if best is None or err < best.residual:
            best = cand
        if err <= thresh:
            return cand
    return BarycentricApproximant(best.support, best.values, best.weights, best.residual, False)


@dataclass(frozen=True)
class MatrixRealization:
    """``r(s) = a (I - (s - s0) Dt)^{-1} bt``."""

    a: np.ndarray
    bt: np.ndarray
    Dt: np.ndarray
    s0: complex

    def __call__(self, s):
        q = self.Dt.shape[0]
        x = np.linalg.solve(np.eye(q) - (complex(s) - self.s0) * self.Dt, self.bt)
        return complex((self.a @ x)[0, 0])

    def series(self, order):
        """Taylor coefficients ``c_j = a Dt^j bt`` for ``j = 0..order``."""
        out = np.empty(order + 1, dtype=complex)
        v = self.bt
        for j in range(order + 1):
            out[j] = (self.a @ v)[0, 0]
            v = self.Dt @ v
        return out


def to_matrix_realization(apx: BarycentricApproximant, s0) -> MatrixRealization:
    s0 = complex(s0)
    a, b, D, E = apx.matrices()
    try:
        lu = numerics.factorize(D + s0 * E)
    except SingularOperator as exc:
        raise SingularShift(f"D + s0 E is singular at s0={s0} (pole of the fit)") from exc
    Dt = -numerics.lu_solve(lu, E.astype(complex))
    bt = numerics.lu_solve(lu, b)
    return MatrixRealization(a, bt, Dt, s0)


def series_coefficients(apx: BarycentricApproximant, s0, order):
    return to_matrix_realization(apx, s0).series(order)


def fit_coefficients(sys: StructuredSystem, points, tol=1e-12, q_max=60):
    """AAA fit of every function-valued coefficient of a system, keyed by ``Coefficient.key``."""
    fits = {}
    pts = np.asarray(points, dtype=complex)
    for _, t in sys.all_terms():
        c = t.coeff
        if c.kind == "func" and c.key not in fits:
            unit = type(c)("func", 1.0, 0, c.fid, c.params)
            fits[c.key] = aaa_fit(pts, unit(pts), tol, q_max)
    return fits


def realizations_at(fits, s0):
    return {key: to_matrix_realization(apx, s0) for key, apx in fits.items()}


def case_c_expansion(sys: StructuredSystem, realizations, s0, order=2):
    """Series coefficients ``K_l``, ``F_l``, ``G_l`` (l = 0..order) of a Case-C system.

    K_0 = s0^2 M + s0 C + K + sum_i a_i bt_i C_i,
    K_1 = 2 s0 M + C + sum_i a_i Dt_i bt_i C_i,
    K_2 = M + sum_i a_i Dt_i^2 bt_i C_i, ...

    Every function-valued coefficient (operator or input) needs a realization
    expanded at ``s0``.
    """
    for _, t in sys.all_terms():
        if t.coeff.kind == "func" and t.coeff.key not in realizations:
            raise MissingRealization(f"no realization for {t.coeff.key}")
    K, F = operator_taylor(sys, s0, order, realizations)
    G = [np.asarray(sys.output, dtype=complex)] + [np.zeros_like(sys.output, dtype=complex)
                                                    for _ in range(order)]
    return list(K), list(F), G
