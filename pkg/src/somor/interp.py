"""Projection bases from structured interpolation and second-order Krylov spaces.

All bases are built from the Taylor coefficients of ``K(s)^{-1} F(s)`` (right
side) or ``(G K(s)^{-1})^H`` (left side) at an expansion point.  They follow
from differentiating ``K(s) X(s) = F(s)``:

    X_0 = K_0^{-1} F_0,    X_j = K_0^{-1} (F_j - sum_{l=1..j} K_l X_{j-l}),

so one LU factorization per shift serves every derivative order.  The j-th
Taylor coefficient is the j-th derivative divided by j!, so both span the
same directions.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from somor import numerics
from somor.errors import Breakdown, UnsupportedSpec
from somor.system import StructuredSystem, operator_taylor, polynomial_degree

log = logging.getLogger(__name__)

SIDES = ("input", "output")


@dataclass(frozen=True)
class ShiftPlan:
    """Interpolation points (rad/s, complex) with per-shift derivative orders."""

    shifts: tuple
    orders: tuple = ()
    side: str = "input"

    def __post_init__(self):
        shifts = tuple(complex(s) for s in np.atleast_1d(self.shifts))
        orders = tuple(int(o) for o in self.orders) if len(self.orders) else (0,) * len(shifts)
        if len(orders) != len(shifts):
            raise ValueError("one derivative order per shift required")
        if any(o < 0 for o in orders):
            raise ValueError("derivative orders must be non-negative")
        if self.side not in ("input", "output", "both"):
            raise ValueError(f"unknown side {self.side!r}")
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "orders", orders)

    @classmethod
    def from_hz(cls, freqs, orders=(), side="input"):
        """The single place where Hz become imaginary-axis shifts ``2 pi f i``."""
        return cls(tuple(2j * math.pi * float(f) for f in np.atleast_1d(freqs)), orders, side)

    @property
    def hz(self):
        return np.array([s.imag / (2 * math.pi) for s in self.shifts])

    def to_dict(self):
        return {"frequencies_hz": [float(f) for f in self.hz], "orders": list(self.orders),
                "side": self.side}

    @classmethod
    def from_dict(cls, d):
        return cls.from_hz(d["frequencies_hz"], d.get("orders", ()), d.get("side", "input"))


@dataclass(frozen=True)
class PresampleBasis:
    """Oversized candidate basis with per-column provenance.

    ``provenance[i] = (shift_index, derivative_order, io_column)`` for column i.
    """

    columns: np.ndarray
    provenance: tuple
    strategy: str
    side: str
    shifts: tuple

    def __post_init__(self):
        if self.columns.shape[1] != len(self.provenance):
            raise ValueError("provenance must cover every column exactly once")

    @property
    def q(self):
        return self.columns.shape[1]

    def blocks(self):
        """Columns grouped by shift index, in shift order."""
        out = {}
        for col, (si, _, _) in enumerate(self.provenance):
            out.setdefault(si, []).append(col)
        return {si: self.columns[:, cols] for si, cols in sorted(out.items())}

    def realified(self):
        """Same candidates split into real and imaginary parts (2q columns)."""
        cols = np.hstack([self.columns.real, self.columns.imag])
        prov = tuple(self.provenance) + tuple(self.provenance)
        # interleave so that blocks keep both parts of a shift together
        order = np.argsort([p[0] for p in prov], kind="stable")
        return PresampleBasis(cols[:, order], tuple(prov[i] for i in order), self.strategy,
                              self.side, self.shifts)


def taylor_solutions(sys: StructuredSystem, s0, order, side="input", realizations=None, lu=None):
    """Taylor coefficients ``X_0..X_order`` of the right or left interpolation factor."""
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    K, F = operator_taylor(sys, s0, order, realizations)
    if lu is None:
        lu = numerics.factorize(K[0])
    out = []
    if side == "input":
        rhs_terms = F
        for j in range(order + 1):
            rhs = rhs_terms[j].copy()
            for l in range(1, j + 1):
                rhs -= K[l] @ out[j - l]
            out.append(numerics.lu_solve(lu, rhs))
    else:
        G = np.asarray(sys.output).conj().T
        for j in range(order + 1):
            rhs = G.astype(complex) if j == 0 else np.zeros_like(G, dtype=complex)
            for l in range(1, j + 1):
                rhs -= K[l].conj().T @ out[j - l]
            out.append(numerics.lu_solve(lu, rhs, trans=2))
    return out


def moments(sys: StructuredSystem, s0, order, realizations=None):
    """Taylor coefficients ``H_j`` (j = 0..order) of the transfer function at ``s0``."""
    sys = getattr(sys, "system", sys)
    return np.array([sys.output @ X
                     for X in taylor_solutions(sys, s0, order, "input", realizations)])


def _interp_columns(sys, plan, side, realizations):
    blocks, prov = [], []
    for si, (s, order) in enumerate(zip(plan.shifts, plan.orders)):
        xs = taylor_solutions(sys, s, order, side, realizations)
        for j, X in enumerate(xs):
            blocks.append(X)
            prov.extend((si, j, c) for c in range(X.shape[1]))
    return np.hstack(blocks), prov


def interp_basis_right(sys: StructuredSystem, plan: ShiftPlan, realizations=None):
    """Orthonormal V containing d^j/ds^j (K^{-1}F)(sigma) for j <= order at every shift."""
    cols, _ = _interp_columns(sys, plan, "input", realizations)
    return numerics.orth(cols)


def interp_basis_left(sys: StructuredSystem, plan: ShiftPlan, realizations=None):
    """Orthonormal W containing the derivatives of (G K^{-1})^H at every shift."""
    cols, _ = _interp_columns(sys, plan, "output", realizations)
    return numerics.orth(cols)


def soar_basis(sys: StructuredSystem, s0, r, side="input", realizations=None, tol=1e-10):
    """Orthonormal basis of the second-order Krylov space at ``s0``.

    With the operator expanded as K_0 + d K_1 + d^2 K_2 (exact for plain
    second-order systems, a quadratic truncation otherwise) the space is
    S_r(A, B; v0) with A = -K_0^{-1} K_1, B = -K_0^{-1} K_2, v0 = K_0^{-1} F(s0).
    Multiple inputs are handled column by column.
    """
    if r < 1:
        raise ValueError("r must be positive")
    K, F = operator_taylor(sys, s0, 2, realizations)
    lu = numerics.factorize(K[0])
    if side == "input":
        K1, K2, U, trans = K[1], K[2], F[0], 0
    elif side == "output":
        K1, K2, U, trans = K[1].conj().T, K[2].conj().T, np.asarray(sys.output).conj().T, 2
    else:
        raise ValueError(f"side must be one of {SIDES}")
    U = numerics.lu_solve(lu, U.astype(complex), trans=trans)

    def apply(q, p):
        return -numerics.lu_solve(lu, K1 @ q + K2 @ p, trans=trans)

    bases = [_soar(apply, U[:, c], r, tol) for c in range(U.shape[1])]
    Q = numerics.orth(np.hstack(bases)) if len(bases) > 1 else bases[0]
    if Q.shape[1] < r * U.shape[1]:
        warnings.warn(f"SOAR deflation: basis has {Q.shape[1]} of {r * U.shape[1]} columns",
                      RuntimeWarning, stacklevel=2)
    return Q


def _soar(apply, u, r, tol):
    """Second-order Arnoldi with modified Gram-Schmidt and deflation.

    ``apply(q, p)`` returns ``A q + B p``.  Returns the nonzero q-vectors.
    """
    nu = np.linalg.norm(u)
    if nu == 0:
        raise Breakdown("starting vector is zero")
    n = u.size
    Q = np.zeros((n, r), dtype=complex)
    P = np.zeros((n, r), dtype=complex)
    Q[:, 0] = u / nu
    live = [0]
    deflated_p = np.zeros((n, 0), dtype=complex)
    for j in range(r - 1):
        w = apply(Q[:, j], P[:, j])
        s = Q[:, j].copy()
        w_norm = np.linalg.norm(w)
        for _ in range(2):
            for i in live:
                t = np.vdot(Q[:, i], w)
                w -= t * Q[:, i]
                s -= t * P[:, i]
        t_next = np.linalg.norm(w)
        if t_next <= tol * w_norm or w_norm == 0:
            # deflation: keep the recurrence alive through the auxiliary vector
            if deflated_p.shape[1]:
                res = s - deflated_p @ (deflated_p.conj().T @ s)
            else:
                res = s
            if np.linalg.norm(res) <= tol * max(np.linalg.norm(s), 1e-300):
                log.warning("SOAR breakdown at step %d", j + 1)
                break
            deflated_p = np.hstack([deflated_p, (res / np.linalg.norm(res))[:, None]])
            P[:, j + 1] = s
            log.warning("SOAR deflation at step %d", j + 1)
        else:
            Q[:, j + 1] = w / t_next
            P[:, j + 1] = s / t_next
            live.append(j + 1)
    return Q[:, live]


def sp_order(sys: StructuredSystem, shifts, tol=1e-10, max_order=10, realizations=None):
    """Derivative order for ``sp`` presampling.

    Polynomial systems use their degree in ``s`` (2 for second-order systems):
    every higher derivative of the operator and input vanishes.  Otherwise the
    smallest order l >= 2 whose next Taylor term is negligible over half the
    shift spacing, ``||K_{l+1}|| rho^{l+1} <= tol ||K_0||`` at every shift.
    """
    deg = polynomial_degree(sys)
    if deg is not None:
        return max(deg, 0)
    shifts = np.sort_complex(np.asarray(shifts, dtype=complex))
    if shifts.size > 1:
        rho = 0.5 * np.max(np.abs(np.diff(shifts)))
    else:
        rho = 0.1 * max(abs(shifts[0]), 1.0)
    need = 2
    for s in shifts:
        K, F = operator_taylor(sys, s, max_order + 1, realizations)
        k0 = max(np.linalg.norm(K[0]), 1e-300)
        f0 = max(np.linalg.norm(F[0]), 1e-300)
        ell = max_order
        for l in range(2, max_order + 1):
            nk = np.linalg.norm(K[l + 1]) * rho ** (l + 1) / k0
            nf = np.linalg.norm(F[l + 1]) * rho ** (l + 1) / f0
            if nk <= tol and nf <= tol:
                ell = l
                break
        need = max(need, ell)
    return need


def presample(sys: StructuredSystem, strategy, shifts, side="input", order=None, k=None,
              realizations=None) -> PresampleBasis:
    """Candidate basis for compression-based methods.

    strategy ``standard``: one solve per shift (m or p columns each);
    ``sp``: Taylor solutions up to ``order`` (default :func:`sp_order`);
    ``soa``: second-order Krylov space of local order ``k`` per shift.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    shifts = tuple(complex(s) for s in shifts)
    blocks, prov = [], []
    if strategy in ("standard", "sp"):
        if strategy == "standard":
            ell = 0
        else:
            ell = sp_order(sys, shifts, realizations=realizations) if order is None else order
        for si, s in enumerate(shifts):
            for j, X in enumerate(taylor_solutions(sys, s, ell, side, realizations)):
                for c in range(X.shape[1]):
                    blocks.append(X[:, c])
                    prov.append((si, j, c))
    elif strategy == "soa":
        if k is None or k < 1:
            raise UnsupportedSpec("soa presampling requires a local order k >= 1")
        for si, s in enumerate(shifts):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                Q = soar_basis(sys, s, k, side, realizations)
            for c in range(Q.shape[1]):
                blocks.append(Q[:, c])
                prov.append((si, c, 0))
    else:
        raise UnsupportedSpec(f"unknown presampling strategy {strategy!r}")
    cols = np.column_stack(blocks)
    norms = np.linalg.norm(cols, axis=0)
    norms[norms == 0] = 1.0
    return PresampleBasis(cols / norms, tuple(prov), strategy, side, shifts)
