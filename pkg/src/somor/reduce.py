"""Structure-preserving projection ``M -> W^H M V`` applied term by term."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from somor import numerics
from somor.errors import DimensionMismatch
from somor.system import StructuredSystem, eval_transfer

VARIANTS = ("tsimag", "tsreal", "osimaginput", "osrealinput", "osimagoutput", "osrealoutput")


def realify(V, tol=numerics.RANK_TOL):
    """Real orthonormal basis of span([Re V, Im V])."""
    V = np.atleast_2d(np.asarray(V))
    if not np.iscomplexobj(V):
        return numerics.orth(V.astype(float), tol)
    return numerics.orth(np.hstack([V.real, V.imag]), tol)


@dataclass(frozen=True)
class ProjectionPair:
    V: np.ndarray
    W: np.ndarray
    variant: str = "tsimag"

    def __post_init__(self):
        if self.V.shape != self.W.shape:
            raise DimensionMismatch(f"V {self.V.shape} and W {self.W.shape} differ in shape")
        if self.variant not in VARIANTS and not self.variant.startswith("sobt"):
            raise ValueError(f"unknown projection variant {self.variant!r}")

    @property
    def r(self):
        return self.V.shape[1]

    @property
    def is_real(self):
        return not (np.iscomplexobj(self.V) or np.iscomplexobj(self.W))


def make_pair(variant, V=None, W=None, r=None):
    """Build the pair for a projection variant from right/left bases.

    One-sided input variants use only V, output variants only W.  Bases are
    orthonormalized (and realified for the ``real`` variants); two-sided
    pairs are cut to a common size, at most ``r`` if given.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown projection variant {variant!r}")
    real = "real" in variant
    prep = realify if real else numerics.orth

    if variant.startswith("ts"):
        if V is None or W is None:
            raise ValueError(f"{variant} needs both V and W")
        V, W = prep(V), prep(W)
        k = min(V.shape[1], W.shape[1])
    else:
        B = V if variant.endswith("input") else W
        if B is None:
            raise ValueError(f"{variant} needs the {'right' if variant.endswith('input') else 'left'} basis")
        V = W = prep(B)
        k = V.shape[1]
    if r is not None:
        k = min(k, r)
    return ProjectionPair(V[:, :k], W[:, :k], variant)


@dataclass(frozen=True)
class ReducedModel:
    system: StructuredSystem
    provenance: dict = field(default_factory=dict)

    @property
    def r(self):
        return self.system.n

    def transfer(self, s):
        return eval_transfer(self.system, s)


def project(sys: StructuredSystem, pair, orthonormalize=True, provenance=None) -> ReducedModel:
    """Reduced model with every term matrix X replaced by W^H X V.

    Input terms become W^H F, the output G V.  Coefficient functions are
    untouched, so the reduced model keeps the parent's structure.  Bases are
    orthonormalized first unless ``orthonormalize=False`` (balanced
    truncation passes its scaled bases verbatim).
    """
    if isinstance(pair, tuple):
        V, W = pair
        variant = "custom"
    else:
        V, W, variant = pair.V, pair.W, pair.variant
    V = np.atleast_2d(np.asarray(V))
    W = np.atleast_2d(np.asarray(W))
    if V.shape[0] != sys.n or W.shape[0] != sys.n:
        raise DimensionMismatch(f"bases have {V.shape[0]}/{W.shape[0]} rows, system n={sys.n}")
    if orthonormalize:
        V, W = numerics.orth(V), numerics.orth(W)
    if V.shape[1] != W.shape[1]:
        raise DimensionMismatch(f"V has {V.shape[1]} columns, W has {W.shape[1]}")
    Wh = W.conj().T
    rom = sys.map_matrices(lambda X: Wh @ X @ V, lambda X: Wh @ X, lambda X: X @ V)
    prov = {"variant": variant, "r": V.shape[1]}
    if provenance:
        prov.update(provenance)
    return ReducedModel(rom, prov)


def eval_reduced_transfer(rom, s):
    return eval_transfer(getattr(rom, "system", rom), s)
