"""Frequency-affine second-order systems.

A system is stored as lists of ``(coefficient, matrix)`` terms for the mass,
damping, stiffness and input operators plus a constant output matrix.  The
dynamic operator at a complex frequency ``s`` is

    K(s) = s^2 sum_k g_k(s) M_k + s sum_k h_k(s) C_k + sum_k e_k(s) K_k
           + sum_i phi_i(s) C_i

and the transfer function is ``H(s) = G K(s)^{-1} F(s)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from somor import numerics
from somor.errors import DimensionMismatch, PoleAtFrequency, UnsupportedSpec

# Power of s multiplying each operator slot.
SLOT_POWER = {"mass": 2, "damping": 1, "stiffness": 0, "nonlinear": 0, "inputs": 0}
POLE_TOL = 1e-14


# ---------------------------------------------------------------------------
# coefficient functions


@dataclass(frozen=True)
class NamedFunction:
    """A scalar frequency function registered under an id.

    ``taylor(s0, order, **params)`` must return the Taylor coefficients
    ``c_0..c_order`` of the function at ``s0``; it may be ``None`` for
    sample-only functions, which then need an AAA realization for any
    derivative-based method.
    """

    value: Callable
    taylor: Callable | None = None
    poles: Callable = lambda **params: ()


_FUNCTIONS: dict[str, NamedFunction] = {}


def register_function(fid, value, taylor=None, poles=None):
    if poles is None:
        fn = NamedFunction(value, taylor)
    else:
        fn = NamedFunction(value, taylor, poles if callable(poles) else (lambda **p: tuple(poles)))
    _FUNCTIONS[fid] = fn
    return fn


def get_function(fid) -> NamedFunction:
    try:
        return _FUNCTIONS[fid]
    except KeyError:
        raise UnsupportedSpec(f"unknown coefficient function {fid!r}") from None


def _binom(k, j):
    """Generalized binomial coefficient for real ``k``."""
    out = 1.0
    for i in range(j):
        out *= (k - i) / (i + 1)
    return out


def _sqrt1p_taylor(s0, order, a):
    base = np.sqrt(1 + s0 / a)
    return np.array([base * _binom(0.5, j) / (a + s0) ** j for j in range(order + 1)],
                    dtype=complex)


def _relax_taylor(s0, order, b):
    d = s0 + b
    out = np.empty(order + 1, dtype=complex)
    out[0] = s0 / d
    for j in range(1, order + 1):
        out[j] = -b * (-1) ** j / d ** (j + 1)
    return out


register_function("sqrt1p", lambda s, a: np.sqrt(1 + s / a), _sqrt1p_taylor,
                  lambda a: (-a,))
register_function("relax", lambda s, b: s / (s + b), _relax_taylor, lambda b: (-b,))


def _monomial_taylor(s0, order, power):
    """Taylor coefficients of ``s**power`` at ``s0`` (any integer power)."""
    s0 = complex(s0)
    out = np.zeros(order + 1, dtype=complex)
    for j in range(order + 1):
        if power >= 0 and j > power:
            break
        out[j] = _binom(power, j) * s0 ** (power - j)
    return out


@dataclass(frozen=True)
class Coefficient:
    """Scalar coefficient ``g(s)`` of one affine term.

    ``kind="monomial"`` is ``scale * s**power`` (``power`` may be negative;
    hysteretic damping is ``power=-1, scale=1j*eta``).  ``kind="func"`` is
    ``scale * f(s; params)`` for a registered function id.
    """

    kind: str = "monomial"
    scale: complex = 1.0
    power: int = 0
    fid: str | None = None
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("monomial", "func"):
            raise UnsupportedSpec(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "func":
            get_function(self.fid)

    # constructors -----------------------------------------------------
    @classmethod
    def const(cls, value=1.0):
        return cls("monomial", value, 0)

    @classmethod
    def s(cls, power=1, scale=1.0):
        return cls("monomial", scale, power)

    @classmethod
    def hysteretic(cls, eta):
        return cls("monomial", 1j * eta, -1)

    @classmethod
    def function(cls, fid, scale=1.0, **params):
        return cls("func", scale, 0, fid, tuple(sorted(params.items())))

    # ------------------------------------------------------------------
    @property
    def tag(self):
        if self.kind == "func":
            inner = ",".join(f"{k}={v!r}" for k, v in self.params)
            return f"{self.fid}({inner})"
        return {0: "const", 1: "s", 2: "s2", -1: "inv_s"}.get(self.power, f"s^{self.power}")

    @property
    def key(self):
        """Identity of the underlying function, independent of ``scale``."""
        return self.tag

    @property
    def is_constant(self):
        return self.kind == "monomial" and self.power == 0

    def poles(self):
        if self.kind == "func":
            return tuple(complex(p) for p in get_function(self.fid).poles(**dict(self.params)))
        return (0j,) if self.power < 0 else ()

    def __call__(self, s):
        if self.kind == "func":
            return self.scale * get_function(self.fid).value(s, **dict(self.params))
        return self.scale * s ** self.power

    def taylor(self, s0, order, shift_power=0):
        """Taylor coefficients of ``s**shift_power * g(s)`` at ``s0``."""
        if self.kind == "monomial":
            return self.scale * _monomial_taylor(s0, order, self.power + shift_power)
        fn = get_function(self.fid)
        if fn.taylor is None:
            raise UnsupportedSpec(f"function {self.fid!r} has no analytic Taylor expansion")
        g = np.asarray(fn.taylor(s0, order, **dict(self.params)), dtype=complex)
        return self.scale * np.convolve(g, _monomial_taylor(s0, order, shift_power))[: order + 1]

    def to_dict(self):
        out = {"kind": self.kind, "scale": [complex(self.scale).real, complex(self.scale).imag]}
        if self.kind == "monomial":
            out["power"] = self.power
        else:
            out["fid"] = self.fid
            out["params"] = {k: v for k, v in self.params}
        return out

    @classmethod
    def from_dict(cls, d):
        scale = complex(*d.get("scale", [1.0, 0.0]))
        if d["kind"] == "monomial":
            return cls("monomial", scale, int(d.get("power", 0)))
        return cls.function(d["fid"], scale, **d.get("params", {}))


# ---------------------------------------------------------------------------
# system


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype if dtype is not None else np.result_type(a, float), copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AffineTerm:
    coeff: Coefficient
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(np.atleast_2d(self.matrix)))


def _terms(items):
    out = []
    for t in items:
        if isinstance(t, AffineTerm):
            out.append(t)
        elif isinstance(t, tuple) and len(t) == 2 and isinstance(t[0], Coefficient):
            out.append(AffineTerm(*t))
        else:
            out.append(AffineTerm(Coefficient.const(), np.asarray(t)))
    return tuple(out)


@dataclass(frozen=True)
class StructuredSystem:
    """Frequency-affine second-order system ``G (s^2 M + s C + K + ...)^{-1} F``.

    Term lists accept :class:`AffineTerm` objects, bare matrices (constant
    coefficient) or ``(coefficient, matrix)`` pairs.
    """

    mass: tuple
    damping: tuple
    stiffness: tuple
    inputs: tuple
    output: np.ndarray
    nonlinear: tuple = ()
    case: str = "A"
    test_frequency: complex | None = None

    def __post_init__(self):
        for name in ("mass", "damping", "stiffness", "inputs", "nonlinear"):
            object.__setattr__(self, name, _terms(getattr(self, name)))
        object.__setattr__(self, "output", _frozen(np.atleast_2d(self.output)))
        if self.case not in ("A", "B", "C"):
            raise UnsupportedSpec(f"unknown case tag {self.case!r}")
        if not self.stiffness and not self.mass and not self.damping:
            raise DimensionMismatch("system needs at least one operator term")
        if not self.inputs:
            raise DimensionMismatch("system needs at least one input term")
        n = self.n
        for name in ("mass", "damping", "stiffness", "nonlinear"):
            for t in getattr(self, name):
                if t.matrix.shape != (n, n):
                    raise DimensionMismatch(f"{name} term has shape {t.matrix.shape}, expected {(n, n)}")
        m = self.inputs[0].matrix.shape[1]
        for t in self.inputs:
            if t.matrix.shape != (n, m):
                raise DimensionMismatch(f"input term has shape {t.matrix.shape}, expected {(n, m)}")
        if self.output.shape[1] != n:
            raise DimensionMismatch(f"output matrix has shape {self.output.shape}, expected (p, {n})")

    # ------------------------------------------------------------------
    @property
    def n(self):
        for name in ("stiffness", "mass", "damping"):
            terms = getattr(self, name)
            if terms:
                return terms[0].matrix.shape[0]
        raise DimensionMismatch("empty system")

    @property
    def m(self):
        return self.inputs[0].matrix.shape[1]

    @property
    def p(self):
        return self.output.shape[0]

    def slots(self):
        """Yield ``(slot_name, power_of_s, term)`` for every operator term."""
        for name in ("mass", "damping", "stiffness", "nonlinear"):
            for t in getattr(self, name):
                yield name, SLOT_POWER[name], t

    def all_terms(self):
        for name, _, t in self.slots():
            yield name, t
        for t in self.inputs:
            yield "inputs", t

    def poles(self):
        out = []
        for _, t in self.all_terms():
            out.extend(t.coeff.poles())
        return tuple(dict.fromkeys(out))

    @property
    def is_real(self):
        return all(np.isrealobj(t.matrix) or not np.any(t.matrix.imag)
                   for _, t in self.all_terms()) and not np.any(np.imag(self.output))

    @property
    def has_constant_coefficients(self):
        """True for plain ``s^2 M + s C + K`` with constant real-scaled terms and input."""
        if self.nonlinear:
            return False
        return all(t.coeff.is_constant for _, t in self.all_terms())

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def map_matrices(self, op, inp, out):
        """New system with every operator/input/output matrix transformed."""
        def tm(terms, f):
            return tuple(AffineTerm(t.coeff, f(t.matrix)) for t in terms)
        return StructuredSystem(
            mass=tm(self.mass, op), damping=tm(self.damping, op),
            stiffness=tm(self.stiffness, op), inputs=tm(self.inputs, inp),
            output=out(self.output), nonlinear=tm(self.nonlinear, op),
            case=self.case, test_frequency=self.test_frequency)

    # ------------------------------------------------------------------
    def operator(self, s):
        return assemble_operator(self, s)

    def input_matrix(self, s):
        return assemble_input(self, s)

    def transfer(self, s):
        return eval_transfer(self, s)


def _check_pole(sys, s):
    for pole in sys.poles():
        if abs(s - pole) <= POLE_TOL * max(1.0, abs(pole)):
            raise PoleAtFrequency(f"s={s} hits a declared coefficient pole at {pole}")


def assemble_operator(sys: StructuredSystem, s) -> np.ndarray:
    s = complex(s)
    _check_pole(sys, s)
    out = np.zeros((sys.n, sys.n), dtype=complex)
    for _, power, t in sys.slots():
        out += (s ** power * t.coeff(s)) * t.matrix
    return out


def assemble_input(sys: StructuredSystem, s) -> np.ndarray:
    s = complex(s)
    _check_pole(sys, s)
    out = np.zeros((sys.n, sys.m), dtype=complex)
    for t in sys.inputs:
        out += t.coeff(s) * t.matrix
    return out


def eval_transfer(sys: StructuredSystem, s) -> np.ndarray:
    """``G K(s)^{-1} F(s)`` via one LU factorization, as a p x m array."""
    sys = getattr(sys, "system", sys)
    lu = numerics.factorize(assemble_operator(sys, s))
    return sys.output @ numerics.lu_solve(lu, assemble_input(sys, s))


def operator_taylor(sys: StructuredSystem, s0, order, realizations: Mapping | None = None):
    """Taylor coefficients of the operator and input at ``s0``.

    Returns ``(K, F)`` with ``K[l]`` (n x n) and ``F[l]`` (n x m) such that
    ``K(s0 + d) = sum_l d^l K[l]``.  Function coefficients listed in
    ``realizations`` (keyed by ``Coefficient.key``) are expanded from their
    rational realization instead of analytically.  A realization either is
    already expanded at ``s0`` (``.s0`` and ``.series``) or provides
    ``.at(s0)`` returning such an object.
    """
    s0 = complex(s0)
    _check_pole(sys, s0)
    n, m = sys.n, sys.m
    K = np.zeros((order + 1, n, n), dtype=complex)
    F = np.zeros((order + 1, n, m), dtype=complex)

    def coeffs(c, power):
        if c.kind == "func" and realizations is not None and c.key in realizations:
            rz = realizations[c.key]
            if hasattr(rz, "at"):
                rz = rz.at(s0)
            if abs(complex(rz.s0) - s0) > 1e-12 * max(1.0, abs(s0)):
                raise ValueError(f"realization for {c.key} expanded at {rz.s0}, need {s0}")
            g = c.scale * np.asarray(rz.series(order), dtype=complex)
            return np.convolve(g, _monomial_taylor(s0, order, power))[: order + 1]
        return c.taylor(s0, order, shift_power=power)

    for _, power, t in sys.slots():
        c = coeffs(t.coeff, power)
        for l in np.flatnonzero(c):
            K[l] += c[l] * t.matrix
    for t in sys.inputs:
        c = coeffs(t.coeff, 0)
        for l in np.flatnonzero(c):
            F[l] += c[l] * t.matrix
    return K, F


def polynomial_degree(sys: StructuredSystem):
    """Highest power of ``s`` in operator and input, or None if non-polynomial."""
    deg = 0
    for name, t in sys.all_terms():
        c = t.coeff
        if c.kind != "monomial":
            return None
        total = c.power + SLOT_POWER[name]
        if total < 0:
            return None
        deg = max(deg, total)
    return deg


# ---------------------------------------------------------------------------
# synthetic benchmark generators


@dataclass(frozen=True)
class SyntheticModelSpec:
    """Desk-scale stand-in for the benchmark families.

    kind: ``chainA-rayleigh``, ``chainA-hysteretic``, ``cavityB`` or ``chainC``.
    params override the defaults in :data:`SYNTHETIC_DEFAULTS`.
    """

    kind: str
    n: int
    seed: int = 0
    params: Mapping = field(default_factory=dict)
    input_node: int | None = None
    output_node: int | None = None


SYNTHETIC_DEFAULTS = {
    "chainA-rayleigh": dict(alpha=0.01, beta=1e-4, f_fund=10.0, f_tva=48.0,
                            tva_mass_ratio=0.1, n_tva=None, spread=0.2),
    "chainA-hysteretic": dict(eta=0.001, f_fund=10.0, f_tva=48.0,
                              tva_mass_ratio=0.1, n_tva=None, spread=0.2),
    "cavityB": dict(c=343.0, length=1.0, admittance=0.3, rho=1.21, spread=0.1),
    "chainC": dict(alpha=0.01, beta=1e-4, f_fund=10.0, f_tva=48.0, tva_mass_ratio=0.1,
                   n_tva=None, spread=0.2, k=2, layer=0.25, strength=0.3,
                   a=2 * math.pi * 400.0, b=2 * math.pi * 150.0, f_ref=100.0),
}


def _chain_spring(f_fund, n_main):
    # uniform unit-mass fixed-fixed chain with fundamental frequency f_fund
    return (math.pi * f_fund / math.sin(math.pi / (2 * (n_main + 1)))) ** 2


def _chain(n, rng, f_fund, f_tva, tva_mass_ratio, n_tva, spread):
    """Fixed-fixed spring-mass chain with tuned absorbers attached.

    Returns (M, K, n_main, attach) where the last ``n - n_main`` dofs are
    absorber masses attached at the main-chain nodes listed in ``attach``.
    """
    if n_tva is None:
        n_tva = max(1, n // 20)
    n_tva = int(min(n_tva, n // 2))
    n_main = n - n_tva
    k0 = _chain_spring(f_fund, n_main)
    masses = 1.0 + spread * rng.uniform(-1, 1, n_main)
    springs = k0 * (1.0 + spread * rng.uniform(-1, 1, n_main + 1))
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    M[np.arange(n_main), np.arange(n_main)] = masses
    for i in range(n_main + 1):
        a, b = i - 1, i
        if a >= 0:
            K[a, a] += springs[i]
        if b < n_main:
            K[b, b] += springs[i]
        if a >= 0 and b < n_main:
            K[a, b] -= springs[i]
            K[b, a] -= springs[i]
    attach = np.linspace(0, n_main - 1, n_tva + 2)[1:-1].round().astype(int) if n_main > 1 \
        else np.zeros(n_tva, dtype=int)
    mt = tva_mass_ratio * masses.sum() / max(n_tva, 1)
    for j, node in enumerate(attach):
        d = n_main + j
        kt = mt * (2 * math.pi * f_tva) ** 2
        M[d, d] = mt
        K[d, d] += kt
        K[node, node] += kt
        K[node, d] -= kt
        K[d, node] -= kt
    return M, K, n_main, attach


def _unit(n, idx):
    e = np.zeros((n, 1))
    e[idx, 0] = 1.0
    return e


def generate_synthetic(spec: SyntheticModelSpec) -> StructuredSystem:
    if spec.kind not in SYNTHETIC_DEFAULTS:
        raise UnsupportedSpec(f"unknown synthetic kind {spec.kind!r}")
    if spec.n < 2:
        raise UnsupportedSpec("synthetic systems need n >= 2")
    unknown = set(spec.params) - set(SYNTHETIC_DEFAULTS[spec.kind])
    if unknown:
        raise UnsupportedSpec(f"unknown parameters for {spec.kind}: {sorted(unknown)}")
    prm = {**SYNTHETIC_DEFAULTS[spec.kind], **spec.params}
    rng = np.random.default_rng(spec.seed)
    n = spec.n

    if spec.kind == "cavityB":
        return _cavity(spec, prm, rng)

    M, K, n_main, _ = _chain(n, rng, prm["f_fund"], prm["f_tva"], prm["tva_mass_ratio"],
                             prm["n_tva"], prm["spread"])
    inp = 0 if spec.input_node is None else spec.input_node
    out = (n_main - 1) // 3 if spec.output_node is None else spec.output_node
    G = _unit(n, out).T
    s_test = 2j * math.pi * prm["f_tva"]

    if spec.kind == "chainA-hysteretic":
        return StructuredSystem(
            mass=[M], damping=[(Coefficient.hysteretic(prm["eta"]), K)], stiffness=[K],
            inputs=[_unit(n, inp)], output=G, case="A", test_frequency=s_test)

    C = prm["alpha"] * M + prm["beta"] * K
    if spec.kind == "chainA-rayleigh":
        return StructuredSystem(mass=[M], damping=[C], stiffness=[K], inputs=[_unit(n, inp)],
                                output=G, case="A", test_frequency=s_test)

    # chainC: frequency-dependent springs on a layer at the end of the main chain
    k = int(prm["k"])
    first = max(0, n_main - max(2, int(round(prm["layer"] * n_main))))
    layer = np.arange(first, n_main)
    k0 = _chain_spring(prm["f_fund"], n_main)
    nonlinear = []
    for i in range(k):
        w = prm["strength"] * k0 * (1.0 + 0.5 * rng.uniform(-1, 1, layer.size + 1))
        Ci = np.zeros((n, n))
        for j in range(layer.size + 1):
            a, b = j - 1, j
            if a >= 0:
                Ci[layer[a], layer[a]] += w[j]
            if b < layer.size:
                Ci[layer[b], layer[b]] += w[j]
            if a >= 0 and b < layer.size:
                Ci[layer[a], layer[b]] -= w[j]
                Ci[layer[b], layer[a]] -= w[j]
        if i % 2 == 0:
            coeff = Coefficient.function("sqrt1p", a=float(prm["a"] * (1 + i)))
        else:
            coeff = Coefficient.function("relax", b=float(prm["b"] * (1 + i)))
        nonlinear.append(AffineTerm(coeff, Ci))
    src = Coefficient.s(1, 1.0 / (2 * math.pi * prm["f_ref"]))
    return StructuredSystem(mass=[M], damping=[C], stiffness=[K], inputs=[(src, _unit(n, inp))],
                            output=G, nonlinear=nonlinear, case="C", test_frequency=s_test)


def _cavity(spec, prm, rng):
    """1D acoustic duct: linear finite elements, impedance end, velocity source."""
    n = spec.n
    h = prm["length"] / (n - 1) * (1.0 + prm["spread"] * rng.uniform(-1, 1, n - 1))
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    for e in range(n - 1):
        idx = np.ix_([e, e + 1], [e, e + 1])
        M[idx] += h[e] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        K[idx] += 1.0 / h[e] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    C = np.zeros((n, n))
    c = prm["c"]
    C[n - 1, n - 1] = prm["admittance"] / c
    inp = 0 if spec.input_node is None else spec.input_node
    out = (2 * n) // 3 if spec.output_node is None else spec.output_node
    source = Coefficient.s(1, prm["rho"])
    return StructuredSystem(
        mass=[(Coefficient.const(1.0 / c ** 2), M)], damping=[C], stiffness=[K],
        inputs=[(source, _unit(n, inp))], output=_unit(n, out).T, case="B",
        test_frequency=2j * math.pi * 0.3 * c / prm["length"])
