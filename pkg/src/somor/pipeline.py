"""Run configurations, applicability checks and error-curve generation per method."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from somor import aaa, balance, interp, select
from somor.errors import (Exhausted, NotApplicable, NotConstantCoefficient, RankDeficient,
                          SomorError, UnstablePencil)
from somor.io import load_system
from somor.metrics import ErrorCurve, FrequencyGrid, linf_rel_error, sweep
from somor.reduce import VARIANTS, ProjectionPair, ReducedModel, make_pair, project
from somor.system import StructuredSystem, SyntheticModelSpec, generate_synthetic

log = logging.getLogger(__name__)

METHODS = ("equi", "avg", "minrel", "linf", "sobt")
STRATEGIES = ("standard", "sp", "soa")
SOBT_CHOICES = balance.SOBT_VARIANTS + ("dominant",)


@dataclass
class MethodSpec:
    """One row of the method matrix; expands to strategy x variant combinations."""

    method: str
    variants: list
    strategies: list = field(default_factory=lambda: ["standard"])
    shifts: int = 20
    extra_hz: list = field(default_factory=list)
    sp_order: int | None = None
    soa_k: int | None = None
    # linf only: reject blocks that raise the grid error (False gives the plain greedy)
    monotone: bool = True

    def combinations(self):
        strategies = ["none"] if self.method in ("equi", "sobt") else self.strategies
        return [(self.method, st, v) for st in strategies for v in self.variants]


@dataclass
class RunConfig:
    system: dict
    f_min: float
    f_max: float
    points: int
    methods: list
    r: list
    eps: float = 1e-16
    r_max: int | None = None
    seed: int = 0
    output_dir: str = "out"
    coefficients: str = "analytic"
    aaa_points: int = 400
    record_timing: bool = False
    export_roms: bool = False
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = dict(d)
        freq = d.pop("frequency")
        r = d.pop("r")
        if isinstance(r, dict):
            r = list(range(int(r["start"]), int(r["stop"]) + 1, int(r.get("step", 1))))
        score = d.pop("morscore", {})
        methods = [MethodSpec(**m) for m in d.pop("methods")]
        return cls(system=d.pop("system"), f_min=float(freq["f_min"]), f_max=float(freq["f_max"]),
                   points=int(freq["points"]), methods=methods, r=[int(x) for x in r],
                   eps=float(score.get("eps", 1e-16)), r_max=score.get("r_max"),
                   base_dir=str(base_dir), **d)

    @classmethod
    def load(cls, path):
        p = Path(path)
        return cls.from_dict(json.loads(p.read_text()), base_dir=p.parent)

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return d

    @property
    def effective_r_max(self):
        return int(self.r_max) if self.r_max is not None else max(self.r)

    def combinations(self):
        out = []
        for m in self.methods:
            out.extend((m, c) for c in m.combinations())
        return out


def combo_tag(method, strategy, variant):
    return "_".join(x for x in (method, strategy, variant) if x != "none")


# ---------------------------------------------------------------------------
# system loading and applicability


def load_config_system(cfg: RunConfig):
    src = cfg.system
    if "manifest" in src:
        path = Path(src["manifest"])
        if not path.is_absolute():
            path = Path(cfg.base_dir) / path
        sys = load_system(path)
        return sys.system if isinstance(sys, ReducedModel) else sys
    syn = dict(src["synthetic"])
    syn.setdefault("seed", cfg.seed)
    return generate_synthetic(SyntheticModelSpec(**syn))


def sobt_applicability(sys: StructuredSystem):
    """``None`` if SOBT applies, else a short reason code."""
    if sys.case != "A":
        return f"case-{sys.case}"
    if sys.nonlinear:
        return "frequency-dependent-terms"
    if any(not t.coeff.is_constant for t in sys.inputs):
        return "frequency-dependent-input"
    viscous = [t for t in sys.damping if t.coeff.is_constant]
    if not viscous or all(not np.any(t.matrix) or t.coeff.scale == 0 for t in viscous):
        return "zero-damping"
    try:
        fo = balance.first_order_realize(sys)
    except NotConstantCoefficient:
        return "not-constant"
    ev = np.linalg.eigvals(np.linalg.solve(fo.E, fo.A))
    if np.max(ev.real) >= 0:
        return "unstable-pencil"
    return None


def validate(cfg_or_dict, base_dir=".") -> list:
    """Diagnostics (dicts with ``code``, ``reason``, ``where``); empty when the config is runnable."""
    diags = []

    def add(code, reason, where="config"):
        diags.append({"code": code, "reason": reason, "where": where})

    if isinstance(cfg_or_dict, RunConfig):
        cfg = cfg_or_dict
    else:
        try:
            cfg = RunConfig.from_dict(cfg_or_dict, base_dir)
        except (KeyError, TypeError, ValueError) as exc:
            add("InvalidConfig", f"{type(exc).__name__}: {exc}")
            return diags
    if not cfg.f_min < cfg.f_max or cfg.points < 2:
        add("InvalidConfig", "frequency range needs f_min < f_max and at least 2 points")
    if not cfg.r or min(cfg.r) < 1 or sorted(set(cfg.r)) != list(cfg.r):
        add("InvalidConfig", "r schedule must be positive and strictly increasing")
    if not 0 < cfg.eps < 1:
        add("InvalidConfig", "morscore eps must lie in (0, 1)")
    if cfg.coefficients not in ("analytic", "aaa"):
        add("InvalidConfig", f"coefficients must be 'analytic' or 'aaa', got {cfg.coefficients!r}")
    try:
        sys = load_config_system(cfg)
    except FileNotFoundError as exc:
        add("MissingManifest", str(exc), "system")
        sys = None
    except (SomorError, KeyError, TypeError, ValueError) as exc:
        add("InvalidSystem", f"{type(exc).__name__}: {exc}", "system")
        sys = None

    sobt_reason = sobt_applicability(sys) if sys is not None else None
    seen = set()
    for m, (method, strategy, variant) in cfg.combinations():
        where = combo_tag(method, strategy, variant)
        if where in seen:
            add("InvalidConfig", "combination listed twice; its output files would collide", where)
        seen.add(where)
        if method not in METHODS:
            add("UnknownMethod", f"unknown method {method!r}", where)
            continue
        if method == "sobt":
            if variant not in SOBT_CHOICES:
                add("UnknownVariant", f"unknown SOBT variant {variant!r}", where)
            elif sobt_reason is not None:
                add("NotApplicable", sobt_reason, where)
            continue
        if variant not in VARIANTS:
            add("UnknownVariant", f"unknown projection variant {variant!r}", where)
        if method != "equi" and strategy not in STRATEGIES:
            add("UnsupportedSpec", f"unknown presampling strategy {strategy!r}", where)
        if strategy == "soa" and (m.soa_k is None or m.soa_k < 1):
            add("UnsupportedSpec", "soa presampling requires soa_k >= 1", where)
    return diags


# ---------------------------------------------------------------------------
# per-combination error curves


@dataclass
class Context:
    """State shared (read-only) by all combinations of one run."""

    cfg: RunConfig
    sys: StructuredSystem
    grid: FrequencyGrid
    fom: object
    realizations: dict | None = None
    factors: object = None
    first_order: object = None


def make_context(cfg: RunConfig, sys=None) -> Context:
    sys = sys if sys is not None else load_config_system(cfg)
    grid = FrequencyGrid.linspace_hz(cfg.f_min, cfg.f_max, cfg.points)
    fom = sweep(sys, grid)
    rz = None
    if cfg.coefficients == "aaa":
        pts = 2j * math.pi * np.linspace(cfg.f_min, cfg.f_max, cfg.aaa_points)
        rz = aaa.fit_coefficients(sys, pts)
    ctx = Context(cfg, sys, grid, fom, rz)
    if any(m.method == "sobt" for m in cfg.methods) and sobt_applicability(sys) is None:
        ctx.first_order = balance.first_order_realize(sys)
        ctx.factors = balance.gramian_factors(ctx.first_order)
    return ctx


def _sides(variant):
    if variant.startswith("ts"):
        return ("input", "output")
    return ("input",) if variant.endswith("input") else ("output",)


def _error(ctx, rom):
    return linf_rel_error(ctx.fom, sweep(rom, ctx.grid))


def presamples(ctx, m: MethodSpec, strategy, variant):
    cfg = ctx.cfg
    plan = select.equi_shifts(cfg.f_min, cfg.f_max, m.shifts, m.extra_hz)
    out = {}
    for side in _sides(variant):
        pre = interp.presample(ctx.sys, strategy, plan.shifts, side, order=m.sp_order,
                               k=m.soa_k, realizations=ctx.realizations)
        out[side] = pre.realified() if "real" in variant else pre
    return out


def _equi_rom(ctx, m, variant, r):
    cfg = ctx.cfg
    count = r if "real" not in variant else math.ceil(r / 2)
    plan = select.equi_for_order(cfg.f_min, cfg.f_max, count, m.extra_hz)
    V = W = None
    if "input" in _sides(variant):
        V = interp.interp_basis_right(ctx.sys, plan, ctx.realizations)
    if "output" in _sides(variant):
        W = interp.interp_basis_left(ctx.sys, plan, ctx.realizations)
    return project(ctx.sys, make_pair(variant, V, W, r))


def _compressed_rom(ctx, m, pres, variant, r):
    sel = select.compress(m.method, pres.get("input"), pres.get("output"), r)
    return project(ctx.sys, make_pair(variant, sel.V, sel.W, r))


def _greedy(ctx, m, strategy, variant, r_target):
    pres = presamples(ctx, m, strategy, variant)
    shifts = pres[_sides(variant)[0]].shifts

    def keyed(side):
        return {shifts[i]: B for i, B in pres[side].blocks().items()} if side in pres else None
    try:
        return select.greedy_linf(ctx.sys, ctx.fom, keyed("input") or keyed("output"), r_target,
                                  variant, left_blocks=keyed("output"), monotone=m.monotone)
    except Exhausted as exc:
        return exc.result


def _sobt_rom(ctx, variant, r):
    if variant == "dominant":
        pair = balance.dominant_onesided(ctx.factors, "controllability", r)
        return project(ctx.sys, pair, orthonormalize=False)
    return balance.sobt(ctx.sys, ctx.factors, variant, r, ctx.first_order)


def curve_equi(ctx, m, variant):
    rs, es = [], []
    for r in ctx.cfg.r:
        rom = _equi_rom(ctx, m, variant, r)
        if rom.r < r:
            break
        rs.append(r)
        es.append(_error(ctx, rom))
    return ErrorCurve(rs, es), {}


def curve_compressed(ctx, m, strategy, variant):
    pres = presamples(ctx, m, strategy, variant)
    rs, es = [], []
    for r in ctx.cfg.r:
        try:
            rom = _compressed_rom(ctx, m, pres, variant, r)
        except RankDeficient:
            break
        if rom.r < r:
            break
        rs.append(r)
        es.append(_error(ctx, rom))
    return ErrorCurve(rs, es), {}


def curve_linf(ctx, m, strategy, variant):
    sel, curve = _greedy(ctx, m, strategy, variant, max(ctx.cfg.r))
    keep = [i for i, r in enumerate(curve.r) if r <= max(ctx.cfg.r)]
    return ErrorCurve(curve.r[keep], curve.eps[keep]), {"stop_reason": sel.stop_reason,
                                                         "history": sel.history}


def curve_sobt(ctx, variant):
    rs, es = [], []
    for r in ctx.cfg.r:
        try:
            rom = _sobt_rom(ctx, variant, r)
        except RankDeficient:
            break
        if rom.r < r:
            break
        rs.append(r)
        es.append(_error(ctx, rom))
    return ErrorCurve(rs, es), {}


def _check_sobt(ctx):
    reason = sobt_applicability(ctx.sys)
    if reason is not None:
        raise NotApplicable(f"SOBT not applicable: {reason}", reason)
    if ctx.factors is None:
        raise UnstablePencil("Gramian factors unavailable")


def rom_for(ctx: Context, m: MethodSpec, combo, r) -> ReducedModel:
    """Reduced model of one combination at order ``r`` (smaller if the basis runs out)."""
    method, strategy, variant = combo
    if method == "equi":
        return _equi_rom(ctx, m, variant, r)
    if method in ("avg", "minrel"):
        return _compressed_rom(ctx, m, presamples(ctx, m, strategy, variant), variant, r)
    if method == "linf":
        sel, _ = _greedy(ctx, m, strategy, variant, r)
        return project(ctx.sys, ProjectionPair(sel.V, sel.W, variant))
    if method == "sobt":
        _check_sobt(ctx)
        return _sobt_rom(ctx, variant, r)
    raise ValueError(f"unknown method {method!r}")


def run_combination(ctx: Context, m: MethodSpec, combo):
    """Error curve and metadata for one (method, strategy, variant)."""
    method, strategy, variant = combo
    if method == "equi":
        return curve_equi(ctx, m, variant)
    if method in ("avg", "minrel"):
        return curve_compressed(ctx, m, strategy, variant)
    if method == "linf":
        return curve_linf(ctx, m, strategy, variant)
    if method == "sobt":
        _check_sobt(ctx)
        return curve_sobt(ctx, variant)
    raise ValueError(f"unknown method {method!r}")
