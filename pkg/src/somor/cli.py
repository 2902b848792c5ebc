"""Command-line front end: ``somor run``, ``somor validate``, ``somor sweep``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

import somor
from somor.errors import SomorError
from somor.io import load_system, save_system
from somor.metrics import ErrorCurve, FrequencyGrid, morscore, sweep
from somor.pipeline import RunConfig, combo_tag, make_context, rom_for, run_combination, validate
from somor.reduce import ReducedModel

log = logging.getLogger("somor")


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _one(ctx, cfg, m, combo):
    tag = combo_tag(*combo)
    t0 = time.perf_counter()
    try:
        curve, meta = run_combination(ctx, m, combo)
        seconds = time.perf_counter() - t0
        if curve.r.size == 0:
            return {"tag": tag, "combo": combo, "status": "failed", "reason": "EmptyCurve",
                    "seconds": seconds}
        score = morscore(curve, cfg.eps, cfg.effective_r_max)
        return {"tag": tag, "combo": combo, "status": "ok", "curve": curve, "score": score.score,
                "seconds": seconds, "meta": meta}
    except SomorError as exc:
        reason = getattr(exc, "reason", None) or exc.code
        return {"tag": tag, "combo": combo, "status": "skipped" if exc.code == "NotApplicable"
                else "failed", "reason": reason, "message": str(exc),
                "seconds": time.perf_counter() - t0}


def run(cfg: RunConfig, out_dir=None, jobs=1):
    """Execute every combination; returns the summary dict."""
    out = Path(out_dir or cfg.output_dir)
    t_start = time.perf_counter()
    ctx = make_context(cfg)
    combos = cfg.combinations()
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda mc: _one(ctx, cfg, *mc), combos))

    scores = io.StringIO()
    w = csv.writer(scores, lineterminator="\n")
    w.writerow(["method", "strategy", "variant", "score", "status", "reason"])
    entries = []
    for res in results:
        method, strategy, variant = res["combo"]
        score = repr(float(res["score"])) if res["status"] == "ok" else ""
        w.writerow([method, strategy, variant, score, res["status"], res.get("reason", "")])
        entry = {k: v for k, v in res.items() if k not in ("curve", "combo")}
        entry.update(method=method, strategy=strategy, variant=variant)
        if res["status"] == "ok":
            curve = res["curve"]
            secs = np.zeros(curve.r.size)
            if cfg.record_timing:
                secs = np.full(curve.r.size, res["seconds"] / curve.r.size)
            text = ErrorCurve(curve.r, curve.eps, secs).to_csv()
            _atomic_write(out / f"curve_{res['tag']}.csv", text)
            entry["curve_file"] = f"curve_{res['tag']}.csv"
            entry["orders"] = [int(r) for r in curve.r]
        entries.append(entry)
    _atomic_write(out / "scores.csv", scores.getvalue())

    summary = {
        "config": cfg.to_dict(),
        "versions": {"somor": somor.__version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "morscore": {"eps": cfg.eps, "r_max": cfg.effective_r_max,
                     "integration": "trapezoid over available orders, anchored at (0, 0)"},
        "fom": {"n": ctx.sys.n, "case": ctx.sys.case, "flagged_points": list(ctx.fom.flagged)},
        "combinations": entries,
        "wall_seconds": time.perf_counter() - t_start,
    }
    _atomic_write(out / "summary.json", json.dumps(summary, indent=2, default=_json_default) + "\n")
    if cfg.export_roms:
        _export_roms(ctx, cfg, results, out)
    return summary


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _export_roms(ctx, cfg, results, out):
    """Write the largest-order ROM of every successful combination."""
    for (m, combo), res in zip(cfg.combinations(), results):
        if res["status"] != "ok":
            continue
        r = int(res["curve"].r[-1])
        rom = rom_for(ctx, m, combo, r)
        rom = ReducedModel(rom.system, {**rom.provenance, "method": combo[0],
                                        "strategy": combo[1], "variant": combo[2]})
        save_system(rom, out / "roms" / f"{combo_tag(*combo)}_r{r}")


def _cmd_run(args):
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    diags = [d for d in validate(cfg) if d["code"] != "NotApplicable"]
    if diags:
        for d in diags:
            print(f"{d['code']}: {d['where']}: {d['reason']}", file=sys.stderr)
        return 2
    summary = run(cfg, args.out, args.jobs)
    for e in summary["combinations"]:
        score = f"{e['score']:.4f}" if e["status"] == "ok" else e.get("reason", "")
        print(f"{e['status']:8s} {combo_tag(e['method'], e['strategy'], e['variant']):32s} {score}")
    return 0


def _cmd_validate(args):
    path = Path(args.config)
    diags = validate(json.loads(path.read_text()), base_dir=path.parent)
    for d in diags:
        print(f"{d['code']}: {d['where']}: {d['reason']}")
    if not diags:
        print("ok")
    return 1 if diags else 0


def _cmd_sweep(args):
    model = load_system(args.system)
    model = getattr(model, "system", model)
    grid = FrequencyGrid.linspace_hz(args.fmin, args.fmax, args.points)
    sw = sweep(model, grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    idx = [(i, j) for i in range(model.p) for j in range(model.m)]
    w.writerow(["f_hz"] + [f"{part}_{i}_{j}" for i, j in idx for part in ("re", "im")])
    for f, H in zip(grid.hz, sw.values):
        w.writerow([repr(float(f))] + [repr(float(getattr(H[i, j], part)))
                                       for i, j in idx for part in ("real", "imag")])
    if args.out:
        _atomic_write(Path(args.out), buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="somor", description="Structured second-order model reduction")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a run configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="check a run configuration without executing it")
    v.add_argument("--config", required=True)
    v.set_defaults(func=_cmd_validate)

    s = sub.add_parser("sweep", help="frequency response of a stored system")
    s.add_argument("--system", required=True)
    s.add_argument("--fmin", type=float, required=True)
    s.add_argument("--fmax", type=float, required=True)
    s.add_argument("--points", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
