"""Systems and reduced models on disk: a JSON manifest next to Matrix Market files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io

from somor.reduce import ReducedModel
from somor.system import AffineTerm, Coefficient, StructuredSystem

FORMAT = "somor-system"
VERSION = 1
SLOTS = ("mass", "damping", "stiffness", "nonlinear", "inputs")


def _write_mtx(path, X):
    X = np.asarray(X)
    if np.iscomplexobj(X) and not np.any(X.imag):
        X = X.real
    scipy.io.mmwrite(str(path), X, precision=17)


def _read_mtx(path):
    X = scipy.io.mmread(str(path))
    return np.asarray(X.todense() if hasattr(X, "todense") else X)


def save_system(sys, directory, provenance=None) -> Path:
    """Write ``manifest.json`` plus one ``.mtx`` file per matrix; returns the manifest path.

    ``sys`` may be a :class:`StructuredSystem` or a :class:`ReducedModel`
    (whose provenance is stored alongside).
    """
    if isinstance(sys, ReducedModel):
        provenance = {**sys.provenance, **(provenance or {})}
        sys = sys.system
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    terms = {}
    for slot in SLOTS:
        entries = []
        for i, t in enumerate(getattr(sys, slot)):
            fname = f"{slot}_{i}.mtx"
            _write_mtx(d / fname, t.matrix)
            entries.append({"coefficient": t.coeff.to_dict(), "file": fname})
        terms[slot] = entries
    _write_mtx(d / "output.mtx", sys.output)
    tf = sys.test_frequency
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "case": sys.case,
        "n": sys.n, "m": sys.m, "p": sys.p,
        "test_frequency": None if tf is None else [complex(tf).real, complex(tf).imag],
        "terms": terms,
        "output": "output.mtx",
        "provenance": _jsonable(provenance or {}),
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def load_manifest(path):
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    if not p.exists():
        raise FileNotFoundError(f"manifest not found: {p}")
    m = json.loads(p.read_text())
    if m.get("format") != FORMAT:
        raise ValueError(f"{p} is not a {FORMAT} manifest")
    return p, m


def load_system(path):
    """Inverse of :func:`save_system`; returns a ReducedModel if provenance is present."""
    p, m = load_manifest(path)
    d = p.parent
    kw = {}
    for slot in SLOTS:
        kw[slot] = [AffineTerm(Coefficient.from_dict(e["coefficient"]), _read_mtx(d / e["file"]))
                    for e in m["terms"].get(slot, [])]
    tf = m.get("test_frequency")
    sys = StructuredSystem(output=_read_mtx(d / m["output"]), case=m["case"],
                           test_frequency=None if tf is None else complex(*tf), **kw)
    if m.get("provenance"):
        return ReducedModel(sys, m["provenance"])
    return sys
