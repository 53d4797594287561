"""JSON and CSV serialization of arrays, fields and solve results.

Exact arrays are written as ["p/q", "p/q"] pairs so that no float ever enters
an exact-mode file; float arrays are written as [re, im] numbers.
"""

from __future__ import annotations

import csv
import io as _io
import json

import numpy as np

from .series import QI, FieldValue, is_exact, zeros
from .theta import MetricAnsatz

__all__ = [
    "dump_array", "load_array", "dump_scalar", "load_scalar", "dump_field",
    "result_to_dict", "result_from_dict", "save_result", "load_result",
    "residual_csv", "provenance", "TOOL_VERSION",
]

TOOL_VERSION = "0.1.0"


def dump_scalar(x):
    if isinstance(x, QI):
        return {"exact": x.to_pair()}
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def load_scalar(v):
    if isinstance(v, dict) and "exact" in v:
        return QI.from_pair(v["exact"])
    if isinstance(v, list):
        return complex(v[0], v[1])
    return v


def dump_array(a) -> dict:
    a = np.asarray(a)
    ex = is_exact(a)
    flat = a.ravel()
    if ex:
        data = [QI(z).to_pair() if not isinstance(z, QI) else z.to_pair() for z in flat]
    else:
        c = flat.astype(complex)
        data = [[float(z.real), float(z.imag)] for z in c]
    return {"exact": ex, "shape": list(a.shape), "data": data}


def load_array(d: dict) -> np.ndarray:
    shape = tuple(d["shape"])
    if d["exact"]:
        out = zeros(shape, True)
        flat = out.reshape(-1)
        for i, p in enumerate(d["data"]):
            flat[i] = QI.from_pair(p)
        return out
    vals = np.array([complex(re, im) for re, im in d["data"]], dtype=complex)
    return vals.reshape(shape)


def dump_field(f) -> dict:
    data = f.data if isinstance(f, FieldValue) else f
    return dump_array(data)


def _series_dump(a):
    return [dump_array(a[k]) for k in range(a.shape[0])]


def _series_load(lst):
    return np.stack([load_array(d) for d in lst]) if lst else np.zeros((0,))


def result_to_dict(result) -> dict:
    """Full serialization of a solve result (the background is referenced by name)."""
    c = result.coefficients
    return {
        "lambda": dump_scalar(result.lam),
        "order": result.order,
        "background": result.background,
        "exact": result.exact,
        "config_hash": result.config_hash,
        "coefficients": {k: _series_dump(v) for k, v in c.items()},
        "ansatz": {k: _series_dump(v) for k, v in result.ansatz.components().items()},
        "eta": dump_field(result.eta),
        "obstruction": dump_field(result.obstruction),
        "weyl_i0i0": _series_dump(result.weyl_i0i0),
        "einstein_orders": list(result.einstein_orders),
        "weyl_orders": list(result.weyl_orders),
        "residuals": [list(r) for r in result.residuals],
        "steps": result.records,
    }


def result_from_dict(d: dict, bg=None):
    """Inverse of :func:`result_to_dict`; ``bg`` restores the background object."""
    from .solver import SolveResult
    a = d["ansatz"]
    ansatz = MetricAnsatz(*(_series_load(a[k]) for k in ("phi00", "phi11b", "phi01", "phi11")))
    tol = bg.tol if bg is not None else 1e-10
    return SolveResult(
        ansatz=ansatz,
        lam=load_scalar(d["lambda"]),
        order=d["order"],
        background=d["background"],
        exact=d["exact"],
        records=d["steps"],
        eta=FieldValue(load_array(d["eta"]), tol),
        obstruction=FieldValue(load_array(d["obstruction"]), tol),
        einstein_orders=d["einstein_orders"],
        weyl_orders=d["weyl_orders"],
        weyl_i0i0=_series_load(d["weyl_i0i0"]),
        config_hash=d.get("config_hash", ""),
        bg=bg,
        residuals=[tuple(r) for r in d.get("residuals", [])],
    )


def provenance(config: dict) -> dict:
    import hashlib
    blob = json.dumps(config, sort_keys=True, default=str)
    return {"tool": "achgjms", "version": TOOL_VERSION,
            "config": config, "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16]}


def save_result(path, result, header: dict | None = None):
    d = result_to_dict(result)
    if header is not None:
        d = {"provenance": header, **d}
    with open(path, "w") as fh:
        json.dump(d, fh)


def load_result(path, bg=None):
    with open(path) as fh:
        d = json.load(fh)
    return result_from_dict(d, bg)


def residual_csv(result) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf)
    w.writerow(["order", "component", "max_norm"])
    for k, name, v in result.residuals:
        w.writerow([k, name, repr(float(v))])
    return buf.getvalue()
