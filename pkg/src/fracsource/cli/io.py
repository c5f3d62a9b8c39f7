"""Artifact writers and the forward-run dump format.

CSV files follow RFC 4180 (CRLF line ends, header row, '.' decimal) with
floats printed to 17 significant digits, which round-trips doubles exactly.
Every file is written to a temporary name and renamed into place.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..fraccalc.grid import TimeGrid, as_order
from ..forward.data import BoundaryLayout, CauchyData
from ..forward.solver import SpectralField
from ..spectral import GridFunction, RectDomain

__all__ = ["fmt", "atomic_write", "write_csv", "write_json", "write_grid_csv", "save_forward", "load_forward"]


def fmt(x) -> str:
    """Format one CSV field: floats to 17 significant digits, booleans as 0/1."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: Sequence[str], columns: Sequence[Iterable]) -> None:
    """Write equally long ``columns`` under ``header``."""
    cols = [list(c) for c in columns]
    if len({len(c) for c in cols}) > 1:
        raise ValueError("CSV columns differ in length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([fmt(v) for v in row])
    atomic_write(path, buf.getvalue().encode("utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, obj) -> None:
    """Write ``obj`` as indented JSON; key order is preserved."""
    atomic_write(path, (json.dumps(_jsonable(obj), indent=2) + "\n").encode("utf-8"))


def write_grid_csv(path: Path, domain: RectDomain, named: dict[str, np.ndarray]) -> None:
    """Long-format grid values: one row per interior node with columns ``x, y, <names>``."""
    X, Y = domain.mesh()
    cols = [X.ravel(), Y.ravel()] + [np.asarray(v, float).ravel() for v in named.values()]
    write_csv(path, ["x", "y", *named], cols)


# ---------------------------------------------------------------- forward dumps
def save_forward(path: Path, u: SpectralField, data: CauchyData, meta: dict) -> None:
    """Store a forward run (coefficients, sampled source, Cauchy data) as ``.npz``."""
    d = u.domain
    arrays = {
        "domain": np.array([d.L1, d.L2, d.N1, d.N2, d.M1, d.M2], float),
        "nodes": u.grid.nodes,
        "uniform": np.array(u.grid.uniform),
        "alpha": np.array(u.alpha.alpha),
        "coeffs": u.coeffs,
        "source": u.source,
        "source_rate": u.source_rate if u.source_rate is not None else np.zeros(0),
        "layout": np.array([data.layout.nx, data.layout.ny]),
        "u_trace": data.u_trace,
        "dnu_trace": data.dnu_trace,
        "final_snapshot": data.final_snapshot.values,
        "final_velocity": data.final_velocity.values if data.final_velocity is not None else np.zeros(0),
        "meta": np.array(json.dumps(_jsonable(meta))),
    }
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    atomic_write(Path(path), buf.getvalue())


def load_forward(path: Path) -> tuple[SpectralField, CauchyData, dict]:
    """Inverse of :func:`save_forward`."""
    with np.load(path, allow_pickle=False) as z:
        L1, L2, N1, N2, M1, M2 = z["domain"]
        d = RectDomain(float(L1), float(L2), int(N1), int(N2), int(M1), int(M2))
        grid = TimeGrid(z["nodes"], bool(z["uniform"]))
        rate = z["source_rate"]
        u = SpectralField(d, grid, as_order(float(z["alpha"])), z["coeffs"], source=z["source"],
                          source_rate=rate if rate.size else None)
        nx, ny = z["layout"]
        vel = z["final_velocity"]
        data = CauchyData(d, grid, BoundaryLayout(d, int(nx), int(ny)), z["u_trace"], z["dnu_trace"],
                          GridFunction(d, z["final_snapshot"]), GridFunction(d, vel) if vel.size else None)
        meta = json.loads(str(z["meta"]))
    return u, data, meta
