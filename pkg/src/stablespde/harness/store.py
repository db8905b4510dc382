"""Atomic, byte-deterministic report files: CSV, npz, JSON and SVG."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import zipfile
from pathlib import Path

import numpy as np

from .config import _jsonable

ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def atomic_write(path, data: bytes) -> None:
    """Write-then-rename so readers never see a partial file."""
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


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return v
    return json.dumps(v, sort_keys=True, separators=(",", ":"), default=_jsonable)


def csv_bytes(rows: list[dict]) -> bytes:
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue().encode()


def write_csv(path, rows: list[dict]) -> None:
    atomic_write(path, csv_bytes(rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def npz_bytes(arrays: dict) -> bytes:
    """``.npz`` archive with fixed entry timestamps (``np.savez`` stamps the wall clock)."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(arrays):
            arr = io.BytesIO()
            np.lib.format.write_array(arr, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, arr.getvalue())
    return buf.getvalue()


def write_npz(path, arrays: dict) -> None:
    atomic_write(path, npz_bytes(arrays))


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n").encode()


def write_json(path, obj) -> None:
    atomic_write(path, json_bytes(obj))


def svg_plot(rows: list[dict], x: str, ys: list[str], title: str, logx: bool = False,
             logy: bool = False) -> bytes | None:
    """Line plot of ``ys`` against ``x``; None when matplotlib is unavailable."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    with matplotlib.rc_context({"svg.hashsalt": "stablespde", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        xs = [float(r[x]) for r in rows]
        for y in ys:
            ax.plot(xs, [float(r[y]) for r in rows], marker="o", label=y)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(x)
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
