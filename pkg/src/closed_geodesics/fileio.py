"""Geodesic files and spectrum CSV tables.

Geodesic file: UTF-8 text, ``# key: value`` header lines followed by one
point per line, coordinates written with 17 significant digits so doubles
survive the round trip bit for bit.

Spectrum CSV: optional ``# key: value`` comment lines, a mandatory header
row, ``,`` separators and ``.`` decimals.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import loop_space as ls
from .geodesic_search import ClosedGeodesic
from .index_spectrum import (IterateSpectrum, SequenceSpectrum, check_bott,
                             classify_growth)
from .manifold_models import build_model

GEODESIC_MAGIC = "closed-geodesic v1"
CSV_COLUMNS = ("m", "lambda", "nullity", "bott_index_slack", "bott_sum_slack",
               "minimal_sum_holds", "maximal_index_holds", "kernel_overlap", "spectral_gap")


class FileFormatError(ValueError):
    pass


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_geodesic(geo: ClosedGeodesic) -> str:
    model = geo.model
    if model is None:
        raise ValueError("geodesic carries no model; cannot serialize")
    header = {
        "model": model.name,
        "params": json.dumps(model.params, sort_keys=True),
        "chart": geo.loop.chart.name,
        "seed": geo.seed_id,
        "N": geo.loop.n_segments,
        "n": geo.loop.dim,
        "level": f"{geo.level:.17g}",
        "residual": f"{geo.residual:.3e}",
        "isolated": "true" if geo.isolated_flag else "false",
    }
    lines = [f"# {GEODESIC_MAGIC}"] + [f"# {k}: {v}" for k, v in header.items()]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in geo.loop.points]
    return "\n".join(lines) + "\n"


def write_geodesic(path, geo: ClosedGeodesic):
    atomic_write(path, format_geodesic(geo))


def _parse_header(lines):
    meta = {}
    body = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
        else:
            body.append(line)
    return meta, body


def read_geodesic(path) -> ClosedGeodesic:
    text = Path(path).read_text(encoding="utf-8")
    if not text.startswith(f"# {GEODESIC_MAGIC}"):
        raise FileFormatError(f"{path}: not a geodesic file")
    meta, body = _parse_header(text.splitlines())
    try:
        model = build_model(meta["model"], **json.loads(meta["params"]))
        chart = model.get_chart(meta["chart"])
        pts = np.array([[float(v) for v in line.split()] for line in body])
        N, n = int(meta["N"]), int(meta["n"])
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed geodesic file ({exc})") from None
    if pts.shape != (N, n):
        raise FileFormatError(f"{path}: expected {N} points of dimension {n}, found {pts.shape}")
    loop = ls.DiscreteLoop(pts, chart, tag=meta.get("seed", ""))
    return ClosedGeodesic(
        loop=loop, level=ls.sqrt_energy(loop), residual=ls.relative_residual(loop),
        seed_id=meta.get("seed", ""), isolated_flag=meta.get("isolated", "false") == "true",
        model=model,
    )


def spectrum_rows(spec) -> list:
    bott = check_bott(spec).rows
    growth = classify_growth(spec).certificate
    entries = getattr(spec, "entries", None)
    rows = []
    for k, (b, g) in enumerate(zip(bott, growth)):
        e = entries[k] if entries else None
        rows.append({
            "m": b.m, "lambda": g.index, "nullity": g.nullity,
            "bott_index_slack": b.index_slack, "bott_sum_slack": b.sum_slack,
            "minimal_sum_holds": str(g.minimal_sum_holds).lower(),
            "maximal_index_holds": str(g.maximal_index_holds).lower(),
            "kernel_overlap": f"{e.kernel_overlap:.12f}" if e else "",
            "spectral_gap": f"{e.spectral_gap:.6e}" if e else "",
        })
    return rows


def format_spectrum_csv(spec: IterateSpectrum, meta: dict | None = None) -> str:
    buf = io.StringIO()
    info = {"n": spec.n}
    if isinstance(spec, IterateSpectrum):
        info["resolutions"] = ",".join(map(str, spec.resolution_pair))
        info["rows"] = f"{spec.m_max} of {spec.m_requested}"
    info.update(meta or {})
    for k, v in info.items():
        buf.write(f"# {k}: {v}\n")
    for m, reason in getattr(spec, "failures", {}).items():
        buf.write(f"# failure: {reason}\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    if spec.lambdas:
        writer.writerows(spectrum_rows(spec))
    return buf.getvalue()


def write_spectrum_csv(path, spec, meta=None):
    atomic_write(path, format_spectrum_csv(spec, meta))


def read_spectrum_csv(path, n: int | None = None) -> tuple:
    """Parse a spectrum CSV into a ``SequenceSpectrum`` plus its metadata and rows."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    meta, _ = _parse_header([l for l in lines if l.startswith("#")])
    data = [l for l in lines if l.strip() and not l.startswith("#")]
    if not data:
        raise FileFormatError(f"{path}: missing header row")
    reader = csv.DictReader(data)
    missing = {"m", "lambda", "nullity"} - set(reader.fieldnames or ())
    if missing:
        raise FileFormatError(f"{path}: header lacks columns {sorted(missing)}")
    try:
        rows = [dict(r) for r in reader]
        ms = [int(r["m"]) for r in rows]
        lam = tuple(int(r["lambda"]) for r in rows)
        nu = tuple(int(r["nullity"]) for r in rows)
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed row ({exc})") from None
    if ms != list(range(1, len(ms) + 1)):
        raise FileFormatError(f"{path}: rows must list m = 1, 2, ... in order")
    if n is None:
        if "n" not in meta:
            raise FileFormatError(f"{path}: dimension unknown; add '# n: <dim>' or pass it explicitly")
        n = int(meta["n"])
    return SequenceSpectrum(n, lam, nu), meta, rows
