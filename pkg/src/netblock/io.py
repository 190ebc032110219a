"""Reading and writing samples, labels and matrices.

Formats
-------
Layer file
    Header ``n <n>``, then one ``i j`` line per edge with ``0 <= i <= j < n``,
    sorted lexicographically.
Manifest
    JSON object with ``format_version``, ``n``, ``L``, ``rho``, ``layers``
    (paths relative to the manifest) and optionally ``group_labels``.
Labels
    Header ``K <K>``, then one 0-based label per line.
Matrix
    CSV with a ``# format_version 1`` comment line.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .model import MembershipMatrix, NetworkSample

__all__ = [
    "FORMAT_VERSION",
    "write_layer",
    "read_layer",
    "write_sample",
    "ingest_sample",
    "write_labels",
    "read_labels",
    "write_matrix",
    "read_matrix",
    "write_json",
]

FORMAT_VERSION = 1


def _header(line: str, key: str, path) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise DataError(f"{path}: expected header '{key} <int>', got {line.strip()!r}")
    try:
        value = int(parts[1])
    except ValueError:
        raise DataError(f"{path}: header value {parts[1]!r} is not an integer") from None
    if value < 1:
        raise DataError(f"{path}: header value must be positive")
    return value


def _read_lines(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().splitlines()
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: cannot read ({exc})") from None


def write_layer(path, n: int, rows, cols) -> None:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    order = np.lexsort((cols, rows))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"n {n}\n")
        for i, j in zip(rows[order].tolist(), cols[order].tolist()):
            fh.write(f"{i} {j}\n")


def read_layer(path) -> tuple[int, np.ndarray, np.ndarray]:
    """Parse one layer file into ``(n, rows, cols)`` with full validation."""
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty file, missing 'n <n>' header")
    n = _header(lines[0], "n", path)
    body = [ln for ln in lines[1:] if ln.strip()]
    rows = np.empty(len(body), dtype=np.int64)
    cols = np.empty(len(body), dtype=np.int64)
    for e, ln in enumerate(body):
        parts = ln.split()
        try:
            if len(parts) != 2:
                raise ValueError
            rows[e], cols[e] = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}: line {e + 2}: expected 'i j', got {ln.strip()!r}") from None
    if body:
        bad = np.flatnonzero((rows < 0) | (cols >= n) | (cols < 0) | (rows >= n))
        if bad.size:
            raise DataError(f"{path}: line {bad[0] + 2}: node index out of range [0, {n - 1}]")
        bad = np.flatnonzero(rows > cols)
        if bad.size:
            raise DataError(f"{path}: line {bad[0] + 2}: edges must be listed with i <= j")
        key = rows * n + cols
        order = np.argsort(key, kind="stable")
        dup = np.flatnonzero(np.diff(key[order]) == 0)
        if dup.size:
            e = order[dup[0] + 1]
            raise DataError(f"{path}: line {e + 2}: duplicate edge {rows[e]} {cols[e]}")
        rows, cols = rows[order], cols[order]
    return n, rows, cols


def write_sample(sample: NetworkSample, directory, stem: str = "layer") -> Path:
    """Write every layer plus ``manifest.json`` into ``directory``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(sample.L - 1)))
    names = []
    for l, (rows, cols) in enumerate(sample.layers):
        name = f"{stem}_{l:0{width}d}.txt"
        write_layer(directory / name, sample.n, rows, cols)
        names.append(name)
    manifest = {"format_version": FORMAT_VERSION, "n": sample.n, "L": sample.L,
                "rho": float(sample.rho), "layers": names}
    if sample.group_labels is not None:
        manifest["group_labels"] = [int(g) for g in sample.group_labels]
    path = directory / "manifest.json"
    write_json(path, manifest)
    return path


def ingest_sample(manifest_path, rho: Optional[float] = None, drop_self_loops: bool = False) -> NetworkSample:
    """Load a sample from its manifest; ``rho`` overrides the manifest value."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{manifest_path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON ({exc})") from None
    if not isinstance(manifest, dict):
        raise DataError(f"{manifest_path}: manifest must be a JSON object")
    version = manifest.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise DataError(f"{manifest_path}: unsupported format_version {version}")
    for key in ("n", "layers"):
        if key not in manifest:
            raise DataError(f"{manifest_path}: missing field {key!r}")
    n = manifest["n"]
    paths = manifest["layers"]
    if not isinstance(paths, list) or not paths:
        raise DataError(f"{manifest_path}: 'layers' must be a nonempty list")
    if "L" in manifest and manifest["L"] != len(paths):
        raise DataError(f"{manifest_path}: L={manifest['L']} but {len(paths)} layer files listed")
    base = manifest_path.parent
    layers = []
    for p in paths:
        full = base / p
        m, rows, cols = read_layer(full)
        if m != n:
            raise DataError(f"{full}: header says n={m}, manifest says n={n}")
        layers.append((rows, cols))
    rho = manifest.get("rho", 1.0) if rho is None else rho
    try:
        sample = NetworkSample(int(n), tuple(layers), float(rho), manifest.get("group_labels"))
    except DataError as exc:
        raise DataError(f"{manifest_path}: {exc}") from None
    return sample.without_self_loops() if drop_self_loops else sample


def write_labels(path, labels: Sequence[int], K: int) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"K {K}\n")
        fh.writelines(f"{g}\n" for g in labels.tolist())


def read_labels(path) -> MembershipMatrix:
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty file, missing 'K <K>' header")
    K = _header(lines[0], "K", path)
    try:
        labels = np.array([int(ln) for ln in lines[1:] if ln.strip()], dtype=np.int64)
    except ValueError:
        raise DataError(f"{path}: labels must be integers") from None
    if labels.size == 0:
        raise DataError(f"{path}: no labels")
    if labels.min() < 0 or labels.max() >= K:
        raise DataError(f"{path}: labels must lie in [0, {K - 1}]")
    return MembershipMatrix(labels, K)


def write_matrix(path, M) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(M, dtype=float)), delimiter=",",
               fmt="%.17g", header=f"format_version {FORMAT_VERSION}")


def read_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    except ValueError as exc:
        raise DataError(f"{path}: malformed CSV ({exc})") from None


def write_json(path, obj) -> None:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    os.replace(tmp, path)
