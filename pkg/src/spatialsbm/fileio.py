"""File formats: CSV matrices, coordinate tables, label TSVs, binary
similarity caches, JSON summaries, grid reports, run manifests.

Everything round-trips: write-then-read reproduces the in-memory values
exactly (floats are serialized with shortest-roundtrip repr).
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import InputFormatError

SIMILARITY_MAGIC = b"SIMZMAT1"


def _fmt(x: float) -> str:
    return repr(float(x))


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def read_matrix_csv(path) -> np.ndarray:
    """Dense float matrix from CSV; a non-numeric first row is a header."""
    path = Path(path)
    rows: list[list[float]] = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and not all(_is_number(tok) for tok in row):
                continue
            try:
                values = [float(tok) for tok in row]
            except ValueError as exc:
                raise InputFormatError(f"{path}: line {lineno}: {exc}") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputFormatError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def write_matrix_csv(path, matrix: np.ndarray, header: list[str] | None = None) -> None:
    matrix = np.asarray(matrix, dtype=float)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in matrix:
            writer.writerow([_fmt(v) for v in row])


def read_coordinates_csv(path) -> tuple[list[str], np.ndarray]:
    """(cell_ids, n x 2 coordinates) from a (cell_id, x, y) CSV."""
    path = Path(path)
    ids: list[str] = []
    coords: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise InputFormatError(
                    f"{path}: line {lineno}: expected 3 columns (cell_id, x, y)"
                )
            if lineno == 1 and not (_is_number(row[1]) and _is_number(row[2])):
                continue
            try:
                coords.append([float(row[1]), float(row[2])])
            except ValueError as exc:
                raise InputFormatError(f"{path}: line {lineno}: {exc}") from None
            ids.append(row[0])
    if not ids:
        raise InputFormatError(f"{path}: no data rows")
    return ids, np.array(coords, dtype=float)


def write_coordinates_csv(path, cell_ids, coords: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cell_id", "x", "y"])
        for cid, (x, y) in zip(cell_ids, np.asarray(coords, dtype=float)):
            writer.writerow([cid, _fmt(x), _fmt(y)])


def default_cell_ids(n: int) -> list[str]:
    width = max(1, len(str(n - 1)))
    return [f"cell_{i:0{width}d}" for i in range(n)]


def write_labels_tsv(path, cell_ids, labels, uncertainty=None) -> None:
    """Labels TSV with columns cell_id, domain and optionally uncertainty."""
    labels = np.asarray(labels)
    with Path(path).open("w", encoding="utf-8") as fh:
        if uncertainty is None:
            fh.write("cell_id\tdomain\n")
            for cid, lab in zip(cell_ids, labels):
                fh.write(f"{cid}\t{int(lab)}\n")
        else:
            fh.write("cell_id\tdomain\tuncertainty\n")
            for cid, lab, u in zip(cell_ids, labels, np.asarray(uncertainty)):
                fh.write(f"{cid}\t{int(lab)}\t{_fmt(u)}\n")


def read_labels_tsv(path) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    """(cell_ids, labels, uncertainty-or-None) from a labels TSV."""
    path = Path(path)
    ids: list[str] = []
    labels: list[int] = []
    unc: list[float] = []
    has_unc = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise InputFormatError(
                    f"{path}: line {lineno}: expected 2 or 3 tab-separated columns"
                )
            if lineno == 1 and not _is_number(parts[1]):
                has_unc = len(parts) == 3
                continue
            if has_unc is None:
                has_unc = len(parts) == 3
            try:
                labels.append(int(float(parts[1])))
                if has_unc:
                    unc.append(float(parts[2]))
            except (ValueError, IndexError) as exc:
                raise InputFormatError(f"{path}: line {lineno}: {exc}") from None
            ids.append(parts[0])
    if not ids:
        raise InputFormatError(f"{path}: no data rows")
    uncertainty = np.array(unc) if has_unc else None
    return ids, np.array(labels, dtype=np.int64), uncertainty


def write_similarity_binary(path, A: np.ndarray) -> None:
    """Flat binary cache: 8-byte magic + uint64 n, then row-major float64."""
    A = np.ascontiguousarray(np.asarray(A, dtype="<f8"))
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError("similarity cache requires a square matrix")
    with Path(path).open("wb") as fh:
        fh.write(SIMILARITY_MAGIC)
        fh.write(struct.pack("<Q", n))
        fh.write(A.tobytes())


def read_similarity_binary(path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16 or blob[:8] != SIMILARITY_MAGIC:
        raise InputFormatError(f"{path}: not a similarity cache (bad magic)")
    (n,) = struct.unpack("<Q", blob[8:16])
    expected = 16 + 8 * n * n
    if len(blob) != expected:
        raise InputFormatError(
            f"{path}: expected {expected} bytes for n={n}, found {len(blob)}"
        )
    return np.frombuffer(blob, dtype="<f8", offset=16).reshape(n, n).copy()


def write_edge_list(path, graph) -> None:
    """Undirected edge list (i < j) of a neighborhood graph, one pair per line."""
    W = graph.adjacency
    i, j = np.nonzero(np.triu(W, k=1))
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("i\tj\n")
        for a, b in zip(i, j):
            fh.write(f"{int(a)}\t{int(b)}\n")


def write_json(path, payload: dict) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)


GRID_CSV_COLUMNS = ["lambda", "delta", "mdic", "mean_deviance", "p_d", "k_hat", "best"]


def write_grid_csv(path, results, best, include_runtime: bool = False) -> None:
    """Grid report; the per-configuration runtime column is opt-in so the
    default report is byte-reproducible across runs."""
    columns = list(GRID_CSV_COLUMNS)
    if include_runtime:
        columns.append("runtime_seconds")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in results:
            row = [
                _fmt(r.lam),
                _fmt(r.delta),
                _fmt(r.mdic),
                _fmt(r.mean_deviance),
                _fmt(r.p_d),
                str(r.k_hat),
                "1" if r is best else "0",
            ]
            if include_runtime:
                row.append(_fmt(r.runtime_seconds))
            writer.writerow(row)


def file_digest(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(path, command: str, config: dict, inputs: dict, **extra) -> None:
    """Run manifest: config echo, input digests, versions, extras."""
    import scipy

    from . import __version__

    payload = {
        "command": command,
        "config": config,
        "inputs": {str(k): file_digest(v) for k, v in inputs.items()},
        "versions": {
            "spatialsbm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    payload.update(extra)
    write_json(path, payload)
