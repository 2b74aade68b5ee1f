"""Readers and writers for meshes, masks, matrices, dendrograms and cohorts.

Floating point values in text files are written with 17 significant digits
so they read back bit-exactly.
"""

from __future__ import annotations

import csv
import struct
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .cluster import Dendrogram, Parcellation
from .errors import FormatError, ParameterError
from .mesh import SurfaceMesh
from .synth import EPS_C_CONVENTION, EPS_S_CONVENTION, GroundTruthModel, SyntheticCohort
from .transform import LOGIT, PROBABILITY, ConnectivityMatrix

CMAT_MAGIC = b"CMAT"
CMAT_VERSION = 1
_CMAT_HEADER = struct.Struct("<4sIBQQ")
_SPACE_CODES = {PROBABILITY: 0, LOGIT: 1}
_CODE_SPACES = {v: k for k, v in _SPACE_CODES.items()}
CSV_MAX_ENTRIES = 10**6


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _data_lines(path):
    """Yield ``(line_number, tokens)`` skipping blanks and ``#`` comments."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if text:
                yield lineno, text.split()


# -- meshes and masks --------------------------------------------------------


def read_off(path, with_comments: bool = False):
    """Read an ASCII OFF triangle mesh with 0-based faces.

    With ``with_comments=True`` also returns the text of ``#`` comment lines.
    """
    path = Path(path)
    comments = []
    with open(path) as fh:
        for line in fh:
            if line.lstrip().startswith("#"):
                comments.append(line.lstrip()[1:].strip())
    lines = _data_lines(path)
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise FormatError(f"{path}: empty file") from None
    if tokens[0] != "OFF":
        raise FormatError(f"{path}:{lineno}: expected 'OFF' header, got {tokens[0]!r}")
    tokens = tokens[1:]
    if not tokens:
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise FormatError(f"{path}: missing counts line") from None
    try:
        n_v, n_f = int(tokens[0]), int(tokens[1])
    except (IndexError, ValueError):
        raise FormatError(f"{path}:{lineno}: bad counts line {' '.join(tokens)!r}") from None

    vertices = np.empty((n_v, 3))
    faces = np.empty((n_f, 3), dtype=np.int64)
    for i in range(n_v):
        try:
            lineno, tokens = next(lines)
            vertices[i] = [float(t) for t in tokens[:3]]
            if len(tokens) < 3:
                raise ValueError
        except StopIteration:
            raise FormatError(f"{path}: expected {n_v} vertices, file ended after {i}") from None
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad vertex line {' '.join(tokens)!r}") from None
    for i in range(n_f):
        try:
            lineno, tokens = next(lines)
            if int(tokens[0]) != 3 or len(tokens) < 4:
                raise FormatError(f"{path}:{lineno}: only triangles are supported, got {tokens[0]}-gon")
            faces[i] = [int(t) for t in tokens[1:4]]
        except StopIteration:
            raise FormatError(f"{path}: expected {n_f} faces, file ended after {i}") from None
        except FormatError:
            raise
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad face line {' '.join(tokens)!r}") from None
    mesh = SurfaceMesh(vertices, faces)
    return (mesh, comments) if with_comments else mesh


def write_off(path, mesh: SurfaceMesh, comment: str | None = None):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
        for v in mesh.vertices:
            fh.write(" ".join(fmt(x) for x in v) + "\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def read_mask(path, n_vertices: int | None = None) -> np.ndarray:
    values = []
    for lineno, tokens in _data_lines(path):
        if len(tokens) != 1 or tokens[0] not in ("0", "1"):
            raise FormatError(f"{path}:{lineno}: mask lines must be a single 0 or 1")
        values.append(tokens[0] == "1")
    mask = np.array(values, dtype=bool)
    if n_vertices is not None and len(mask) != n_vertices:
        raise FormatError(f"{path}: mask has {len(mask)} entries, mesh has {n_vertices} vertices")
    return mask


def write_mask(path, mask):
    with open(path, "w") as fh:
        fh.writelines("1\n" if m else "0\n" for m in np.asarray(mask, dtype=bool))


# -- connectivity matrices ---------------------------------------------------


def write_cmat(path, m: ConnectivityMatrix):
    """Binary matrix: header then row-major little-endian float32 values."""
    header = _CMAT_HEADER.pack(CMAT_MAGIC, CMAT_VERSION, _SPACE_CODES[m.space], *m.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())


def read_cmat(path) -> ConnectivityMatrix:
    data = Path(path).read_bytes()
    if len(data) < _CMAT_HEADER.size:
        raise FormatError(f"{path}: {len(data)} bytes is shorter than the {_CMAT_HEADER.size}-byte header")
    magic, version, code, n_rows, n_cols = _CMAT_HEADER.unpack_from(data)
    if magic != CMAT_MAGIC:
        raise FormatError(f"{path}: offset 0: bad magic {magic!r}")
    if version != CMAT_VERSION:
        raise FormatError(f"{path}: offset 4: unsupported version {version}")
    if code not in _CODE_SPACES:
        raise FormatError(f"{path}: offset 8: unknown space tag {code}")
    expected = _CMAT_HEADER.size + 4 * n_rows * n_cols
    if len(data) != expected:
        raise FormatError(
            f"{path}: {n_rows}x{n_cols} matrix needs {expected} bytes, file has {len(data)}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=_CMAT_HEADER.size).reshape(n_rows, n_cols)
    try:
        return ConnectivityMatrix(values.astype(np.float64), _CODE_SPACES[code])
    except ParameterError as err:
        raise FormatError(f"{path}: {err}") from None


def write_matrix_csv(path, m: ConnectivityMatrix):
    if m.values.size > CSV_MAX_ENTRIES:
        raise ParameterError(f"CSV export is limited to {CSV_MAX_ENTRIES} entries")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in m.values:
            w.writerow([fmt(x) for x in row])


def read_matrix_csv(path, space: str) -> ConnectivityMatrix:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric entry") from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(f"{path}:{lineno}: {len(rows[-1])} columns, expected {len(rows[0])}")
    if len(rows) * (len(rows[0]) if rows else 0) > CSV_MAX_ENTRIES:
        raise FormatError(f"{path}: more than {CSV_MAX_ENTRIES} entries")
    try:
        return ConnectivityMatrix(np.array(rows, dtype=np.float64).reshape(len(rows), -1), space)
    except ParameterError as err:
        raise FormatError(f"{path}: {err}") from None


def read_matrix(path, space: str | None = None) -> ConnectivityMatrix:
    """CMAT by default; ``.csv`` files need ``space`` since they carry no tag."""
    if str(path).endswith(".csv"):
        if space is None:
            raise ParameterError(f"{path}: CSV matrices need an explicit space")
        return read_matrix_csv(path, space)
    m = read_cmat(path)
    if space is not None and space != m.space:
        m = ConnectivityMatrix(m.values, space)
    return m


# -- dendrograms and parcellations -------------------------------------------


def write_dendrogram(path, d: Dendrogram):
    with open(path, "w") as fh:
        fh.write(f"n_leaves={d.n_leaves}\n")
        for k in range(d.n_merges):
            fh.write(f"{k},{d.left[k]},{d.right[k]},{fmt(d.height[k])},{d.size[k]}\n")


def read_dendrogram(path) -> Dendrogram:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("n_leaves="):
        raise FormatError(f"{path}:1: expected 'n_leaves=N' header")
    try:
        n = int(lines[0].split("=", 1)[1])
    except ValueError:
        raise FormatError(f"{path}:1: bad leaf count") from None
    cols = [[], [], [], []]
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 5 or int(parts[0]) != len(cols[0]):
                raise ValueError
            cols[0].append(int(parts[1]))
            cols[1].append(int(parts[2]))
            cols[2].append(float(parts[3]))
            cols[3].append(int(parts[4]))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad merge line {line!r}") from None
    try:
        return Dendrogram(n, *cols, n_constrained=None)
    except ParameterError as err:
        raise FormatError(f"{path}: {err}") from None


def write_parcellation(path, p: Parcellation, seed_index=None):
    seed_index = np.arange(p.n_seeds) if seed_index is None else np.asarray(seed_index)
    with open(path, "w") as fh:
        fh.write("seed_index,label\n")
        for s, label in zip(seed_index.tolist(), p.labels.tolist()):
            fh.write(f"{s},{label}\n")


def read_parcellation(path) -> tuple[np.ndarray, Parcellation]:
    """Returns the seed indices (sorted) and the parcellation in that order."""
    seeds, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or (lineno == 1 and line == "seed_index,label"):
                continue
            try:
                s, label = line.split(",")
                seeds.append(int(s))
                labels.append(int(label))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: expected 'seed_index,label', got {line!r}") from None
    seeds = np.array(seeds, dtype=np.int64)
    labels = np.array(labels, dtype=np.int64)
    if len(np.unique(seeds)) != len(seeds):
        raise FormatError(f"{path}: duplicate seed indices")
    order = np.argsort(seeds, kind="stable")
    seeds, labels = seeds[order], labels[order]
    try:
        p = Parcellation(labels)
    except ParameterError:
        p = Parcellation.from_labels(labels)
    return seeds, p


def write_rows(path, header, rows):
    """CSV with a header row; ``path=None`` writes to standard output."""
    with open(path, "w", newline="") if path is not None else nullcontext(sys.stdout) as out:
        out.write(",".join(header) + "\n")
        for row in rows:
            out.write(",".join(fmt(x) if isinstance(x, float) else str(x) for x in row) + "\n")


# -- synthetic cohorts -------------------------------------------------------


def write_manifest(path, entries: dict):
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


def read_manifest(path) -> dict:
    entries = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def save_cohort(directory, cohort: SyntheticCohort, seed, mesh: SurfaceMesh | None = None, comment=None):
    """Write a cohort as manifest, partition CSV, betas CMAT and one CMAT per subject.

    Subjects are stored as observed proportions when the cohort has an
    observation layer, else as exact logits.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    model = cohort.model
    observed = cohort.successes is not None
    write_manifest(
        directory / "manifest.txt",
        {
            "k": model.k,
            "n_seeds": model.n_seeds,
            "n_targets": model.n_targets,
            "sigma_c": fmt(model.sigma_c),
            "sigma_s": fmt(model.sigma_s),
            "n_subjects": model.n_subjects,
            "streamlines_per_seed": model.streamlines_per_seed or 0,
            "seed": seed,
            "eps_c": EPS_C_CONVENTION,
            "eps_s": EPS_S_CONVENTION,
            "subject_space": PROBABILITY if observed else LOGIT,
        },
    )
    write_parcellation(directory / "partition.csv", model.partition)
    write_cmat(directory / "betas.cmat", ConnectivityMatrix(model.betas, LOGIT))
    paths = []
    for s in range(cohort.n_subjects):
        p = directory / f"subject_{s:03d}.cmat"
        write_cmat(p, cohort.subject(s, observed=True))
        paths.append(p)
    if mesh is not None:
        write_off(directory / "mesh.off", mesh, comment=comment)
    return paths


def load_cohort(directory):
    """Returns ``(manifest, model, subject_matrices)``; sampled noise is not stored."""
    directory = Path(directory)
    manifest = read_manifest(directory / "manifest.txt")
    _, partition = read_parcellation(directory / "partition.csv")
    betas = read_cmat(directory / "betas.cmat").values
    n_streamlines = int(manifest.get("streamlines_per_seed", 0)) or None
    model = GroundTruthModel(
        partition,
        betas,
        sigma_c=float(manifest["sigma_c"]),
        sigma_s=float(manifest["sigma_s"]),
        n_subjects=int(manifest["n_subjects"]),
        streamlines_per_seed=n_streamlines,
    )
    subjects = [read_cmat(directory / f"subject_{s:03d}.cmat") for s in range(model.n_subjects)]
    return manifest, model, subjects
