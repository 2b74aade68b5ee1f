"""Command line front end.

Exit codes: 0 success, 2 bad parameters, 3 I/O failure, 4 malformed input
file, 5 unsatisfiable spatial constraint.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .baselines import MODES, baseline_curve, make_rng
from .cluster import build_dendrogram, cut_by_count, cut_by_height, parcel_fingerprint
from .errors import EXIT_IO, CorrespondenceError, EmptyDomainError, ParameterError, ParcellationError
from .mesh import build_adjacency, induced_submesh, vertex_areas
from .metrics import adjusted_rand_index, consistency_curve
from .synth import grid_mesh, planted_partition, sample_cohort
from .transform import DEFAULT_CLAMP_EPS, LOGIT, PROBABILITY, groupwise_average, logit_transform

log = logging.getLogger("logitparc")

GRID_TAG = "grid_mesh"


def _k_list(text: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(k) for k in text.split(",") if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def _grid_shape(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}")
    return rows, cols


# -- shared pipeline pieces --------------------------------------------------


class _Domain:
    """Mesh restricted to the mask, with its graph, areas and original vertex ids."""

    def __init__(self, args):
        mesh, comments = io.read_off(args.mesh, with_comments=True)
        mask = (
            io.read_mask(args.mask, mesh.n_vertices)
            if args.mask
            else np.ones(mesh.n_vertices, dtype=bool)
        )
        if not mask.any():
            raise EmptyDomainError(f"{args.mask}: mask excludes every vertex")
        self.n_vertices = mesh.n_vertices
        self.mask = mask
        self.seeds = np.flatnonzero(mask)
        sub, _ = induced_submesh(mesh, mask)
        self.graph = build_adjacency(sub)
        mode = getattr(args, "size_mode", "area")
        if mode == "auto":
            mode = "vertices" if any(c.startswith(GRID_TAG) for c in comments) else "area"
            if mode == "vertices":
                log.warning("synthetic grid mesh: min-area counts vertices, not mm²")
        self.areas = vertex_areas(sub) if mode == "area" else None

    def restrict(self, m, path):
        if m.n_seeds == self.n_vertices:
            return m.rows(self.mask)
        if m.n_seeds == len(self.seeds):
            return m
        raise CorrespondenceError(
            f"{path}: {m.n_seeds} rows, mesh has {self.n_vertices} vertices "
            f"({len(self.seeds)} in mask)"
        )


def _to_logit(m, args):
    if m.space == LOGIT:
        return m
    return logit_transform(m, args.clamp_eps)


def _cluster_and_write(features, domain: _Domain, args, out: Path):
    d = build_dendrogram(
        features, domain.graph, domain.areas, args.min_area, allow_disconnected=args.allow_disconnected
    )
    io.write_dendrogram(out / "dendrogram.csv", d)
    for k in args.k:
        io.write_parcellation(out / f"parcellation_k{k}.csv", cut_by_count(d, k), domain.seeds)
    return d


# -- subcommands -------------------------------------------------------------


def cmd_parcellate(args):
    if len(args.matrix) != 1:
        raise ParameterError("parcellate takes exactly one --matrix; use groupwise for several")
    out = _outdir(args)
    domain = _Domain(args)
    m = domain.restrict(io.read_matrix(args.matrix[0], args.space), args.matrix[0])
    _cluster_and_write(_to_logit(m, args), domain, args, out)


def cmd_groupwise(args):
    if not args.matrix:
        raise ParameterError("groupwise needs at least one --matrix")
    out = _outdir(args)
    domain = _Domain(args)
    subjects = []
    for path in args.matrix:
        m = domain.restrict(io.read_matrix(path, args.space), path)
        if subjects and m.shape != subjects[0].shape:
            raise CorrespondenceError(f"{path}: shape {m.shape} differs from {args.matrix[0]}: {subjects[0].shape}")
        subjects.append(_to_logit(m, args))
    average = groupwise_average(subjects)
    io.write_cmat(out / "average.cmat", average)
    _cluster_and_write(average, domain, args, out)


def cmd_cut(args):
    out = _outdir(args)
    d = io.read_dendrogram(args.dendrogram)
    seeds = None
    if args.mask:
        seeds = np.flatnonzero(io.read_mask(args.mask))
        if len(seeds) != d.n_leaves:
            raise CorrespondenceError(f"mask selects {len(seeds)} vertices, dendrogram has {d.n_leaves} leaves")
    for k in args.k:
        io.write_parcellation(out / f"parcellation_k{k}.csv", cut_by_count(d, k), seeds)
    if args.height is not None:
        io.write_parcellation(out / f"parcellation_h{io.fmt(args.height)}.csv", cut_by_height(d, args.height), seeds)


def cmd_fingerprint(args):
    if len(args.matrix) != 1:
        raise ParameterError("fingerprint takes exactly one --matrix")
    seeds, p = io.read_parcellation(args.parcellation)
    m = io.read_matrix(args.matrix[0], args.space)
    if seeds.size and seeds.max() >= m.n_seeds:
        raise CorrespondenceError(f"{args.parcellation}: seed {seeds.max()} beyond {m.n_seeds} matrix rows")
    features = _to_logit(m.rows(seeds), args)
    labels = range(p.n_parcels) if args.label is None else [args.label]
    rows = []
    for label in labels:
        fp = parcel_fingerprint(features, p, label)
        rows.extend((label, t, float(v)) for t, v in enumerate(fp))
    io.write_rows(args.out, ["label", "target_index", "probability"], rows)


def cmd_ari(args):
    seeds_a, p = io.read_parcellation(args.first)
    seeds_b, q = io.read_parcellation(args.second)
    if len(seeds_a) != len(seeds_b):
        raise CorrespondenceError(
            f"{args.first} has {len(seeds_a)} seeds but {args.second} has {len(seeds_b)}"
        )
    if not np.array_equal(seeds_a, seeds_b):
        raise CorrespondenceError(f"{args.first} and {args.second} cover different seed indices")
    print(f"{adjusted_rand_index(p, q):.6f}")


def cmd_consistency(args):
    dendros = [io.read_dendrogram(p) for p in args.dendrograms]
    rows = consistency_curve(dendros, args.k)
    io.write_rows(args.out, ["k", "pair_a", "pair_b", "ari"], rows)


def cmd_baseline(args):
    domain = _Domain(args)
    rows = baseline_curve(
        domain.graph,
        domain.areas,
        n_trials=args.trials,
        k_values=args.k,
        mode=args.mode,
        seed=args.seed,
        n_initial=args.initial_parcels,
        adjacency_constrained=not args.unconstrained,
        pairing=args.pairing,
    )
    io.write_rows(args.out, ["k", "mode", "mean_ari", "std_ari", "n_trials"], rows)


def cmd_synth(args):
    out = _outdir(args)
    comment = None
    if args.mesh:
        mesh = io.read_off(args.mesh)
    else:
        rows, cols = args.grid
        mesh = grid_mesh(rows, cols, args.spacing)
        comment = f"{GRID_TAG} rows={rows} cols={cols} spacing={io.fmt(args.spacing)}"
    if len(args.k) != 1:
        raise ParameterError("synth takes a single --k, the number of planted clusters")
    model = planted_partition(mesh, args.k[0], args.targets, args.separation, make_rng(args.seed, 0))
    model = model.with_noise(
        sigma_c=args.sigma_c,
        sigma_s=args.sigma_s,
        n_subjects=args.subjects,
        streamlines_per_seed=args.streamlines or None,
    )
    cohort = sample_cohort(model, make_rng(args.seed, 1))
    io.save_cohort(out, cohort, args.seed, mesh=mesh, comment=comment)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logitparc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def matrix_opts(p):
        p.add_argument("--matrix", action="append", default=[], help="CMAT or CSV matrix (repeatable)")
        p.add_argument("--space", choices=(PROBABILITY, LOGIT), help="override/declare the matrix space (needed for CSV)")
        p.add_argument("--clamp-eps", type=float, default=DEFAULT_CLAMP_EPS)

    def domain_opts(p, mesh_required=True):
        p.add_argument("--mesh", required=mesh_required, help="ASCII OFF mesh")
        p.add_argument("--mask", help="one 0/1 per vertex")

    def cluster_opts(p):
        p.add_argument("--min-area", type=float, default=3.0, help="minimum parcel size (default 3.0 mm²)")
        p.add_argument("--size-mode", choices=("auto", "area", "vertices"), default="auto")
        p.add_argument("--allow-disconnected", action="store_true")
        p.add_argument("--k", type=_k_list, default=[], help="comma-separated parcel counts")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("parcellate", help="cluster one subject")
    domain_opts(p)
    matrix_opts(p)
    cluster_opts(p)
    p.set_defaults(func=cmd_parcellate)

    p = sub.add_parser("groupwise", help="average subjects in logit space, then cluster")
    domain_opts(p)
    matrix_opts(p)
    cluster_opts(p)
    p.set_defaults(func=cmd_groupwise)

    p = sub.add_parser("cut", help="cut a dendrogram file")
    p.add_argument("dendrogram")
    p.add_argument("--k", type=_k_list, default=[])
    p.add_argument("--height", type=float)
    p.add_argument("--mask", help="map leaves back to vertex indices")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cut)

    p = sub.add_parser("fingerprint", help="connection probabilities of parcels")
    matrix_opts(p)
    p.add_argument("--parcellation", required=True)
    p.add_argument("--label", type=int)
    p.add_argument("--out", help="CSV path (default: standard output)")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("ari", help="adjusted Rand index of two parcellation files")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_ari)

    p = sub.add_parser("consistency", help="pairwise ARI of dendrograms across k")
    p.add_argument("dendrograms", nargs="+")
    p.add_argument("--k", type=_k_list, required=True)
    p.add_argument("--out", help="CSV path (default: standard output)")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("baseline", help="chance-level ARI of random parcellations")
    domain_opts(p)
    p.add_argument("--mode", choices=MODES, default="homogeneous")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--k", type=_k_list, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-parcels", type=int, default=300)
    p.add_argument("--unconstrained", action="store_true", help="merge any two parcels, not only touching ones")
    p.add_argument("--pairing", choices=("disjoint", "all"), default="disjoint")
    p.add_argument("--out", help="CSV path (default: standard output)")
    p.set_defaults(func=cmd_baseline, size_mode="area")

    p = sub.add_parser("synth", help="sample a synthetic cohort with a planted partition")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh")
    src.add_argument("--grid", type=_grid_shape, help="ROWSxCOLS grid mesh")
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--k", type=_k_list, required=True, help="number of planted clusters")
    p.add_argument("--targets", type=int, default=50)
    p.add_argument("--separation", type=float, default=8.0)
    p.add_argument("--sigma-c", type=float, default=0.0)
    p.add_argument("--sigma-s", type=float, default=0.0)
    p.add_argument("--subjects", type=int, default=1)
    p.add_argument("--streamlines", type=int, default=0, help="Bernoulli trials per seed (0: none)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
    )
    try:
        args.func(args)
    except ParcellationError as err:
        print(f"logitparc {args.command}: error: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"logitparc {args.command}: error: {err}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
