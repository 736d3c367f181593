"""Command line entry point: ``fwpd <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input or arguments and 2 when a
computation fails.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines
from .dataset import IncompleteDataset, load_csv, write_csv
from .dissimilarity import (
    DissimilarityContext,
    pairwise_absent_matrix,
    pairwise_matrix,
    pairwise_observed_distances,
    write_matrix_csv,
)
from .evaluation import ari, nmi, wilcoxon_rank_sum
from .experiment import ExperimentError, emit_tables, parse_config, run_experiment
from .hac import build, cut
from .kmeans import init_random, run
from .missingness import MissingnessSpec, read_mask_csv, write_mask_csv

log = logging.getLogger("fwpd")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is our runtime-error code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _read_labels(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0][0].strip().lower() == "label":
        rows = rows[1:]
    if not rows:
        raise UsageError(f"{path}: no labels")
    return np.array([r[0].strip() for r in rows])


def _write_labels(labels, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"])
        w.writerows([int(v)] for v in labels)


def _write_centroids(Z, path) -> None:
    """One row per centroid: its values ('?' where unobserved) then its observed features."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{l}" for l in range(Z.values.shape[1])] + ["gamma"])
        for j in range(Z.k):
            vals = [repr(float(v)) if ok else "?" for v, ok in zip(Z.values[j], Z.mask[j])]
            w.writerow(vals + [" ".join(str(l) for l in sorted(Z.gamma(j)))])


def _read_column(path) -> np.ndarray:
    vals = _read_labels(path)
    try:
        return vals.astype(float)
    except ValueError:
        raise UsageError(f"{path}: expected one number per line") from None


def _existing(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    return path


def _load(args) -> IncompleteDataset:
    ds = load_csv(_existing(args.input), args.missing_token, args.labels)
    if args.mask:
        mask = read_mask_csv(_existing(args.mask))
        if mask.shape != ds.shape:
            raise UsageError(f"mask shape {mask.shape} does not match data shape {ds.shape}")
        ds = ds.with_mask(mask & ds.mask)
    return ds


def _k(args, ds) -> int:
    if args.k is not None:
        return args.k
    if ds.labels is None:
        raise UsageError("give -k or a labelled dataset (--labels)")
    return ds.n_classes


# ------------------------------------------------------------------ commands


def cmd_impute(args):
    ds = _load(args)
    if args.method == "zero":
        done = baselines.impute_zero(ds)
    elif args.method == "mean":
        done = baselines.impute_mean(ds, class_balanced=args.class_balanced)
    elif args.method == "knn":
        done = baselines.impute_knn(ds, args.neighbors)
    else:
        done = baselines.impute_svd(ds, args.eigen_fraction)
        if not done.converged:
            log.warning("SVD imputation did not converge")
    out = IncompleteDataset(
        done.values, labels=ds.labels, feature_names=ds.feature_names, label_names=ds.label_names
    )
    write_csv(out, args.output, args.missing_token)


def cmd_dissim(args):
    ds = _load(args)
    if args.kind == "pds":
        D = baselines.pds_matrix(ds)
    elif args.kind == "observed":
        D = pairwise_observed_distances(ds)
    else:
        ctx = DissimilarityContext.from_dataset(ds, args.alpha)
        D = pairwise_matrix(ctx, ds) if args.kind == "fwpd" else pairwise_absent_matrix(ctx, ds)
    write_matrix_csv(D, args.output)


def cmd_kmeans(args):
    ds = _load(args)
    k = _k(args, ds)
    init = init_random(ds.n, k, args.seed)
    if args.standard:
        if not ds.fully_observed:
            raise UsageError("standard k-means needs fully observed data")
        result = run(ds, None, k, init=init, max_iter=args.max_iter)
    else:
        ctx = DissimilarityContext.from_dataset(ds, args.alpha)
        result = run(ds, ctx, k, init=init, max_iter=args.max_iter)
    _write_labels(result.labels, args.output)
    if args.trace:
        with Path(args.trace).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "adjustments"])
            w.writerows([t, repr(f), a] for t, f, a in result.trace.rows())
    if args.centroids:
        _write_centroids(result.centroids, args.centroids)
    if not result.converged:
        log.warning("stopped after %d iterations without converging", result.trace.n_iter)
    print(f"objective={result.objective!r} iterations={result.trace.n_iter} converged={result.converged}")


def cmd_hac(args):
    ds = _load(args)
    if args.standard:
        if not ds.fully_observed:
            raise UsageError("standard clustering needs fully observed data")
        dendro = baselines.standard_hac(ds.values, args.linkage)
    elif args.pds:
        dendro = build(baselines.pds_matrix(ds), args.linkage)
    else:
        ctx = DissimilarityContext.from_dataset(ds, args.alpha)
        dendro = build(pairwise_matrix(ctx, ds), args.linkage)
    if args.dendrogram:
        dendro.write_csv(args.dendrogram)
    if args.output:
        _write_labels(cut(dendro, _k(args, ds)), args.output)
    inv = dendro.inversions()
    if inv:
        log.info("%d height inversions in the merge sequence", len(inv))


def cmd_inject(args):
    ds = load_csv(_existing(args.input), args.missing_token, args.labels)
    if args.kind == "mcar_cap":
        spec = MissingnessSpec("mcar_cap", cap=args.cap)
    else:
        spec = MissingnessSpec("patch", image_side=args.image_side, patch_side=args.patch_side)
    masked = spec.apply(ds, args.seed)
    write_csv(masked, args.output, args.missing_token)
    if args.mask_out:
        write_mask_csv(masked.mask, args.mask_out)


def cmd_experiment(args):
    text = _existing(args.config).read_text() if args.config else ""
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    # shared flags override the file only when given explicitly
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.alpha is not None:
        overrides["alpha"] = str(args.alpha)
    if args.missing_token is not None:
        overrides["missing_token"] = args.missing_token
    if args.output_dir:
        overrides["output"] = args.output_dir
    cfg = parse_config(text, overrides)
    report = run_experiment(cfg)
    out = cfg.output_dir or "."
    for path in emit_tables(report, out, args.format):
        print(path)


def cmd_score(args):
    _existing(args.a), _existing(args.b)
    if args.compare:
        a, b = _read_column(args.a), _read_column(args.b)
        v = wilcoxon_rank_sum(a, b, args.level)
        print(f"p_value={v.p_value:.4f} verdict={v.verdict}")
        return
    a, b = _read_labels(args.a), _read_labels(args.b)
    if a.shape != b.shape:
        raise UsageError(f"label files differ in length: {a.size} vs {b.size}")
    print(f"nmi={nmi(a, b):.4f} ari={ari(a, b):.4f}")


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--alpha", type=float, default=None, help="penalty weight in (0, 1), default 0.25")
    common.add_argument("--missing-token", default=None, help="marker of missing cells, default '?'")
    common.add_argument("-v", "--verbose", action="store_true")

    data = _Parser(add_help=False)
    data.add_argument("input", help="CSV dataset")
    data.add_argument("--labels", action="store_true", help="last column holds class labels")
    data.add_argument("--mask", help="0/1 CSV of observed cells to apply on top of the input")

    parser = _Parser(prog="fwpd", description="Clustering of incomplete data with a penalized dissimilarity.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("impute", parents=[common, data], help="fill missing cells with a baseline imputer")
    p.add_argument("--method", choices=["zero", "mean", "knn", "svd"], default="mean")
    p.add_argument("--class-balanced", action="store_true", help="mean of per-class means (needs --labels)")
    p.add_argument("--neighbors", type=int, default=5)
    p.add_argument("--eigen-fraction", type=float, default=0.10)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("dissim", parents=[common, data], help="write a pairwise dissimilarity matrix")
    p.add_argument("--kind", choices=["fwpd", "absent", "pds", "observed"], default="fwpd")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_dissim)

    p = sub.add_parser("kmeans", parents=[common, data], help="k-means on incomplete data")
    p.add_argument("-k", type=int, default=None, help="cluster count, default: number of classes")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--standard", action="store_true", help="plain k-means on complete data")
    p.add_argument("-o", "--output", required=True, help="labels CSV")
    p.add_argument("--trace", help="per-iteration CSV")
    p.add_argument("--centroids", help="final centroid CSV")
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("hac", parents=[common, data], help="agglomerative clustering")
    p.add_argument("--linkage", choices=["single", "average", "complete", "sl", "al", "cl"], default="average")
    p.add_argument("-k", type=int, default=None)
    p.add_argument("--standard", action="store_true", help="Euclidean distances on complete data")
    p.add_argument("--pds", action="store_true", help="partial distances")
    p.add_argument("-o", "--output", help="labels CSV of the k-cluster cut")
    p.add_argument("--dendrogram", help="merge table CSV")
    p.set_defaults(func=cmd_hac)

    p = sub.add_parser("inject", parents=[common], help="hide cells of a complete dataset")
    p.add_argument("input")
    p.add_argument("--labels", action="store_true")
    p.add_argument("--kind", choices=["mcar_cap", "patch"], default="mcar_cap")
    p.add_argument("--cap", type=float, default=0.5)
    p.add_argument("--image-side", type=int, default=0)
    p.add_argument("--patch-side", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mask-out", help="write the 0/1 observation mask here")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("experiment", parents=[common], help="run a seeded comparison")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--output-dir")
    p.add_argument("--format", choices=["csv", "markdown"], default="csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("score", parents=[common], help="compare two labelings or two score samples")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--compare", action="store_true", help="rank-sum test on two score columns")
    p.add_argument("--level", type=float, default=0.05)
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command != "experiment":
        args.alpha = 0.25 if args.alpha is None else args.alpha
        args.missing_token = "?" if args.missing_token is None else args.missing_token
    try:
        args.func(args)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
