"""Seeded comparison of the penalized methods against imputation baselines.

Every run ``r`` derives ``seed_r = base_seed + r`` and splits it with
:class:`numpy.random.SeedSequence` into two child streams: the first draws
the missingness mask, the second the initial k-means assignment. All methods
of a run see the same masked data and the same initial assignment, and each
is scored against the standard algorithm run on the fully observed data.

Method names
------------
``kmeans_fwpd``
    k-means under the penalized dissimilarity.
``hac_fwpd:{sl,al,cl}``
    Agglomerative clustering under the penalized dissimilarity.
``{zi,mi,svdi,knni}+kmeans``, ``{zi,mi,svdi,knni}+hac:{sl,al,cl}``
    Imputation followed by the standard algorithm. ``knni`` takes an optional
    neighbour count, e.g. ``knni5``.
``pds+hac:{sl,al,cl}``
    Standard agglomerative clustering on partial distances.
"""
from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import baselines
from .dataset import IncompleteDataset, load_csv, normalize_zscore
from .dissimilarity import DissimilarityContext, check_alpha, pairwise_matrix
from .evaluation import ari, nmi, wilcoxon_rank_sum
from .hac import _kind, build, cut
from .kmeans import init_random, run
from .missingness import MissingnessSpec

__all__ = [
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentReport",
    "parse_config",
    "run_experiment",
    "emit_tables",
]

_METHOD_RE = re.compile(
    r"^(?:kmeans_fwpd|hac_fwpd:(sl|al|cl)|(zi|mi|svdi|knni\d*)\+(kmeans|hac:(sl|al|cl))|pds\+hac:(sl|al|cl))$"
)


class ExperimentError(RuntimeError):
    """A method failed inside a run."""

    def __init__(self, method: str, run_index: int, cause: BaseException):
        self.method = method
        self.run_index = run_index
        self.cause = cause
        super().__init__(f"method {method!r} failed in run {run_index}: {cause}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; the report is a pure function of it.

    ``k=None`` takes the number of classes in the labels. ``dataset`` may be
    a CSV path or ``"iris"`` for the bundled copy.
    """

    dataset: str
    methods: tuple = ("kmeans_fwpd",)
    alpha: float = 0.25
    k: Optional[int] = None
    missingness: MissingnessSpec = field(default_factory=lambda: MissingnessSpec("mcar_cap", 0.5))
    runs: int = 1
    base_seed: int = 0
    output_dir: Optional[str] = None
    has_labels: bool = True
    missing_token: str = "?"
    normalize: bool = True
    svd_fraction: float = 0.10
    level: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ValueError("method list is empty")
        for m in self.methods:
            if not _METHOD_RE.match(m):
                raise ValueError(f"unknown method {m!r}")
        check_alpha(self.alpha)
        if self.runs < 1:
            raise ValueError(f"run count must be >= 1, got {self.runs}")
        if self.k is not None and self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.dataset != "iris" and not Path(self.dataset).is_file():
            raise ValueError(f"dataset file {self.dataset!r} does not exist")

    def load(self) -> IncompleteDataset:
        if self.dataset == "iris":
            from .dataset import load_iris

            return load_iris()
        return load_csv(self.dataset, self.missing_token, self.has_labels)


_KEYS = {
    "dataset": str,
    "methods": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    "alpha": float,
    "k": lambda v: None if v in ("", "from-labels") else int(v),
    "runs": int,
    "seed": int,
    "output": str,
    "labels": lambda v: v.lower() in ("1", "true", "yes"),
    "missing_token": str,
    "normalize": lambda v: v.lower() in ("1", "true", "yes"),
    "svd_fraction": float,
    "level": float,
    "missingness": str,
    "cap": float,
    "image_side": int,
    "patch_side": int,
}
_RENAME = {"seed": "base_seed", "output": "output_dir", "labels": "has_labels"}


def parse_config(text: str = "", overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """Build a config from ``key = value`` lines, then apply ``overrides``.

    Recognized keys: dataset, methods (comma separated), alpha, k
    (an integer or ``from-labels``), runs, seed, output, labels, missing_token,
    normalize, svd_fraction, level, missingness (``mcar_cap``, ``patch`` or
    ``none``), cap, image_side, patch_side. ``#`` starts a comment.
    """
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value
    raw.update(overrides or {})
    parsed = {}
    for key, value in raw.items():
        if key not in _KEYS:
            raise ValueError(f"unknown config key {key!r}")
        try:
            parsed[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ValueError(f"bad value {value!r} for {key}: {exc}") from None
    if "dataset" not in parsed:
        raise ValueError("config needs a dataset")
    miss = MissingnessSpec(
        parsed.pop("missingness", "mcar_cap"),
        cap=parsed.pop("cap", 0.5),
        image_side=parsed.pop("image_side", 0),
        patch_side=parsed.pop("patch_side", 0),
    )
    kwargs = {_RENAME.get(k, k): v for k, v in parsed.items()}
    return ExperimentConfig(missingness=miss, **kwargs)


@dataclass
class ExperimentReport:
    """Per-run scores, their summaries and verdicts against the lead method.

    ``scores[method]`` has shape ``(runs, 2)`` holding NMI and ARI.
    ``verdicts[method]`` maps ``"nmi"``/``"ari"`` to the verdict of the lead
    method against ``method``: ``win`` means the lead method scored higher.
    It stays empty with one method or fewer than five runs.
    """

    config: ExperimentConfig
    methods: List[str]
    scores: Dict[str, np.ndarray]
    lead: str
    verdicts: Dict[str, Dict[str, str]] = field(default_factory=dict)
    p_values: Dict[str, Dict[str, float]] = field(default_factory=dict)
    input_hashes: List[Dict[str, str]] = field(default_factory=list)

    def mean(self, method) -> np.ndarray:
        return self.scores[method].mean(axis=0)

    def std(self, method) -> np.ndarray:
        return self.scores[method].std(axis=0, ddof=1) if len(self.scores[method]) > 1 else np.zeros(2)

    def wtl(self, index: str = "nmi") -> tuple:
        v = [self.verdicts[m][index] for m in self.verdicts]
        return v.count("win"), v.count("tie"), v.count("loss")


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode() + str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def _algorithm(method: str):
    """(family, linkage) of the standard algorithm a method is compared against."""
    if method == "kmeans_fwpd" or method.endswith("+kmeans"):
        return "kmeans", None
    return "hac", _kind(method.rsplit(":", 1)[1])


def _impute(name: str, ds: IncompleteDataset, cfg: ExperimentConfig):
    if name == "zi":
        return baselines.impute_zero(ds).values
    if name == "mi":
        return baselines.impute_mean(ds, class_balanced=ds.labels is not None).values
    if name == "svdi":
        return baselines.impute_svd(ds, cfg.svd_fraction).values
    k = int(name[4:]) if len(name) > 4 else 5
    return baselines.impute_knn(ds, k).values


def _run_method(method, ds, cfg, k, init):
    """Labels of one method on the masked dataset ``ds``."""
    family, kind = _algorithm(method)
    if method == "kmeans_fwpd":
        ctx = DissimilarityContext.from_dataset(ds, cfg.alpha)
        return run(ds, ctx, k, init=init).labels
    if method.startswith("hac_fwpd"):
        ctx = DissimilarityContext.from_dataset(ds, cfg.alpha)
        return cut(build(pairwise_matrix(ctx, ds), kind), k)
    if method.startswith("pds+"):
        return cut(build(baselines.pds_matrix(ds), kind), k)
    completed = _impute(method.split("+", 1)[0], ds, cfg)
    if family == "kmeans":
        return run(IncompleteDataset(completed), None, k, init=init).labels
    return cut(baselines.standard_hac(completed, kind), k)


def _reference(family, kind, full, k, init):
    if family == "kmeans":
        return run(full, None, k, init=init).labels
    return cut(baselines.standard_hac(full.values, kind), k)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    full = cfg.load()
    if not full.fully_observed:
        raise ValueError("experiments need a fully observed dataset to build references")
    if cfg.normalize:
        full = normalize_zscore(full)
    k = cfg.k
    if k is None:
        if full.labels is None:
            raise ValueError("k is 'from-labels' but the dataset has no labels")
        k = full.n_classes
    if not 2 <= k < full.n:
        raise ValueError(f"need 2 <= k < n, got k={k}, n={full.n}")

    methods = list(cfg.methods)
    scores = {m: np.zeros((cfg.runs, 2)) for m in methods}
    hashes = []
    for r in range(cfg.runs):
        mask_seed, init_seed = np.random.SeedSequence(cfg.base_seed + r).spawn(2)
        masked = cfg.missingness.apply(full, mask_seed) if cfg.missingness.kind != "none" else full
        init = init_random(full.n, k, np.random.default_rng(init_seed))
        refs = {}
        run_hashes = {}
        for method in methods:
            key = _algorithm(method)
            try:
                if key not in refs:
                    refs[key] = _reference(*key, full, k, init)
                labels = _run_method(method, masked, cfg, k, init)
            except Exception as exc:
                raise ExperimentError(method, r, exc) from exc
            # inputs are hashed per method to make the sharing auditable
            run_hashes[method] = _digest(masked.mask, masked.filled(0.0), init)
            scores[method][r] = nmi(refs[key], labels), ari(refs[key], labels)
        hashes.append(run_hashes)

    lead = next((m for m in methods if "fwpd" in m), methods[0])
    report = ExperimentReport(cfg, methods, scores, lead, input_hashes=hashes)
    if cfg.runs >= 5:
        for m in methods:
            if m == lead:
                continue
            report.verdicts[m], report.p_values[m] = {}, {}
            for col, index in enumerate(("nmi", "ari")):
                v = wilcoxon_rank_sum(scores[lead][:, col], scores[m][:, col], cfg.level)
                report.verdicts[m][index] = v.verdict
                report.p_values[m][index] = v.p_value
    return report


# ---------------------------------------------------------------------- output


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def summary_rows(report: ExperimentReport):
    rows = []
    for m in report.methods:
        mu, sd = report.mean(m), report.std(m)
        rows.append([m, _fmt(mu[0]), _fmt(sd[0]), _fmt(mu[1]), _fmt(sd[1])])
    return rows


def emit_tables(report: ExperimentReport, out_dir, fmt: str = "csv") -> List[Path]:
    """Write the summary table, the W-T-L table and per-run scores.

    Returns the written paths. ``fmt`` is ``"csv"`` or ``"markdown"``; the
    per-run scores are always CSV.
    """
    if not report.methods:
        raise ValueError("report has no methods")
    if fmt not in ("csv", "markdown"):
        raise ValueError(f"unknown table format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["method", "nmi_mean", "nmi_sd", "ari_mean", "ari_sd"]
    rows = summary_rows(report)
    wtl_header = ["method", "nmi_verdict", "nmi_p", "ari_verdict", "ari_p"]
    wtl_rows = [
        [m, report.verdicts[m]["nmi"], _fmt(report.p_values[m]["nmi"]),
         report.verdicts[m]["ari"], _fmt(report.p_values[m]["ari"])]
        for m in report.verdicts
    ]
    written = []
    if fmt == "csv":
        written.append(_write_csv(out / "summary.csv", header, rows))
        if wtl_rows:
            written.append(_write_csv(out / "wtl.csv", wtl_header, wtl_rows))
    else:
        lines = [f"# {report.config.dataset}: scores against the standard algorithm", ""]
        lines += _md_table(header, rows)
        if wtl_rows:
            lines += ["", f"## {report.lead} against each baseline", ""]
            lines += _md_table(wtl_header, wtl_rows)
            for index in ("nmi", "ari"):
                w, t, l = report.wtl(index)
                lines.append(f"\n{index.upper()} W-T-L: {w}-{t}-{l}")
        path = out / "summary.md"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    run_rows = [
        [m, r, repr(float(report.scores[m][r, 0])), repr(float(report.scores[m][r, 1]))]
        for m in report.methods
        for r in range(report.config.runs)
    ]
    written.append(_write_csv(out / "runs.csv", ["method", "run", "nmi", "ari"], run_rows))
    return written


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return lines

