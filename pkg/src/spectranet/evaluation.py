"""Detection metrics: accuracy, AUC, per-class accuracy, mAP, reporting.

All metrics are emitted as fractions in [0,1]; percent formatting exists
only in the table renderer. Labels follow the loss convention 0 = real,
1 = fake; a score is the predicted probability of fake. Metrics that are
undefined for the given inputs (one class absent) appear as NaN in
reports, while the strict single-metric functions raise instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy.stats import rankdata

from .errors import ShapeError, UndefinedMetricError
from .model import ModelParams, forward


def _check_scores(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ShapeError(f"scores {scores.shape} and labels {labels.shape} must be equal-length 1-D")
    if scores.size == 0:
        raise ShapeError("empty input")
    if not np.all((labels == 0) | (labels == 1)):
        raise ShapeError("labels must be binary 0/1")
    return scores, labels.astype(np.int64)


def accuracy(scores, labels, threshold: float = 0.5) -> Tuple[float, float, float]:
    """(overall, real, fake) accuracy; score >= threshold classifies fake.

    A class with no examples gets NaN for its per-class accuracy.
    """
    scores, labels = _check_scores(scores, labels)
    preds = (scores >= threshold).astype(np.int64)
    acc = float(np.mean(preds == labels))
    real = labels == 0
    fake = labels == 1
    real_acc = float(np.mean(preds[real] == 0)) if real.any() else math.nan
    fake_acc = float(np.mean(preds[fake] == 1)) if fake.any() else math.nan
    return acc, real_acc, fake_acc


def auc(scores, labels) -> float:
    """P(random fake scores above random real), ties counted half.

    Mann-Whitney via average ranks; exact for modest n because the
    pairwise numerator is a multiple of 0.5.
    """
    scores, labels = _check_scores(scores, labels)
    n_fake = int(np.sum(labels == 1))
    n_real = int(np.sum(labels == 0))
    if n_fake == 0 or n_real == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    u = float(np.sum(ranks[labels == 1])) - n_fake * (n_fake + 1) / 2.0
    return u / (n_fake * n_real)


def average_precision(scores, labels, positive: int = 1) -> float:
    """Non-interpolated AP: mean of precision-at-hit over all positives.

    Ranking is a stable descending sort, so equal scores keep dataset
    order.
    """
    scores, labels = _check_scores(scores, labels)
    pos = labels == positive
    n_pos = int(np.sum(pos))
    if n_pos == 0:
        raise UndefinedMetricError(f"AP undefined: no examples of class {positive}")
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    cum = np.cumsum(hits)
    prec_at_hit = cum[hits] / (np.flatnonzero(hits) + 1.0)
    return float(prec_at_hit.sum() / n_pos)


def mean_average_precision(scores, labels) -> float:
    """Two-class mAP: fake ranked by score, real by negated score."""
    ap_fake = average_precision(scores, labels, positive=1)
    ap_real = average_precision(-np.asarray(scores, dtype=np.float64), labels, positive=0)
    return (ap_fake + ap_real) / 2.0


@dataclass(frozen=True)
class MetricReport:
    acc: float
    auc: float
    real_acc: float
    fake_acc: float
    map: float
    n_real: int
    n_fake: int


def compute_report(scores, labels) -> MetricReport:
    """All five metrics; class-dependent ones fall back to NaN markers."""
    scores, labels = _check_scores(scores, labels)
    acc_all, real_acc, fake_acc = accuracy(scores, labels)
    try:
        auc_v = auc(scores, labels)
    except UndefinedMetricError:
        auc_v = math.nan
    try:
        map_v = mean_average_precision(scores, labels)
    except UndefinedMetricError:
        map_v = math.nan
    return MetricReport(
        acc=acc_all, auc=auc_v, real_acc=real_acc, fake_acc=fake_acc, map=map_v,
        n_real=int(np.sum(labels == 0)), n_fake=int(np.sum(labels == 1)),
    )


def evaluate(params: ModelParams, records: Iterable) -> MetricReport:
    """Run inference over records and aggregate metrics."""
    scores = []
    labels = []
    for rec in records:
        scores.append(forward(rec, params).probability)
        labels.append(rec.label)
    if not scores:
        raise ShapeError("empty dataset")
    return compute_report(np.asarray(scores), np.asarray(labels))


_COLUMNS = ("ACC", "AUC", "R-Acc", "F-Acc", "mAP")


def _fields(r: MetricReport) -> Tuple[float, ...]:
    return (r.acc, r.auc, r.real_acc, r.fake_acc, r.map)


def report_csv(reports: dict[str, MetricReport]) -> str:
    """CSV, one row per split, metrics as fractions; NaN stays literal."""
    lines = ["split,acc,auc,real_acc,fake_acc,map,n_real,n_fake"]
    for name, r in reports.items():
        vals = ",".join(f"{v:.6f}" for v in _fields(r))
        lines.append(f"{name},{vals},{r.n_real},{r.n_fake}")
    return "\n".join(lines) + "\n"


def render_table(reports: dict[str, MetricReport]) -> str:
    """Aligned text table with percentages, mirroring the usual layout."""
    def cell(v: float) -> str:
        return "   n/a" if math.isnan(v) else f"{100.0 * v:6.2f}"

    name_w = max([len(n) for n in reports] + [5])
    header = "  ".join([f"{'split':<{name_w}}"] + [f"{c:>6}" for c in _COLUMNS])
    rows = [header, "-" * len(header)]
    for name, r in reports.items():
        rows.append("  ".join([f"{name:<{name_w}}"] + [cell(v) for v in _fields(r)]))
    return "\n".join(rows) + "\n"
