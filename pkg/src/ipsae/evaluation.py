"""Classification protocols and metrics.

Prototypes are the decoded class attribute vectors ``W^T s_c``. A test
sample gets the label of the prototype with the highest cosine similarity.
Argmax ties resolve to the earliest candidate in the given order.

How the query for sample ``x`` is formed depends on the mode (enriched
models only; for original-space models every mode compares ``x`` with
``P_c``):

``candidate_conditioned`` (default)
    ``cos(x (+) s_c, P_c)``: each candidate is scored with its own
    attributes appended, so no label knowledge is needed.
``oracle_enriched``
    ``cos(x (+) s_true, P_c)``: appends the *true* class attributes.
    Diagnostic only, it reads the test labels.
``visual_slice``
    ``cos(x, P_c[:d])``: the visual block of the prototype only.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _backend, linalg
from .data import GzslSplit, ZslDataset, sample_attributes_for
from .errors import (
    DimensionMismatch,
    EmptyCandidates,
    EmptyMatrix,
    LengthMismatch,
    NonPositiveLambda,
    SingleClass,
)
from .model import IpSaeModel, SpaceMode, decode, fit


class ClassifyMode(str, enum.Enum):
    ORACLE_ENRICHED = "oracle_enriched"
    CANDIDATE_CONDITIONED = "candidate_conditioned"
    VISUAL_SLICE = "visual_slice"

    @classmethod
    def parse(cls, text: str) -> "ClassifyMode":
        aliases = {"oracle": cls.ORACLE_ENRICHED, "candidate": cls.CANDIDATE_CONDITIONED,
                   "visual": cls.VISUAL_SLICE}
        return aliases.get(text) or cls(text)


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between ``u`` and ``v``; ``-inf`` if either is zero."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.size != v.size:
        raise LengthMismatch(f"vectors of length {u.size} and {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return -math.inf
    return float(u @ v / (nu * nv))


def score_table(queries: np.ndarray, tails: np.ndarray, protos: np.ndarray) -> np.ndarray:
    """``cos([q_i ; tail_c], P_c)`` for all rows ``q_i`` and candidates ``c``.

    ``queries`` is (n, d), ``tails`` (C, t) and ``protos`` (C, d + t).
    Pairs with a zero norm score ``-inf``.
    """
    d = queries.shape[1]
    tail_dot = np.einsum("ct,ct->c", tails, protos[:, d:])
    tail_sq = np.einsum("ct,ct->c", tails, tails)
    q_sq = np.einsum("nd,nd->n", queries, queries)
    den = np.sqrt(q_sq[:, None] + tail_sq[None, :]) * np.linalg.norm(protos, axis=1)[None, :]
    num = queries @ protos[:, :d].T + tail_dot[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out[den == 0.0] = -np.inf
    return out


def classify(model: IpSaeModel, dataset: ZslDataset, test_indices,
             candidate_classes: Sequence[int],
             mode: ClassifyMode | str = ClassifyMode.CANDIDATE_CONDITIONED) -> np.ndarray:
    """Top-1 nearest-prototype labels for the listed samples.

    Prototypes are the decoded candidate attributes ``W^T s_c``. Ties go to
    the earliest candidate in ``candidate_classes``.

    Parameters
    ----------
    model : IpSaeModel
    dataset : ZslDataset
    test_indices : sequence of int
    candidate_classes : sequence of int
    mode : ClassifyMode or str
        How an enriched model's query gets its attribute tail: from each
        candidate, from the true label (diagnostic), or not at all.

    Returns
    -------
    ndarray of int64
        One predicted class id per test index.
    """
    mode = ClassifyMode(mode)
    cands = np.asarray(list(candidate_classes), dtype=np.int64)
    if cands.size == 0:
        raise EmptyCandidates("no candidate classes")
    if model.d != dataset.d or model.k != dataset.k:
        raise DimensionMismatch(
            f"model expects d={model.d}, k={model.k}; dataset has d={dataset.d}, k={dataset.k}")
    if cands.min() < 0 or cands.max() >= dataset.n_classes:
        raise DimensionMismatch("candidate class id outside the attribute table")
    idx = np.asarray(test_indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        return np.empty(0, dtype=np.int64)

    cand_attrs = dataset.class_attributes[:, cands]
    protos = np.ascontiguousarray(decode(model, cand_attrs).T)
    X = np.ascontiguousarray(dataset.features[:, idx].T)
    no_tail = np.zeros((cands.size, 0))
    if not model.enriched:
        scores = score_table(X, no_tail, protos)
    elif mode is ClassifyMode.CANDIDATE_CONDITIONED:
        scores = score_table(X, np.ascontiguousarray(cand_attrs.T), protos)
    elif mode is ClassifyMode.ORACLE_ENRICHED:
        true_attrs = sample_attributes_for(dataset, idx).T
        scores = score_table(np.hstack([X, true_attrs]), no_tail, protos)
    else:
        scores = score_table(X, no_tail, np.ascontiguousarray(protos[:, :model.d]))
    return cands[np.argmax(scores, axis=1)]


# -- metrics ------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes, both in ``classes`` order."""

    classes: tuple[int, ...]
    counts: np.ndarray

    def to_dict(self) -> dict:
        return {"classes": list(self.classes), "counts": self.counts.tolist()}


def confusion_matrix(pred, truth, classes: Sequence[int]) -> ConfusionMatrix:
    pred, truth = np.asarray(pred, dtype=np.int64), np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.size} predictions for {truth.size} labels")
    classes = tuple(int(c) for c in classes)
    pos = {c: i for i, c in enumerate(classes)}
    try:
        r = np.array([pos[int(t)] for t in truth], dtype=np.int64)
        c = np.array([pos[int(p)] for p in pred], dtype=np.int64)
    except KeyError as exc:
        raise DimensionMismatch(f"class {exc.args[0]} not in the confusion class list") from None
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(counts, (r, c), 1)
    return ConfusionMatrix(classes, counts)


def per_class_accuracy(pred, truth, classes: Iterable[int]) -> tuple[dict[int, float], float]:
    """Top-1 accuracy per class and its unweighted mean.

    Classes without test samples are skipped, both in the map and the mean.
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.size} predictions for {truth.size} labels")
    acc = {}
    for c in classes:
        mask = truth == c
        total = int(mask.sum())
        if total:
            acc[int(c)] = int((pred[mask] == c).sum()) / total
    mean = float(np.mean(list(acc.values()))) if acc else 0.0
    return acc, mean


def precision_recall_f1(confusion: ConfusionMatrix, over: Sequence[int] | None = None) -> dict:
    """One-vs-rest precision, recall and F1 per class plus their macro means.

    Zero denominators give 0. ``over`` restricts the macro averages to a
    subset of the confusion classes.
    """
    counts = np.asarray(confusion.counts)
    if counts.size == 0:
        raise EmptyMatrix("confusion matrix is empty")
    tp = np.diag(counts).astype(float)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    per_class = {}
    for i, c in enumerate(confusion.classes):
        p = tp[i] / (tp[i] + fp[i]) if tp[i] + fp[i] else 0.0
        r = tp[i] / (tp[i] + fn[i]) if tp[i] + fn[i] else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        per_class[c] = {"precision": p, "recall": r, "f1": f}
    keys = list(confusion.classes) if over is None else [int(c) for c in over]
    return {
        "macro_precision": float(np.mean([per_class[c]["precision"] for c in keys])),
        "macro_recall": float(np.mean([per_class[c]["recall"] for c in keys])),
        "macro_f1": float(np.mean([per_class[c]["f1"] for c in keys])),
        "per_class": per_class,
    }


def harmonic_mean(acc_seen: float, acc_unseen: float) -> float:
    total = acc_seen + acc_unseen
    return 2.0 * acc_seen * acc_unseen / total if total > 0 else 0.0


def silhouette_score(points, labels) -> dict:
    """Euclidean silhouette of column-sample ``points`` (m x q).

    Samples in singleton clusters score 0, as does any sample whose
    ``max(a, b)`` is 0.
    """
    points = linalg.as_matrix(points, "points")
    labels = np.asarray(labels)
    if labels.size != points.shape[1]:
        raise LengthMismatch(f"{labels.size} labels for {points.shape[1]} points")
    uniq, codes = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise SingleClass("silhouette needs at least two classes")
    per_sample = _backend.silhouette_samples(
        np.ascontiguousarray(points.T), codes.astype(np.int64), int(uniq.size))
    return {"per_sample": per_sample, "mean": float(per_sample.mean())}


# -- protocols ----------------------------------------------------------------------

@dataclass(frozen=True)
class ZslReport:
    per_class_accuracy: dict[int, float]
    mean_per_class_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: ConfusionMatrix


@dataclass(frozen=True)
class GzslReport:
    acc_seen: float
    acc_unseen: float
    harmonic_mean: float
    overall: ZslReport
    seen: ZslReport
    unseen: ZslReport


def _report(pred, truth, classes, over=None) -> ZslReport:
    conf = confusion_matrix(pred, truth, classes)
    over = list(classes) if over is None else list(over)
    acc, mean = per_class_accuracy(pred, truth, over)
    prf = precision_recall_f1(conf, over=over)
    return ZslReport(acc, mean, prf["macro_precision"], prf["macro_recall"],
                     prf["macro_f1"], conf)


def run_zsl(model: IpSaeModel, dataset: ZslDataset,
            mode: ClassifyMode | str = ClassifyMode.CANDIDATE_CONDITIONED) -> ZslReport:
    """Conventional ZSL: every unseen sample, unseen classes as candidates."""
    classes = sorted(dataset.unseen_classes)
    idx = dataset.indices_of(classes)
    pred = classify(model, dataset, idx, classes, mode)
    return _report(pred, dataset.labels[idx], classes)


def run_gzsl(model: IpSaeModel, dataset: ZslDataset, split: GzslSplit,
             mode: ClassifyMode | str = ClassifyMode.CANDIDATE_CONDITIONED) -> GzslReport:
    """Generalised ZSL: held-out seen plus unseen samples, all classes as candidates."""
    classes = sorted(dataset.seen_classes + dataset.unseen_classes)
    idx = np.asarray(split.test_indices, dtype=np.int64)
    pred = classify(model, dataset, idx, classes, mode)
    truth = dataset.labels[idx]
    seen_mask = np.isin(truth, dataset.seen_classes)
    seen = _report(pred[seen_mask], truth[seen_mask], classes, dataset.seen_classes)
    unseen = _report(pred[~seen_mask], truth[~seen_mask], classes, dataset.unseen_classes)
    a_s, a_u = seen.mean_per_class_accuracy, unseen.mean_per_class_accuracy
    return GzslReport(a_s, a_u, harmonic_mean(a_s, a_u), _report(pred, truth, classes),
                      seen, unseen)


class SweepRow(NamedTuple):
    lam: float
    accuracy: float
    hubness_bound: float
    nullified_modes: int


def lambda_sweep(dataset: ZslDataset, train_indices, grid: Sequence[float],
                 mode: ClassifyMode | str = ClassifyMode.CANDIDATE_CONDITIONED,
                 space_mode: SpaceMode | str = SpaceMode.ENRICHED) -> list[SweepRow]:
    """Fit and evaluate conventional ZSL once per lambda, in grid order."""
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty lambda grid")
    if any(not g > 0 for g in grid):
        raise NonPositiveLambda("every lambda in the grid must be positive")
    alpha = linalg.spectral_norm(sample_attributes_for(dataset, train_indices))
    rows = []
    for lam in grid:
        model = fit(dataset, train_indices, lam, space_mode)
        report = run_zsl(model, dataset, mode)
        rows.append(SweepRow(lam, report.mean_per_class_accuracy,
                             alpha ** 2 / (alpha ** 2 + lam), model.nullified_modes))
    return rows


# -- emission -----------------------------------------------------------------------

def report_document(report: ZslReport | GzslReport, *, protocol: str, mode, lam: float,
                    diagnostics: dict | None = None) -> dict:
    """JSON-ready document for a ZSL or GZSL report."""
    main = report.overall if isinstance(report, GzslReport) else report
    doc = {
        "protocol": protocol,
        "mode": ClassifyMode(mode).value,
        "lambda": lam,
        "per_class_accuracy": {str(c): v for c, v in main.per_class_accuracy.items()},
        "mean_per_class_accuracy": main.mean_per_class_accuracy,
        "macro_precision": main.macro_precision,
        "macro_recall": main.macro_recall,
        "macro_f1": main.macro_f1,
        "acc_seen": None,
        "acc_unseen": main.mean_per_class_accuracy,
        "harmonic_mean": None,
        "confusion": main.confusion.to_dict(),
        "diagnostics": dict(diagnostics or {}),
    }
    if isinstance(report, GzslReport):
        doc.update(acc_seen=report.acc_seen, acc_unseen=report.acc_unseen,
                   harmonic_mean=report.harmonic_mean)
    return doc


def write_confusion_csv(path, confusion: ConfusionMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred", *confusion.classes])
        for c, row in zip(confusion.classes, confusion.counts):
            w.writerow([c, *row.tolist()])


def sweep_csv_lines(rows: Sequence[SweepRow]) -> list[str]:
    lines = ["lambda,accuracy,hubness_bound,nullified_modes"]
    lines += [f"{r.lam!r},{r.accuracy!r},{r.hubness_bound!r},{r.nullified_modes}" for r in rows]
    return lines
