"""Multi-label evaluation: sample metrics, per-label P/R/F1 and the MLCM.

Label matrices are ``(N, L)`` arrays of 0/1 with columns m1..m6, infeasible.
Every ratio with a zero denominator is defined as 0, except Jaccard on a
sample whose true and predicted sets are both empty, which counts as 1.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .datagen import LABEL_NAMES


def _check(true, pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(true)
    p = np.asarray(pred)
    if t.shape != p.shape or t.ndim != 2:
        raise ValueError(f"label matrices must share a 2-D shape, got {t.shape} and {p.shape}")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("label matrices must hold only 0 and 1")
    return t.astype(bool), p.astype(bool)


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _hm(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def hamming_loss(true, pred) -> float:
    t, p = _check(true, pred)
    return float((t ^ p).mean()) if t.size else 0.0


def jaccard_index(true, pred) -> float:
    t, p = _check(true, pred)
    inter = (t & p).sum(axis=1)
    union = (t | p).sum(axis=1)
    per = np.where(union > 0, _ratio(inter, union), 1.0)
    return float(per.mean()) if len(per) else 0.0


def sample_accuracy(true, pred) -> float:
    t, p = _check(true, pred)
    return float((t == p).all(axis=1).mean()) if len(t) else 0.0


@dataclass
class LabelScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    hamming_loss: float
    jaccard_index: float
    sample_accuracy: float
    per_label: dict[str, LabelScores]
    sample: LabelScores
    micro: LabelScores
    macro: LabelScores
    weighted: LabelScores
    n_samples: int
    label_names: list[str] = field(default_factory=lambda: list(LABEL_NAMES))

    def to_dict(self) -> dict:
        def s(x: LabelScores):
            return {"precision": x.precision, "recall": x.recall, "f1": x.f1, "support": x.support}
        return {
            "n_samples": self.n_samples,
            "hamming_loss": self.hamming_loss,
            "jaccard_index": self.jaccard_index,
            "sample_accuracy": self.sample_accuracy,
            "per_label": {k: s(v) for k, v in self.per_label.items()},
            "sample_avg": s(self.sample),
            "micro_avg": s(self.micro),
            "macro_avg": s(self.macro),
            "weighted_avg": s(self.weighted),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        """Comma-separated table: class, precision, recall, F1-score, weight."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1-score", "weight"])
        rows = list(self.per_label.items()) + [
            ("micro avg", self.micro), ("macro avg", self.macro),
            ("weighted avg", self.weighted), ("samples avg", self.sample)]
        for name, sc in rows:
            w.writerow([name, f"{sc.precision:.4f}", f"{sc.recall:.4f}", f"{sc.f1:.4f}",
                        sc.support])
        return buf.getvalue()


def precision_recall_f1(true, pred, label_names=None) -> dict:
    """Per-label, sample, micro, macro and support-weighted precision/recall/F1.

    Aggregate F1 values are the harmonic mean of the aggregate precision and
    recall; ``label_mean_f1`` is the plain mean of per-label F1 scores.
    """
    t, p = _check(true, pred)
    names = list(label_names or (LABEL_NAMES if t.shape[1] == len(LABEL_NAMES)
                                 else [f"l{j + 1}" for j in range(t.shape[1])]))
    tp = (t & p).sum(axis=0)
    n_pred = p.sum(axis=0)
    support = t.sum(axis=0)
    prec = _ratio(tp, n_pred)
    rec = _ratio(tp, support)
    f1 = _ratio(2 * prec * rec, prec + rec)
    per = {n: LabelScores(float(prec[j]), float(rec[j]), float(f1[j]), int(support[j]))
           for j, n in enumerate(names)}
    total = int(support.sum())
    mp, mr = float(prec.mean()), float(rec.mean())
    micro_p = float(_ratio(tp.sum(), n_pred.sum()))
    micro_r = float(_ratio(tp.sum(), support.sum()))
    if total > 0:
        wp = float((prec * support).sum() / total)
        wr = float((rec * support).sum() / total)
    else:
        wp = wr = 0.0
    inter = (t & p).sum(axis=1)
    sp = float(_ratio(inter, p.sum(axis=1)).mean()) if len(t) else 0.0
    sr = float(_ratio(inter, t.sum(axis=1)).mean()) if len(t) else 0.0
    return {
        "per_label": per,
        "sample": LabelScores(sp, sr, _hm(sp, sr), total),
        "micro": LabelScores(micro_p, micro_r, _hm(micro_p, micro_r), total),
        "macro": LabelScores(mp, mr, _hm(mp, mr), total),
        "weighted": LabelScores(wp, wr, _hm(wp, wr), total),
        "label_mean_f1": float(f1.mean()),
    }


def evaluate(true, pred, label_names=None) -> MetricsReport:
    prf = precision_recall_f1(true, pred, label_names)
    return MetricsReport(
        hamming_loss(true, pred), jaccard_index(true, pred), sample_accuracy(true, pred),
        prf["per_label"], prf["sample"], prf["micro"], prf["macro"], prf["weighted"],
        int(np.asarray(true).shape[0]), list(prf["per_label"]))


@dataclass
class MlcmMatrix:
    """Rows: true labels then NTL; columns: predicted labels then NPL."""

    counts: np.ndarray
    label_names: list[str]

    @property
    def row_names(self) -> list[str]:
        return self.label_names + ["NTL"]

    @property
    def col_names(self) -> list[str]:
        return self.label_names + ["NPL"]

    def normalized(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, sums, out=np.zeros_like(self.counts), where=sums > 0)

    def to_dict(self) -> dict:
        return {"rows": self.row_names, "columns": self.col_names,
                "counts": self.counts.tolist()}


def mlcm_confusion(true, pred, label_names=None) -> MlcmMatrix:
    """Multi-label confusion matrix with a no-true-label row and a no-predicted-label column.

    Per sample: each correctly predicted label adds 1 on the diagonal; each
    missed true label spreads 1 uniformly over the predicted labels that are
    not true, or goes to NPL if there are none; a sample without true labels
    adds 1 to (NTL, p) for each predicted p, or to (NTL, NPL) if nothing is
    predicted.  Extra predictions in a sample with no missed labels are not
    counted, so each true-label row sums to that label's support.
    """
    t, p = _check(true, pred)
    L = t.shape[1]
    names = list(label_names or (LABEL_NAMES if L == len(LABEL_NAMES)
                                 else [f"l{j + 1}" for j in range(L)]))
    C = np.zeros((L + 1, L + 1))
    for ti, pi in zip(t, p):
        T = np.flatnonzero(ti)
        P = np.flatnonzero(pi)
        if len(T) == 0:
            if len(P) == 0:
                C[L, L] += 1
            else:
                C[L, P] += 1
            continue
        correct = np.flatnonzero(ti & pi)
        C[correct, correct] += 1
        missed = np.flatnonzero(ti & ~pi)
        spurious = np.flatnonzero(pi & ~ti)
        for m in missed:
            if len(spurious):
                C[m, spurious] += 1.0 / len(spurious)
            else:
                C[m, L] += 1
    return MlcmMatrix(C, names)
