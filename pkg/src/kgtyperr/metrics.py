"""Detection metrics and error-rate statistics.

The positive class is always "typing error": a verdict of ``error`` that
matches a ground-truth error is a true positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

CORRECT = "correct"
ERROR = "error"


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class RateEstimate:
    """A proportion with a symmetric two-sided confidence interval."""

    p_hat: float
    n: int
    halfwidth: float
    confidence: float = 0.95

    def __str__(self) -> str:
        return f"{self.p_hat:.4f} ± {self.halfwidth:.4f} (n={self.n}, {self.confidence:.0%})"


def confusion(verdicts: dict, truth: dict) -> ConfusionCounts:
    """Count verdict outcomes against ground truth.

    Both maps are keyed by (entity, type) and hold 'correct'/'error'.
    Every verdict must have a truth record.
    """
    c = ConfusionCounts()
    for key, decided in verdicts.items():
        actual = truth[key]
        if decided == ERROR and actual == ERROR:
            c.tp += 1
        elif decided == ERROR and actual == CORRECT:
            c.fp += 1
        elif decided == CORRECT and actual == ERROR:
            c.fn += 1
        else:
            c.tn += 1
    return c


def prf1(verdicts: dict, truth: dict) -> tuple[float, float, float]:
    """Precision/recall/F1 with positive = error.

    When there are no predicted positives, precision is 0 by convention;
    likewise recall with no actual positives. F1 is 0 when P + R = 0.
    """
    c = confusion(verdicts, truth)
    return prf1_from_counts(c)


def prf1_from_counts(c: ConfusionCounts) -> tuple[float, float, float]:
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return precision, recall, f1


def prf1_macro(verdicts: dict, truth: dict) -> tuple[float, float, float]:
    """Unweighted mean of per-type precision/recall/F1.

    Pairs are grouped by their asserted type; the micro variant (plain
    prf1) is the default reporting convention.
    """
    by_type: dict[str, ConfusionCounts] = {}
    for key, decided in verdicts.items():
        c = by_type.setdefault(key[1], ConfusionCounts())
        actual = truth[key]
        if decided == ERROR and actual == ERROR:
            c.tp += 1
        elif decided == ERROR and actual == CORRECT:
            c.fp += 1
        elif decided == CORRECT and actual == ERROR:
            c.fn += 1
        else:
            c.tn += 1
    if not by_type:
        return 0.0, 0.0, 0.0
    rows = [prf1_from_counts(c) for _, c in sorted(by_type.items())]
    n = len(rows)
    return (
        sum(r[0] for r in rows) / n,
        sum(r[1] for r in rows) / n,
        sum(r[2] for r in rows) / n,
    )


def average_precision(scores, positives) -> float:
    """AP over a ranking: mean of precision@rank at each positive's rank.

    ``scores`` are sorted descending; ties keep the stable input order.
    ``positives`` is a parallel bool sequence. Raises if no positive exists.
    """
    if len(scores) != len(positives):
        raise ValueError("scores and positives must be parallel")
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    hits = 0
    precisions = []
    for rank, i in enumerate(order, start=1):
        if positives[i]:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        raise ValueError("average precision is undefined without positives")
    return sum(precisions) / len(precisions)


def mean_average_precision(per_type: dict[str, tuple[list, list]]) -> tuple[float, dict[str, float], list[str]]:
    """Unweighted mean of per-type APs.

    ``per_type`` maps type -> (scores, positives). Types without any
    positive are excluded and reported back as skipped.
    """
    aps: dict[str, float] = {}
    skipped: list[str] = []
    for t in sorted(per_type):
        scores, positives = per_type[t]
        if not any(positives):
            skipped.append(t)
            continue
        aps[t] = average_precision(scores, positives)
    if not aps:
        raise ValueError("no type had positives; MAP undefined")
    return sum(aps.values()) / len(aps), aps, skipped


def error_rate_ci(k: int, n: int, confidence: float = 0.95, method: str = "normal") -> RateEstimate:
    """Binomial proportion with a symmetric CI.

    ``normal`` is the Wald interval z*sqrt(p(1-p)/n); ``wilson`` is the
    Wilson score interval (half the interval width is reported), a better
    choice for small n or extreme proportions.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= k <= n:
        raise ValueError("k must be in [0, n]")
    p = k / n
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    if method == "normal":
        halfwidth = z * math.sqrt(p * (1.0 - p) / n)
    elif method == "wilson":
        denom = 1.0 + z * z / n
        halfwidth = (z / denom) * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    else:
        raise ValueError(f"unknown CI method: {method}")
    return RateEstimate(p_hat=p, n=n, halfwidth=halfwidth, confidence=confidence)


def implied_sample_size(p_hat: float, halfwidth: float, confidence: float = 0.95) -> float:
    """Invert the normal-approximation halfwidth back to a sample size."""
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    return p_hat * (1.0 - p_hat) * (z / halfwidth) ** 2
