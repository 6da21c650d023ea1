"""Sample selection for annotation: uncertainty sampling and expected
error reduction, plus the round protocol that moves annotated pairs from
the noisy pool into the gold pool."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from . import autodiff as ad

logger = logging.getLogger(__name__)

LN2 = float(np.log(2.0))


@dataclass
class SelectionRequest:
    k: int
    strategy: str = "us"  # us | err
    err_pool_subsample: int = 256
    err_expectation: str = "model"  # model | pessimistic


@dataclass(frozen=True)
class Annotation:
    entity: str
    queried_type: str
    verdict: str  # correct | error
    true_type: str | None
    annotator_id: str
    timestamp: float


@dataclass
class AnnotationCard:
    """What an annotator sees for one queried pair."""

    card_id: str
    entity: str
    name: str
    description: str
    relations: list[str]
    queried_type: str
    model_score: float

    def to_dict(self) -> dict:
        return {
            "card_id": self.card_id,
            "entity": self.entity,
            "name": self.name,
            "description": self.description,
            "relations": list(self.relations),
            "queried_type": self.queried_type,
            "model_score": self.model_score,
        }


@dataclass
class AnnotationResponse:
    verdict: str | None = None  # correct | error | None when skipped
    true_type: str | None = None
    skip: bool = False


class Annotator(Protocol):
    annotator_id: str

    def annotate(self, cards: list[AnnotationCard]) -> list[AnnotationResponse]: ...


class OracleAnnotator:
    """Answers from hidden ground truth; used by tests and scripted runs."""

    def __init__(self, truth: dict[tuple[str, str], tuple[str, str]], annotator_id: str = "oracle"):
        self.truth = truth
        self.annotator_id = annotator_id

    def annotate(self, cards: list[AnnotationCard]) -> list[AnnotationResponse]:
        out = []
        for card in cards:
            verdict, true_type = self.truth[(card.entity, card.queried_type)]
            out.append(AnnotationResponse(verdict=verdict, true_type=true_type if verdict == "error" else None))
        return out


# ---------------------------------------------------------------------------
# uncertainty sampling


def binary_entropy(q: np.ndarray) -> np.ndarray:
    q = np.clip(q, ad.LOG_FLOOR, 1.0 - ad.LOG_FLOOR)
    return -(q * np.log(q) + (1.0 - q) * np.log(1.0 - q))


def uncertainty_score(y_probs: np.ndarray) -> float:
    """Summed per-type binary entropy of the noise-model output."""
    return float(np.sum(binary_entropy(np.asarray(y_probs, dtype=np.float64))))


def select_us(pool_scores: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest scores; ties keep the earlier pool index."""
    n = len(pool_scores)
    k = min(k, n)
    order = sorted(range(n), key=lambda i: (-pool_scores[i], i))
    return order[:k]


# ---------------------------------------------------------------------------
# expected error reduction


def err_score(
    candidate,
    eval_items: list,
    build_loss: Callable[[list], ad.Tensor],
    store: ad.ParamStore,
    p_correct: float,
    as_noisy: Callable[[object], object],
    as_gold: Callable[[object, str], object],
    expectation: str = "model",
) -> float:
    """Norm of the gradient change from hypothetically annotating a pair.

    The current-loss gradient places the candidate in the noisy pool; the
    post-annotation gradient places it in the gold pool with a verdict.
    The unknown verdict is resolved by expectation under the model's own
    belief ``p_correct`` (or pessimistically, taking the max change).
    Non-finite gradients disqualify the candidate with -inf.
    """
    order = store.names()

    def gradient(items) -> np.ndarray:
        return ad.flatten_grads(ad.grad(build_loss(items), store), order)

    try:
        g_now = gradient(eval_items + [as_noisy(candidate)])
        g_correct = gradient(eval_items + [as_gold(candidate, "correct")])
        g_error = gradient(eval_items + [as_gold(candidate, "error")])
    except ad.NonFiniteError:
        return float("-inf")
    if not (np.all(np.isfinite(g_now)) and np.all(np.isfinite(g_correct)) and np.all(np.isfinite(g_error))):
        return float("-inf")
    if expectation == "model":
        g_after = p_correct * g_correct + (1.0 - p_correct) * g_error
        return float(np.linalg.norm(g_now - g_after))
    if expectation == "pessimistic":
        return float(max(np.linalg.norm(g_now - g_correct), np.linalg.norm(g_now - g_error)))
    raise ValueError(f"unknown err expectation mode: {expectation}")


# ---------------------------------------------------------------------------
# the round protocol


@dataclass
class RoundResult:
    annotations: list[Annotation] = field(default_factory=list)
    skipped: int = 0


def run_selection_round(
    pool: list,
    request: SelectionRequest,
    score_pool: Callable[[list], np.ndarray],
    make_card: Callable[[object], AnnotationCard],
    annotator: Annotator,
    commit: Callable[[object, AnnotationResponse], None],
    rng: np.random.Generator | None = None,
) -> RoundResult:
    """Select up to k pairs, send them for annotation, commit verdicts.

    ``score_pool`` maps pool items to selection scores (US entropy or ERR
    gradient-change norms; the caller chooses what it computes). Skipped
    responses leave their items in the noisy pool untouched.
    """
    result = RoundResult()
    if request.k <= 0 or not pool:
        return result
    candidates = pool
    if request.strategy == "err" and len(pool) > request.err_pool_subsample:
        if rng is None:
            raise ValueError("ERR subsampling needs an rng")
        idx = rng.choice(len(pool), size=request.err_pool_subsample, replace=False)
        candidates = [pool[int(i)] for i in sorted(idx)]
    scores = np.asarray(score_pool(candidates), dtype=np.float64)
    chosen = [candidates[i] for i in select_us(scores, request.k)]

    cards = [make_card(item) for item in chosen]
    responses = annotator.annotate(cards)
    if len(responses) != len(cards):
        raise ValueError("annotator returned a mismatched number of responses")
    for item, card, response in zip(chosen, cards, responses):
        if response.skip or response.verdict is None:
            result.skipped += 1
            continue
        commit(item, response)
        result.annotations.append(
            Annotation(
                entity=card.entity,
                queried_type=card.queried_type,
                verdict=response.verdict,
                true_type=response.true_type,
                annotator_id=annotator.annotator_id,
                timestamp=time.time(),
            )
        )
    return result
