"""Unsupervised typing-error detection: triplet-loss dimensionality
reduction over concatenated entity embeddings, then per-type Local Outlier
Factor or Isolation Forest scoring.

LOF uses the exact O(n^2) neighborhood computation. Duplicate points make
reachability sums collapse toward zero; local reachability densities are
floored at 1/EPS so coincident points score like perfect inliers instead
of dividing by zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)

_LRD_EPS = 1e-12


class OutlierError(ValueError):
    pass


# ---------------------------------------------------------------------------
# triplet-loss representation learning


@dataclass
class ReprNetConfig:
    input_dim: int
    output_dim: int = 128
    hidden_dim: int = 256
    margin: float = 0.5
    epochs: int = 5
    batch_size: int = 64
    triplets_per_epoch: int = 2048
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.output_dim >= self.input_dim:
            raise OutlierError("output_dim must reduce dimensionality")
        if self.margin <= 0:
            raise OutlierError("margin must be positive")


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negative: str


@dataclass
class OutlierScore:
    entity: str
    type: str
    score: float
    method: str
    verdict: str = "correct"


def _cosine_rows(u: ad.Tensor, v: ad.Tensor) -> ad.Tensor:
    dots = ad.sum_axis(ad.mul(u, v), axis=1)
    nu = ad.sqrt(ad.sum_axis(ad.mul(u, u), axis=1))
    nv = ad.sqrt(ad.sum_axis(ad.mul(v, v), axis=1))
    return ad.div(dots, ad.mul(nu, nv))


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cosine similarity; zero vectors count as similarity 0."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-30 or nv < 1e-30:
        logger.warning("zero vector in cosine distance; treating similarity as 0")
        return 1.0
    return float(1.0 - np.dot(u, v) / (nu * nv))


def triplet_loss(anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray, margin: float) -> float:
    """max(0, d(a, p) - d(a, n) + margin) with cosine distance."""
    return max(0.0, cosine_distance(anchor, positive) - cosine_distance(anchor, negative) + margin)


class ReprNet:
    """One-hidden-layer projector trained so same-type entities sit closer
    in cosine distance than cross-type ones."""

    def __init__(self, cfg: ReprNetConfig):
        self.cfg = cfg
        self.params = ad.ParamStore()
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x3A]))
        limit1 = math.sqrt(6.0 / (cfg.input_dim + cfg.hidden_dim))
        limit2 = math.sqrt(6.0 / (cfg.hidden_dim + cfg.output_dim))
        self.params.add("w1", rng.uniform(-limit1, limit1, (cfg.input_dim, cfg.hidden_dim)))
        self.params.add("b1", np.zeros(cfg.hidden_dim))
        self.params.add("w2", rng.uniform(-limit2, limit2, (cfg.hidden_dim, cfg.output_dim)))
        self.params.add("b2", np.zeros(cfg.output_dim))

    def project_t(self, x: ad.Tensor) -> ad.Tensor:
        h = ad.relu(ad.add(ad.matmul(x, self.params["w1"]), self.params["b1"]))
        return ad.add(ad.matmul(h, self.params["w2"]), self.params["b2"])

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.project_t(ad.constant(np.atleast_2d(x))).data

    def batch_loss(self, anchors: np.ndarray, positives: np.ndarray, negatives: np.ndarray) -> ad.Tensor:
        a = self.project_t(ad.constant(anchors))
        p = self.project_t(ad.constant(positives))
        n = self.project_t(ad.constant(negatives))
        d_ap = ad.add(1.0, ad.neg(_cosine_rows(a, p)))
        d_an = ad.add(1.0, ad.neg(_cosine_rows(a, n)))
        viol = ad.relu(ad.add(ad.add(d_ap, ad.neg(d_an)), self.cfg.margin))
        return ad.mean_all(viol)


def sample_triplets(
    positives_by_type: dict[str, list[str]],
    negatives_by_type: dict[str, list[str]],
    count: int,
    rng: np.random.Generator,
) -> list[Triplet]:
    """Uniform anchor/positive pairs (distinct, without replacement per
    draw) and uniform negatives. Types without 2 positives and 1 negative
    are excluded."""
    usable = [
        t
        for t in sorted(positives_by_type)
        if len(positives_by_type[t]) >= 2 and len(negatives_by_type.get(t, []))
    ]
    skipped = sorted(set(positives_by_type) - set(usable))
    if skipped:
        logger.info("triplet sampling skips %d type(s) with too few samples", len(skipped))
    if not usable:
        raise OutlierError("no type has enough positives/negatives for triplets")
    out = []
    for _ in range(count):
        t = usable[int(rng.integers(len(usable)))]
        pos = positives_by_type[t]
        i, j = rng.choice(len(pos), size=2, replace=False)
        neg = negatives_by_type[t]
        out.append(Triplet(pos[int(i)], pos[int(j)], neg[int(rng.integers(len(neg)))]))
    return out


def train_repr(
    embeddings: dict[str, np.ndarray],
    positives_by_type: dict[str, list[str]],
    negatives_by_type: dict[str, list[str]],
    cfg: ReprNetConfig,
) -> ReprNet:
    """Fit the projector on sampled triplets; deterministic given the seed."""
    net = ReprNet(cfg)
    if cfg.epochs == 0:
        return net
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x75]))
    state = AdamState()
    for _ in range(cfg.epochs):
        triplets = sample_triplets(positives_by_type, negatives_by_type, cfg.triplets_per_epoch, rng)
        for start in range(0, len(triplets), cfg.batch_size):
            chunk = triplets[start : start + cfg.batch_size]
            anchors = np.stack([embeddings[t.anchor] for t in chunk])
            positives = np.stack([embeddings[t.positive] for t in chunk])
            negatives = np.stack([embeddings[t.negative] for t in chunk])
            loss = net.batch_loss(anchors, positives, negatives)
            grads = ad.grad(loss, net.params)
            adam_step(net.params, grads, state, lr=cfg.lr)
    return net


def concat_embeddings(text_vecs: dict[str, np.ndarray], graph_vecs: dict[str, np.ndarray], entity_ids) -> dict[str, np.ndarray]:
    """Fixed concatenation order: text first, graph second; a missing side
    becomes a zero block (flagged)."""
    text_dim = len(next(iter(text_vecs.values()))) if text_vecs else 0
    graph_dim = len(next(iter(graph_vecs.values()))) if graph_vecs else 0
    missing = 0
    out = {}
    for eid in entity_ids:
        tv = text_vecs.get(eid)
        gv = graph_vecs.get(eid)
        if tv is None or gv is None:
            missing += 1
        out[eid] = np.concatenate(
            [tv if tv is not None else np.zeros(text_dim), gv if gv is not None else np.zeros(graph_dim)]
        )
    if missing:
        logger.warning("%d entities missing one or both embedding files; zero-filled", missing)
    return out


# ---------------------------------------------------------------------------
# Local Outlier Factor


def lof_scores(points: np.ndarray, k: int) -> np.ndarray:
    """LOF values from the definitional quantities.

    k-distance is the distance to the k-th nearest neighbor (distinct
    points by index, not by distance value); the neighborhood contains
    every point within that distance, so ties can widen it. Reachability
    distance is max(k-distance(neighbor), direct distance).
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if not (1 <= k < n):
        raise OutlierError(f"need 1 <= k < n, got k={k}, n={n}")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)

    sorted_dist = np.sort(dist, axis=1)
    k_dist = sorted_dist[:, k - 1]
    neighborhoods = [np.flatnonzero(dist[i] <= k_dist[i]) for i in range(n)]

    lrd = np.empty(n)
    for i in range(n):
        reach = np.maximum(k_dist[neighborhoods[i]], dist[i, neighborhoods[i]])
        lrd[i] = 1.0 / max(reach.mean(), _LRD_EPS)

    lof = np.empty(n)
    for i in range(n):
        lof[i] = lrd[neighborhoods[i]].mean() / lrd[i]
    return lof


# ---------------------------------------------------------------------------
# Isolation Forest


@dataclass
class _IsoNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_IsoNode | None" = None
    right: "_IsoNode | None" = None
    size: int = 0  # leaf population


def _avg_path_length(n: int) -> float:
    """Expected path length of an unsuccessful BST search over n points."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    harmonic = math.log(n - 1.0) + np.euler_gamma
    return 2.0 * harmonic - 2.0 * (n - 1.0) / n


def _build_iso_tree(data: np.ndarray, depth: int, height_limit: int, rng: np.random.Generator) -> _IsoNode:
    n = len(data)
    if depth >= height_limit or n <= 1:
        return _IsoNode(size=n)
    lo = data.min(axis=0)
    hi = data.max(axis=0)
    usable = np.flatnonzero(hi > lo)
    if usable.size == 0:
        return _IsoNode(size=n)
    feature = int(usable[rng.integers(usable.size)])
    threshold = float(rng.uniform(lo[feature], hi[feature]))
    mask = data[:, feature] < threshold
    if not mask.any() or mask.all():
        return _IsoNode(size=n)
    return _IsoNode(
        feature=feature,
        threshold=threshold,
        left=_build_iso_tree(data[mask], depth + 1, height_limit, rng),
        right=_build_iso_tree(data[~mask], depth + 1, height_limit, rng),
        size=n,
    )


def _path_length(node: _IsoNode, x: np.ndarray, depth: int = 0) -> float:
    if node.left is None:
        return depth + _avg_path_length(node.size)
    child = node.left if x[node.feature] < node.threshold else node.right
    return _path_length(child, x, depth + 1)


def iforest_scores(points: np.ndarray, n_trees: int = 100, subsample_size: int = 256, seed: int = 0) -> np.ndarray:
    """Anomaly scores 2^(-E[h]/c(psi)) in (0, 1); higher is more outlying.

    Trees grow on without-replacement subsamples of size psi with height
    limit ceil(log2 psi); every tree gets its own child seed so scores are
    reproducible regardless of evaluation order.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 2:
        raise OutlierError("isolation forest needs at least 2 points")
    psi = min(subsample_size, n)
    height_limit = max(1, math.ceil(math.log2(psi)))
    tree_seeds = np.random.SeedSequence(seed).spawn(n_trees)

    depths = np.zeros(n)
    for tree_ss in tree_seeds:
        rng = np.random.default_rng(tree_ss)
        idx = rng.choice(n, size=psi, replace=False)
        root = _build_iso_tree(points[idx], 0, height_limit, rng)
        for i in range(n):
            depths[i] += _path_length(root, points[i])
    expected = depths / n_trees
    c = _avg_path_length(psi)
    if c <= 0:
        c = 1.0
    return np.power(2.0, -expected / c)


# ---------------------------------------------------------------------------
# per-type detection


@dataclass
class TypeOutlierConfig:
    method: str = "if"  # if | lof
    lof_k: int = 20
    n_trees: int = 100
    subsample_size: int = 256
    contamination: float | None = None
    lof_threshold: float = 1.5
    min_entities: int = 8
    seed: int = 0


def detect_type_outliers(
    type_id: str,
    entity_ids: list[str],
    embeddings: dict[str, np.ndarray],
    net: ReprNet | None,
    cfg: TypeOutlierConfig,
) -> list[OutlierScore]:
    """Project one type's entities and rank them by outlier score.

    With a contamination rate set, the top ceil(rate * n) scores become
    error verdicts; otherwise LOF falls back to its ratio threshold and IF
    marks nothing.
    """
    if len(entity_ids) < cfg.min_entities:
        raise OutlierError(f"type {type_id!r} has {len(entity_ids)} entities, fewer than {cfg.min_entities}")
    raw = np.stack([embeddings[e] for e in entity_ids])
    pts = net.project(raw) if net is not None else raw
    if cfg.method == "lof":
        k = min(cfg.lof_k, len(entity_ids) - 1)
        scores = lof_scores(pts, k)
    elif cfg.method == "if":
        scores = iforest_scores(pts, cfg.n_trees, cfg.subsample_size, cfg.seed)
    else:
        raise OutlierError(f"unknown method: {cfg.method}")

    n = len(entity_ids)
    flagged = np.zeros(n, dtype=bool)
    if cfg.contamination is not None:
        n_flag = int(math.ceil(cfg.contamination * n)) if cfg.contamination > 0 else 0
        if n_flag > 0:
            order = sorted(range(n), key=lambda i: (-scores[i], i))
            flagged[order[:n_flag]] = True
    elif cfg.method == "lof":
        flagged = scores > cfg.lof_threshold

    method_name = cfg.method.upper()
    return [
        OutlierScore(entity=e, type=type_id, score=float(s), method=method_name, verdict="error" if f else "correct")
        for e, s, f in zip(entity_ids, scores, flagged)
    ]


def scores_tsv(scores: list[OutlierScore]) -> str:
    lines = ["type\tentity\tmethod\tscore\tverdict"]
    for s in scores:
        lines.append(f"{s.type}\t{s.entity}\t{s.method}\t{s.score:.10f}\t{s.verdict}")
    return "\n".join(lines) + "\n"
