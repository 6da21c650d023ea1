"""Virtual adversarial training in entity-embedding space.

The smoothing penalty is the multilabel KL divergence between the model's
prediction at an embedding and at the worst-case perturbation of radius
epsilon around it, found by power iteration. The reference prediction is
held constant: gradients flow only through the perturbed branch.

The training loss adds +lambda * penalty, which penalizes sensitivity to
the perturbation. ``paper_sign=True`` flips the contribution's sign,
reproducing the variant that adds the (negated-divergence) LDS term
verbatim; minimizing that form rewards sensitivity, so it exists for
comparison only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

logger = logging.getLogger(__name__)


@dataclass
class VatConfig:
    epsilon: float = 1.0
    lam: float = 0.1
    power_iters: int = 1
    xi: float = 1e-6
    paper_sign: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.power_iters < 1:
            raise ValueError("power_iters must be >= 1")


def multilabel_kl(p: ad.Tensor, q: ad.Tensor) -> ad.Tensor:
    """Sum over types of binary KL(p_i || q_i); scalar for vectors, one
    value per row for matrices.

    Inputs are probabilities; the clamped log keeps endpoints finite.
    """
    one = 1.0
    lp, lq = ad.log(p), ad.log(q)
    lp1, lq1 = ad.log(ad.add(one, ad.neg(p))), ad.log(ad.add(one, ad.neg(q)))
    term = ad.add(ad.mul(p, ad.add(lp, ad.neg(lq))), ad.mul(ad.add(one, ad.neg(p)), ad.add(lp1, ad.neg(lq1))))
    if term.data.ndim == 1:
        return ad.sum_all(term)
    return ad.sum_axis(term, axis=1)


def multilabel_kl_np(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p = np.clip(p, ad.LOG_FLOOR, 1.0 - ad.LOG_FLOOR)
    q = np.clip(q, ad.LOG_FLOOR, 1.0 - ad.LOG_FLOOR)
    term = p * (np.log(p) - np.log(q)) + (1.0 - p) * (np.log(1.0 - p) - np.log(1.0 - q))
    return term.sum(axis=-1)


def _row_normalize(d: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(d, axis=-1, keepdims=True)
    return d / np.maximum(norms, 1e-30)


def adversarial_direction(emb: np.ndarray, predict_fn, cfg: VatConfig, rng: np.random.Generator) -> np.ndarray:
    """Perturbation of L2 norm epsilon (per row) that approximately
    maximizes the prediction KL around ``emb``.

    ``predict_fn`` maps an embedding Tensor to a probability Tensor.
    Power iteration: push a random unit direction through the KL gradient
    at scale xi, renormalize, repeat. A vanishing gradient falls back to a
    random direction.
    """
    emb = np.asarray(emb, dtype=np.float64)
    squeeze = emb.ndim == 1
    e2 = emb[None, :] if squeeze else emb

    ref = predict_fn(ad.constant(e2)).data  # reference distribution, no gradient
    xi = cfg.xi * max(1.0, float(np.sqrt(np.mean(e2 * e2))))

    d = _row_normalize(rng.standard_normal(e2.shape))
    for _ in range(cfg.power_iters):
        d_var = ad.parameter(xi * d)
        q = predict_fn(ad.add(ad.constant(e2), d_var))
        kl = ad.sum_all(multilabel_kl(ad.constant(ref), q))
        ad.backward(kl)
        g = d_var.grad
        norms = np.linalg.norm(g, axis=-1)
        dead = norms < 1e-30
        if np.any(dead):
            logger.warning("zero KL gradient for %d row(s); using random direction", int(dead.sum()))
            g = g.copy()
            g[dead] = rng.standard_normal((int(dead.sum()), e2.shape[1]))
        d = _row_normalize(g)

    r = cfg.epsilon * d
    return r[0] if squeeze else r


def vat_penalty(emb, predict_fn, cfg: VatConfig, rng: np.random.Generator) -> ad.Tensor:
    """Per-row KL at the adversarial perturbation, as a graph node.

    ``emb`` may be a Tensor (gradients then flow back through the clean
    branch into the encoders) or a plain array. The returned tensor has
    one penalty per row.
    """
    emb_t = emb if isinstance(emb, ad.Tensor) else ad.constant(np.atleast_2d(np.asarray(emb, dtype=np.float64)))
    r = adversarial_direction(emb_t.data, predict_fn, cfg, rng)
    ref = predict_fn(ad.constant(emb_t.data)).data
    q = predict_fn(ad.add(emb_t, ad.constant(np.atleast_2d(r))))
    return multilabel_kl(ad.constant(ref), q)


def vat_loss_term(penalty_per_row: ad.Tensor, cfg: VatConfig) -> ad.Tensor:
    """lambda-weighted contribution of the penalty, honoring paper_sign."""
    scale = -cfg.lam if cfg.paper_sign else cfg.lam
    return ad.mul(scale, penalty_per_row)
