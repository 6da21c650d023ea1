"""End-to-end gradient verification.

Assembles the full training loss for a tiny randomized model (all three
encoder channels, the optional hidden layer, the trailing ReLU, the
sigmoid head, the flip channel, mixed noisy/gold items with per-item
weights, and the adversarial smoothing term with its perturbation and
reference distribution frozen) and compares analytic gradients against
central finite differences, coordinate by coordinate.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from . import autodiff as ad
from .ingest import EntityRecord, EntityStore
from .network import DescriptionSpec, EncoderConfig, FeatureEncoder, RelationVocab, TypingModel
from .noise import apply_noise
from .vat import VatConfig, adversarial_direction, multilabel_kl

_NAMES = ["ada", "b", "cx", "dot", "elm"]


def make_tiny_setup(seed: int, n_entities: int = 3, n_types: int = 3):
    """A small store + model sized for exhaustive finite differencing."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFD]))
    store = EntityStore()
    desc_vectors = {}
    relations = ["r0", "r1"]
    for i in range(n_entities):
        eid = f"E{i}"
        rels = Counter()
        for r in relations:
            count = int(rng.integers(0, 3))
            if count:
                rels[r] = count
        store.add(EntityRecord(id=eid, name=_NAMES[i % len(_NAMES)], description_key=eid, relations=rels))
        desc_vectors[eid] = rng.normal(size=3)
    store.freeze()

    config = EncoderConfig(
        n_types=n_types,
        description=DescriptionSpec(kind="file_vector", dim=3),
        surface_hidden=2,
        relation_embed_dim=2,
        relation_min_count=0,
        classifier_hidden=3,
        relu_output=True,
        seed=seed,
        relation_vocab_size=len(relations),
    )
    vocab = RelationVocab.build(store, min_count=0)
    config.relation_vocab_size = max(1, len(vocab))
    model = TypingModel(config)
    # move parameters off their symmetric init so ReLU kinks are generic
    for _, p in model.params.items():
        p.data += 0.1 * rng.normal(size=p.data.shape)
    model.params["noise_p"].data = rng.uniform(0.3, 0.95, size=n_types)
    encoder = FeatureEncoder(config, store, vocab, desc_vectors)
    return model, encoder, rng


def full_model_loss_fn(seed: int = 0, vat_lambda: float = 0.1):
    """Returns (loss_fn, params) where loss_fn rebuilds the whole graph
    from current parameter values and is pure, as finite differencing
    requires."""
    model, encoder, rng = make_tiny_setup(seed)
    n_types = model.config.n_types
    entity_ids = encoder.store.ids()
    batch = encoder.batch(entity_ids)

    targets = (rng.random((len(entity_ids), n_types)) < 0.4).astype(float)
    gold_sel = np.zeros((len(entity_ids), n_types))
    gold_sel[0, :] = 1.0  # first item plays the gold role
    weights = rng.uniform(0.5, 1.5, size=len(entity_ids))

    vat_cfg = VatConfig(epsilon=0.5, lam=vat_lambda, power_iters=1)
    predict = model.y_from_embedding
    emb0 = model.embed_batch(batch).data
    frozen_r = adversarial_direction(emb0, predict, vat_cfg, rng)
    frozen_ref = predict(ad.constant(emb0)).data

    t_const = ad.constant(targets)
    one_minus_t = ad.constant(1.0 - targets)
    noisy_mask = ad.constant(1.0 - gold_sel)
    gold_mask = ad.constant(gold_sel)
    w_const = ad.constant(weights)

    def bce(probs: ad.Tensor) -> ad.Tensor:
        return ad.neg(
            ad.add(ad.mul(t_const, ad.log(probs)), ad.mul(one_minus_t, ad.log(ad.add(1.0, ad.neg(probs)))))
        )

    def loss_fn() -> ad.Tensor:
        emb = model.embed_batch(batch)
        z = model.z_from_embedding(emb)
        y = apply_noise(z, model.noise_p())
        elem = ad.add(ad.mul(noisy_mask, bce(y)), ad.mul(gold_mask, bce(z)))
        per_item = ad.sum_axis(elem, axis=1)
        q = predict(ad.add(emb, ad.constant(frozen_r)))
        per_item = ad.add(per_item, ad.mul(vat_lambda, multilabel_kl(ad.constant(frozen_ref), q)))
        weighted = ad.mul(w_const, per_item)
        return ad.mul(1.0 / len(entity_ids), ad.sum_all(weighted))

    return loss_fn, model.params


def full_model_grad_check(seed: int = 0, step: float = 1e-5, vat_lambda: float = 0.1) -> float:
    loss_fn, params = full_model_loss_fn(seed=seed, vat_lambda=vat_lambda)
    return ad.finite_diff_check(loss_fn, params, step=step)
