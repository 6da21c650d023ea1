from collections import Counter

import pytest

from kgtyperr.ingest import EntityRecord, EntityStore, SynthConfig, generate_synthetic_kg
from kgtyperr.network import DescriptionSpec, EncoderConfig, FeatureEncoder, RelationVocab, TypingModel
from kgtyperr.pipeline import bundle_from_synth


def tiny_encoder_config(n_types=3, **overrides) -> EncoderConfig:
    defaults = dict(
        n_types=n_types,
        description=DescriptionSpec(kind="file_vector", dim=4),
        surface_hidden=3,
        relation_embed_dim=3,
        relation_min_count=0,
        classifier_hidden=0,
        relu_output=True,
        seed=0,
    )
    defaults.update(overrides)
    return EncoderConfig(**defaults)


def tiny_store():
    store = EntityStore()
    store.add(EntityRecord("e1", "Ada", "e1", Counter({"r1": 2, "r2": 1})))
    store.add(EntityRecord("e2", "ada", "e2", Counter({"r2": 1})))
    store.add(EntityRecord("e3", "", "e3", Counter()))
    store.descriptions = {"e1": "a small language", "e2": "a person", "e3": ""}
    return store.freeze()


def tiny_model(store=None, desc_vectors=None, **config_overrides):
    store = store or tiny_store()
    config = tiny_encoder_config(**config_overrides)
    vocab = RelationVocab.build(store, min_count=config.relation_min_count)
    config.relation_vocab_size = max(1, len(vocab))
    model = TypingModel(config)
    encoder = FeatureEncoder(config, store, vocab, desc_vectors or {})
    return model, encoder


@pytest.fixture
def synth_bundle():
    kg = generate_synthetic_kg(SynthConfig(n_entities=240, n_types=3, noise_rate=0.25, seed=7))
    return bundle_from_synth(kg), kg
