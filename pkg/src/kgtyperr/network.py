"""Multi-source entity encoder and multi-label typing head.

An entity embedding is the concatenation of three channels: a description
vector (either precomputed vectors loaded from file, or a learned
hashed-token bag), the final hidden state of a character-level tanh
recurrence over the surface form, and the multiplicity-weighted sum of
learned relation embeddings. A classifier maps the embedding through an
optional hidden layer to per-type scores o = ReLU(Wx + b) and per-type
probabilities sigmoid(o).

The trailing ReLU bounds probabilities below at 0.5; ``relu_output=False``
drops it for calibration-sensitive setups.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import noise as noise_mod
from .autodiff import ParamStore
from .ingest import EntityStore

logger = logging.getLogger(__name__)

# 95 printable ASCII codepoints (applied after lowercasing) plus one OOV
# slot at index 0.
ALPHABET_SIZE = 96
_CHAR_BASE = 32
_CHAR_TOP = 126

CHANNELS = ("description", "surface", "relations")


def normalize_name(name: str) -> list[int]:
    out = []
    for ch in name.lower():
        cp = ord(ch)
        out.append(cp - _CHAR_BASE + 1 if _CHAR_BASE <= cp <= _CHAR_TOP else 0)
    return out


@dataclass
class DescriptionSpec:
    """Which description encoder to use.

    ``file_vector``: fixed per-entity vectors read from a file.
    ``hashed_tokens``: tokens hashed into ``vocab_hash_dim`` buckets with a
    learned embedding table, mean-aggregated.
    """

    kind: str = "file_vector"
    dim: int = 100
    vocab_hash_dim: int = 2048
    embed_dim: int = 32

    def output_dim(self) -> int:
        return self.dim if self.kind == "file_vector" else self.embed_dim


@dataclass
class EncoderConfig:
    n_types: int
    description: DescriptionSpec = field(default_factory=DescriptionSpec)
    surface_hidden: int = 64
    relation_embed_dim: int = 256
    relation_min_count: int = 20
    classifier_hidden: int = 512
    relu_output: bool = True
    ablate: str | None = None
    seed: int = 0
    relation_vocab_size: int = 1  # sized by build_model once the vocab exists

    def embedding_dim(self) -> int:
        return self.description.output_dim() + self.surface_hidden + self.relation_embed_dim


class RelationVocab:
    """Relations seen more than ``min_count`` times across the store."""

    def __init__(self, index: dict[str, int], counts: dict[str, int]):
        self.index = index
        self.counts = counts

    @classmethod
    def build(cls, store: EntityStore, min_count: int = 20) -> "RelationVocab":
        totals: Counter = Counter()
        for record in store.entities.values():
            totals.update(record.relations)
        kept = sorted(r for r, c in totals.items() if c > min_count)
        return cls({r: i for i, r in enumerate(kept)}, {r: totals[r] for r in kept})

    def __len__(self) -> int:
        return len(self.index)

    def serialize(self) -> str:
        return "".join(f"{r}\t{self.counts[r]}\n" for r in sorted(self.index))

    @classmethod
    def parse(cls, lines) -> "RelationVocab":
        counts: dict[str, int] = {}
        for raw in lines:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            rel, _, cnt = line.partition("\t")
            counts[rel] = int(cnt)
        kept = sorted(counts)
        return cls({r: i for i, r in enumerate(kept)}, counts)


def _hash_token(token: str, buckets: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % buckets


def tokenize(text: str) -> list[str]:
    out, cur = [], []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


@dataclass
class FeatureBatch:
    """Constant per-batch inputs feeding the graph."""

    entity_ids: list[str]
    desc: np.ndarray  # (B, desc_dim) vectors, or (B, vocab_hash_dim) mean weights
    char_idx: np.ndarray  # (B, L) int, 0-padded
    final_mask: np.ndarray  # (B, L) one-hot at each name's last step
    rel_counts: np.ndarray  # (B, |vocab|)
    noise_sub: dict[str, np.ndarray] = field(default_factory=dict)  # ablation noise per channel


class FeatureEncoder:
    """Resolves entities into numeric features, with per-entity caching.

    Missing descriptions and empty names fall back to zero channels; both
    are counted so a run report can surface them.
    """

    def __init__(
        self,
        config: EncoderConfig,
        store: EntityStore,
        vocab: RelationVocab,
        description_vectors: dict[str, np.ndarray] | None = None,
    ):
        self.config = config
        self.store = store
        self.vocab = vocab
        self.description_vectors = description_vectors or {}
        self.missing_descriptions = 0
        self.empty_names = 0
        self._cache: dict[str, tuple] = {}

    def _entity_features(self, eid: str):
        if eid in self._cache:
            return self._cache[eid]
        record = self.store.get(eid)
        spec = self.config.description
        if spec.kind == "file_vector":
            vec = self.description_vectors.get(record.description_key)
            if vec is None:
                self.missing_descriptions += 1
                logger.warning("no description vector for %s; using zeros", eid)
                vec = np.zeros(spec.dim)
            desc = np.asarray(vec, dtype=np.float64)
            if desc.shape != (spec.dim,):
                raise ValueError(f"description vector for {eid} has dim {desc.shape}, expected ({spec.dim},)")
        else:
            text = self.store.descriptions.get(record.description_key, "")
            tokens = tokenize(text)
            weights = np.zeros(spec.vocab_hash_dim)
            if tokens:
                for tok in tokens:
                    weights[_hash_token(tok, spec.vocab_hash_dim)] += 1.0
                weights /= len(tokens)
            else:
                self.missing_descriptions += 1
            desc = weights
        chars = normalize_name(record.name)
        if not chars:
            self.empty_names += 1
            logger.warning("entity %s has an empty surface form after normalization", eid)
        # padded to one column when the vocabulary is empty, matching the
        # (degenerate) embedding table the model allocates
        rel = np.zeros(max(1, len(self.vocab)))
        for r, count in record.relations.items():
            idx = self.vocab.index.get(r)
            if idx is not None:
                rel[idx] = count
        features = (desc, np.array(chars, dtype=np.intp), rel)
        self._cache[eid] = features
        return features

    def _ablation_noise(self, eid: str, channel: str, dim: int) -> np.ndarray:
        digest = hashlib.blake2b(f"{channel}:{eid}".encode(), digest_size=8, key=str(self.config.seed).encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        return rng.uniform(0.0, 1.0, size=dim)

    def batch(self, entity_ids) -> FeatureBatch:
        entity_ids = list(entity_ids)
        feats = [self._entity_features(eid) for eid in entity_ids]
        b = len(entity_ids)
        desc = np.stack([f[0] for f in feats]) if b else np.zeros((0, self.config.description.output_dim()))
        max_len = max((len(f[1]) for f in feats), default=0)
        max_len = max(max_len, 1)
        char_idx = np.zeros((b, max_len), dtype=np.intp)
        final_mask = np.zeros((b, max_len))
        for i, f in enumerate(feats):
            n = len(f[1])
            if n:
                char_idx[i, :n] = f[1]
                final_mask[i, n - 1] = 1.0
        rel = np.stack([f[2] for f in feats]) if b else np.zeros((0, max(1, len(self.vocab))))
        batch = FeatureBatch(entity_ids, desc, char_idx, final_mask, rel)
        if self.config.ablate is not None:
            ch = self.config.ablate
            dims = {
                "description": self.config.description.output_dim(),
                "surface": self.config.surface_hidden,
                "relations": self.config.relation_embed_dim,
            }
            if ch not in dims:
                raise ValueError(f"unknown ablation channel: {ch}")
            batch.noise_sub[ch] = np.stack([self._ablation_noise(eid, ch, dims[ch]) for eid in entity_ids])
        return batch


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class TypingModel:
    """Encoders, classifier and noise parameters over one ParamStore."""

    def __init__(self, config: EncoderConfig, params: ParamStore | None = None):
        self.config = config
        self.params = params or ParamStore()
        self.channel_scales = {c: 1.0 for c in CHANNELS}
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7E9]))
        p = self.params
        spec = config.description
        if spec.kind == "hashed_tokens":
            p.add("desc_embed", _glorot(rng, spec.vocab_hash_dim, spec.embed_dim, (spec.vocab_hash_dim, spec.embed_dim)))
        h = config.surface_hidden
        p.add("char_embed", _glorot(rng, ALPHABET_SIZE, h, (ALPHABET_SIZE, h)))
        p.add("char_rec", _glorot(rng, h, h, (h, h)))
        p.add("char_bias", np.zeros(h))
        nrel = max(1, config.relation_vocab_size)
        p.add("rel_embed", _glorot(rng, nrel, config.relation_embed_dim, (nrel, config.relation_embed_dim)))
        d = config.embedding_dim()
        if config.classifier_hidden > 0:
            p.add("clf_w1", _glorot(rng, d, config.classifier_hidden, (d, config.classifier_hidden)))
            p.add("clf_b1", np.zeros(config.classifier_hidden))
            top_in = config.classifier_hidden
        else:
            top_in = d
        p.add("clf_w", _glorot(rng, top_in, config.n_types, (top_in, config.n_types)))
        p.add("clf_b", np.zeros(config.n_types))
        noise_mod.init_noise_params(p, config.n_types)

    def noise_p(self) -> ad.Tensor:
        return self.params[noise_mod.NOISE_PARAM]

    # -- channel encoders ----------------------------------------------------

    def encode_description(self, batch: FeatureBatch) -> ad.Tensor:
        if "description" in batch.noise_sub:
            return ad.constant(batch.noise_sub["description"])
        if self.config.description.kind == "file_vector":
            return ad.constant(batch.desc)
        return ad.matmul(ad.constant(batch.desc), self.params["desc_embed"])

    def encode_surface(self, batch: FeatureBatch) -> ad.Tensor:
        if "surface" in batch.noise_sub:
            return ad.constant(batch.noise_sub["surface"])
        b, max_len = batch.char_idx.shape
        hdim = self.config.surface_hidden
        h = ad.constant(np.zeros((b, hdim)))
        selected = ad.constant(np.zeros((b, hdim)))
        rec, bias = self.params["char_rec"], self.params["char_bias"]
        for t in range(max_len):
            x_t = ad.gather_rows(self.params["char_embed"], batch.char_idx[:, t])
            h = ad.tanh(ad.add(ad.add(x_t, ad.matmul(h, rec)), bias))
            mask_col = np.repeat(batch.final_mask[:, t : t + 1], hdim, axis=1)
            if mask_col.any():
                selected = ad.add(selected, ad.mul(ad.constant(mask_col), h))
        return selected

    def encode_relations(self, batch: FeatureBatch) -> ad.Tensor:
        if "relations" in batch.noise_sub:
            return ad.constant(batch.noise_sub["relations"])
        return ad.matmul(ad.constant(batch.rel_counts), self.params["rel_embed"])

    def embed_batch(self, batch: FeatureBatch) -> ad.Tensor:
        parts = []
        for channel, tensor in zip(
            CHANNELS,
            (self.encode_description(batch), self.encode_surface(batch), self.encode_relations(batch)),
        ):
            scale = self.channel_scales[channel]
            parts.append(tensor if scale == 1.0 else ad.mul(scale, tensor))
        return ad.concat(parts, axis=1)

    # -- classifier ----------------------------------------------------------

    def scores_from_embedding(self, emb: ad.Tensor) -> tuple[ad.Tensor, ad.Tensor]:
        x = emb
        if self.config.classifier_hidden > 0:
            x = ad.relu(ad.add(ad.matmul(x, self.params["clf_w1"]), self.params["clf_b1"]))
        o = ad.add(ad.matmul(x, self.params["clf_w"]), self.params["clf_b"])
        if self.config.relu_output:
            o = ad.relu(o)
        return o, ad.sigmoid(o)

    def z_from_embedding(self, emb: ad.Tensor) -> ad.Tensor:
        return self.scores_from_embedding(emb)[1]

    def y_from_embedding(self, emb: ad.Tensor) -> ad.Tensor:
        return noise_mod.apply_noise(self.z_from_embedding(emb), self.noise_p())

    def forward(self, batch: FeatureBatch) -> tuple[ad.Tensor, ad.Tensor, ad.Tensor]:
        """(embedding, o scores, z probabilities) for a feature batch."""
        emb = self.embed_batch(batch)
        o, z = self.scores_from_embedding(emb)
        return emb, o, z

    def predict_z(self, batch: FeatureBatch) -> np.ndarray:
        return self.forward(batch)[2].data

    # -- calibration ----------------------------------------------------------

    def calibrate_channel_scales(self, encoder: FeatureEncoder, entity_ids) -> dict[str, float]:
        """Rescale each channel to unit RMS over the given entities, so one
        perturbation radius means the same thing across channels."""
        batch = encoder.batch(entity_ids)
        outputs = {
            "description": self.encode_description(batch).data,
            "surface": self.encode_surface(batch).data,
            "relations": self.encode_relations(batch).data,
        }
        for channel, arr in outputs.items():
            rms = float(np.sqrt(np.mean(arr * arr)))
            self.channel_scales[channel] = 1.0 / rms if rms > 1e-12 else 1.0
        return dict(self.channel_scales)


def build_model(
    config: EncoderConfig,
    store: EntityStore,
    description_vectors: dict[str, np.ndarray] | None = None,
) -> tuple[TypingModel, FeatureEncoder]:
    """Bind a config to a store: build the relation vocabulary, size the
    embedding table, and return the model with its feature encoder."""
    vocab = RelationVocab.build(store, min_count=config.relation_min_count)
    config.relation_vocab_size = max(1, len(vocab))
    model = TypingModel(config)
    encoder = FeatureEncoder(config, store, vocab, description_vectors)
    return model, encoder


# ---------------------------------------------------------------------------
# component pre-training


def pretrain_component(
    component: str,
    model: TypingModel,
    encoder: FeatureEncoder,
    assertions,
    labels: list[str],
    epochs: int = 2,
    batch_size: int = 64,
    lr: float = 1e-3,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """Train one channel encoder plus a throwaway sigmoid head on noisy
    labels; returns the trained encoder parameter arrays.

    With ``epochs=0`` the encoder keeps its random initialization. The
    head is discarded; the caller's model already shares the encoder
    parameters in place.
    """
    from .optim import AdamState, adam_step

    if component not in CHANNELS:
        raise ValueError(f"unknown component: {component}")
    encode = {
        "description": model.encode_description,
        "surface": model.encode_surface,
        "relations": model.encode_relations,
    }[component]
    out_dim = {
        "description": model.config.description.output_dim(),
        "surface": model.config.surface_hidden,
        "relations": model.config.relation_embed_dim,
    }[component]

    label_index = {t: i for i, t in enumerate(labels)}
    head = ParamStore()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBEE]))
    head.add("pre_w", _glorot(rng, out_dim, len(labels), (out_dim, len(labels))))
    head.add("pre_b", np.zeros(len(labels)))

    component_params = {
        "description": ["desc_embed"] if model.config.description.kind == "hashed_tokens" else [],
        "surface": ["char_embed", "char_rec", "char_bias"],
        "relations": ["rel_embed"],
    }[component]

    trainable = ParamStore()
    for name in component_params:
        trainable.adopt(name, model.params[name])
    for name in head.names():
        trainable.adopt(name, head[name])

    items = list(assertions)
    state = AdamState()
    for _ in range(epochs):
        order = rng.permutation(len(items))
        for start in range(0, len(items), batch_size):
            chunk = [items[int(j)] for j in order[start : start + batch_size]]
            batch = encoder.batch([a.entity for a in chunk])
            target = np.zeros((len(chunk), len(labels)))
            for i, a in enumerate(chunk):
                target[i, label_index[a.type]] = 1.0
            rep = encode(batch)
            logits = ad.add(ad.matmul(rep, head["pre_w"]), head["pre_b"])
            # stable multi-label BCE on logits
            t_const = ad.constant(target)
            pos = ad.mul(t_const, ad.logsigmoid(logits))
            neg = ad.mul(ad.add(1.0, ad.neg(t_const)), ad.logsigmoid(ad.neg(logits)))
            loss = ad.mul(-1.0 / max(1, len(chunk)), ad.sum_all(ad.add(pos, neg)))
            grads = ad.grad(loss, trainable)
            adam_step(trainable, grads, state, lr=lr)

    return {name: model.params[name].data.copy() for name in component_params}
