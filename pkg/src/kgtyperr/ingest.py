"""Knowledge-graph ingestion: triples, entities, the type tree, and dataset
construction.

Subsampling and split assignment use keyed blake2b ranking rather than a
stateful PRNG: an item's rank is the 64-bit blake2b digest of
``(label, entity, type)`` keyed by the seed, and a uniform subsample of
size m takes the m smallest ranks. The scheme is documented in every
dataset manifest so splits can be reproduced from any implementation.
"""

from __future__ import annotations

import hashlib
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

TYPING_RELATION = "rdf:type"
OTHER_TYPE = "Other"
NOISY = "noisy"
GOLD = "gold"
MANIFEST_VERSION = "kgtyperr-dataset-manifest v1"
SAMPLING_SCHEME = "blake2b8-rank v1"


class IngestError(ValueError):
    pass


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class TripleRecord:
    head: str
    relation: str
    tail: str

    def __post_init__(self):
        if not self.head or not self.relation:
            raise IngestError("triple head and relation must be non-empty")


@dataclass
class ParseDiagnostic:
    line_number: int
    line: str
    reason: str


@dataclass
class EntityRecord:
    id: str
    name: str
    description_key: str
    relations: Counter = field(default_factory=Counter)


@dataclass(frozen=True)
class TypeAssertion:
    entity: str
    type: str
    provenance: str = NOISY
    verdict: str | None = None
    true_type: str | None = None

    def __post_init__(self):
        if self.provenance == GOLD and self.verdict is None:
            raise IngestError(f"gold assertion ({self.entity}, {self.type}) missing a verdict")
        if self.provenance == NOISY and self.verdict is not None:
            raise IngestError(f"noisy assertion ({self.entity}, {self.type}) must not carry a verdict")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.entity, self.type)


@dataclass
class DatasetSplit:
    """Noisy train set, gold pool, dev and test lists, pairwise disjoint on
    (entity, type)."""

    noisy_train: list[TypeAssertion]
    gold_pool: list[TypeAssertion]
    dev: list[TypeAssertion]
    test: list[TypeAssertion]
    seed: int

    def __post_init__(self):
        seen: set[tuple[str, str]] = set()
        for part_name, part in self.parts():
            for a in part:
                if a.pair in seen:
                    raise IngestError(f"(entity, type) pair {a.pair} appears in more than one split part")
                seen.add(a.pair)

    def parts(self):
        return (
            ("noisy_train", self.noisy_train),
            ("gold_pool", self.gold_pool),
            ("dev", self.dev),
            ("test", self.test),
        )

    def labels(self) -> list[str]:
        """Sorted label vocabulary across all parts."""
        labels = {a.type for _, part in self.parts() for a in part}
        return sorted(labels)


class EntityStore:
    """Immutable-after-build map of entity records plus the noisy type
    assertions extracted from the typing relation."""

    def __init__(self):
        self.entities: dict[str, EntityRecord] = {}
        self.assertions: list[TypeAssertion] = []
        self.descriptions: dict[str, str] = {}
        self._frozen = False

    def add(self, record: EntityRecord) -> None:
        if self._frozen:
            raise IngestError("entity store is frozen")
        if record.id in self.entities:
            raise IngestError(f"duplicate entity id: {record.id}")
        self.entities[record.id] = record

    def freeze(self) -> "EntityStore":
        self._frozen = True
        return self

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self.entities

    def __len__(self) -> int:
        return len(self.entities)

    def get(self, entity_id: str) -> EntityRecord:
        return self.entities[entity_id]

    def ids(self) -> list[str]:
        return list(self.entities)


# ---------------------------------------------------------------------------
# parsing


def parse_triples(lines, on_error: str = "abort") -> tuple[list[TripleRecord], list[ParseDiagnostic]]:
    """Parse tab-separated ``head<TAB>relation<TAB>tail`` lines.

    ``on_error`` is ``abort`` (raise on the first malformed line) or
    ``skip`` (collect a diagnostic and continue). Blank lines are ignored.
    """
    if on_error not in ("abort", "skip"):
        raise ValueError("on_error must be 'abort' or 'skip'")
    records: list[TripleRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not fields[0] or not fields[1]:
            diag = ParseDiagnostic(lineno, line, f"expected 3 tab-separated fields, got {len(fields)}")
            if on_error == "abort":
                raise IngestError(f"line {lineno}: {diag.reason}: {line!r}")
            diagnostics.append(diag)
            continue
        records.append(TripleRecord(fields[0], fields[1], fields[2]))
    return records, diagnostics


def serialize_triples(records) -> str:
    return "".join(f"{r.head}\t{r.relation}\t{r.tail}\n" for r in records)


_NTRIPLE = re.compile(r"^<([^>]*)>\s+<([^>]*)>\s+(<[^>]*>|\"(?:[^\"\\]|\\.)*\"(?:[^\s.]*)?)\s*\.$")


def parse_ntriples(lines, on_error: str = "abort") -> tuple[list[TripleRecord], list[ParseDiagnostic]]:
    """Optional N-Triples reader mapping onto the same records.

    URIs are kept verbatim (angle brackets stripped); literals keep their
    lexical form without the surrounding quotes.
    """
    records: list[TripleRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _NTRIPLE.match(line)
        if not m:
            diag = ParseDiagnostic(lineno, line, "not a valid N-Triples statement")
            if on_error == "abort":
                raise IngestError(f"line {lineno}: {diag.reason}: {line!r}")
            diagnostics.append(diag)
            continue
        obj = m.group(3)
        if obj.startswith("<"):
            obj = obj[1:-1]
        else:
            obj = obj[1 : obj.rindex('"')]
        records.append(TripleRecord(m.group(1), m.group(2), obj))
    return records, diagnostics


def load_kv_tsv(lines) -> dict[str, str]:
    """Two-column TSV (id <TAB> value); later duplicates win."""
    out: dict[str, str] = {}
    for raw in lines:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        key, _, value = line.partition("\t")
        out[key] = value
    return out


def load_vector_file(lines) -> dict[str, np.ndarray]:
    """id <TAB> space-separated floats."""
    out: dict[str, np.ndarray] = {}
    for raw in lines:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        key, _, rest = line.partition("\t")
        out[key] = np.array([float(x) for x in rest.split()], dtype=np.float64)
    return out


def load_embedding_table(lines) -> dict[str, np.ndarray]:
    """Word-embedding table: token followed by floats, space-separated."""
    out: dict[str, np.ndarray] = {}
    for raw in lines:
        parts = raw.rstrip("\n").split(" ")
        if len(parts) < 2:
            continue
        out[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
    return out


# ---------------------------------------------------------------------------
# entities and hierarchy


def build_entities(
    triples,
    names: dict[str, str] | None = None,
    descriptions: dict[str, str] | None = None,
    typing_relation: str = TYPING_RELATION,
) -> EntityStore:
    """Group triples by head into entity records.

    The relations multiset counts every outgoing edge except the typing
    relation itself; typing edges become noisy assertions on the store.
    Entities without a name fall back to their id as surface form.
    """
    names = names or {}
    descriptions = descriptions or {}
    store = EntityStore()
    order: list[str] = []
    relations: dict[str, Counter] = {}
    assertions: list[TypeAssertion] = []
    for t in triples:
        if t.head not in relations:
            relations[t.head] = Counter()
            order.append(t.head)
        if t.relation == typing_relation:
            assertions.append(TypeAssertion(t.head, t.tail, NOISY))
        else:
            relations[t.head][t.relation] += 1
    missing_names = 0
    for eid in order:
        name = names.get(eid)
        if name is None:
            name = eid
            missing_names += 1
        store.add(EntityRecord(id=eid, name=name, description_key=eid, relations=relations[eid]))
    if missing_names:
        logger.warning("%d entities had no surface form; falling back to ids", missing_names)
    store.assertions = assertions
    store.descriptions = dict(descriptions)
    return store.freeze()


class TypeHierarchy:
    """Rooted type tree with O(1) level lookup after construction."""

    def __init__(self, parent: dict[str, str], root: str):
        self.parent = dict(parent)
        self.root = root
        self.nodes = set(parent) | {root}
        self._levels: dict[str, int] = {root: 0}
        for node in sorted(self.nodes):
            self._resolve_level(node)

    def _resolve_level(self, node: str) -> int:
        chain = []
        cur = node
        while cur not in self._levels:
            chain.append(cur)
            if cur not in self.parent:
                raise IngestError(f"type {cur!r} does not reach the root")
            cur = self.parent[cur]
            if cur in chain:
                raise IngestError(f"cycle in type hierarchy at {cur!r}")
        depth = self._levels[cur]
        for t in reversed(chain):
            depth += 1
            self._levels[t] = depth
        return self._levels[node]

    @classmethod
    def from_edges(cls, child_parent_pairs, root: str | None = None) -> "TypeHierarchy":
        parent = {}
        for child, par in child_parent_pairs:
            if child in parent and parent[child] != par:
                raise IngestError(f"type {child!r} has two parents")
            parent[child] = par
        if root is None:
            candidates = {p for p in parent.values()} - set(parent)
            if len(candidates) != 1:
                raise IngestError(f"cannot infer a unique root (candidates: {sorted(candidates)})")
            root = candidates.pop()
        return cls(parent, root)

    def level(self, t: str) -> int:
        if t not in self._levels:
            raise IngestError(f"unknown type: {t!r}")
        return self._levels[t]


def type_level(hierarchy: TypeHierarchy, t: str) -> int:
    return hierarchy.level(t)


# ---------------------------------------------------------------------------
# keyed-hash sampling


def _rank_key(seed: int, label: str, entity: str, type_: str) -> bytes:
    h = hashlib.blake2b(digest_size=8, key=str(seed).encode("utf-8"))
    h.update(label.encode("utf-8"))
    h.update(b"\x1f")
    h.update(entity.encode("utf-8"))
    h.update(b"\x1f")
    h.update(type_.encode("utf-8"))
    return h.digest()


def hash_order(assertions, seed: int, label: str) -> list[TypeAssertion]:
    """Total order by keyed hash; the basis of all sampling decisions."""
    return sorted(assertions, key=lambda a: (_rank_key(seed, label, a.entity, a.type), a.entity, a.type))


def hash_subsample(assertions, m: int, seed: int, label: str) -> list[TypeAssertion]:
    if m >= len(assertions):
        return list(assertions)
    return hash_order(assertions, seed, label)[:m]


# ---------------------------------------------------------------------------
# coarse dataset construction


@dataclass
class CoarseDatasetConfig:
    per_type_cap: int
    final_size: int
    split_fractions: tuple[float, float, float] = (0.97, 0.03, 0.0)
    seed: int = 0


def build_coarse_dataset(store: EntityStore, hierarchy: TypeHierarchy, cfg: CoarseDatasetConfig) -> DatasetSplit:
    """Reduce noisy assertions to level-1 labels, cap type sizes, merge
    small types into ``Other``, subsample, and split.

    Entities keep every level-1 type they are asserted with (the task is
    multi-label); entities with no level-1 assertion get ``Other``. Types
    at or above the cap keep their label (subsampled down to the cap);
    types below the cap are pooled into ``Other``, which is capped too.
    Capping counts (entity, type) assertions, not entities.
    """
    level1: dict[tuple[str, str], TypeAssertion] = {}
    entities_seen: dict[str, bool] = {}
    for a in store.assertions:
        entities_seen.setdefault(a.entity, False)
        if hierarchy.level(a.type) == 1:
            level1.setdefault((a.entity, a.type), TypeAssertion(a.entity, a.type, NOISY))
            entities_seen[a.entity] = True
    pooled_other = [
        TypeAssertion(eid, OTHER_TYPE, NOISY) for eid, has in sorted(entities_seen.items()) if not has
    ]

    by_type: dict[str, list[TypeAssertion]] = {}
    for a in level1.values():
        by_type.setdefault(a.type, []).append(a)

    kept: list[TypeAssertion] = []
    other_pool = list(pooled_other)
    for type_id in sorted(by_type):
        group = by_type[type_id]
        if len(group) >= cfg.per_type_cap:
            kept.extend(hash_subsample(group, cfg.per_type_cap, cfg.seed, f"cap:{type_id}"))
        else:
            other_pool.extend(TypeAssertion(a.entity, OTHER_TYPE, NOISY) for a in group)
    # the same entity can enter the Other pool through two minority types
    other_pool = list({a.pair: a for a in other_pool}.values())
    kept.extend(hash_subsample(other_pool, cfg.per_type_cap, cfg.seed, f"cap:{OTHER_TYPE}"))

    if cfg.final_size > len(kept):
        raise IngestError(f"final_size {cfg.final_size} exceeds available assertions ({len(kept)})")
    sampled = hash_subsample(kept, cfg.final_size, cfg.seed, "final")
    return split_assertions(sampled, cfg.split_fractions, cfg.seed)


def split_assertions(assertions, fractions: tuple[float, float, float], seed: int) -> DatasetSplit:
    """Hash-shuffle then slice into train/dev/test; the remainder after the
    fraction slices goes to train."""
    if any(f < 0 for f in fractions) or sum(fractions) > 1.0 + 1e-9:
        raise IngestError(f"invalid split fractions: {fractions}")
    shuffled = hash_order(assertions, seed, "split")
    n = len(shuffled)
    n_dev = int(math.floor(fractions[1] * n))
    n_test = int(math.floor(fractions[2] * n))
    dev = shuffled[:n_dev]
    test = shuffled[n_dev : n_dev + n_test]
    train = shuffled[n_dev + n_test :]
    return DatasetSplit(noisy_train=train, gold_pool=[], dev=dev, test=test, seed=seed)


# ---------------------------------------------------------------------------
# manifest


def _membership_digest(assertions) -> str:
    body = "\n".join(sorted(f"{a.entity}\t{a.type}" for a in assertions))
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def dataset_manifest(split: DatasetSplit, extra: dict | None = None) -> str:
    """Versioned text manifest: seed, counts, membership digests."""
    lines = [MANIFEST_VERSION]
    lines.append(f"sampling = {SAMPLING_SCHEME}")
    lines.append(f"seed = {split.seed}")
    lines.append(f"labels = {','.join(split.labels())}")
    for key in sorted(extra or {}):
        lines.append(f"{key} = {(extra or {})[key]}")
    for part_name, part in split.parts():
        lines.append(f"split.{part_name}.count = {len(part)}")
        lines.append(f"split.{part_name}.digest = {_membership_digest(part)}")
    lines.append("note.capping = per (entity,type) assertion")
    return "\n".join(lines) + "\n"


def split_digests(split: DatasetSplit) -> dict[str, str]:
    return {name: _membership_digest(part) for name, part in split.parts()}


def manifest_digest(manifest_text: str) -> str:
    return hashlib.sha256(manifest_text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# split / truth file formats


def assertions_to_tsv(assertions) -> str:
    lines = ["entity\ttype\tprovenance\tverdict\ttrue_type"]
    for a in assertions:
        lines.append(f"{a.entity}\t{a.type}\t{a.provenance}\t{a.verdict or ''}\t{a.true_type or ''}")
    return "\n".join(lines) + "\n"


def assertions_from_tsv(lines) -> list[TypeAssertion]:
    out = []
    for i, raw in enumerate(lines):
        line = raw.rstrip("\n")
        if not line.strip() or i == 0 and line.startswith("entity\t"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise IngestError(f"assertion line {i + 1}: expected 5 fields, got {len(fields)}")
        entity, type_, provenance, verdict, true_type = fields
        out.append(
            TypeAssertion(entity, type_, provenance, verdict=verdict or None, true_type=true_type or None)
        )
    return out


def truth_to_tsv(truth: dict[tuple[str, str], tuple[str, str]]) -> str:
    lines = ["entity\ttype\tverdict\ttrue_type"]
    for (entity, type_), (verdict, true_type) in sorted(truth.items()):
        lines.append(f"{entity}\t{type_}\t{verdict}\t{true_type}")
    return "\n".join(lines) + "\n"


def truth_from_tsv(lines) -> dict[tuple[str, str], tuple[str, str]]:
    out = {}
    for i, raw in enumerate(lines):
        line = raw.rstrip("\n")
        if not line.strip() or i == 0 and line.startswith("entity\t"):
            continue
        entity, type_, verdict, true_type = line.split("\t")
        out[(entity, type_)] = (verdict, true_type)
    return out


def vectors_to_tsv(vectors: dict[str, np.ndarray]) -> str:
    lines = []
    for key in sorted(vectors):
        vals = " ".join(f"{x:.10g}" for x in vectors[key])
        lines.append(f"{key}\t{vals}")
    return "\n".join(lines) + "\n"


def embedding_table_to_text(table: dict[str, np.ndarray]) -> str:
    lines = []
    for key in sorted(table):
        vals = " ".join(f"{x:.10g}" for x in table[key])
        lines.append(f"{key} {vals}")
    return "\n".join(lines) + "\n"


def hierarchy_to_tsv(hierarchy: TypeHierarchy) -> str:
    return "".join(f"{child}\t{parent}\n" for child, parent in sorted(hierarchy.parent.items()))


def hierarchy_from_tsv(lines, root: str | None = None) -> TypeHierarchy:
    pairs = []
    for raw in lines:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        child, _, parent = line.partition("\t")
        pairs.append((child, parent))
    return TypeHierarchy.from_edges(pairs, root=root)


# ---------------------------------------------------------------------------
# synthetic graphs


@dataclass
class SynthConfig:
    n_entities: int = 1000
    n_types: int = 4
    n_relations: int = 12
    noise_rate: float = 0.3
    seed: int = 0
    desc_dim: int = 16
    desc_noise: float = 0.6
    desc_signal: float = 1.0  # magnitude of the per-type description centroid
    name_noise: float = 0.0  # probability of a random (uninformative) name suffix
    prior_noise: float = 0.7
    dev_fraction: float = 0.1
    test_fraction: float = 0.2
    mean_relations: float = 3.0

    def validate(self) -> None:
        if not (0.0 <= self.noise_rate < 1.0):
            raise IngestError(f"noise_rate must be in [0, 1), got {self.noise_rate}")
        if self.n_types < 2:
            raise IngestError("n_types must be >= 2")
        if self.n_entities < 1:
            raise IngestError("n_entities must be >= 1")


@dataclass
class SyntheticKG:
    """Desk-scale stand-in for a noisy KG slice, with hidden ground truth."""

    store: EntityStore
    hierarchy: TypeHierarchy
    split: DatasetSplit
    truth: dict[tuple[str, str], tuple[str, str]]  # (entity, asserted) -> (verdict, true type)
    description_vectors: dict[str, np.ndarray]
    prior_table: dict[str, np.ndarray]
    triples: list[TripleRecord]
    config: SynthConfig

    def truth_verdicts(self, assertions) -> dict[tuple[str, str], str]:
        return {a.pair: self.truth[a.pair][0] for a in assertions}


def _orthonormal_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    if n > dim:
        raise IngestError(f"cannot draw {n} orthonormal centroids in {dim} dimensions")
    q, _ = np.linalg.qr(rng.normal(size=(dim, n)))
    return q.T[:n]


_SUFFIX_POOL = ["script", "lang", "ware", "berg", "ton", "ville", "osis", "ide", "ium", "ax", "or", "ryn"]
_STEM_CHARS = "bcdfghjklmnpqrstvwz"
_VOWELS = "aeiou"


def _synth_name(rng: np.random.Generator, type_idx: int) -> str:
    stem = "".join(
        _STEM_CHARS[rng.integers(len(_STEM_CHARS))] + _VOWELS[rng.integers(len(_VOWELS))]
        for _ in range(int(rng.integers(2, 4)))
    )
    return stem + _SUFFIX_POOL[type_idx % len(_SUFFIX_POOL)]


def generate_synthetic_kg(cfg: SynthConfig) -> SyntheticKG:
    """Entities with type-correlated names, relations and description
    vectors; exactly floor(noise_rate * n) assertions get a wrong type.

    Everything is drawn from one seeded generator, so equal configs give
    byte-identical outputs.
    """
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    type_ids = [f"type{i}" for i in range(cfg.n_types)]
    hierarchy = TypeHierarchy({t: "root" for t in type_ids}, root="root")
    relation_ids = [f"rel{i}" for i in range(cfg.n_relations)]

    # each type prefers a third of the relation vocabulary
    pref_size = max(1, cfg.n_relations // 3)
    preferred = {t: rng.choice(cfg.n_relations, size=pref_size, replace=False) for t in type_ids}

    # orthonormal type centroids keep task difficulty stable across seeds
    centroids = _orthonormal_rows(rng, cfg.n_types, cfg.desc_dim)
    prior_anchor = _orthonormal_rows(rng, cfg.n_types, cfg.desc_dim)

    width = len(str(max(cfg.n_entities - 1, 1)))
    entity_ids = [f"E{i:0{width}d}" for i in range(cfg.n_entities)]
    true_type_idx = rng.integers(cfg.n_types, size=cfg.n_entities)

    store = EntityStore()
    triples: list[TripleRecord] = []
    desc_vectors: dict[str, np.ndarray] = {}
    prior_table: dict[str, np.ndarray] = {}
    descriptions: dict[str, str] = {}

    for i, t in enumerate(type_ids):
        prior_table[t] = prior_anchor[i]

    for i, eid in enumerate(entity_ids):
        ti = int(true_type_idx[i])
        # the short-circuit keeps the rng stream identical for name_noise=0
        suffix_idx = ti
        if cfg.name_noise > 0 and rng.random() < cfg.name_noise:
            suffix_idx = int(rng.integers(len(_SUFFIX_POOL)))
        name = _synth_name(rng, suffix_idx)
        k = 1 + rng.poisson(cfg.mean_relations - 1.0)
        rels = Counter()
        for _ in range(k):
            if rng.random() < 0.8:
                r = relation_ids[int(preferred[type_ids[ti]][rng.integers(pref_size)])]
            else:
                r = relation_ids[int(rng.integers(cfg.n_relations))]
            rels[r] += 1
            target = entity_ids[int(rng.integers(cfg.n_entities))]
            triples.append(TripleRecord(eid, r, target))
        desc_vectors[eid] = cfg.desc_signal * centroids[ti] + cfg.desc_noise * rng.normal(size=cfg.desc_dim)
        words = [type_ids[ti], name[:4], "entity"]
        descriptions[eid] = " ".join(words + [type_ids[ti]] * 2)
        w = prior_anchor[ti] + cfg.prior_noise * rng.normal(size=cfg.desc_dim)
        prior_table[name.lower()] = w / np.linalg.norm(w)
        store.add(EntityRecord(id=eid, name=name, description_key=eid, relations=rels))

    # plant exactly floor(q * n) wrong types
    n_flips = int(math.floor(cfg.noise_rate * cfg.n_entities))
    flip_order = rng.permutation(cfg.n_entities)
    flipped = set(int(j) for j in flip_order[:n_flips])

    assertions: list[TypeAssertion] = []
    truth: dict[tuple[str, str], tuple[str, str]] = {}
    for i, eid in enumerate(entity_ids):
        ti = int(true_type_idx[i])
        true_type = type_ids[ti]
        if i in flipped:
            wrong = int(rng.integers(cfg.n_types - 1))
            if wrong >= ti:
                wrong += 1
            asserted = type_ids[wrong]
            verdict = "error"
        else:
            asserted = true_type
            verdict = "correct"
        assertions.append(TypeAssertion(eid, asserted, NOISY))
        truth[(eid, asserted)] = (verdict, true_type)
        triples.append(TripleRecord(eid, TYPING_RELATION, asserted))

    store.assertions = assertions
    store.descriptions = descriptions
    store.freeze()

    split = split_assertions(assertions, (1.0 - cfg.dev_fraction - cfg.test_fraction, cfg.dev_fraction, cfg.test_fraction), cfg.seed)
    # the held-out test set carries gold verdicts
    gold_test = [
        TypeAssertion(a.entity, a.type, GOLD, verdict=truth[a.pair][0], true_type=truth[a.pair][1])
        for a in split.test
    ]
    split = DatasetSplit(split.noisy_train, [], split.dev, gold_test, split.seed)

    return SyntheticKG(
        store=store,
        hierarchy=hierarchy,
        split=split,
        truth=truth,
        description_vectors=desc_vectors,
        prior_table=prior_table,
        triples=triples,
        config=cfg,
    )
