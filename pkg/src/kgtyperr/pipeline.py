"""Workspace layout shared by the CLI, demos and tests: a dataset
directory holds triples, names, descriptions, vectors, priors, hierarchy,
split files, hidden truth (synthetic data only) and the dataset manifest.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import (
    DatasetSplit,
    EntityStore,
    SyntheticKG,
    TypeHierarchy,
    assertions_from_tsv,
    assertions_to_tsv,
    build_entities,
    dataset_manifest,
    embedding_table_to_text,
    hierarchy_from_tsv,
    hierarchy_to_tsv,
    load_embedding_table,
    load_kv_tsv,
    load_vector_file,
    manifest_digest,
    parse_triples,
    serialize_triples,
    truth_from_tsv,
    truth_to_tsv,
    vectors_to_tsv,
)
from .network import DescriptionSpec, EncoderConfig, FeatureEncoder, TypingModel, build_model
from .training import PriorBelief, TrainConfig, Trainer

SPLIT_PARTS = ("noisy_train", "gold_pool", "dev", "test")


@dataclass
class DatasetBundle:
    store: EntityStore
    hierarchy: TypeHierarchy | None
    split: DatasetSplit
    truth: dict | None
    description_vectors: dict[str, np.ndarray]
    prior_table: dict[str, np.ndarray]
    manifest_text: str

    @property
    def manifest_digest(self) -> str:
        return manifest_digest(self.manifest_text)


def save_synth(kg: SyntheticKG, outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    def write(name: str, text: str) -> None:
        path = outdir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    write("triples.tsv", serialize_triples(kg.triples))
    write("names.tsv", "".join(f"{eid}\t{kg.store.get(eid).name}\n" for eid in sorted(kg.store.ids())))
    write("descriptions.tsv", "".join(f"{k}\t{v}\n" for k, v in sorted(kg.store.descriptions.items())))
    write("desc_vectors.tsv", vectors_to_tsv(kg.description_vectors))
    write("priors.txt", embedding_table_to_text(kg.prior_table))
    write("hierarchy.tsv", hierarchy_to_tsv(kg.hierarchy))
    for part_name, part in kg.split.parts():
        write(f"split-{part_name}.tsv", assertions_to_tsv(part))
    write("truth.tsv", truth_to_tsv(kg.truth))
    extra = {
        "config.n_entities": kg.config.n_entities,
        "config.n_types": kg.config.n_types,
        "config.noise_rate": kg.config.noise_rate,
    }
    write("dataset-manifest.txt", dataset_manifest(kg.split, extra))
    return written


def load_dataset(datadir) -> DatasetBundle:
    datadir = Path(datadir)
    with open(datadir / "triples.tsv", encoding="utf-8") as fh:
        triples, _ = parse_triples(fh)
    names = load_kv_tsv(open(datadir / "names.tsv", encoding="utf-8")) if (datadir / "names.tsv").exists() else {}
    descriptions = (
        load_kv_tsv(open(datadir / "descriptions.tsv", encoding="utf-8"))
        if (datadir / "descriptions.tsv").exists()
        else {}
    )
    store = build_entities(triples, names, descriptions)

    hierarchy = None
    if (datadir / "hierarchy.tsv").exists():
        hierarchy = hierarchy_from_tsv(open(datadir / "hierarchy.tsv", encoding="utf-8"))

    manifest_text = (datadir / "dataset-manifest.txt").read_text(encoding="utf-8")
    seed = 0
    for line in manifest_text.splitlines():
        if line.startswith("seed = "):
            seed = int(line.split("=", 1)[1].strip())

    parts = {}
    for part_name in SPLIT_PARTS:
        path = datadir / f"split-{part_name}.tsv"
        parts[part_name] = assertions_from_tsv(open(path, encoding="utf-8")) if path.exists() else []
    split = DatasetSplit(parts["noisy_train"], parts["gold_pool"], parts["dev"], parts["test"], seed)

    truth = None
    if (datadir / "truth.tsv").exists():
        truth = truth_from_tsv(open(datadir / "truth.tsv", encoding="utf-8"))
    desc_vectors = {}
    if (datadir / "desc_vectors.tsv").exists():
        desc_vectors = load_vector_file(open(datadir / "desc_vectors.tsv", encoding="utf-8"))
    prior_table = {}
    if (datadir / "priors.txt").exists():
        prior_table = load_embedding_table(open(datadir / "priors.txt", encoding="utf-8"))

    return DatasetBundle(
        store=store,
        hierarchy=hierarchy,
        split=split,
        truth=truth,
        description_vectors=desc_vectors,
        prior_table=prior_table,
        manifest_text=manifest_text,
    )


def bundle_from_synth(kg: SyntheticKG) -> DatasetBundle:
    """In-memory bundle for a synthetic graph, no files involved."""
    return DatasetBundle(
        store=kg.store,
        hierarchy=kg.hierarchy,
        split=kg.split,
        truth=kg.truth,
        description_vectors=kg.description_vectors,
        prior_table=kg.prior_table,
        manifest_text=dataset_manifest(kg.split),
    )


def make_trainer(
    bundle: DatasetBundle,
    cfg: TrainConfig,
    encoder_config: EncoderConfig | None = None,
    description_mode: str = "file_vector",
) -> Trainer:
    labels = bundle.split.labels()
    if encoder_config is None:
        dim = len(next(iter(bundle.description_vectors.values()))) if bundle.description_vectors else 100
        spec = (
            DescriptionSpec(kind="file_vector", dim=dim)
            if description_mode == "file_vector"
            else DescriptionSpec(kind="hashed_tokens")
        )
        encoder_config = EncoderConfig(n_types=len(labels), description=spec, seed=cfg.seed)
    else:
        encoder_config.n_types = len(labels)
    model, encoder = build_model(encoder_config, bundle.store, bundle.description_vectors)
    priors = None
    if cfg.use_dynamic_lr and bundle.prior_table:
        pairs = [(bundle.store.get(a.entity).name, a.type) for a in bundle.split.noisy_train]
        priors = PriorBelief.build(bundle.prior_table, pairs)
    return Trainer(model, encoder, labels, cfg, priors)
