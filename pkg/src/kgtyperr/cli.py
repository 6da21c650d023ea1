"""Command-line entry point orchestrating every pipeline stage.

Config precedence is flags > config file > defaults: a ``--config`` file
holds flat ``key = value`` pairs whose keys are flag names with dots
allowed (``vat.epsilon``); they are applied as parser defaults before the
final argv parse. Every run writes one run manifest recording the
command, effective config, seeds, input digests, output paths and wall
time. All machine-readable outputs are deterministic given the seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .ingest import (
    CoarseDatasetConfig,
    IngestError,
    SynthConfig,
    assertions_from_tsv,
    assertions_to_tsv,
    build_coarse_dataset,
    build_entities,
    dataset_manifest,
    generate_synthetic_kg,
    hierarchy_from_tsv,
    load_kv_tsv,
    load_vector_file,
    parse_ntriples,
    parse_triples,
    truth_from_tsv,
)
from .metrics import error_rate_ci, implied_sample_size, mean_average_precision, prf1, prf1_macro
from .network import DescriptionSpec, EncoderConfig, RelationVocab, pretrain_component
from .outliers import ReprNetConfig, TypeOutlierConfig, detect_type_outliers, scores_tsv, train_repr
from .pipeline import DatasetBundle, load_dataset, make_trainer, save_synth
from .training import TrainConfig
from .vat import VatConfig

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunContext:
    """Collects manifest facts while a subcommand runs."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.started = time.time()
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def track_input(self, path) -> Path:
        path = Path(path)
        self.inputs[str(path)] = _sha256_file(path)
        return path

    def track_output(self, path) -> Path:
        self.outputs.append(str(path))
        return Path(path)

    def manifest(self) -> dict:
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "config")}
        config_blob = json.dumps(config, sort_keys=True, default=str)
        return {
            "version": 1,
            "tool": f"kgtyperr {__version__}",
            "command": self.command,
            "argv": sys.argv[1:],
            "effective_config": config,
            "config_digest": hashlib.sha256(config_blob.encode()).hexdigest(),
            "seed": getattr(self.args, "seed", None),
            "input_digests": self.inputs,
            "output_paths": self.outputs,
            "started_unix": self.started,
            "wall_seconds": time.time() - self.started,
        }

    def finish(self) -> None:
        out = getattr(self.args, "out", None)
        blob = json.dumps(self.manifest(), indent=2, sort_keys=True)
        if out:
            path = Path(out) / "run-manifest.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(blob + "\n", encoding="utf-8")
        else:
            print(blob)


def _read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(open(path, encoding="utf-8"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IngestError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip().replace(".", "_").replace("-", "_")] = value.strip()
    return values


def _coerce(value: str, like) -> object:
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if like is None:
        for cast in (int, float):
            try:
                return cast(value)
            except ValueError:
                continue
    return value


def _train_config_from_args(args) -> TrainConfig:
    threshold = args.threshold
    if threshold != "auto":
        threshold = float(threshold)
    return TrainConfig(
        batch_size=args.batch_size,
        base_lr=args.lr,
        epochs=args.epochs,
        annotations_per_round=args.annotations_per_round,
        rounds_every_iters=args.rounds_every_iters,
        max_query=args.budget,
        detection_threshold=threshold,
        use_noise_model=not args.no_noise_model,
        use_vat=not args.no_vat,
        use_dynamic_lr=not args.no_dynamic_lr,
        finetune_on_gold=args.finetune_on_gold,
        strategy=args.strategy,
        err_pool_subsample=args.err_pool_subsample,
        err_expectation=args.err_expectation,
        vat=VatConfig(
            epsilon=args.vat_epsilon,
            lam=args.vat_lambda,
            power_iters=args.vat_power_iters,
            paper_sign=args.vat_paper_sign,
        ),
        seed=args.seed,
    )


def _encoder_config_from_args(args, n_types: int, desc_dim: int) -> EncoderConfig:
    if args.description_encoder == "file_vector":
        spec = DescriptionSpec(kind="file_vector", dim=desc_dim)
    else:
        spec = DescriptionSpec(kind="hashed_tokens", vocab_hash_dim=args.hash_dim, embed_dim=args.desc_embed_dim)
    return EncoderConfig(
        n_types=n_types,
        description=spec,
        surface_hidden=args.surface_hidden,
        relation_embed_dim=args.relation_embed_dim,
        relation_min_count=args.relation_min_count,
        classifier_hidden=args.classifier_hidden,
        relu_output=not args.no_output_relu,
        seed=args.seed,
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--annotations-per-round", type=int, default=20)
    p.add_argument("--rounds-every-iters", type=int, default=400)
    p.add_argument("--budget", type=int, default=None, help="total annotation budget (MaxQuery cap)")
    p.add_argument("--threshold", default="auto", help="detection threshold, a float or 'auto'")
    p.add_argument("--strategy", choices=("us", "err"), default="us")
    p.add_argument("--err-pool-subsample", type=int, default=256)
    p.add_argument("--err-expectation", choices=("model", "pessimistic"), default="model")
    p.add_argument("--no-noise-model", action="store_true")
    p.add_argument("--no-vat", action="store_true")
    p.add_argument("--no-dynamic-lr", action="store_true")
    p.add_argument("--finetune-on-gold", action="store_true")
    p.add_argument("--vat-epsilon", type=float, default=1.0)
    p.add_argument("--vat-lambda", type=float, default=0.1)
    p.add_argument("--vat-power-iters", type=int, default=1)
    p.add_argument("--vat-paper-sign", action="store_true")
    _add_encoder_flags(p)


def _add_encoder_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--description-encoder", choices=("file_vector", "hashed_tokens"), default="file_vector")
    p.add_argument("--hash-dim", type=int, default=2048)
    p.add_argument("--desc-embed-dim", type=int, default=32)
    p.add_argument("--surface-hidden", type=int, default=64)
    p.add_argument("--relation-embed-dim", type=int, default=256)
    p.add_argument("--relation-min-count", type=int, default=20)
    p.add_argument("--classifier-hidden", type=int, default=512)
    p.add_argument("--no-output-relu", action="store_true")


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, ctx: RunContext) -> int:
    triples_path = ctx.track_input(args.triples)
    with open(triples_path, encoding="utf-8") as fh:
        parse = parse_ntriples if args.ntriples else parse_triples
        triples, diagnostics = parse(fh, on_error="skip" if args.skip_malformed else "abort")
    names = load_kv_tsv(open(ctx.track_input(args.names), encoding="utf-8")) if args.names else {}
    descriptions = load_kv_tsv(open(ctx.track_input(args.descriptions), encoding="utf-8")) if args.descriptions else {}
    store = build_entities(triples, names, descriptions)
    vocab = RelationVocab.build(store, min_count=args.relation_min_count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ctx.track_output(out / "relation-vocab.tsv").write_text(vocab.serialize(), encoding="utf-8")
    summary = [
        "kgtyperr-ingest-summary v1",
        f"triples = {len(triples)}",
        f"malformed = {len(diagnostics)}",
        f"entities = {len(store)}",
        f"assertions = {len(store.assertions)}",
        f"relation_vocab = {len(vocab)}",
    ]
    ctx.track_output(out / "ingest-summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    for d in diagnostics:
        print(f"skipped line {d.line_number}: {d.reason}", file=sys.stderr)
    print("\n".join(summary))
    return 0


def cmd_build_dataset(args, ctx: RunContext) -> int:
    with open(ctx.track_input(args.triples), encoding="utf-8") as fh:
        triples, _ = parse_triples(fh, on_error="skip")
    hierarchy = hierarchy_from_tsv(open(ctx.track_input(args.hierarchy), encoding="utf-8"))
    store = build_entities(triples)
    fractions = tuple(float(x) for x in args.fractions.split(":"))
    if len(fractions) != 3:
        raise IngestError("--fractions must be train:dev:test")
    total = sum(fractions)
    fractions = tuple(f / total for f in fractions)
    cfg = CoarseDatasetConfig(
        per_type_cap=args.cap, final_size=args.final_size, split_fractions=fractions, seed=args.seed
    )
    split = build_coarse_dataset(store, hierarchy, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for part_name, part in split.parts():
        ctx.track_output(out / f"split-{part_name}.tsv").write_text(assertions_to_tsv(part), encoding="utf-8")
    manifest = dataset_manifest(split, {"per_type_cap": cfg.per_type_cap, "final_size": cfg.final_size})
    ctx.track_output(out / "dataset-manifest.txt").write_text(manifest, encoding="utf-8")
    print(manifest, end="")
    return 0


def cmd_synth(args, ctx: RunContext) -> int:
    cfg = SynthConfig(
        n_entities=args.entities,
        n_types=args.types,
        n_relations=args.relations,
        noise_rate=args.noise,
        seed=args.seed,
        desc_dim=args.desc_dim,
        desc_noise=args.desc_noise,
        prior_noise=args.prior_noise,
        dev_fraction=args.dev_fraction,
        test_fraction=args.test_fraction,
    )
    kg = generate_synthetic_kg(cfg)
    written = save_synth(kg, args.out)
    for path in written:
        ctx.track_output(path)
    n_errors = sum(1 for v, _ in kg.truth.values() if v == "error")
    print(f"wrote {len(written)} files to {args.out}")
    print(f"entities = {cfg.n_entities}, planted errors = {n_errors} ({n_errors / cfg.n_entities:.3f})")
    return 0


def _load_bundle(args, ctx: RunContext) -> DatasetBundle:
    datadir = Path(args.data)
    for name in ("triples.tsv", "dataset-manifest.txt"):
        ctx.track_input(datadir / name)
    return load_dataset(datadir)


def cmd_pretrain(args, ctx: RunContext) -> int:
    from .checkpoint import save_checkpoint

    bundle = _load_bundle(args, ctx)
    cfg = _train_config_from_args(args)
    desc_dim = len(next(iter(bundle.description_vectors.values()))) if bundle.description_vectors else 100
    enc_cfg = _encoder_config_from_args(args, len(bundle.split.labels()), desc_dim)
    trainer = make_trainer(bundle, cfg, enc_cfg)
    components = ["surface", "relations"]
    if enc_cfg.description.kind == "hashed_tokens":
        components.insert(0, "description")
    for component in components:
        pretrain_component(
            component,
            trainer.model,
            trainer.encoder,
            bundle.split.noisy_train,
            trainer.labels,
            epochs=args.pretrain_epochs,
            lr=cfg.base_lr,
            seed=cfg.seed,
        )
    scales = trainer.model.calibrate_channel_scales(
        trainer.encoder, [a.entity for a in bundle.split.noisy_train[: args.calibration_sample]]
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = ctx.track_output(out / "pretrained.ckpt")
    save_checkpoint(path, trainer.model.params, seed=cfg.seed, hyper={"channel_scales": scales})
    print(f"pretrained {', '.join(components)}; channel scales: " + ", ".join(f"{k}={v:.4g}" for k, v in scales.items()))
    return 0


def cmd_train(args, ctx: RunContext) -> int:
    from .active import OracleAnnotator
    from .checkpoint import restore_into, save_checkpoint

    bundle = _load_bundle(args, ctx)
    cfg = _train_config_from_args(args)
    desc_dim = len(next(iter(bundle.description_vectors.values()))) if bundle.description_vectors else 100
    enc_cfg = _encoder_config_from_args(args, len(bundle.split.labels()), desc_dim)
    trainer = make_trainer(bundle, cfg, enc_cfg)
    if args.init_from:
        header = restore_into(trainer.model.params, ctx.track_input(args.init_from))
        scales = header.get("hyper", {}).get("channel_scales")
        if scales:
            trainer.model.channel_scales.update(scales)
    annotator = None
    if cfg.max_query is None or cfg.max_query > 0:
        if bundle.truth is None:
            raise IngestError("training with annotation rounds needs truth.tsv (or use annotate-serve)")
        annotator = OracleAnnotator(bundle.truth)
    result = trainer.train(
        bundle.split.noisy_train, bundle.split.gold_pool, bundle.split.dev, annotator
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hyper = {
        "labels": trainer.labels,
        "channel_scales": trainer.model.channel_scales,
        "calibrated_tau": trainer.calibrated_tau,
        "encoder": {
            "description_kind": enc_cfg.description.kind,
            "desc_dim": enc_cfg.description.dim,
            "surface_hidden": enc_cfg.surface_hidden,
            "relation_embed_dim": enc_cfg.relation_embed_dim,
            "classifier_hidden": enc_cfg.classifier_hidden,
            "relu_output": enc_cfg.relu_output,
        },
    }
    save_checkpoint(ctx.track_output(out / "model.ckpt"), trainer.model.params, seed=cfg.seed, hyper=hyper)
    ctx.track_output(out / "run-report.txt").write_text(result.run_report(), encoding="utf-8")
    if bundle.truth is not None and bundle.split.test:
        truth_verdicts = {a.pair: bundle.truth[a.pair][0] for a in bundle.split.test}
        precision, recall, f1 = result.detection_f1(bundle.split.test, truth_verdicts)
        print(f"test detection: precision={precision:.3f} recall={recall:.3f} f1={f1:.3f}")
    print(f"annotations used: {trainer.annotations_used}; calibrated tau: {trainer.calibrated_tau:.4f}")
    return 0


def cmd_detect(args, ctx: RunContext) -> int:
    from .checkpoint import restore_into

    bundle = _load_bundle(args, ctx)
    cfg = _train_config_from_args(args)
    desc_dim = len(next(iter(bundle.description_vectors.values()))) if bundle.description_vectors else 100
    enc_cfg = _encoder_config_from_args(args, len(bundle.split.labels()), desc_dim)
    trainer = make_trainer(bundle, cfg, enc_cfg)
    header = restore_into(trainer.model.params, ctx.track_input(args.checkpoint))
    hyper = header.get("hyper", {})
    if hyper.get("channel_scales"):
        trainer.model.channel_scales.update(hyper["channel_scales"])
    if hyper.get("calibrated_tau") is not None:
        trainer.calibrated_tau = hyper["calibrated_tau"]
    assertions = dict(bundle.split.parts())[args.split]
    tau = None if args.tau == "auto" else float(args.tau)
    verdicts = trainer.detect_errors(assertions, tau)
    lines = ["entity\ttype\tdecision\tscore\tunknown_type"]
    for v in verdicts:
        lines.append(f"{v.entity}\t{v.type}\t{v.decision}\t{v.score:.10f}\t{int(v.unknown_type)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ctx.track_output(out / "verdicts.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    n_err = sum(1 for v in verdicts if v.decision == "error")
    print(f"{len(verdicts)} assertions scored; {n_err} flagged as errors")
    return 0


def cmd_outliers(args, ctx: RunContext) -> int:
    from .outliers import concat_embeddings

    text_vecs = load_vector_file(open(ctx.track_input(args.text_vectors), encoding="utf-8"))
    graph_vecs = load_vector_file(open(ctx.track_input(args.graph_vectors), encoding="utf-8"))
    assertions = assertions_from_tsv(open(ctx.track_input(args.assertions), encoding="utf-8"))
    by_type: dict[str, list[str]] = {}
    for a in assertions:
        by_type.setdefault(a.type, []).append(a.entity)
    entity_ids = sorted({a.entity for a in assertions})
    embeddings = concat_embeddings(text_vecs, graph_vecs, entity_ids)

    net = None
    if args.repr_epochs > 0:
        positives = {t: sorted(set(ids)) for t, ids in by_type.items()}
        negatives = {
            t: sorted(set(entity_ids) - set(ids)) for t, ids in by_type.items()
        }
        input_dim = len(next(iter(embeddings.values())))
        repr_cfg = ReprNetConfig(
            input_dim=input_dim,
            output_dim=min(args.repr_dim, input_dim - 1),
            margin=args.margin,
            epochs=args.repr_epochs,
            seed=args.seed,
        )
        net = train_repr(embeddings, positives, negatives, repr_cfg)

    cfg = TypeOutlierConfig(
        method=args.method,
        lof_k=args.lof_k,
        n_trees=args.trees,
        subsample_size=args.subsample,
        contamination=args.contamination,
        min_entities=args.min_entities,
        seed=args.seed,
    )
    all_scores = []
    skipped = []
    for t in sorted(by_type):
        try:
            all_scores.extend(detect_type_outliers(t, sorted(set(by_type[t])), embeddings, net, cfg))
        except Exception as exc:  # noqa: BLE001 - per-type isolation
            skipped.append(f"{t}: {exc}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ctx.track_output(out / "outlier-scores.tsv").write_text(scores_tsv(all_scores), encoding="utf-8")
    for msg in skipped:
        print(f"skipped type {msg}", file=sys.stderr)
    print(f"scored {len(all_scores)} assertions across {len(by_type) - len(skipped)} types")
    return 0


def cmd_evaluate(args, ctx: RunContext) -> int:
    truth = truth_from_tsv(open(ctx.track_input(args.truth), encoding="utf-8"))
    truth_verdicts = {pair: verdict for pair, (verdict, _) in truth.items()}
    lines = ["kgtyperr-metrics v1"]
    if args.verdicts:
        verdicts = {}
        for i, raw in enumerate(open(ctx.track_input(args.verdicts), encoding="utf-8")):
            if i == 0:
                continue
            entity, type_, decision, _, _ = raw.rstrip("\n").split("\t")
            verdicts[(entity, type_)] = decision
        precision, recall, f1 = prf1(verdicts, truth_verdicts)
        mp, mr, mf1 = prf1_macro(verdicts, truth_verdicts)
        lines += [
            "[metrics]",
            f"precision = {precision:.6f}",
            f"recall = {recall:.6f}",
            f"f1 = {f1:.6f}",
            f"macro.precision = {mp:.6f}",
            f"macro.recall = {mr:.6f}",
            f"macro.f1 = {mf1:.6f}",
        ]
    if args.scores:
        per_type: dict[str, tuple[list, list]] = {}
        for i, raw in enumerate(open(ctx.track_input(args.scores), encoding="utf-8")):
            if i == 0:
                continue
            type_, entity, _, score, _ = raw.rstrip("\n").split("\t")
            scores, positives = per_type.setdefault(type_, ([], []))
            scores.append(float(score))
            positives.append(truth_verdicts.get((entity, type_)) == "error")
        map_value, aps, skipped = mean_average_precision(per_type)
        if "[metrics]" not in lines:
            lines.append("[metrics]")
        lines.append(f"map = {map_value:.6f}")
        for t in sorted(aps):
            lines.append(f"ap.{t} = {aps[t]:.6f}")
        for t in skipped:
            lines.append(f"ap.{t} = skipped (no positives)")
    body = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ctx.track_output(out / "metrics.txt").write_text(body, encoding="utf-8")
    print(body, end="")
    return 0


def cmd_estimate_error_rate(args, ctx: RunContext) -> int:
    est = error_rate_ci(args.errors, args.n, confidence=args.confidence, method=args.method)
    print(f"error rate: {est.p_hat:.4f} ± {est.halfwidth:.4f} ({est.confidence:.0%} confidence, n={est.n})")
    implied = implied_sample_size(est.p_hat, est.halfwidth, est.confidence)
    print(f"halfwidth-implied sample size: {implied:.1f}")
    return 0


def cmd_grad_check(args, ctx: RunContext) -> int:
    from .grad_check import full_model_grad_check

    worst = 0.0
    for i in range(args.seeds):
        worst = max(worst, full_model_grad_check(seed=args.seed + i))
    print(f"max relative error over {args.seeds} seed(s): {worst:.3e}")
    if worst >= args.tolerance:
        print(f"FAIL: exceeds tolerance {args.tolerance:g}", file=sys.stderr)
        return 1
    print(f"PASS: below tolerance {args.tolerance:g}")
    return 0


def cmd_annotate_serve(args, ctx: RunContext) -> int:
    import threading

    import uvicorn

    from .checkpoint import save_checkpoint
    from .http_api import create_app
    from .service import AnnotationService, ServiceAnnotator

    bundle = _load_bundle(args, ctx)
    cfg = _train_config_from_args(args)
    desc_dim = len(next(iter(bundle.description_vectors.values()))) if bundle.description_vectors else 100
    enc_cfg = _encoder_config_from_args(args, len(bundle.split.labels()), desc_dim)
    trainer = make_trainer(bundle, cfg, enc_cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    service = AnnotationService(out / "ledgers")
    session = service.create_session(
        manifest_digest=bundle.manifest_digest,
        strategy=cfg.strategy,
        budget=cfg.max_query or 100,
        session_id=args.session_id,
    )
    annotator = ServiceAnnotator(session, timeout=args.annotator_timeout)

    def run_training():
        result = trainer.train(bundle.split.noisy_train, bundle.split.gold_pool, bundle.split.dev, annotator)
        save_checkpoint(out / "model.ckpt", trainer.model.params, seed=cfg.seed, hyper={"labels": trainer.labels})
        (out / "run-report.txt").write_text(result.run_report(), encoding="utf-8")
        print("training complete; server stays up for inspection", flush=True)

    thread = threading.Thread(target=run_training, daemon=True, name="trainer")
    thread.start()
    ctx.track_output(out / "model.ckpt")
    ctx.track_output(out / "run-report.txt")
    print(f"session {session.session_id} serving on {args.host}:{args.port}", flush=True)
    uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_annotate_oracle(args, ctx: RunContext) -> int:
    import urllib.request

    truth = truth_from_tsv(open(ctx.track_input(args.truth), encoding="utf-8"))

    def call(method: str, path: str, body: dict | None = None) -> dict:
        req = urllib.request.Request(
            args.url.rstrip("/") + path,
            method=method,
            data=json.dumps(body).encode() if body is not None else None,
            headers={"Content-Type": "application/json"},
        )
        with urllib.request.urlopen(req, timeout=30) as resp:
            return json.loads(resp.read())

    rounds = 0
    committed_total = 0
    while rounds < args.max_rounds:
        progress = call("GET", f"/session/{args.session}/progress")
        if progress["complete"]:
            break
        queue = call("GET", f"/session/{args.session}/queue")
        cards = queue.get("cards", [])
        if not cards:
            time.sleep(queue.get("retry_after", 0.2))
            continue
        verdicts = []
        for card in cards:
            verdict, true_type = truth[(card["entity"], card["queried_type"])]
            verdicts.append(
                {
                    "card_id": card["card_id"],
                    "verdict": verdict,
                    "true_type": true_type if verdict == "error" else None,
                }
            )
        ack = call("POST", f"/session/{args.session}/labels", {"verdicts": verdicts, "annotator_id": "oracle"})
        committed_total += len(ack["committed"])
        rounds += 1
    print(f"oracle committed {committed_total} verdicts over {rounds} round(s)")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgtyperr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kgtyperr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat key=value config file (flags override it)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1, help="worker-parallelism cap")
        p.set_defaults(func=func)
        parser.subcommands[name] = p
        return p

    p = add("ingest", cmd_ingest, "parse triples/names/descriptions into an entity store summary")
    p.add_argument("--triples", required=True)
    p.add_argument("--ntriples", action="store_true", help="input is N-Triples instead of TSV")
    p.add_argument("--names")
    p.add_argument("--descriptions")
    p.add_argument("--skip-malformed", action="store_true")
    p.add_argument("--relation-min-count", type=int, default=20)
    p.add_argument("--out", required=True)

    p = add("build-dataset", cmd_build_dataset, "coarse-grained dataset from triples + hierarchy")
    p.add_argument("--triples", required=True)
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--cap", type=int, default=10000)
    p.add_argument("--final-size", type=int, required=True)
    p.add_argument("--fractions", default="97:3:0")
    p.add_argument("--out", required=True)

    p = add("synth", cmd_synth, "generate a synthetic noisy KG with hidden truth")
    p.add_argument("--entities", type=int, default=1000)
    p.add_argument("--types", type=int, default=4)
    p.add_argument("--relations", type=int, default=12)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--desc-dim", type=int, default=16)
    p.add_argument("--desc-noise", type=float, default=0.6)
    p.add_argument("--prior-noise", type=float, default=0.7)
    p.add_argument("--dev-fraction", type=float, default=0.1)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)

    p = add("pretrain", cmd_pretrain, "pre-train channel encoders on noisy labels")
    p.add_argument("--data", required=True)
    p.add_argument("--pretrain-epochs", type=int, default=2)
    p.add_argument("--calibration-sample", type=int, default=512)
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = add("train", cmd_train, "train the semi-supervised detector (oracle annotator)")
    p.add_argument("--data", required=True)
    p.add_argument("--init-from", help="checkpoint to initialize encoders from")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = add("annotate-serve", cmd_annotate_serve, "train with a live HTTP annotation session")
    p.add_argument("--data", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.add_argument("--session-id")
    p.add_argument("--annotator-timeout", type=float, default=None, help="seconds to wait per round")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = add("annotate-oracle", cmd_annotate_oracle, "drive a live session's queue from a truth file")
    p.add_argument("--url", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--max-rounds", type=int, default=1000)

    p = add("detect", cmd_detect, "score assertions with a trained checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("noisy_train", "gold_pool", "dev", "test"), default="test")
    p.add_argument("--tau", default="auto")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = add("outliers", cmd_outliers, "per-type outlier scores over embedding files")
    p.add_argument("--text-vectors", required=True)
    p.add_argument("--graph-vectors", required=True)
    p.add_argument("--assertions", required=True)
    p.add_argument("--method", choices=("if", "lof"), default="if")
    p.add_argument("--repr-epochs", type=int, default=5)
    p.add_argument("--repr-dim", type=int, default=128)
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--lof-k", type=int, default=20)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--subsample", type=int, default=256)
    p.add_argument("--contamination", type=float, default=None)
    p.add_argument("--min-entities", type=int, default=8)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "precision/recall/F1 and MAP against hidden truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--verdicts")
    p.add_argument("--scores")
    p.add_argument("--out")

    p = add("estimate-error-rate", cmd_estimate_error_rate, "binomial error-rate estimate with CI")
    p.add_argument("--errors", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--method", choices=("normal", "wilson"), default="normal")

    p = add("grad-check", cmd_grad_check, "finite-difference check of the full model gradient")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--tolerance", type=float, default=1e-4)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = _read_config_file(args.config)
        defaults = vars(args)
        overrides = {}
        for key, raw in values.items():
            if key not in defaults:
                print(f"unknown config key: {key}", file=sys.stderr)
                return EXIT_USAGE
            overrides[key] = _coerce(raw, defaults[key])
        # defaults must land on the subcommand's parser: subparsers parse
        # into a fresh namespace, so top-level defaults would be shadowed
        parser.subcommands[args.command].set_defaults(**overrides)
        args = parser.parse_args(argv)
    ctx = RunContext(args.command, args)
    try:
        code = args.func(args, ctx)
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    ctx.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
