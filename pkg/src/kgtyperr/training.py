"""Semi-supervised training loop over noisy and gold labels.

One epoch iterates batches of the union of the noisy pool S and gold pool
S_hat, minimizing the combined loss: noisy items use the noise-channel
output, gold items use the clean probabilities, every item optionally adds
the lambda-weighted adversarial smoothing penalty. Every
``rounds_every_iters`` optimizer steps an annotation round asks the
annotator for up to ``annotations_per_round`` verdicts and moves the
answered pairs from S into S_hat.

Per-pair dynamic learning rates are realized as per-sample loss weights
(the factor multiplies the pair's loss term, which scales its gradient
contribution under the shared Adam step); noise parameters therefore see
the base rate directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import vat as vat_mod
from .active import (
    AnnotationCard,
    AnnotationResponse,
    Annotator,
    RoundResult,
    SelectionRequest,
    err_score,
    run_selection_round,
    uncertainty_score,
)
from .ingest import GOLD, NOISY, TypeAssertion
from .metrics import prf1
from .network import FeatureEncoder, TypingModel, tokenize
from .noise import project_noise_params
from .optim import AdamState, adam_step
from .vat import VatConfig

logger = logging.getLogger(__name__)

REPORT_VERSION = "kgtyperr-run-report v1"


@dataclass
class TrainConfig:
    batch_size: int = 128
    base_lr: float = 1e-3
    epochs: int = 1
    annotations_per_round: int = 20
    rounds_every_iters: int = 400
    max_query: int | None = None  # total annotation budget across the run
    detection_threshold: float | str = 0.5  # a float, or "auto" for dev-calibrated
    use_noise_model: bool = True
    use_vat: bool = True
    use_dynamic_lr: bool = True
    finetune_on_gold: bool = False
    finetune_epochs: int = 1
    strategy: str = "us"
    err_pool_subsample: int = 256
    err_expectation: str = "model"
    vat: VatConfig = field(default_factory=VatConfig)
    seed: int = 0


@dataclass
class Verdict:
    entity: str
    type: str
    decision: str  # correct | error
    score: float
    unknown_type: bool = False


@dataclass
class PriorBelief:
    """Cosine prior between entity-name and type-name word vectors.

    Multiword names average their in-vocabulary tokens; pairs with a
    missing side fall back to the mean prior over resolvable pairs,
    computed once when the belief is built.
    """

    table: dict[str, np.ndarray]
    fallback: float = 0.0

    def _vec(self, name: str) -> np.ndarray | None:
        vecs = [self.table[tok] for tok in tokenize(name) if tok in self.table]
        if not vecs:
            return None
        return np.mean(vecs, axis=0)

    def prior(self, entity_name: str, type_name: str) -> float:
        ve, vt = self._vec(entity_name), self._vec(type_name)
        if ve is None or vt is None:
            return self.fallback
        denom = np.linalg.norm(ve) * np.linalg.norm(vt)
        if denom < 1e-30:
            return self.fallback
        return float(np.dot(ve, vt) / denom)

    @classmethod
    def build(cls, table: dict[str, np.ndarray], pairs) -> "PriorBelief":
        belief = cls(table=table, fallback=0.0)
        priors = []
        for entity_name, type_name in pairs:
            if belief._vec(entity_name) is not None and belief._vec(type_name) is not None:
                priors.append(belief.prior(entity_name, type_name))
        belief.fallback = float(np.mean(priors)) if priors else 0.0
        return belief


def dynamic_factor(cosine: float) -> float:
    """Per-pair learning-rate factor, clamped to the contract range."""
    return float(np.clip(0.5 + 0.5 * cosine, 0.5, 1.5))


def dynamic_lr(entity_name: str, type_name: str, base_lr: float, prior: PriorBelief) -> float:
    return dynamic_factor(prior.prior(entity_name, type_name)) * base_lr


@dataclass
class TrainItem:
    """Mutable training-pool record; the annotation round flips it to gold
    in place so batches materialized earlier see the update."""

    entity: str
    type: str
    gold: bool
    target: np.ndarray
    mask: np.ndarray
    weight: float = 1.0


class Trainer:
    def __init__(
        self,
        model: TypingModel,
        encoder: FeatureEncoder,
        labels: list[str],
        cfg: TrainConfig,
        priors: PriorBelief | None = None,
    ):
        self.model = model
        self.encoder = encoder
        self.labels = list(labels)
        self.label_index = {t: i for i, t in enumerate(self.labels)}
        if model.config.n_types != len(self.labels):
            raise ValueError(f"model has {model.config.n_types} outputs but {len(self.labels)} labels")
        self.cfg = cfg
        self.priors = priors
        seq = np.random.SeedSequence(cfg.seed)
        shuffle_ss, vat_ss, select_ss, calib_ss = seq.spawn(4)
        self.rng_shuffle = np.random.default_rng(shuffle_ss)
        self.rng_vat = np.random.default_rng(vat_ss)
        self.rng_select = np.random.default_rng(select_ss)
        self.rng_calib = np.random.default_rng(calib_ss)
        self.adam = AdamState()
        self.annotations_used = 0
        self.annotation_log: list = []
        self.epoch_rows: list[dict] = []
        self.calibrated_tau: float | None = None

    # -- item construction -----------------------------------------------

    def _weight_for(self, entity: str, type_: str) -> float:
        if not self.cfg.use_dynamic_lr or self.priors is None:
            return 1.0
        name = self.encoder.store.get(entity).name
        return dynamic_factor(self.priors.prior(name, type_))

    def make_noisy_item(self, assertion: TypeAssertion) -> TrainItem:
        t = len(self.labels)
        target = np.zeros(t)
        target[self.label_index[assertion.type]] = 1.0
        return TrainItem(
            entity=assertion.entity,
            type=assertion.type,
            gold=False,
            target=target,
            mask=np.ones(t),
            weight=self._weight_for(assertion.entity, assertion.type),
        )

    def make_gold_item(self, entity: str, queried_type: str, verdict: str, true_type: str | None) -> TrainItem:
        t = len(self.labels)
        target = np.zeros(t)
        mask = np.ones(t)
        if verdict == "correct":
            target[self.label_index[queried_type]] = 1.0
        elif true_type is not None and true_type in self.label_index:
            target[self.label_index[true_type]] = 1.0
        else:
            # only the queried coordinate is known to be wrong
            mask = np.zeros(t)
            mask[self.label_index[queried_type]] = 1.0
        return TrainItem(entity=entity, type=queried_type, gold=True, target=target, mask=mask, weight=1.0)

    def items_from_split(self, noisy, gold) -> tuple[list[TrainItem], list[TrainItem]]:
        s = [self.make_noisy_item(a) for a in noisy]
        s_hat = [self.make_gold_item(a.entity, a.type, a.verdict, a.true_type) for a in gold]
        return s, s_hat

    # -- loss ---------------------------------------------------------------

    def combined_loss(self, items: list[TrainItem], include_vat: bool | None = None) -> ad.Tensor:
        """Batch-mean of per-item BCE (noisy items through the flip channel,
        gold items on clean probabilities) plus the smoothing term."""
        if include_vat is None:
            include_vat = self.cfg.use_vat
        batch = self.encoder.batch([it.entity for it in items])
        emb, _, z = self.model.forward(batch)
        b, t = len(items), len(self.labels)
        targets = np.stack([it.target for it in items])
        masks = np.stack([it.mask for it in items])
        gold_sel = np.stack([np.full(t, 1.0 if it.gold else 0.0) for it in items])
        weights = np.array([it.weight for it in items])

        t_const = ad.constant(targets)
        one_minus_t = ad.constant(1.0 - targets)

        def bce(probs: ad.Tensor) -> ad.Tensor:
            return ad.neg(
                ad.add(
                    ad.mul(t_const, ad.log(probs)),
                    ad.mul(one_minus_t, ad.log(ad.add(1.0, ad.neg(probs)))),
                )
            )

        if self.cfg.use_noise_model:
            from .noise import apply_noise

            y = apply_noise(z, self.model.noise_p())
            elem = ad.add(
                ad.mul(ad.constant(masks * (1.0 - gold_sel)), bce(y)),
                ad.mul(ad.constant(masks * gold_sel), bce(z)),
            )
        else:
            elem = ad.mul(ad.constant(masks), bce(z))
        per_item = ad.sum_axis(elem, axis=1)

        if include_vat and self.cfg.vat.lam > 0.0:
            predict = self.model.y_from_embedding if self.cfg.use_noise_model else self.model.z_from_embedding
            penalty = vat_mod.vat_penalty(emb, predict, self.cfg.vat, self.rng_vat)
            per_item = ad.add(per_item, vat_mod.vat_loss_term(penalty, self.cfg.vat))

        weighted = ad.mul(ad.constant(weights), per_item)
        return ad.mul(1.0 / max(1, b), ad.sum_all(weighted))

    # -- annotation rounds ----------------------------------------------------

    def _score_pool_us(self, items: list[TrainItem]) -> np.ndarray:
        scores = np.zeros(len(items))
        bs = max(1, self.cfg.batch_size)
        for start in range(0, len(items), bs):
            chunk = items[start : start + bs]
            batch = self.encoder.batch([it.entity for it in chunk])
            z = self.model.predict_z(batch)
            y = self._y_probs(z)
            for i in range(len(chunk)):
                scores[start + i] = uncertainty_score(y[i])
        return scores

    def _y_probs(self, z: np.ndarray) -> np.ndarray:
        if not self.cfg.use_noise_model:
            return z
        from .noise import apply_noise_np

        return apply_noise_np(z, self.model.noise_p().data)

    def err_param_view(self) -> ad.ParamStore:
        """Typing-network parameters only: moving a pair from the noisy to
        the gold pool always drops the flip-channel gradient wholesale, so
        including it would swamp the model-change signal the strategy is
        after."""
        from .noise import NOISE_PARAM

        view = ad.ParamStore()
        for name, tensor in self.model.params.items():
            if name != NOISE_PARAM:
                view.adopt(name, tensor)
        return view

    def _score_pool_err(self, items: list[TrainItem], s: list[TrainItem], s_hat: list[TrainItem]) -> np.ndarray:
        pool = s + s_hat
        size = min(self.cfg.batch_size, len(pool))
        idx = self.rng_select.choice(len(pool), size=size, replace=False) if size else []
        eval_items = [pool[int(i)] for i in sorted(idx)]
        view = self.err_param_view()
        scores = np.zeros(len(items))
        for i, item in enumerate(items):
            batch = self.encoder.batch([item.entity])
            z_row = self.model.predict_z(batch)[0]
            p_correct = float(z_row[self.label_index[item.type]])
            base = [e for e in eval_items if e is not item]
            scores[i] = err_score(
                item,
                base,
                lambda its: self.combined_loss(its, include_vat=False),
                view,
                p_correct,
                as_noisy=lambda it: it,
                as_gold=lambda it, verdict: self.make_gold_item(it.entity, it.type, verdict, None),
                expectation=self.cfg.err_expectation,
            )
        return scores

    def _make_card(self, item: TrainItem) -> AnnotationCard:
        record = self.encoder.store.get(item.entity)
        batch = self.encoder.batch([item.entity])
        z = self.model.predict_z(batch)[0]
        return AnnotationCard(
            card_id=f"{item.entity}::{item.type}",
            entity=item.entity,
            name=record.name,
            description=self.encoder.store.descriptions.get(record.description_key, "")[:200],
            relations=sorted(record.relations.elements()),
            queried_type=item.type,
            model_score=float(z[self.label_index[item.type]]),
        )

    def annotation_round(self, s: list[TrainItem], s_hat: list[TrainItem], annotator: Annotator) -> RoundResult:
        remaining = None if self.cfg.max_query is None else self.cfg.max_query - self.annotations_used
        k = self.cfg.annotations_per_round if remaining is None else min(self.cfg.annotations_per_round, remaining)
        if k <= 0 or not s:
            return RoundResult()

        def commit(item: TrainItem, response: AnnotationResponse) -> None:
            gold = self.make_gold_item(item.entity, item.type, response.verdict, response.true_type)
            item.gold = True
            item.target = gold.target
            item.mask = gold.mask
            item.weight = 1.0
            s.remove(item)
            s_hat.append(item)

        request = SelectionRequest(
            k=k,
            strategy=self.cfg.strategy,
            err_pool_subsample=self.cfg.err_pool_subsample,
            err_expectation=self.cfg.err_expectation,
        )
        if self.cfg.strategy == "us":
            score_fn = self._score_pool_us
        elif self.cfg.strategy == "err":
            score_fn = lambda pool: self._score_pool_err(pool, s, s_hat)
        else:
            raise ValueError(f"unknown strategy: {self.cfg.strategy}")
        result = run_selection_round(
            pool=s,
            request=request,
            score_pool=score_fn,
            make_card=self._make_card,
            annotator=annotator,
            commit=commit,
            rng=self.rng_select,
        )
        self.annotations_used += len(result.annotations)
        self.annotation_log.extend(result.annotations)
        if result.skipped:
            logger.info("annotation round: %d skipped", result.skipped)
        return result

    # -- epochs -----------------------------------------------------------------

    def run_epoch(self, s: list[TrainItem], s_hat: list[TrainItem], annotator: Annotator | None) -> dict:
        """One pass over S + S_hat with periodic annotation rounds."""
        items = s + s_hat
        order = self.rng_shuffle.permutation(len(items))
        iters = 0
        total_loss = 0.0
        n_batches = 0
        for start in range(0, len(items), self.cfg.batch_size):
            chunk = [items[int(j)] for j in order[start : start + self.cfg.batch_size]]
            loss = self.combined_loss(chunk)
            grads = ad.grad(loss, self.model.params)
            adam_step(self.model.params, grads, self.adam, lr=self.cfg.base_lr)
            project_noise_params(self.model.noise_p())
            total_loss += loss.item()
            n_batches += 1
            iters += 1
            if (
                annotator is not None
                and self.cfg.annotations_per_round > 0
                and self.cfg.rounds_every_iters > 0
                and iters % self.cfg.rounds_every_iters == 0
            ):
                self.annotation_round(s, s_hat, annotator)
        return {"train_loss": total_loss / max(1, n_batches), "iterations": iters}

    def evaluate_dev(self, dev_items: list[TrainItem]) -> dict:
        """Classification view of the dev split: clean-path loss and argmax
        accuracy against the (noisy) dev labels."""
        if not dev_items:
            return {"dev_loss": 0.0, "dev_acc": 0.0}
        total, correct, n = 0.0, 0, 0
        bs = max(1, self.cfg.batch_size)
        for start in range(0, len(dev_items), bs):
            chunk = dev_items[start : start + bs]
            batch = self.encoder.batch([it.entity for it in chunk])
            z = self.model.predict_z(batch)
            targets = np.stack([it.target for it in chunk])
            zc = np.clip(z, ad.LOG_FLOOR, 1 - ad.LOG_FLOOR)
            total += float(-(targets * np.log(zc) + (1 - targets) * np.log(1 - zc)).sum())
            correct += int((z.argmax(axis=1) == targets.argmax(axis=1)).sum())
            n += len(chunk)
        return {"dev_loss": total / n, "dev_acc": correct / n}

    def train(
        self,
        noisy_assertions,
        gold_assertions,
        dev_assertions,
        annotator: Annotator | None = None,
    ) -> "TrainResult":
        s, s_hat = self.items_from_split(noisy_assertions, gold_assertions)
        dev_items = [self.make_noisy_item(a) for a in dev_assertions]
        conservation = len(s) + len(s_hat)
        for epoch in range(1, self.cfg.epochs + 1):
            stats = self.run_epoch(s, s_hat, annotator)
            assert len(s) + len(s_hat) == conservation
            row = {"epoch": epoch, "budget_used": self.annotations_used, **stats, **self.evaluate_dev(dev_items)}
            self.epoch_rows.append(row)
            logger.info(
                "epoch %d: loss %.4f dev_acc %.3f annotations %d",
                epoch,
                row["train_loss"],
                row["dev_acc"],
                self.annotations_used,
            )
        if self.cfg.finetune_on_gold and s_hat:
            self.finetune_on_gold(s_hat)
        self.calibrated_tau = self.calibrate_threshold(s_hat, dev_items)
        return TrainResult(trainer=self, s=s, s_hat=s_hat)

    def finetune_on_gold(self, s_hat: list[TrainItem]) -> None:
        lr = self.cfg.base_lr / 10.0
        for _ in range(self.cfg.finetune_epochs):
            order = self.rng_shuffle.permutation(len(s_hat))
            for start in range(0, len(s_hat), self.cfg.batch_size):
                chunk = [s_hat[int(j)] for j in order[start : start + self.cfg.batch_size]]
                loss = self.combined_loss(chunk)
                grads = ad.grad(loss, self.model.params)
                adam_step(self.model.params, grads, self.adam, lr=lr)
                project_noise_params(self.model.noise_p())

    # -- detection ---------------------------------------------------------------

    def assertion_scores(self, assertions) -> list[tuple[TypeAssertion, float, bool]]:
        out = []
        bs = max(1, self.cfg.batch_size)
        assertions = list(assertions)
        for start in range(0, len(assertions), bs):
            chunk = assertions[start : start + bs]
            batch = self.encoder.batch([a.entity for a in chunk])
            z = self.model.predict_z(batch)
            for i, a in enumerate(chunk):
                idx = self.label_index.get(a.type)
                if idx is None:
                    out.append((a, 0.0, True))
                else:
                    out.append((a, float(z[i, idx]), False))
        return out

    def detect_errors(self, assertions, tau: float | None = None) -> list[Verdict]:
        """Denoised belief below tau means error; ties go to correct.

        Types outside the label space are flagged and called errors with
        score 0.
        """
        if tau is None:
            tau = self.resolve_threshold()
        verdicts = []
        for a, score, unknown in self.assertion_scores(assertions):
            if unknown:
                verdicts.append(Verdict(a.entity, a.type, "error", 0.0, unknown_type=True))
            else:
                decision = "error" if score < tau else "correct"
                verdicts.append(Verdict(a.entity, a.type, decision, score))
        return verdicts

    def resolve_threshold(self) -> float:
        if self.cfg.detection_threshold == "auto":
            if self.calibrated_tau is None:
                raise ValueError("threshold=auto requires a trained/calibrated model")
            return self.calibrated_tau
        return float(self.cfg.detection_threshold)

    # -- threshold calibration ------------------------------------------------------

    def calibrate_threshold(self, s_hat: list[TrainItem], dev_items: list[TrainItem]) -> float:
        """Pick the tau that maximizes detection F1 on labeled pairs.

        Prefers the annotated gold pool (real verdicts). Without enough
        gold evidence it scores dev pairs as presumed-correct plus
        corrupted dev pairs (random wrong label per entity) as
        known-error, a self-supervised stand-in.
        """
        scored: list[tuple[float, bool]] = []
        gold_errors = sum(1 for it in s_hat if it.mask[self.label_index[it.type]] and it.target[self.label_index[it.type]] == 0.0)
        if len(s_hat) >= 10 and gold_errors >= 2:
            for it in s_hat:
                batch = self.encoder.batch([it.entity])
                z = self.model.predict_z(batch)[0]
                idx = self.label_index[it.type]
                is_error = it.target[idx] == 0.0
                scored.append((float(z[idx]), bool(is_error)))
        elif dev_items:
            t = len(self.labels)
            for it in dev_items:
                batch = self.encoder.batch([it.entity])
                z = self.model.predict_z(batch)[0]
                idx = self.label_index[it.type]
                scored.append((float(z[idx]), False))
                if t > 1:
                    wrong = int(self.rng_calib.integers(t - 1))
                    if wrong >= idx:
                        wrong += 1
                    scored.append((float(z[wrong]), True))
        if not scored or not any(err for _, err in scored):
            return 0.5
        return best_f1_threshold(scored)


def best_f1_threshold(scored: list[tuple[float, bool]]) -> float:
    """Threshold maximizing F1 of 'score < tau => error' over scored pairs."""
    values = sorted({s for s, _ in scored})
    candidates = [values[0] - 1e-6] + [
        (a + b) / 2.0 for a, b in zip(values, values[1:])
    ] + [values[-1] + 1e-6]
    best_tau, best_f1 = 0.5, -1.0
    for tau in candidates:
        tp = sum(1 for s, err in scored if s < tau and err)
        fp = sum(1 for s, err in scored if s < tau and not err)
        fn = sum(1 for s, err in scored if s >= tau and err)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        if f1 > best_f1 + 1e-12:
            best_tau, best_f1 = tau, f1
    return float(best_tau)


@dataclass
class TrainResult:
    trainer: Trainer
    s: list[TrainItem]
    s_hat: list[TrainItem]

    def run_report(self) -> str:
        t = self.trainer
        lines = [REPORT_VERSION, "[config]"]
        cfg = t.cfg
        for key in (
            "batch_size",
            "base_lr",
            "epochs",
            "annotations_per_round",
            "rounds_every_iters",
            "max_query",
            "strategy",
            "use_noise_model",
            "use_vat",
            "use_dynamic_lr",
            "seed",
        ):
            lines.append(f"{key} = {getattr(cfg, key)}")
        lines.append(f"vat.epsilon = {cfg.vat.epsilon}")
        lines.append(f"vat.lambda = {cfg.vat.lam}")
        lines.append(f"vat.power_iters = {cfg.vat.power_iters}")
        lines.append("[metrics]")
        for row in t.epoch_rows:
            e = row["epoch"]
            lines.append(f"epoch.{e}.train_loss = {row['train_loss']:.6f}")
            lines.append(f"epoch.{e}.dev_loss = {row['dev_loss']:.6f}")
            lines.append(f"epoch.{e}.dev_acc = {row['dev_acc']:.6f}")
            lines.append(f"epoch.{e}.budget_used = {row['budget_used']}")
        lines.append(f"annotations_total = {t.annotations_used}")
        lines.append(f"pool.noisy = {len(self.s)}")
        lines.append(f"pool.gold = {len(self.s_hat)}")
        if t.calibrated_tau is not None:
            lines.append(f"calibrated_tau = {t.calibrated_tau:.6f}")
        lines.append("[noise_params]")
        p = t.model.noise_p().data
        for label, value in zip(t.labels, p):
            lines.append(f"noise_p.{label} = {value:.6f}")
        lines.append("[warnings]")
        lines.append(f"missing_descriptions = {t.encoder.missing_descriptions}")
        lines.append(f"empty_names = {t.encoder.empty_names}")
        return "\n".join(lines) + "\n"

    def detection_f1(self, assertions, truth: dict, tau: float | None = None):
        verdicts = {(v.entity, v.type): v.decision for v in self.trainer.detect_errors(assertions, tau)}
        return prf1(verdicts, truth)
