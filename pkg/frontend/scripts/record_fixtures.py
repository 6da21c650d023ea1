"""Record real annotation-service HTTP responses as test fixtures.

Builds a genuine trainer over a synthetic dataset, publishes a real
selection round, and captures the JSON bodies the service returns, so the
browser client's contract tests run against authentic payloads.
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from kgtyperr.http_api import create_app
from kgtyperr.ingest import SynthConfig, generate_synthetic_kg
from kgtyperr.network import DescriptionSpec, EncoderConfig
from kgtyperr.pipeline import bundle_from_synth, make_trainer
from kgtyperr.service import AnnotationService
from kgtyperr.training import TrainConfig

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    kg = generate_synthetic_kg(SynthConfig(n_entities=400, n_types=3, noise_rate=0.3, seed=31))
    bundle = bundle_from_synth(kg)
    cfg = TrainConfig(batch_size=32, annotations_per_round=20, use_vat=False, use_dynamic_lr=False, seed=8)
    enc = EncoderConfig(
        n_types=3, description=DescriptionSpec(kind="file_vector", dim=16),
        surface_hidden=6, relation_embed_dim=6, relation_min_count=0,
        classifier_hidden=0, seed=8,
    )
    trainer = make_trainer(bundle, cfg, enc)
    s, _ = trainer.items_from_split(bundle.split.noisy_train, [])

    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        service = AnnotationService(tmp)
        client = TestClient(create_app(service))

        created = client.post(
            "/session",
            json={"manifest_digest": bundle.manifest_digest, "budget": 60, "session_id": "fixture"},
        )
        (FIXTURES / "session_created.json").write_bytes(created.content)
        sid = created.json()["session_id"]

        (FIXTURES / "queue_empty.json").write_bytes(client.get(f"/session/{sid}/queue").content)

        cards = [trainer._make_card(item) for item in s[:20]]
        service.get(sid).mailbox.publish(cards)
        queue = client.get(f"/session/{sid}/queue")
        (FIXTURES / "queue_cards.json").write_bytes(queue.content)

        verdicts = []
        for card in queue.json()["cards"]:
            verdict, true_type = kg.truth[(card["entity"], card["queried_type"])]
            verdicts.append(
                {
                    "card_id": card["card_id"],
                    "verdict": verdict,
                    "true_type": true_type if verdict == "error" else None,
                }
            )
        ack = client.post(f"/session/{sid}/labels", json={"verdicts": verdicts, "annotator_id": "ui"})
        (FIXTURES / "commit_ack.json").write_bytes(ack.content)

        # a second round: commit one fresh verdict plus one duplicate of
        # the first round to capture the partial-rejection shape
        cards2 = [trainer._make_card(item) for item in s[20:24]]
        service.get(sid).mailbox.publish(cards2)
        partial = client.post(
            f"/session/{sid}/labels",
            json={
                "verdicts": [
                    {"card_id": cards2[0].card_id, "verdict": "correct", "true_type": None},
                    {"card_id": verdicts[0]["card_id"], "verdict": "correct", "true_type": None},
                ],
                "annotator_id": "ui",
            },
        )
        (FIXTURES / "commit_partial.json").write_bytes(partial.content)

        unknown = client.post(
            f"/session/{sid}/labels",
            json={"verdicts": [{"card_id": "ghost::type9", "verdict": "correct", "true_type": None}]},
        )
        (FIXTURES / "commit_unknown.json").write_bytes(unknown.content)

        (FIXTURES / "progress.json").write_bytes(client.get(f"/session/{sid}/progress").content)

        ledger_path = Path(tmp) / f"session-{sid}.jsonl"
        (FIXTURES / "ledger.jsonl").write_text(ledger_path.read_text())

    print(f"fixtures written to {FIXTURES}")
    for p in sorted(FIXTURES.iterdir()):
        print(f"  {p.name} ({p.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
