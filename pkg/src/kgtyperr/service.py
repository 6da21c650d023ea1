"""Annotation sessions: a durable append-only verdict ledger plus the
in-process mailbox that hands selection rounds from the trainer to
annotators and verdicts back.

The ledger is line-delimited JSON, one file per session, fsynced before a
commit is acknowledged, so a crash between append and acknowledgment loses
at most the unacknowledged record. Replaying a ledger over the initial
split reproduces the exact (S, S_hat) state.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .active import AnnotationCard, AnnotationResponse
from .ingest import GOLD, DatasetSplit, TypeAssertion

LEDGER_VERSION = 1


class ServiceError(ValueError):
    pass


class DigestMismatch(ServiceError):
    pass


@dataclass
class LedgerRecord:
    seq: int
    timestamp: float
    card_id: str
    entity: str
    queried_type: str
    verdict: str
    true_type: str | None
    annotator_id: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "ts": self.timestamp,
                "card_id": self.card_id,
                "entity": self.entity,
                "type": self.queried_type,
                "verdict": self.verdict,
                "true_type": self.true_type,
                "annotator": self.annotator_id,
            },
            sort_keys=True,
        )


class AnnotationLedger:
    """Append-only, fsync-on-commit verdict log."""

    def __init__(self, path, manifest_digest: str, session_id: str):
        self.path = Path(path)
        self.manifest_digest = manifest_digest
        self.session_id = session_id
        self._lock = threading.Lock()
        self._next_seq = 1
        if not self.path.exists():
            header = json.dumps(
                {
                    "type": "header",
                    "version": LEDGER_VERSION,
                    "session_id": session_id,
                    "manifest_digest": manifest_digest,
                },
                sort_keys=True,
            )
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(header + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def append(self, records: list[LedgerRecord]) -> None:
        """Atomic batch append: one write, one fsync."""
        with self._lock:
            payload = "".join(r.to_json() + "\n" for r in records)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())

    def next_sequences(self, n: int) -> list[int]:
        with self._lock:
            seqs = list(range(self._next_seq, self._next_seq + n))
            self._next_seq += n
            return seqs

    @staticmethod
    def read(path) -> tuple[dict, list[LedgerRecord]]:
        header = None
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if obj.get("type") == "header":
                    header = obj
                    continue
                records.append(
                    LedgerRecord(
                        seq=obj["seq"],
                        timestamp=obj["ts"],
                        card_id=obj["card_id"],
                        entity=obj["entity"],
                        queried_type=obj["type"],
                        verdict=obj["verdict"],
                        true_type=obj.get("true_type"),
                        annotator_id=obj["annotator"],
                    )
                )
        if header is None:
            raise ServiceError(f"{path}: ledger has no header record")
        records.sort(key=lambda r: r.seq)
        return header, records


def replay_ledger(split: DatasetSplit, ledger_path, manifest_digest: str) -> tuple[list[TypeAssertion], list[TypeAssertion]]:
    """Reconstruct (S, S_hat) from the initial split plus the ledger.

    Refuses to replay when the ledger header's manifest digest does not
    match the split the caller provides.
    """
    header, records = AnnotationLedger.read(ledger_path)
    if header["manifest_digest"] != manifest_digest:
        raise DigestMismatch(
            f"ledger was recorded against digest {header['manifest_digest'][:12]}..., "
            f"split has {manifest_digest[:12]}..."
        )
    s = list(split.noisy_train)
    s_hat = list(split.gold_pool)
    by_pair = {a.pair: a for a in s}
    for rec in records:
        pair = (rec.entity, rec.queried_type)
        if pair not in by_pair:
            raise ServiceError(f"ledger references pair {pair} not present in the noisy pool")
        a = by_pair.pop(pair)
        s.remove(a)
        s_hat.append(
            TypeAssertion(rec.entity, rec.queried_type, GOLD, verdict=rec.verdict, true_type=rec.true_type)
        )
    return s, s_hat


# ---------------------------------------------------------------------------
# round mailbox


@dataclass
class PendingRound:
    round_id: int
    cards: list[AnnotationCard]
    responses: dict[str, AnnotationResponse] = field(default_factory=dict)

    def unanswered(self) -> list[AnnotationCard]:
        return [c for c in self.cards if c.card_id not in self.responses]

    def complete(self) -> bool:
        return len(self.responses) == len(self.cards)


class RoundMailbox:
    """One pending round at a time between the trainer and annotators."""

    def __init__(self):
        self._cond = threading.Condition()
        self._round: PendingRound | None = None
        self._counter = 0

    def publish(self, cards: list[AnnotationCard]) -> PendingRound:
        with self._cond:
            if self._round is not None and not self._round.complete():
                raise ServiceError("a selection round is already pending")
            self._counter += 1
            self._round = PendingRound(self._counter, cards)
            self._cond.notify_all()
            return self._round

    def pending(self) -> PendingRound | None:
        with self._cond:
            if self._round is not None and not self._round.complete():
                return self._round
            return None

    def deliver(self, responses: dict[str, AnnotationResponse]) -> None:
        with self._cond:
            if self._round is None:
                raise ServiceError("no round to deliver to")
            self._round.responses.update(responses)
            self._cond.notify_all()

    def wait(self, timeout: float | None) -> PendingRound:
        """Block until the pending round completes; on timeout the
        unanswered cards become skips."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            rnd = self._round
            while rnd is not None and not rnd.complete():
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    for card in rnd.unanswered():
                        rnd.responses[card.card_id] = AnnotationResponse(skip=True)
                    break
                self._cond.wait(timeout=remaining)
            return rnd


# ---------------------------------------------------------------------------
# sessions


@dataclass
class AnnotationSession:
    session_id: str
    manifest_digest: str
    strategy: str
    budget: int
    ledger: AnnotationLedger
    mailbox: RoundMailbox = field(default_factory=RoundMailbox)
    committed_cards: set[str] = field(default_factory=set)
    committed_count: int = 0

    @property
    def budget_remaining(self) -> int:
        return max(0, self.budget - self.committed_count)

    @property
    def complete(self) -> bool:
        return self.budget_remaining == 0


class AnnotationService:
    """Session registry backing both the HTTP surface and in-process use."""

    def __init__(self, ledger_dir):
        self.ledger_dir = Path(ledger_dir)
        self.sessions: dict[str, AnnotationSession] = {}
        self._lock = threading.Lock()

    def create_session(
        self,
        manifest_digest: str,
        strategy: str = "us",
        budget: int = 100,
        session_id: str | None = None,
    ) -> AnnotationSession:
        sid = session_id or uuid.uuid4().hex[:12]
        with self._lock:
            if sid in self.sessions:
                raise ServiceError(f"session {sid} already exists")
            ledger = AnnotationLedger(self.ledger_dir / f"session-{sid}.jsonl", manifest_digest, sid)
            session = AnnotationSession(
                session_id=sid, manifest_digest=manifest_digest, strategy=strategy, budget=budget, ledger=ledger
            )
            self.sessions[sid] = session
            return session

    def get(self, session_id: str) -> AnnotationSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise ServiceError(f"unknown session: {session_id}") from None

    def serve_queue(self, session_id: str) -> dict:
        """Cards of the pending round that still need verdicts."""
        session = self.get(session_id)
        if session.complete:
            return {"cards": [], "complete": True}
        rnd = session.mailbox.pending()
        if rnd is None:
            return {"cards": [], "retry_after": 1.0, "complete": False}
        return {"cards": [c.to_dict() for c in rnd.unanswered()], "round_id": rnd.round_id, "complete": False}

    def commit_labels(self, session_id: str, verdicts: list[dict], annotator_id: str = "human") -> dict:
        """Validate, persist and deliver a batch of verdicts.

        Unknown card ids reject the whole batch (nothing is committed).
        Cards that were already committed are rejected individually; the
        rest commit. Skips resolve their card without touching the ledger.
        """
        session = self.get(session_id)
        rnd = session.mailbox.pending()
        pending_ids = {c.card_id: c for c in rnd.cards} if rnd is not None else {}
        unknown = [
            v.get("card_id")
            for v in verdicts
            if v.get("card_id") not in pending_ids and v.get("card_id") not in session.committed_cards
        ]
        if unknown:
            raise ServiceError(f"unknown card ids: {', '.join(map(str, sorted(unknown)))}")

        accepted: list[tuple[AnnotationCard, dict]] = []
        rejected: list[dict] = []
        seen_in_batch: set[str] = set()
        for v in verdicts:
            cid = v["card_id"]
            if cid in session.committed_cards or cid in seen_in_batch:
                rejected.append({"card_id": cid, "reason": "duplicate"})
                continue
            verdict = v.get("verdict")
            if verdict == "skip":
                seen_in_batch.add(cid)
                accepted.append((pending_ids[cid], v))
                continue
            if verdict not in ("correct", "error"):
                rejected.append({"card_id": cid, "reason": f"bad verdict: {verdict!r}"})
                continue
            seen_in_batch.add(cid)
            accepted.append((pending_ids[cid], v))

        to_persist = [(card, v) for card, v in accepted if v.get("verdict") != "skip"]
        seqs = session.ledger.next_sequences(len(to_persist))
        records = [
            LedgerRecord(
                seq=seq,
                timestamp=time.time(),
                card_id=card.card_id,
                entity=card.entity,
                queried_type=card.queried_type,
                verdict=v["verdict"],
                true_type=v.get("true_type"),
                annotator_id=annotator_id,
            )
            for seq, (card, v) in zip(seqs, to_persist)
        ]
        if records:
            session.ledger.append(records)

        responses: dict[str, AnnotationResponse] = {}
        committed = []
        rec_by_card = {r.card_id: r for r in records}
        for card, v in accepted:
            if v.get("verdict") == "skip":
                responses[card.card_id] = AnnotationResponse(skip=True)
            else:
                session.committed_cards.add(card.card_id)
                session.committed_count += 1
                responses[card.card_id] = AnnotationResponse(verdict=v["verdict"], true_type=v.get("true_type"))
                committed.append({"card_id": card.card_id, "seq": rec_by_card[card.card_id].seq})
        if responses:
            session.mailbox.deliver(responses)
        return {"committed": committed, "rejected": rejected}

    def progress(self, session_id: str) -> dict:
        session = self.get(session_id)
        rnd = session.mailbox.pending()
        return {
            "session_id": session.session_id,
            "strategy": session.strategy,
            "budget": session.budget,
            "budget_remaining": session.budget_remaining,
            "committed": session.committed_count,
            "pending_cards": len(rnd.unanswered()) if rnd else 0,
            "complete": session.complete,
        }


class ServiceAnnotator:
    """Annotator backed by a session mailbox: publishes the round, blocks
    until annotators commit (or the timeout passes), then reports skips for
    anything unanswered."""

    def __init__(self, session: AnnotationSession, timeout: float | None = None, annotator_id: str = "service"):
        self.session = session
        self.timeout = timeout
        self.annotator_id = annotator_id

    def annotate(self, cards: list[AnnotationCard]) -> list[AnnotationResponse]:
        if not cards:
            return []
        rnd = self.session.mailbox.publish(cards)
        self.session.mailbox.wait(self.timeout)
        return [rnd.responses.get(c.card_id, AnnotationResponse(skip=True)) for c in cards]
