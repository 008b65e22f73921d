"""LLM-as-judge scoring and annotation-session management.

A judge model (or a human annotator through the annotation API) labels each
candidate answer Yes/Partial/No against the ground truth; judgments are
rescored into [0,1] rewards that feed bandit training in annotator-reward
modes. Annotation payloads never reveal which arm produced a candidate.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import metrics
from .corpus import QARecord
from .gateway import ChatMessage, CompletionClient, CompletionParams
from .metrics import Judgment, JudgmentSource, Verdict
from .strategies import TrialRecord


class JudgeParseError(RuntimeError):
    """Judge reply contained no Yes/No/Partial verdict, twice in a row."""


class SessionError(RuntimeError):
    pass


class AnnotationError(ValueError):
    def __init__(self, message: str, candidate_ids: list[str] | None = None):
        super().__init__(message)
        self.candidate_ids = candidate_ids or []


def judge_system_prompt() -> str:
    return resources.files("polyroute.data").joinpath("templates/judge_system.txt").read_text(
        encoding="utf-8"
    )


def annotator_instructions() -> str:
    return resources.files("polyroute.data").joinpath("templates/annotator_instructions.txt").read_text(
        encoding="utf-8"
    )


@dataclass
class JudgeDeps:
    completion: CompletionClient
    params: CompletionParams = field(default_factory=CompletionParams)
    system_prompt: str = field(default_factory=judge_system_prompt)


def llm_judge(record: QARecord, candidate: str, deps: JudgeDeps, candidate_id: str = "") -> Judgment:
    """Ask the judge model for a Yes/No/Partial verdict on one candidate.

    Retries once on an unparseable reply, then raises JudgeParseError.
    """
    if not candidate:
        raise ValueError("candidate must be non-empty")
    user = (
        f"Query: {record.question}\n"
        f"Context: {record.context}\n"
        f"Correct answer: {record.gold_answers[0]}\n"
        f"Answer to evaluate: {candidate}"
    )
    messages = [ChatMessage("system", deps.system_prompt), ChatMessage("user", user)]
    for attempt in range(2):
        reply = deps.completion.complete(messages, deps.params)
        verdict = metrics.parse_verdict(reply)
        if verdict is not None:
            return Judgment(verdict=verdict, source=JudgmentSource.LLM_JUDGE, candidate_id=candidate_id)
    raise JudgeParseError(f"no verdict in judge reply: {reply[:120]!r}")


def gpt_annotator_score(record: QARecord, candidates: list[str], deps: JudgeDeps) -> list[float]:
    """Judge every candidate and rescore with the judged-valid reference set.

    Unjudgeable candidates fall back to plain token F1 against the ground
    truth and contribute nothing to the valid-answer set.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    judgments: list[Judgment] = []
    unjudgeable: set[int] = set()
    for i, candidate in enumerate(candidates):
        try:
            judgments.append(llm_judge(record, candidate, deps, candidate_id=str(i)))
        except JudgeParseError:
            unjudgeable.add(i)
            judgments.append(Judgment(Verdict.NO, JudgmentSource.LLM_JUDGE, str(i)))
    scores = metrics.annotator_rescore(record.gold_answers[0], candidates, judgments, record.language)
    for i in unjudgeable:
        scores[i] = metrics.f1(candidates[i], record.gold_answers[0], record.language, "mlqa")
    return scores


@dataclass(frozen=True)
class AnnotationCandidate:
    candidate_id: str
    answer_text: str
    arm_name: str  # server-side only; never serialized to annotators


@dataclass(frozen=True)
class AnnotationItem:
    item_id: str
    record_id: str
    language: str
    dataset: str
    context: str
    question: str
    ground_truth: str
    candidates: tuple[AnnotationCandidate, ...]

    def payload(self) -> dict:
        """Wire form shown to annotators; blind to arm identity."""
        return {
            "item_id": self.item_id,
            "record_id": self.record_id,
            "language": self.language,
            "context": self.context,
            "question": self.question,
            "ground_truth": self.ground_truth,
            "candidates": [
                {"candidate_id": c.candidate_id, "answer_text": c.answer_text} for c in self.candidates
            ],
        }


def make_item(record: QARecord, trials: list[TrialRecord]) -> AnnotationItem:
    """Build a blind annotation item from the per-arm trials of one record.

    Candidate order is shuffled deterministically per item id to avoid
    position bias; candidate ids are opaque.
    """
    item_id = f"item-{record.id}"
    candidates = [
        AnnotationCandidate(
            candidate_id=f"{record.id}/c{i}",
            answer_text=trial.final_answer,
            arm_name=trial.arm.name,
        )
        for i, trial in enumerate(trials)
    ]
    random.Random(item_id).shuffle(candidates)
    return AnnotationItem(
        item_id=item_id,
        record_id=record.id,
        language=record.language,
        dataset=record.dataset,
        context=record.context,
        question=record.question,
        ground_truth=record.gold_answers[0],
        candidates=tuple(candidates),
    )


@dataclass
class RewardEvent:
    record_id: str
    arm_name: str
    reward: float
    item_id: str
    candidate_id: str


@dataclass
class AnnotationSession:
    session_id: str
    language: str
    annotator_id: str
    open: bool = True
    completed: dict[str, list[Judgment]] = field(default_factory=dict)


class AnnotationService:
    """Item queue with leases, idempotent submits, and reward-event emission."""

    def __init__(self, items: list[AnnotationItem], lease_seconds: float = 1800.0, clock=time.time):
        self._items = {item.item_id: item for item in items}
        self._queue = sorted(self._items)  # deterministic serving order
        self._lease_seconds = lease_seconds
        self._clock = clock
        self._leases: dict[str, tuple[str, float]] = {}  # item_id -> (session_id, expiry)
        self._judged: set[str] = set()
        self._sessions: dict[str, AnnotationSession] = {}
        self._acks: dict[tuple[str, str], dict] = {}  # (session, item) -> original ack
        self._events: list[RewardEvent] = []
        self._consumed_by: dict[str, int] = {}  # experiment id -> events consumed
        self._lock = threading.Lock()

    def open_session(self, language: str, annotator_id: str = "anon") -> AnnotationSession:
        with self._lock:
            session_id = f"session-{len(self._sessions)}-{annotator_id}"
            session = AnnotationSession(session_id=session_id, language=language, annotator_id=annotator_id)
            self._sessions[session_id] = session
            return session

    def _session(self, session_id: str) -> AnnotationSession:
        session = self._sessions.get(session_id)
        if session is None or not session.open:
            raise SessionError(f"unknown or closed session {session_id!r}")
        return session

    def next_item(self, session_id: str) -> AnnotationItem | None:
        """Next unjudged item for the session's language, or None when done."""
        session = self._session(session_id)
        now = self._clock()
        with self._lock:
            for item_id in self._queue:
                item = self._items[item_id]
                if session.language and item.language != session.language:
                    continue
                if item_id in self._judged or item_id in session.completed:
                    continue
                lease = self._leases.get(item_id)
                if lease and lease[0] != session_id and lease[1] > now:
                    continue
                self._leases[item_id] = (session_id, now + self._lease_seconds)
                return item
        return None

    def submit(self, session_id: str, item_id: str, verdicts: dict[str, str]) -> dict:
        """Persist judgments for one item; idempotent on exact resubmission.

        Emits one reward event per candidate (HA score semantics: Yes=1,
        No=0, Partial=token F1 against the ground truth).
        """
        session = self._session(session_id)
        item = self._items.get(item_id)
        if item is None:
            raise AnnotationError(f"unknown item {item_id!r}")
        ack_key = (session_id, item_id)
        if ack_key in self._acks:
            return self._acks[ack_key]
        lease = self._leases.get(item_id)
        if lease is None or lease[0] != session_id or lease[1] <= self._clock():
            raise SessionError(f"item {item_id} is not leased to session {session_id}")
        missing = [c.candidate_id for c in item.candidates if c.candidate_id not in verdicts]
        if missing:
            raise AnnotationError(f"missing verdicts for candidates: {', '.join(missing)}", missing)

        judgments = []
        events = []
        for cand in item.candidates:
            verdict = Verdict(verdicts[cand.candidate_id])
            judgment = Judgment(verdict, JudgmentSource.HUMAN, cand.candidate_id)
            judgments.append(judgment)
            reward = metrics.ha_score(judgment, cand.answer_text, item.ground_truth, item.language)
            events.append(
                RewardEvent(
                    record_id=item.record_id,
                    arm_name=cand.arm_name,
                    reward=reward,
                    item_id=item_id,
                    candidate_id=cand.candidate_id,
                )
            )
        rescored = metrics.annotator_rescore(
            item.ground_truth, [c.answer_text for c in item.candidates], judgments, item.language
        )
        with self._lock:
            first = item_id not in self._judged
            session.completed[item_id] = judgments
            self._judged.add(item_id)
            if first:  # rewards come from the first completed judgment set
                self._events.extend(events)
            ack = {
                "item_id": item_id,
                "accepted": len(judgments),
                "rewards": {e.candidate_id: e.reward for e in events},
                "rescored_f1": {
                    c.candidate_id: s for c, s in zip(item.candidates, rescored)
                },
            }
            self._acks[ack_key] = ack
        return ack

    def consume_events(self, experiment_id: str) -> list[RewardEvent]:
        """Hand unconsumed reward events to exactly one training run per id."""
        with self._lock:
            start = self._consumed_by.get(experiment_id, 0)
            events = self._events[start:]
            self._consumed_by[experiment_id] = len(self._events)
            return events

    def pending_count(self, language: str | None = None) -> int:
        with self._lock:
            return sum(
                1
                for item_id in self._queue
                if item_id not in self._judged
                and (language is None or self._items[item_id].language == language)
            )

    def dump_judgments(self, path: str | Path) -> None:
        with self._lock, open(path, "w", encoding="utf-8") as fh:
            for session in self._sessions.values():
                for item_id, judgments in session.completed.items():
                    for j in judgments:
                        fh.write(
                            json.dumps(
                                {
                                    "session_id": session.session_id,
                                    "item_id": item_id,
                                    "candidate_id": j.candidate_id,
                                    "verdict": j.verdict.value,
                                    "source": j.source.value,
                                },
                                ensure_ascii=False,
                                sort_keys=True,
                            )
                            + "\n"
                        )
