"""HTTP service: live query answering plus the annotation API that closes the
human-feedback loop into bandit rewards.

Endpoints:
  POST /answer                 {language, context, question, mode, arm?}
  GET  /health
  GET  /policy
  POST /annotation/session     {language, annotator_id?}
  GET  /annotation/next?session=...
  POST /annotation/submit      {session, item_id, verdicts}
  GET  /annotation/instructions
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .bandits import PolicySnapshot
from .corpus import QARecord
from .judge import AnnotationError, AnnotationService, SessionError, annotator_instructions
from .strategies import ARM_SPACE, Arm, StrategyDeps, run_arm


@dataclass
class ServiceState:
    deps: StrategyDeps
    annotation: AnnotationService | None = None
    snapshot: PolicySnapshot | None = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))


class AnswerRequest(BaseModel):
    language: str
    context: str = Field(min_length=1)
    question: str = Field(min_length=1)
    mode: str = "fixed_arm"  # fixed_arm | learned
    arm: str | None = None


class SessionRequest(BaseModel):
    language: str
    annotator_id: str = "anon"


class SubmitRequest(BaseModel):
    session: str
    item_id: str
    verdicts: dict[str, str]


def _choose_learned_arm(state: ServiceState) -> Arm:
    snapshot = state.snapshot
    if snapshot is None or all(p.pulls == 0 for p in snapshot.posteriors.values()):
        arms = list(snapshot.posteriors) if snapshot else list(ARM_SPACE)
        return arms[state.rng.integers(len(arms))]
    return max(snapshot.posteriors, key=lambda a: (snapshot.posteriors[a].mean_reward, -a.index))


def build_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="polyroute")

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "backends": {
                "completion": state.deps.completion is not None,
                "translation": state.deps.translation is not None,
                "embedding": {name: True for name in state.deps.embeddings},
            },
            "annotation": state.annotation is not None,
        }

    @app.get("/policy")
    def policy():
        if state.snapshot is None:
            return {"policy": None}
        return state.snapshot.to_dict()

    @app.post("/answer")
    def answer(request: AnswerRequest):
        if request.language not in state.deps.catalog:
            raise HTTPException(400, f"unknown language {request.language!r}")
        if request.mode == "fixed_arm":
            if not request.arm:
                raise HTTPException(400, "fixed_arm mode requires an 'arm'")
            try:
                arm = Arm.parse(request.arm)
            except ValueError:
                raise HTTPException(400, f"unknown arm {request.arm!r}")
        elif request.mode == "learned":
            arm = _choose_learned_arm(state)
        else:
            raise HTTPException(400, f"unknown mode {request.mode!r}")
        record = QARecord(
            id=f"live-{uuid.uuid4().hex[:12]}",
            dataset="custom",
            language=request.language,
            context=request.context,
            question=request.question,
            gold_answers=("",),
        )
        trial = run_arm(arm, record, state.deps)
        if trial.error and not trial.na:
            raise HTTPException(502, f"upstream failure: {trial.error}")
        return {
            "answer": trial.final_answer,
            "arm_used": arm.name,
            "trace_id": record.id,
            "na": trial.na,
        }

    @app.get("/annotation/instructions")
    def instructions():
        return {"text": annotator_instructions()}

    @app.post("/annotation/session")
    def open_session(request: SessionRequest):
        service = _annotation(state)
        session = service.open_session(request.language, request.annotator_id)
        return {"session_id": session.session_id, "language": session.language}

    @app.get("/annotation/next")
    def annotation_next(session: str = Query(...)):
        service = _annotation(state)
        try:
            item = service.next_item(session)
        except SessionError as exc:
            raise HTTPException(400, str(exc))
        if item is None:
            return {"done": True}
        return {"done": False, "item": item.payload()}

    @app.post("/annotation/submit")
    def annotation_submit(request: SubmitRequest):
        service = _annotation(state)
        try:
            ack = service.submit(request.session, request.item_id, request.verdicts)
        except AnnotationError as exc:
            raise HTTPException(400, detail={"error": str(exc), "candidates": exc.candidate_ids})
        except SessionError as exc:
            raise HTTPException(409, str(exc))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return ack

    return app


def _annotation(state: ServiceState) -> AnnotationService:
    if state.annotation is None:
        raise HTTPException(503, "annotation service is not enabled")
    return state.annotation
