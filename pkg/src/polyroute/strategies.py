"""The five prompting strategies and their composition into arms.

Mono answers directly in the source language. Trans round-trips through
English; Sim round-trips through a similar high-resource pivot. The two
aggregation strategies run Mono/Trans/Sim, consolidate the candidates with an
aggregation prompt (in the source language for AggSrc, in English for
AggTrans), and return a single answer in the source language.

An arm is a (strategy, embedding backend) pair; the embedding backend only
affects the retrieval stage that assembles the working context.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources

from . import languages, retrieval
from .corpus import ExemplarPool, QARecord
from .gateway import (
    GPT_EMB,
    ML_EMB,
    EMBEDDING_BACKENDS,
    CallLog,
    ChatMessage,
    CompletionClient,
    CompletionParams,
    EmbeddingClient,
    TranslationClient,
)


class StrategyId(str, Enum):
    MONO = "Mono"
    TRANS = "Trans"
    SIM = "Sim"
    AGG_TRANS = "AggTrans"
    AGG_SRC = "AggSrc"


STRATEGIES = tuple(StrategyId)


@dataclass(frozen=True, order=True)
class Arm:
    strategy: StrategyId
    embedding: str

    def __post_init__(self):
        if self.embedding not in EMBEDDING_BACKENDS:
            raise ValueError(f"unknown embedding backend {self.embedding!r}")

    @property
    def name(self) -> str:
        return f"{self.strategy.value}-{self.embedding}"

    @property
    def index(self) -> int:
        return ARM_SPACE.index(self)

    @classmethod
    def parse(cls, name: str) -> "Arm":
        strategy, _, embedding = name.partition("-")
        return cls(StrategyId(strategy), embedding)


ARM_SPACE: tuple[Arm, ...] = tuple(
    Arm(strategy, backend) for strategy in STRATEGIES for backend in (GPT_EMB, ML_EMB)
)


class TemplateError(KeyError):
    """No prompt/instruction template for the requested language."""


class SimUnavailable(RuntimeError):
    """No pivot language qualifies for the source language."""


class AggregationError(RuntimeError):
    """Every aggregation sub-strategy failed."""


class StrategyError(RuntimeError):
    """A gateway failure, tagged with the strategy that hit it."""

    def __init__(self, strategy: StrategyId, cause: Exception):
        super().__init__(f"{strategy.value}: {cause}")
        self.strategy = strategy
        self.cause = cause


@dataclass
class TrialRecord:
    record_id: str
    arm: Arm
    prompts_sent: list[str] = field(default_factory=list)
    raw_answer: str = ""
    final_answer: str = ""
    sub_answers: dict[str, str] = field(default_factory=dict)
    latency: float = 0.0
    call_count: int = 0
    na: bool = False
    partial: bool = False
    empty_answer: bool = False
    error: str | None = None


class PromptLibrary:
    """Versioned prompt templates and per-language instruction strings."""

    def __init__(
        self,
        instructions: dict[str, str] | None = None,
        qa_template: str | None = None,
        aggregation_template: str | None = None,
    ):
        self.instructions = instructions if instructions is not None else _bundled_instructions()
        self.qa_template = qa_template or _bundled_template("qa_user.txt")
        self.aggregation_template = aggregation_template or _bundled_template("aggregation.txt")

    def instruction_for(self, language: str) -> str:
        try:
            return self.instructions[language]
        except KeyError:
            raise TemplateError(f"no instruction template for language {language!r}") from None


@lru_cache(maxsize=1)
def _bundled_instructions() -> dict[str, str]:
    return json.loads(
        resources.files("polyroute.data").joinpath("instructions.json").read_text(encoding="utf-8")
    )


def _bundled_template(name: str) -> str:
    return resources.files("polyroute.data").joinpath(f"templates/{name}").read_text(encoding="utf-8")


@dataclass
class StrategyDeps:
    """Everything a strategy execution needs, injected for testability."""

    completion: CompletionClient
    translation: TranslationClient
    embeddings: dict[str, EmbeddingClient]
    catalog: languages.LanguageCatalog
    distances: languages.DistanceTable
    templates: PromptLibrary = field(default_factory=PromptLibrary)
    pivot_cfg: languages.PivotConfig = field(default_factory=languages.PivotConfig)
    retrieval_cfg: retrieval.RetrievalConfig = field(default_factory=retrieval.RetrievalConfig)
    params: CompletionParams = field(default_factory=CompletionParams)
    exemplar_pool: ExemplarPool | None = None
    n_shots: int = 2
    call_log: CallLog = field(default_factory=CallLog)

    def exemplars_for(self, language: str, exclude_id: str) -> list[QARecord]:
        if self.exemplar_pool is None or self.n_shots == 0:
            return []
        chosen, _ = self.exemplar_pool.exemplars(language, self.n_shots, exclude_id=exclude_id)
        return chosen


def build_prompt(
    strategy: StrategyId,
    working_language: str,
    context: str,
    question: str,
    exemplars: list[tuple[str, str]],
    templates: PromptLibrary,
) -> list[ChatMessage]:
    """Assemble the (system, user) message pair for one completion call."""
    instruction = templates.instruction_for(working_language)
    if exemplars:
        block = "".join(f"Question: {q}\nAnswer: {a}\n\n" for q, a in exemplars)
    else:
        block = ""
    user = templates.qa_template.format(context=context, exemplars=block, question=question)
    return [ChatMessage("system", instruction), ChatMessage("user", user)]


def build_aggregation_prompt(
    working_language: str,
    question: str,
    candidates: list[tuple[str, str]],
    templates: PromptLibrary,
) -> list[ChatMessage]:
    instruction = templates.instruction_for(working_language)
    lines = "\n".join(f"- ({label}) {answer}" for label, answer in candidates)
    user = templates.aggregation_template.format(question=question, candidates=lines)
    return [ChatMessage("system", instruction), ChatMessage("user", user)]


_CANDIDATE_LINE = re.compile(r"^- \(([^)]+)\) (.*)$", re.MULTILINE)


def parse_aggregation_candidates(prompt_text: str) -> list[tuple[str, str]]:
    """Recover the labeled candidate lines from an aggregation user prompt.

    Used by the deterministic mock completion backend to echo a consensus.
    """
    return [(m.group(1), m.group(2)) for m in _CANDIDATE_LINE.finditer(prompt_text)]


def _complete(deps: StrategyDeps, strategy: StrategyId, messages: list[ChatMessage], trace: list[str]) -> str:
    trace.extend(f"{m.role}: {m.content}" for m in messages)
    try:
        return deps.completion.complete(messages, deps.params).strip()
    except Exception as exc:
        raise StrategyError(strategy, exc) from exc


def _translate(deps: StrategyDeps, strategy: StrategyId, text: str, src: str, tgt: str) -> str:
    try:
        return deps.translation.translate(text, src, tgt)
    except Exception as exc:
        raise StrategyError(strategy, exc) from exc


def run_mono(record: QARecord, deps: StrategyDeps, context: str | None = None, trace: list[str] | None = None) -> str:
    """Single completion call, prompt entirely in the source language."""
    trace = trace if trace is not None else []
    exemplars = [(r.question, r.gold_answers[0]) for r in deps.exemplars_for(record.language, record.id)]
    messages = build_prompt(
        StrategyId.MONO, record.language, context or record.context, record.question, exemplars, deps.templates
    )
    return _complete(deps, StrategyId.MONO, messages, trace)


def run_translate_test(
    record: QARecord,
    pivot: str,
    deps: StrategyDeps,
    context: str | None = None,
    trace: list[str] | None = None,
    strategy: StrategyId = StrategyId.TRANS,
    back_translate: bool = True,
    capture: dict | None = None,
) -> str:
    """Round-trip: translate context+question to the pivot, answer there, and
    (unless the caller wants the pivot-language answer) translate back."""
    if pivot == record.language:
        raise ValueError(f"pivot equals source language {pivot!r}")
    trace = trace if trace is not None else []
    src = record.language
    ctx = _translate(deps, strategy, context or record.context, src, pivot)
    question = _translate(deps, strategy, record.question, src, pivot)
    if capture is not None:
        capture["question"] = question
    exemplars = [(r.question, r.gold_answers[0]) for r in deps.exemplars_for(pivot, record.id)]
    messages = build_prompt(strategy, pivot, ctx, question, exemplars, deps.templates)
    answer = _complete(deps, strategy, messages, trace)
    if not back_translate:
        return answer
    if not answer:
        return answer
    return _translate(deps, strategy, answer, pivot, src)


def pivot_for(record: QARecord, deps: StrategyDeps) -> str:
    pivot = languages.select_pivot(record.language, deps.catalog, deps.distances, deps.pivot_cfg)
    if pivot is None:
        raise SimUnavailable(f"no qualifying pivot language for {record.language}")
    return pivot


def run_aggregation(
    record: QARecord,
    mode: StrategyId,
    deps: StrategyDeps,
    context: str | None = None,
    trace: list[str] | None = None,
) -> tuple[str, dict[str, str], bool]:
    """Run Mono/Trans/Sim, consolidate their answers, and answer in the
    source language. Returns (answer, sub_answers, partial_flag)."""
    if mode not in (StrategyId.AGG_SRC, StrategyId.AGG_TRANS):
        raise ValueError(f"not an aggregation strategy: {mode}")
    trace = trace if trace is not None else []
    src = record.language

    # Sub-answers are captured in their working language (Mono: source,
    # Trans: English, Sim: pivot) so each aggregation mode pays only for the
    # translations it actually needs.
    sub: dict[str, tuple[str, str]] = {}  # strategy name -> (answer, its language)
    partial = False
    try:
        sub[StrategyId.MONO.value] = (run_mono(record, deps, context, trace), src)
    except StrategyError:
        partial = True
    captured: dict = {}
    try:
        sub[StrategyId.TRANS.value] = (
            run_translate_test(
                record, "en", deps, context, trace, StrategyId.TRANS, back_translate=False, capture=captured
            ),
            "en",
        )
    except StrategyError:
        partial = True
    try:
        pivot = pivot_for(record, deps)
        sub[StrategyId.SIM.value] = (
            run_translate_test(record, pivot, deps, context, trace, StrategyId.SIM, back_translate=False),
            pivot,
        )
    except SimUnavailable:
        pass  # expected for pivotless languages; not a partial failure
    except StrategyError:
        partial = True

    if not sub:
        raise AggregationError(f"all aggregation sub-strategies failed for record {record.id}")

    agg_language = src if mode is StrategyId.AGG_SRC else "en"
    candidates = []
    for label, (answer, answer_language) in sub.items():
        if answer and answer_language != agg_language:
            answer = _translate(deps, mode, answer, answer_language, agg_language)
        candidates.append((label, answer))

    if agg_language == src:
        question = record.question
    elif "question" in captured:
        # the Trans sub-run already translated the question to English
        question = captured["question"]
    else:
        question = _translate(deps, mode, record.question, src, "en")
    messages = build_aggregation_prompt(agg_language, question, candidates, deps.templates)
    answer = _complete(deps, mode, messages, trace)
    if mode is StrategyId.AGG_TRANS and answer:
        answer = _translate(deps, mode, answer, "en", src)
    sub_answers = {label: ans for label, (ans, _) in sub.items()}
    return answer, sub_answers, partial


def run_arm(arm: Arm, record: QARecord, deps: StrategyDeps) -> TrialRecord:
    """Execute one (strategy, embedding) arm on one record.

    Errors land in TrialRecord.error instead of aborting batch runs; a Sim arm
    without a pivot is marked NA (downstream reward 0, arm space stays fixed).
    """
    trial = TrialRecord(record_id=record.id, arm=arm)
    start = time.monotonic()
    calls_before = deps.call_log.count()
    trace: list[str] = []
    try:
        context = retrieval.working_context(
            record, arm.embedding, deps.retrieval_cfg, deps.embeddings[arm.embedding]
        )
        if arm.strategy is StrategyId.MONO:
            trial.final_answer = trial.raw_answer = run_mono(record, deps, context, trace)
        elif arm.strategy is StrategyId.TRANS:
            trial.final_answer = trial.raw_answer = run_translate_test(
                record, "en", deps, context, trace, StrategyId.TRANS
            )
        elif arm.strategy is StrategyId.SIM:
            pivot = pivot_for(record, deps)
            trial.final_answer = trial.raw_answer = run_translate_test(
                record, pivot, deps, context, trace, StrategyId.SIM
            )
        else:
            answer, sub_answers, partial = run_aggregation(record, arm.strategy, deps, context, trace)
            trial.final_answer = trial.raw_answer = answer
            trial.sub_answers = sub_answers
            trial.partial = partial
        trial.empty_answer = not trial.final_answer
    except SimUnavailable as exc:
        trial.na = True
        trial.error = str(exc)
    except (StrategyError, AggregationError) as exc:
        trial.error = str(exc)
    trial.prompts_sent = trace
    trial.call_count = deps.call_log.count() - calls_before
    trial.latency = time.monotonic() - start
    return trial
