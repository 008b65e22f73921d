"""Ready-made deterministic mock wiring for offline runs and tests."""

from __future__ import annotations

from . import languages
from .corpus import ExemplarPool
from .gateway import (
    GPT_EMB,
    ML_EMB,
    CallLog,
    ChatMessage,
    CompletionParams,
    MockCompletionClient,
    MockEmbeddingClient,
    MockTranslationClient,
    completion_key,
)
from .retrieval import RetrievalConfig
from .strategies import PromptLibrary, StrategyDeps, parse_aggregation_candidates


def majority_responder(messages: list[ChatMessage], params: CompletionParams) -> str:
    """Echo the most frequent candidate from an aggregation prompt, falling
    back to a digest-derived string for ordinary QA prompts."""
    user = next((m.content for m in reversed(messages) if m.role == "user"), "")
    candidates = parse_aggregation_candidates(user)
    if candidates:
        counts: dict[str, int] = {}
        for _, answer in candidates:
            counts[answer] = counts.get(answer, 0) + 1
        return max(counts, key=lambda ans: (counts[ans], -list(counts).index(ans)))
    return f"mock-answer-{completion_key(messages, params)[:8]}"


def make_mock_deps(
    seed: int = 0,
    table: dict[str, str] | None = None,
    exemplar_pool: ExemplarPool | None = None,
    retrieval_cfg: RetrievalConfig | None = None,
    n_shots: int = 0,
    embedding_dim: int = 32,
) -> StrategyDeps:
    """Fully mocked StrategyDeps sharing one call log across all clients."""
    call_log = CallLog()
    return StrategyDeps(
        completion=MockCompletionClient(table=table, responder=majority_responder, call_log=call_log),
        translation=MockTranslationClient(call_log=call_log),
        embeddings={
            GPT_EMB: MockEmbeddingClient(GPT_EMB, dimension=embedding_dim, seed=seed, call_log=call_log),
            ML_EMB: MockEmbeddingClient(ML_EMB, dimension=embedding_dim, seed=seed + 1, call_log=call_log),
        },
        catalog=languages.load_catalog(),
        distances=languages.load_distances(),
        templates=PromptLibrary(),
        retrieval_cfg=retrieval_cfg or RetrievalConfig(),
        exemplar_pool=exemplar_pool,
        n_shots=n_shots,
        call_log=call_log,
    )
