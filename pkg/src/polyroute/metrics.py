"""Answer scoring: token-overlap F1 under two normalization profiles,
multi-reference F1, human-annotation scores, and judgment-based rescoring.

The ``squad`` profile lowercases, strips ASCII punctuation, and drops the
English articles a/an/the. The ``mlqa`` profile strips every Unicode
punctuation character and drops per-language standalone articles, which makes
it the fairer choice for non-English answers.
"""

from __future__ import annotations

import json
import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

PROFILES = ("squad", "mlqa")

_ASCII_PUNCT = set(string.punctuation)
_ENGLISH_ARTICLES = frozenset({"a", "an", "the"})


class Verdict(str, Enum):
    YES = "Yes"
    PARTIAL = "Partial"
    NO = "No"


class JudgmentSource(str, Enum):
    HUMAN = "human"
    LLM_JUDGE = "llm_judge"


@dataclass(frozen=True)
class Judgment:
    verdict: Verdict
    source: JudgmentSource
    candidate_id: str


@dataclass(frozen=True)
class NormalizedAnswer:
    tokens: tuple[str, ...]
    language: str


@dataclass
class CandidateScores:
    squad_f1: float
    mlqa_f1: float
    ha_score: float | None = None
    rescored_f1: float | None = None


@dataclass
class ScoreReport:
    per_candidate: dict[str, CandidateScores]

    def jsonl_lines(self) -> list[str]:
        lines = []
        for cid, scores in self.per_candidate.items():
            row = {"candidate_id": cid, "squad_f1": scores.squad_f1, "mlqa_f1": scores.mlqa_f1}
            if scores.ha_score is not None:
                row["ha_score"] = scores.ha_score
            if scores.rescored_f1 is not None:
                row["rescored_f1"] = scores.rescored_f1
            lines.append(json.dumps(row, ensure_ascii=False, sort_keys=True))
        return lines


@lru_cache(maxsize=1)
def _article_lists() -> dict[str, frozenset[str]]:
    raw = json.loads(
        resources.files("polyroute.data").joinpath("articles.json").read_text(encoding="utf-8")
    )
    return {lang: frozenset(words) for lang, words in raw.items()}


def _is_unicode_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(text: str, language: str, profile: str = "mlqa") -> NormalizedAnswer:
    """Normalize an answer string into comparison tokens."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    text = text.lower()
    if profile == "squad":
        text = "".join(ch for ch in text if ch not in _ASCII_PUNCT)
        articles = _ENGLISH_ARTICLES
    else:
        text = "".join(ch for ch in text if not _is_unicode_punct(ch))
        articles = _article_lists().get(language, frozenset())
    tokens = tuple(tok for tok in text.split() if tok not in articles)
    return NormalizedAnswer(tokens=tokens, language=language)


def token_f1(pred: NormalizedAnswer, truth: NormalizedAnswer) -> float:
    """Multiset token-overlap F1; 1.0 when both are empty."""
    if not pred.tokens and not truth.tokens:
        return 1.0
    common = sum((Counter(pred.tokens) & Counter(truth.tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred.tokens)
    recall = common / len(truth.tokens)
    return 2 * precision * recall / (precision + recall)


def f1(pred: str, truth: str, language: str, profile: str = "mlqa") -> float:
    """Token F1 between raw strings under a normalization profile."""
    return token_f1(normalize(pred, language, profile), normalize(truth, language, profile))


def multi_ref_f1(pred: str, valid_answers: list[str], language: str, profile: str = "mlqa") -> float:
    """Best token F1 of the prediction against any reference answer."""
    if not valid_answers:
        raise ValueError("valid_answers must be non-empty")
    return max(f1(pred, ref, language, profile) for ref in valid_answers)


def annotator_rescore(
    ground_truth: str,
    candidates: list[str],
    judgments: list[Judgment],
    language: str,
) -> list[float]:
    """Rescore candidates against the ground truth plus all Yes-judged answers.

    Candidates and judgments are aligned by position; any candidate judged Yes
    joins the reference set for every candidate (including itself).
    """
    if len(judgments) != len(candidates):
        missing = len(candidates) - len(judgments)
        raise ValueError(f"one judgment per candidate required ({missing:+d} mismatch)")
    valid_answers = [ground_truth]
    for cand, judgment in zip(candidates, judgments):
        if judgment.verdict is Verdict.YES:
            valid_answers.append(cand)
    return [multi_ref_f1(cand, valid_answers, language, "mlqa") for cand in candidates]


def ha_score(
    judgment: Judgment,
    pred: str,
    ground_truth: str,
    language: str,
    partial_constant: bool = False,
) -> float:
    """Map a Yes/Partial/No judgment to a [0,1] reward.

    Partial scores as token F1 against the ground truth by default; set
    partial_constant for the flat 0.5 reading instead.
    """
    if judgment.verdict is Verdict.YES:
        return 1.0
    if judgment.verdict is Verdict.NO:
        return 0.0
    if partial_constant:
        return 0.5
    return min(max(f1(pred, ground_truth, language, "mlqa"), 0.0), 1.0)


_VERDICT_RE = re.compile(r"\b(yes|no|partial)\b", re.IGNORECASE)


def parse_verdict(reply: str) -> Verdict | None:
    """Extract the first Yes/No/Partial token from a judge reply, if any."""
    match = _VERDICT_RE.search(reply)
    if match is None:
        return None
    return Verdict(match.group(1).capitalize())
