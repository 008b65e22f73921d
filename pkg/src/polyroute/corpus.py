"""QA dataset ingestion, train/test splitting, and few-shot exemplar pools.

Input files follow the SQuAD layout (articles -> paragraphs -> qas) with a
language tag supplied either explicitly, via a sidecar ``<name>.lang`` file,
or via a ``<anything>.<lang>.json`` filename convention.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable

DATASETS = ("indicqa", "tydiqa", "custom")


class DatasetFormatError(ValueError):
    """Input file does not parse as the declared format."""


class RecordValidationError(ValueError):
    """One or more records violate the record invariants."""

    def __init__(self, message: str, record_ids: list[str]):
        super().__init__(message)
        self.record_ids = record_ids


class SplitError(ValueError):
    """Too few records to split."""


@dataclass(frozen=True)
class QARecord:
    id: str
    dataset: str
    language: str
    context: str
    question: str
    gold_answers: tuple[str, ...]

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise RecordValidationError(f"unknown dataset tag {self.dataset!r}", [self.id])
        if not self.context:
            raise RecordValidationError(f"empty context for record {self.id}", [self.id])
        if not self.gold_answers:
            raise RecordValidationError(f"no gold answers for record {self.id}", [self.id])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    seed: int = 0
    repeats: int = 3

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0,1): {self.train_fraction}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1: {self.repeats}")


def load_dataset(path: str | Path, dataset: str = "custom", language: str | None = None) -> list[QARecord]:
    """Load a SQuAD-style JSON file into QARecords.

    The per-file language tag is resolved from the `language` argument, a
    sidecar ``<path>.lang`` file, or the second-to-last dotted filename part.
    """
    path = Path(path)
    language = language or _resolve_language(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: not valid JSON at line {exc.lineno}: {exc.msg}") from exc

    records: list[QARecord] = []
    bad_ids: list[str] = []
    seen: set[str] = set()
    try:
        articles = payload["data"]
    except (TypeError, KeyError):
        raise DatasetFormatError(f"{path}: missing top-level 'data' field") from None
    for ai, article in enumerate(articles):
        for pi, paragraph in enumerate(article.get("paragraphs", [])):
            locus = f"{path} data[{ai}].paragraphs[{pi}]"
            if "context" not in paragraph:
                raise DatasetFormatError(f"{locus}: missing 'context'")
            context = paragraph["context"]
            for qa in paragraph.get("qas", []):
                qid = str(qa.get("id", f"{ai}.{pi}.{len(records)}"))
                if qid in seen:
                    raise DatasetFormatError(f"{locus}: duplicate question id {qid}")
                seen.add(qid)
                if "question" not in qa:
                    raise DatasetFormatError(f"{locus}: question {qid} missing 'question'")
                answers = tuple(a["text"] for a in qa.get("answers", []) if a.get("text"))
                if not answers:
                    bad_ids.append(qid)
                    continue
                records.append(
                    QARecord(
                        id=qid,
                        dataset=dataset,
                        language=language,
                        context=context,
                        question=qa["question"],
                        gold_answers=answers,
                    )
                )
    if bad_ids:
        raise RecordValidationError(f"{path}: records with empty answers: {', '.join(bad_ids)}", bad_ids)
    return records


def dump_records(records: Iterable[QARecord], path: str | Path) -> None:
    """Write records as canonical JSONL (one record per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), ensure_ascii=False, sort_keys=True) + "\n")


def load_records(path: str | Path) -> list[QARecord]:
    """Read back a JSONL record dump produced by dump_records."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            raw["gold_answers"] = tuple(raw["gold_answers"])
            records.append(QARecord(**raw))
    return records


def split(records: list[QARecord], spec: SplitSpec, repeat: int = 0) -> tuple[list[QARecord], list[QARecord]]:
    """Deterministic train/test partition for one repeat index."""
    n = len(records)
    if n < 2:
        raise SplitError(f"need at least 2 records to split, got {n}")
    if not 0 <= repeat < spec.repeats:
        raise SplitError(f"repeat index {repeat} out of range for {spec.repeats} repeats")
    order = list(range(n))
    random.Random(f"{spec.seed}:{repeat}").shuffle(order)
    n_train = round(spec.train_fraction * n)
    n_train = min(max(n_train, 1), n - 1)  # keep both sides non-empty
    train_idx = set(order[:n_train])
    train = [r for i, r in enumerate(records) if i in train_idx]
    test = [r for i, r in enumerate(records) if i not in train_idx]
    return train, test


def _resolve_language(path: Path) -> str:
    sidecar = path.with_suffix(path.suffix + ".lang")
    if sidecar.exists():
        tag = sidecar.read_text(encoding="utf-8").strip()
        if tag:
            return tag
    parts = path.name.split(".")
    if len(parts) >= 3:  # e.g. indicqa.hi.json
        return parts[-2]
    raise DatasetFormatError(
        f"{path}: no language tag (pass language=, add a {sidecar.name} sidecar, "
        f"or name the file <name>.<lang>.json)"
    )


@dataclass
class ExemplarPool:
    """Deterministic few-shot exemplar pool, disjoint from any query record."""

    records: list[QARecord]
    seed: int = 0

    def exemplars(self, language: str, n: int, exclude_id: str | None = None) -> tuple[list[QARecord], bool]:
        """Draw up to n exemplars in `language`; returns (exemplars, truncated).

        truncated is True when the pool was smaller than n.
        """
        if n < 0:
            raise ValueError(f"n must be >= 0: {n}")
        if n == 0:
            return [], False
        pool = [r for r in self.records if r.language == language and r.id != exclude_id]
        pool.sort(key=lambda r: r.id)
        random.Random(f"{self.seed}:{language}").shuffle(pool)
        chosen = pool[:n]
        return chosen, len(chosen) < n
