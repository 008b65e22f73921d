"""Experiment orchestration: precompute the per-(record, arm) trial matrix,
replay it as an offline bandit environment, and compare the learned policy
against best-static and random baselines over seeded repeated splits.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from . import bandits, metrics
from .bandits import BanditConfig, ContextSchema, EnvStep, PolicySnapshot
from .corpus import QARecord, SplitSpec, split
from .judge import JudgeDeps, gpt_annotator_score
from .strategies import ARM_SPACE, Arm, StrategyDeps, TrialRecord, run_arm

REWARD_MODES = ("mlqa_f1", "gpt_annotator", "human")


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    dataset_paths: list[str] = field(default_factory=list)
    languages: list[str] = field(default_factory=list)
    arms: tuple[Arm, ...] = ARM_SPACE
    reward_mode: str = "mlqa_f1"
    metric_profile: str = "mlqa"
    bandit: BanditConfig = field(default_factory=BanditConfig)
    split_spec: SplitSpec = field(default_factory=SplitSpec)
    output_dir: str = "experiment"
    annotation_enabled: bool = False

    def __post_init__(self):
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.reward_mode == "human" and not self.annotation_enabled:
            raise ValueError("human reward mode requires the annotation service")
        bad = [a for a in self.arms if a not in ARM_SPACE]
        if bad:
            raise ValueError(f"arms outside the 10-arm space: {bad}")

    def config_hash(self) -> str:
        raw = json.dumps(
            {
                "dataset_paths": self.dataset_paths,
                "languages": self.languages,
                "arms": [a.name for a in self.arms],
                "reward_mode": self.reward_mode,
                "metric_profile": self.metric_profile,
                "bandit": asdict(self.bandit),
                "split": asdict(self.split_spec),
            },
            sort_keys=True,
        )
        return hashlib.sha256(raw.encode()).hexdigest()[:16]

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        kwargs = dict(raw)
        if "bandit" in kwargs:
            kwargs["bandit"] = BanditConfig(**kwargs["bandit"])
        if "split_spec" in kwargs:
            kwargs["split_spec"] = SplitSpec(**kwargs["split_spec"])
        if "arms" in kwargs:
            kwargs["arms"] = tuple(Arm.parse(name) for name in kwargs["arms"])
        return cls(**kwargs)


def mlqa_reward(trial: TrialRecord, record: QARecord) -> float:
    if trial.na or trial.error:
        return 0.0
    return metrics.multi_ref_f1(trial.final_answer, list(record.gold_answers), record.language, "mlqa")


def squad_reward(trial: TrialRecord, record: QARecord) -> float:
    if trial.na or trial.error:
        return 0.0
    return metrics.multi_ref_f1(trial.final_answer, list(record.gold_answers), record.language, "squad")


def make_annotator_scorer(judge_deps: JudgeDeps) -> Callable[[list[TrialRecord], QARecord], list[float]]:
    def scorer(trials: list[TrialRecord], record: QARecord) -> list[float]:
        usable = [t for t in trials if not (t.na or t.error or not t.final_answer)]
        scores = {id(t): 0.0 for t in trials}
        if usable:
            judged = gpt_annotator_score(record, [t.final_answer for t in usable], judge_deps)
            for trial, score in zip(usable, judged):
                scores[id(trial)] = score
        return [scores[id(t)] for t in trials]

    return scorer


class TrialMatrix:
    """Complete record x arm table of trials and rewards, persisted as JSONL."""

    def __init__(self):
        self.rows: dict[tuple[str, str], dict] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def has(self, record_id: str, arm: Arm) -> bool:
        return (record_id, arm.name) in self.rows

    def add(self, record_id: str, arm: Arm, reward: float, trial: TrialRecord | None = None) -> None:
        row = {"record_id": record_id, "arm": arm.name, "reward": reward}
        if trial is not None:
            row.update(
                {
                    "final_answer": trial.final_answer,
                    "na": trial.na,
                    "error": trial.error,
                    "call_count": trial.call_count,
                    "empty_answer": trial.empty_answer,
                }
            )
        self.rows[(record_id, arm.name)] = row

    def reward(self, record_id: str, arm: Arm) -> float:
        return self.rows[(record_id, arm.name)]["reward"]

    def rewards_for(self, record_id: str, arms: tuple[Arm, ...]) -> dict[Arm, float]:
        return {arm: self.reward(record_id, arm) for arm in arms}

    def mean_reward(self, arm: Arm, record_ids: list[str]) -> float:
        values = [self.reward(rid, arm) for rid in record_ids]
        return float(np.mean(values)) if values else 0.0

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted(self.rows):
                fh.write(json.dumps(self.rows[key], ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrialMatrix":
        matrix = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    matrix.rows[(row["record_id"], row["arm"])] = row
        return matrix


def precompute_trials(
    records: list[QARecord],
    arms: tuple[Arm, ...],
    deps: StrategyDeps,
    reward_fn: Callable[[TrialRecord, QARecord], float] = mlqa_reward,
    out_path: str | Path | None = None,
    existing: TrialMatrix | None = None,
) -> tuple[TrialMatrix, list[TrialRecord]]:
    """Fill the record x arm matrix; resumes past partial runs by skipping
    cells already present. NA and errored cells carry reward 0."""
    matrix = existing or TrialMatrix()
    if existing is None and out_path is not None and Path(out_path).exists():
        matrix = TrialMatrix.load(out_path)
    trials: list[TrialRecord] = []
    for record in records:
        for arm in arms:
            if matrix.has(record.id, arm):
                continue
            trial = run_arm(arm, record, deps)
            matrix.add(record.id, arm, reward_fn(trial, record), trial)
            trials.append(trial)
    if out_path is not None:
        matrix.save(out_path)
    return matrix, trials


def best_static(matrix: TrialMatrix, train_ids: list[str], arms: tuple[Arm, ...] = ARM_SPACE) -> Arm:
    """Arm with the highest mean train reward; ties go to the lowest index."""
    if not train_ids or not arms:
        raise ExperimentError("empty train set or arm list")
    means = {arm: matrix.mean_reward(arm, train_ids) for arm in arms}
    return min(arms, key=lambda a: (-means[a], ARM_SPACE.index(a)))


class ReplayEnvironment:
    """Offline environment replaying a trial matrix, sampling records with
    replacement by default so small train sets support long training runs."""

    def __init__(
        self,
        matrix: TrialMatrix,
        records: list[QARecord],
        arms: tuple[Arm, ...] = ARM_SPACE,
        with_replacement: bool = True,
    ):
        if not records:
            raise ExperimentError("replay environment needs at least one record")
        self.matrix = matrix
        self.records = records
        self.arms = arms
        self.with_replacement = with_replacement
        self._cursor = 0

    def sample(self, rng: np.random.Generator) -> EnvStep:
        if self.with_replacement:
            record = self.records[rng.integers(len(self.records))]
        else:
            if self._cursor >= len(self.records):
                raise StopIteration
            record = self.records[self._cursor]
            self._cursor += 1
        return EnvStep(
            rewards=self.matrix.rewards_for(record.id, self.arms),
            language=record.language,
            dataset=record.dataset,
            record_id=record.id,
        )


def evaluate_policy(
    snapshot: PolicySnapshot,
    matrix: TrialMatrix,
    test_records: list[QARecord],
    arms: tuple[Arm, ...],
) -> float:
    """Mean test reward of the trained policy, exploited greedily.

    The contextual policy keeps its max-of-default-and-selected reward rule
    at evaluation time; MAB policies score the single chosen arm.
    """
    total = 0.0
    for record in test_records:
        rewards = matrix.rewards_for(record.id, arms)
        if snapshot.config.policy == "contextual":
            r_default = rewards[snapshot.default_arm]
            context = snapshot.schema.vector(r_default, record.language, record.dataset)
            arm = bandits.cb_select(context, snapshot.estimates, 0.0, np.random.default_rng(0), snapshot.default_arm)
            total += bandits.observed_reward(r_default, rewards[arm])
        else:
            arm = min(arms, key=lambda a: (-snapshot.posteriors[a].mean_reward, ARM_SPACE.index(a)))
            total += rewards[arm]
    return total / len(test_records)


def evaluate_random(
    matrix: TrialMatrix, test_records: list[QARecord], arms: tuple[Arm, ...], rng: np.random.Generator
) -> float:
    total = 0.0
    for record in test_records:
        arm = arms[rng.integers(len(arms))]
        total += matrix.reward(record.id, arm)
    return total / len(test_records)


@dataclass
class ExperimentReport:
    per_language: dict[str, dict[str, list[float]]]
    averaged: dict[str, dict[str, float]]
    overall: dict[str, float]
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "per_language": self.per_language,
            "averaged": self.averaged,
            "overall": self.overall,
            "provenance": self.provenance,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def run_experiment(
    config: ExperimentConfig,
    records: list[QARecord],
    matrix: TrialMatrix,
) -> ExperimentReport:
    """Per repeat: split, train the policy on the train rows, then score the
    learned policy, the best static arm, and a random agent on the test rows.
    Values are averaged over repeats, per language and overall."""
    if not records:
        raise ExperimentError("no records to run on")
    languages = config.languages or sorted({r.language for r in records})
    schema = ContextSchema(languages=tuple(languages))
    per_language: dict[str, dict[str, list[float]]] = {
        lang: {"learned": [], "best_static": [], "random": []} for lang in languages
    }
    overall_runs: dict[str, list[float]] = {"learned": [], "best_static": [], "random": []}

    for repeat in range(config.split_spec.repeats):
        train, test = split(records, config.split_spec, repeat)
        env = ReplayEnvironment(matrix, train, config.arms)
        bandit_cfg = bandits.BanditConfig(
            policy=config.bandit.policy,
            epsilon=config.bandit.epsilon,
            iterations=config.bandit.iterations,
            rng_seed=config.bandit.rng_seed + repeat,
            ridge_lambda=config.bandit.ridge_lambda,
        )
        result = bandits.run_training(env, bandit_cfg, config.arms, schema=schema)
        static_arm = best_static(matrix, [r.id for r in train], config.arms)
        rng = np.random.default_rng((bandit_cfg.rng_seed, 7))

        by_lang: dict[str, list[QARecord]] = {}
        for record in test:
            by_lang.setdefault(record.language, []).append(record)
        for lang, lang_records in by_lang.items():
            per_language[lang]["learned"].append(
                evaluate_policy(result.snapshot, matrix, lang_records, config.arms)
            )
            per_language[lang]["best_static"].append(
                matrix.mean_reward(static_arm, [r.id for r in lang_records])
            )
            per_language[lang]["random"].append(
                evaluate_random(matrix, lang_records, config.arms, rng)
            )
        overall_runs["learned"].append(evaluate_policy(result.snapshot, matrix, test, config.arms))
        overall_runs["best_static"].append(matrix.mean_reward(static_arm, [r.id for r in test]))
        overall_runs["random"].append(evaluate_random(matrix, test, config.arms, rng))

    averaged = {
        lang: {policy: float(np.mean(vals)) if vals else 0.0 for policy, vals in runs.items()}
        for lang, runs in per_language.items()
    }
    overall = {policy: float(np.mean(vals)) for policy, vals in overall_runs.items()}
    provenance = {
        "config_hash": config.config_hash(),
        "seeds": [config.bandit.rng_seed + r for r in range(config.split_spec.repeats)],
        "reward_mode": config.reward_mode,
        "policy": config.bandit.policy,
        "arms": [a.name for a in config.arms],
        "record_count": len(records),
    }
    return ExperimentReport(
        per_language=per_language, averaged=averaged, overall=overall, provenance=provenance
    )
