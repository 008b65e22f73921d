"""Online arm-selection policies: epsilon-greedy and Thompson-sampling
multi-armed bandits, and a contextual bandit that always pulls a default arm
first and feeds its reward into the context for picking a second arm. The
contextual bandit's observed reward is the max of the two pulls.

Rewards are reals in [0,1] (F1-style metrics or human-annotation scores), so
Beta posteriors use the fractional update alpha += r, beta += 1-r.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .gateway import GPT_EMB
from .strategies import ARM_SPACE, Arm, StrategyId

POLICIES = ("eps_greedy", "thompson", "contextual")
DEFAULT_ARM = Arm(StrategyId.MONO, GPT_EMB)


@dataclass(frozen=True)
class ArmPosterior:
    arm: Arm
    alpha: float = 1.0
    beta: float = 1.0
    pulls: int = 0
    reward_sum: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError(f"Beta parameters must stay positive: ({self.alpha}, {self.beta})")

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / self.pulls if self.pulls else 0.0


@dataclass(frozen=True)
class BanditConfig:
    policy: str = "thompson"
    epsilon: float = 0.2
    iterations: int = 5000
    rng_seed: int = 0
    ridge_lambda: float = 1.0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon out of [0,1]: {self.epsilon}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0: {self.iterations}")


@dataclass(frozen=True)
class ContextSchema:
    """Fixed component order for context vectors within one session."""

    languages: tuple[str, ...]
    datasets: tuple[str, ...] = ("indicqa", "tydiqa", "custom")

    @property
    def dimension(self) -> int:
        return 1 + len(self.languages) + len(self.datasets) + 1  # reward, onehots, bias

    def vector(self, default_reward: float, language: str, dataset: str) -> np.ndarray:
        if not 0.0 <= default_reward <= 1.0:
            raise ValueError(f"default reward out of [0,1]: {default_reward}")
        if language not in self.languages:
            raise ValueError(f"language {language!r} not in schema {self.languages}")
        if dataset not in self.datasets:
            raise ValueError(f"dataset {dataset!r} not in schema {self.datasets}")
        x = np.zeros(self.dimension)
        x[0] = default_reward
        x[1 + self.languages.index(language)] = 1.0
        x[1 + len(self.languages) + self.datasets.index(dataset)] = 1.0
        x[-1] = 1.0
        return x


class ArmEstimate:
    """Per-arm ridge-regression estimate of reward given a context vector."""

    def __init__(self, arm: Arm, dimension: int, ridge_lambda: float = 1.0):
        self.arm = arm
        self.dimension = dimension
        self.a_matrix = ridge_lambda * np.eye(dimension)
        self.b = np.zeros(dimension)
        self.observations = 0

    @property
    def weights(self) -> np.ndarray:
        return np.linalg.solve(self.a_matrix, self.b)

    def predict(self, x: np.ndarray) -> float:
        self._check(x)
        return float(self.weights @ x)

    def update(self, x: np.ndarray, reward: float) -> None:
        self._check(x)
        self.a_matrix += np.outer(x, x)
        self.b += reward * x
        self.observations += 1

    def _check(self, x: np.ndarray) -> None:
        if x.shape != (self.dimension,):
            raise ValueError(f"context dimension {x.shape} != ({self.dimension},)")


def _best_by(arms: Iterable[Arm], score: dict[Arm, float]) -> Arm:
    # ties broken by lowest arm index for a stable, documented ordering
    return min(arms, key=lambda a: (-score[a], ARM_SPACE.index(a)))


def eps_greedy_select(posteriors: dict[Arm, ArmPosterior], epsilon: float, rng: np.random.Generator) -> Arm:
    """Empirically best arm with probability 1-epsilon, else uniform random."""
    arms = list(posteriors)
    if epsilon > 0 and rng.random() < epsilon:
        return arms[rng.integers(len(arms))]
    return _best_by(arms, {a: posteriors[a].mean_reward for a in arms})


def thompson_select(posteriors: dict[Arm, ArmPosterior], rng: np.random.Generator) -> Arm:
    """Sample from each arm's Beta posterior and take the argmax."""
    draws = {a: float(rng.beta(p.alpha, p.beta)) for a, p in posteriors.items()}
    return _best_by(list(posteriors), draws)


def update(posterior: ArmPosterior, reward: float) -> ArmPosterior:
    """Fractional Bernoulli update for a [0,1] reward."""
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward out of [0,1]: {reward}")
    return replace(
        posterior,
        alpha=posterior.alpha + reward,
        beta=posterior.beta + (1.0 - reward),
        pulls=posterior.pulls + 1,
        reward_sum=posterior.reward_sum + reward,
    )


def cb_select(
    context: np.ndarray,
    estimates: dict[Arm, ArmEstimate],
    epsilon: float,
    rng: np.random.Generator,
    default_arm: Arm = DEFAULT_ARM,
) -> Arm:
    """Pick the non-default arm with the best predicted reward (1-epsilon),
    else a uniform random non-default arm."""
    arms = [a for a in estimates if a != default_arm]
    if not arms:
        raise ValueError("need at least one non-default arm")
    for est in estimates.values():
        est._check(context)
    cold_start = all(estimates[a].observations == 0 for a in arms)
    if cold_start or (epsilon > 0 and rng.random() < epsilon):
        return arms[rng.integers(len(arms))]
    return _best_by(arms, {a: estimates[a].predict(context) for a in arms})


def observed_reward(r_default: float, r_selected: float) -> float:
    """The contextual bandit scores the better of the two pulls."""
    for r in (r_default, r_selected):
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"reward out of [0,1]: {r}")
    return max(r_default, r_selected)


@dataclass(frozen=True)
class EnvStep:
    """One environment draw: the per-arm rewards plus context features."""

    rewards: dict[Arm, float]
    language: str = ""
    dataset: str = "custom"
    record_id: str = ""


class Environment(Protocol):
    def sample(self, rng: np.random.Generator) -> EnvStep: ...


@dataclass
class StepLog:
    step: int
    arm: Arm
    reward: float
    cumulative_mean: float
    default_reward: float | None = None
    observed: float | None = None
    record_id: str = ""

    def to_json(self) -> str:
        row = {
            "step": self.step,
            "arm": self.arm.name,
            "reward": self.reward,
            "cumulative_mean": self.cumulative_mean,
            "record_id": self.record_id,
        }
        if self.default_reward is not None:
            row["default_reward"] = self.default_reward
            row["observed"] = self.observed
        return json.dumps(row, sort_keys=True)


class PolicySnapshot:
    """Serializable, resumable policy state."""

    def __init__(
        self,
        config: BanditConfig,
        arms: tuple[Arm, ...],
        posteriors: dict[Arm, ArmPosterior] | None = None,
        estimates: dict[Arm, ArmEstimate] | None = None,
        schema: ContextSchema | None = None,
        default_arm: Arm = DEFAULT_ARM,
        steps_taken: int = 0,
    ):
        self.config = config
        self.arms = arms
        self.posteriors = posteriors or {a: ArmPosterior(a) for a in arms}
        self.schema = schema
        self.default_arm = default_arm
        if estimates is None and schema is not None:
            estimates = {a: ArmEstimate(a, schema.dimension, config.ridge_lambda) for a in arms}
        self.estimates = estimates
        self.steps_taken = steps_taken

    def select(self, rng: np.random.Generator, context: np.ndarray | None = None) -> Arm:
        if self.config.policy == "eps_greedy":
            return eps_greedy_select(self.posteriors, self.config.epsilon, rng)
        if self.config.policy == "thompson":
            return thompson_select(self.posteriors, rng)
        if context is None:
            raise ValueError("contextual policy requires a context vector")
        return cb_select(context, self.estimates, self.config.epsilon, rng, self.default_arm)

    def to_dict(self) -> dict:
        out = {
            "config": {
                "policy": self.config.policy,
                "epsilon": self.config.epsilon,
                "iterations": self.config.iterations,
                "rng_seed": self.config.rng_seed,
                "ridge_lambda": self.config.ridge_lambda,
            },
            "arms": [a.name for a in self.arms],
            "default_arm": self.default_arm.name,
            "steps_taken": self.steps_taken,
            "posteriors": {
                a.name: [p.alpha, p.beta, p.pulls, p.reward_sum] for a, p in self.posteriors.items()
            },
        }
        if self.schema is not None:
            out["schema"] = {"languages": list(self.schema.languages), "datasets": list(self.schema.datasets)}
        if self.estimates is not None:
            out["estimates"] = {
                a.name: {
                    "a_matrix": e.a_matrix.tolist(),
                    "b": e.b.tolist(),
                    "observations": e.observations,
                }
                for a, e in self.estimates.items()
            }
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PolicySnapshot":
        config = BanditConfig(**raw["config"])
        arms = tuple(Arm.parse(name) for name in raw["arms"])
        posteriors = {
            Arm.parse(name): ArmPosterior(Arm.parse(name), alpha=v[0], beta=v[1], pulls=v[2], reward_sum=v[3])
            for name, v in raw["posteriors"].items()
        }
        schema = None
        if "schema" in raw:
            schema = ContextSchema(
                languages=tuple(raw["schema"]["languages"]), datasets=tuple(raw["schema"]["datasets"])
            )
        estimates = None
        if "estimates" in raw:
            estimates = {}
            for name, e in raw["estimates"].items():
                arm = Arm.parse(name)
                est = ArmEstimate(arm, len(e["b"]), config.ridge_lambda)
                est.a_matrix = np.array(e["a_matrix"])
                est.b = np.array(e["b"])
                est.observations = e["observations"]
                estimates[arm] = est
        return cls(
            config=config,
            arms=arms,
            posteriors=posteriors,
            estimates=estimates,
            schema=schema,
            default_arm=Arm.parse(raw["default_arm"]),
            steps_taken=raw.get("steps_taken", 0),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PolicySnapshot":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class TrainingResult:
    snapshot: PolicySnapshot
    steps: list[StepLog]
    truncated: bool = False


def run_training(
    environment: Environment,
    config: BanditConfig,
    arms: tuple[Arm, ...] = ARM_SPACE,
    schema: ContextSchema | None = None,
    default_arm: Arm = DEFAULT_ARM,
    snapshot: PolicySnapshot | None = None,
) -> TrainingResult:
    """Run the configured policy for config.iterations environment draws.

    Resumable: pass a previous snapshot to continue training from its state.
    """
    if config.policy == "contextual" and schema is None and (snapshot is None or snapshot.schema is None):
        raise ValueError("contextual policy requires a context schema")
    if snapshot is None:
        snapshot = PolicySnapshot(config, arms, schema=schema, default_arm=default_arm)
    rng = np.random.default_rng((config.rng_seed, snapshot.steps_taken))
    steps: list[StepLog] = []
    running_sum = 0.0
    truncated = False
    for step in range(config.iterations):
        try:
            draw = environment.sample(rng)
        except StopIteration:
            truncated = True
            break
        if config.policy == "contextual":
            r_default = draw.rewards[snapshot.default_arm]
            context = snapshot.schema.vector(r_default, draw.language, draw.dataset)
            arm = snapshot.select(rng, context)
            r_selected = draw.rewards[arm]
            observed = observed_reward(r_default, r_selected)
            snapshot.estimates[arm].update(context, r_selected)
            snapshot.posteriors[arm] = update(snapshot.posteriors[arm], r_selected)
            running_sum += observed
            steps.append(
                StepLog(
                    step=snapshot.steps_taken + step,
                    arm=arm,
                    reward=r_selected,
                    cumulative_mean=running_sum / (step + 1),
                    default_reward=r_default,
                    observed=observed,
                    record_id=draw.record_id,
                )
            )
        else:
            arm = snapshot.select(rng)
            reward = draw.rewards[arm]
            snapshot.posteriors[arm] = update(snapshot.posteriors[arm], reward)
            running_sum += reward
            steps.append(
                StepLog(
                    step=snapshot.steps_taken + step,
                    arm=arm,
                    reward=reward,
                    cumulative_mean=running_sum / (step + 1),
                    record_id=draw.record_id,
                )
            )
    snapshot.steps_taken += len(steps)
    return TrainingResult(snapshot=snapshot, steps=steps, truncated=truncated)


def write_steps_jsonl(steps: list[StepLog], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for step in steps:
            fh.write(step.to_json() + "\n")


def write_learning_curve_csv(steps: list[StepLog], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "arm", "reward", "cumulative_mean"])
        for step in steps:
            writer.writerow([step.step, step.arm.name, step.reward, step.cumulative_mean])
