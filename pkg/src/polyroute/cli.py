"""Command-line entry points tying the pipeline together.

Typical offline flow:
  polyroute ingest data.hi.json --dataset indicqa -o records.jsonl
  polyroute trials records.jsonl -o trials.jsonl
  polyroute train trials.jsonl records.jsonl --policy contextual -o out/
  polyroute report records.jsonl trials.jsonl -o out/report.json
  polyroute serve records.jsonl --trials trials.jsonl
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import yaml

from . import bandits, corpus, judge, runner
from .bandits import BanditConfig, ContextSchema
from .gateway import (
    GPT_EMB,
    ML_EMB,
    CallLog,
    HttpCompletionClient,
    HttpEmbeddingClient,
    HttpTranslationClient,
    OpenAIChatAdapter,
)
from .mocks import make_mock_deps
from .retrieval import RetrievalConfig
from .runner import ExperimentConfig, TrialMatrix
from .strategies import ARM_SPACE, Arm, StrategyDeps, TrialRecord


def _deps(gateway_config: str | None, seed: int, retrieval_enabled: bool, shots: int) -> StrategyDeps:
    cfg = RetrievalConfig(enabled=retrieval_enabled)
    if gateway_config is None:
        return make_mock_deps(seed=seed, retrieval_cfg=cfg, n_shots=shots)
    raw = yaml.safe_load(Path(gateway_config).read_text(encoding="utf-8"))
    call_log = CallLog()
    endpoints = raw["endpoints"]
    completion_cls = OpenAIChatAdapter if raw.get("vendor") == "openai" else HttpCompletionClient
    deps = make_mock_deps(seed=seed, retrieval_cfg=cfg, n_shots=shots)
    deps.completion = completion_cls(endpoints["completion"], call_log=call_log)
    deps.translation = HttpTranslationClient(endpoints["translation"], call_log=call_log)
    deps.embeddings = {
        GPT_EMB: HttpEmbeddingClient(endpoints["embedding_gpt"], GPT_EMB, call_log=call_log),
        ML_EMB: HttpEmbeddingClient(endpoints["embedding_ml"], ML_EMB, call_log=call_log),
    }
    deps.call_log = call_log
    return deps


@click.group()
def main():
    """Strategy routing for multilingual QA over black-box LLMs."""


@main.command()
@click.argument("dataset_path", type=click.Path(exists=True))
@click.option("--dataset", type=click.Choice(corpus.DATASETS), default="custom")
@click.option("--language", default=None, help="Language code; inferred from filename/sidecar if omitted.")
@click.option("-o", "--out", type=click.Path(), required=True)
def ingest(dataset_path, dataset, language, out):
    """Load a SQuAD-style JSON file and dump canonical JSONL records."""
    records = corpus.load_dataset(dataset_path, dataset=dataset, language=language)
    corpus.dump_records(records, out)
    click.echo(f"wrote {len(records)} records to {out}")


@main.command()
@click.argument("records_path", type=click.Path(exists=True))
@click.option("-o", "--out", type=click.Path(), required=True)
@click.option("--reward-mode", type=click.Choice(["mlqa_f1", "gpt_annotator"]), default="mlqa_f1")
@click.option("--metric", type=click.Choice(["squad", "mlqa"]), default="mlqa")
@click.option("--gateway", type=click.Path(exists=True), default=None, help="Live gateway config YAML.")
@click.option("--seed", type=int, default=0)
@click.option("--retrieval/--no-retrieval", default=True)
@click.option("--shots", type=int, default=0)
def trials(records_path, out, reward_mode, metric, gateway, seed, retrieval, shots):
    """Precompute the record x arm trial matrix (resumable)."""
    records = corpus.load_records(records_path)
    deps = _deps(gateway, seed, retrieval, shots)
    if reward_mode == "gpt_annotator":
        scorer = runner.make_annotator_scorer(judge.JudgeDeps(deps.completion))
        matrix = TrialMatrix.load(out) if Path(out).exists() else TrialMatrix()
        for record in records:
            todo = [arm for arm in ARM_SPACE if not matrix.has(record.id, arm)]
            if not todo:
                continue
            arm_trials = [runner.run_arm(arm, record, deps) for arm in todo]
            for arm, trial, score in zip(todo, arm_trials, scorer(arm_trials, record)):
                matrix.add(record.id, arm, score, trial)
        matrix.save(out)
    else:
        reward_fn = runner.mlqa_reward if metric == "mlqa" else runner.squad_reward
        matrix, _ = runner.precompute_trials(records, ARM_SPACE, deps, reward_fn, out_path=out)
    click.echo(f"trial matrix: {len(matrix)} rows -> {out}")


@main.command()
@click.argument("trials_path", type=click.Path(exists=True))
@click.argument("records_path", type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(list(bandits.POLICIES)), default="thompson")
@click.option("--epsilon", type=float, default=0.2)
@click.option("--iterations", type=int, default=5000)
@click.option("--seed", type=int, default=0)
@click.option("-o", "--out-dir", type=click.Path(), required=True)
@click.option("--resume", type=click.Path(exists=True), default=None, help="Snapshot to resume from.")
def train(trials_path, records_path, policy, epsilon, iterations, seed, out_dir, resume):
    """Train a policy offline against a precomputed trial matrix."""
    records = corpus.load_records(records_path)
    matrix = TrialMatrix.load(trials_path)
    config = BanditConfig(policy=policy, epsilon=epsilon, iterations=iterations, rng_seed=seed)
    schema = ContextSchema(languages=tuple(sorted({r.language for r in records})))
    env = runner.ReplayEnvironment(matrix, records)
    snapshot = bandits.PolicySnapshot.load(resume) if resume else None
    result = bandits.run_training(env, config, schema=schema, snapshot=snapshot)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.snapshot.save(out / "snapshot.json")
    bandits.write_steps_jsonl(result.steps, out / "steps.jsonl")
    bandits.write_learning_curve_csv(result.steps, out / "curve.csv")
    click.echo(f"trained {len(result.steps)} steps -> {out}")


@main.command()
@click.argument("snapshot_path", type=click.Path(exists=True))
@click.argument("trials_path", type=click.Path(exists=True))
@click.argument("records_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--train-fraction", type=float, default=0.75)
def evaluate(snapshot_path, trials_path, records_path, seed, train_fraction):
    """Score a trained snapshot against best-static and random baselines."""
    records = corpus.load_records(records_path)
    matrix = TrialMatrix.load(trials_path)
    snapshot = bandits.PolicySnapshot.load(snapshot_path)
    spec = corpus.SplitSpec(train_fraction=train_fraction, seed=seed, repeats=1)
    train_records, test_records = corpus.split(records, spec, 0)
    import numpy as np

    learned = runner.evaluate_policy(snapshot, matrix, test_records, snapshot.arms)
    static_arm = runner.best_static(matrix, [r.id for r in train_records], snapshot.arms)
    static = matrix.mean_reward(static_arm, [r.id for r in test_records])
    rand = runner.evaluate_random(matrix, test_records, snapshot.arms, np.random.default_rng(seed))
    click.echo(f"learned      {learned:.4f}")
    click.echo(f"best_static  {static:.4f}  ({static_arm.name})")
    click.echo(f"random       {rand:.4f}")


@main.command()
@click.argument("records_path", type=click.Path(exists=True))
@click.argument("trials_path", type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(list(bandits.POLICIES)), default="contextual")
@click.option("--reward-mode", type=click.Choice(["mlqa_f1", "gpt_annotator"]), default="mlqa_f1")
@click.option("--epsilon", type=float, default=0.2)
@click.option("--iterations", type=int, default=5000)
@click.option("--repeats", type=int, default=3)
@click.option("--seed", type=int, default=0)
@click.option("-o", "--out", type=click.Path(), required=True)
def report(records_path, trials_path, policy, reward_mode, epsilon, iterations, repeats, seed, out):
    """Run the full repeated-split experiment and write report.json."""
    records = corpus.load_records(records_path)
    matrix = TrialMatrix.load(trials_path)
    config = ExperimentConfig(
        reward_mode=reward_mode,
        bandit=BanditConfig(policy=policy, epsilon=epsilon, iterations=iterations, rng_seed=seed),
        split_spec=corpus.SplitSpec(seed=seed, repeats=repeats),
    )
    experiment = runner.run_experiment(config, records, matrix)
    experiment.save(out)
    click.echo(json.dumps(experiment.overall, indent=2, sort_keys=True))


@main.command("annotate-export")
@click.argument("trials_path", type=click.Path(exists=True))
@click.argument("records_path", type=click.Path(exists=True))
@click.option("-o", "--out", type=click.Path(), required=True)
def annotate_export(trials_path, records_path, out):
    """Export blind annotation items (one JSONL line per item)."""
    items = _items_from_files(trials_path, records_path)
    with open(out, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.payload(), ensure_ascii=False, sort_keys=True) + "\n")
    click.echo(f"wrote {len(items)} annotation items to {out}")


@main.command()
@click.argument("records_path", type=click.Path(exists=True))
@click.option("--trials", "trials_path", type=click.Path(exists=True), default=None)
@click.option("--snapshot", "snapshot_path", type=click.Path(exists=True), default=None)
@click.option("--gateway", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--seed", type=int, default=0)
def serve(records_path, trials_path, snapshot_path, gateway, host, port, seed):
    """Run the answering + annotation HTTP service."""
    import uvicorn

    from .service import ServiceState, build_app

    deps = _deps(gateway, seed, retrieval_enabled=True, shots=0)
    annotation = None
    if trials_path:
        items = _items_from_files(trials_path, records_path)
        annotation = judge.AnnotationService(items)
    snapshot = bandits.PolicySnapshot.load(snapshot_path) if snapshot_path else None
    state = ServiceState(deps=deps, annotation=annotation, snapshot=snapshot)
    uvicorn.run(build_app(state), host=host, port=port)


def _items_from_files(trials_path: str, records_path: str) -> list[judge.AnnotationItem]:
    records = {r.id: r for r in corpus.load_records(records_path)}
    matrix = TrialMatrix.load(trials_path)
    by_record: dict[str, list[TrialRecord]] = {}
    for (record_id, arm_name), row in sorted(matrix.rows.items()):
        trial = TrialRecord(record_id=record_id, arm=Arm.parse(arm_name))
        trial.final_answer = row.get("final_answer", "")
        trial.na = row.get("na", False)
        by_record.setdefault(record_id, []).append(trial)
    return [
        judge.make_item(records[record_id], trials)
        for record_id, trials in sorted(by_record.items())
        if record_id in records
    ]


if __name__ == "__main__":
    main()
