"""Fine-tuning and evaluation of the multiple-choice reasoner."""

from __future__ import annotations

import copy
import itertools
import math
import random
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field
from torch import nn

from layoutprior.artifacts.metrics_log import MetricsLogProtocol
from layoutprior.data.types import MCQuestion
from layoutprior.errors import FrozenEncoderTouchedError, TrainingDivergedError
from layoutprior.layout.gradcheck import GradCheckReport, max_relative_error
from layoutprior.logging import get_logger
from layoutprior.reasoning.features import KnowledgeCache, KnowledgeEncoder, precompute_knowledge
from layoutprior.reasoning.formatting import encode_questions, uniform_arity
from layoutprior.reasoning.head import MultipleChoiceReasoner, choice_probabilities
from layoutprior.textenc.encoder import EncoderConfig
from layoutprior.textenc.tokenizer import Tokenizer

__all__ = [
    "QATrainConfig",
    "Prediction",
    "QAEvaluation",
    "FinetuneResult",
    "RestartSummary",
    "qa_loss",
    "score_questions",
    "predict",
    "evaluate",
    "make_qa_optimizer",
    "warmup_linear",
    "finetune",
    "finetune_restarts",
    "GridPoint",
    "qa_grid",
    "grid_search",
    "qa_grad_check",
]

logger = get_logger()


class QATrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(default=2e-5, gt=0)
    batch_size: int = Field(default=16, ge=1)
    epochs: int = Field(default=5, ge=1)
    warmup: float = Field(default=0.1, ge=0, lt=1)
    weight_decay: float = Field(default=0.01, ge=0)
    max_len: int = Field(default=128, ge=8)
    prefix: bool | None = None
    seed: int = 0


@dataclass(frozen=True)
class Prediction:
    id: str
    scores: list[float]
    pred: int
    gold: int | None

    def as_record(self) -> dict[str, object]:
        return {"id": self.id, "scores": self.scores, "pred": self.pred, "gold": self.gold}


@dataclass(frozen=True)
class QAEvaluation:
    accuracy: float | None
    predictions: list[Prediction]
    loss: float | None = None


@dataclass
class FinetuneResult:
    model: MultipleChoiceReasoner
    best_dev_accuracy: float
    best_epoch: int
    knowledge_digest: str | None
    history: list[dict[str, object]] = field(default_factory=list)


@dataclass(frozen=True)
class RestartSummary:
    seeds: list[int]
    accuracies: list[float]
    best_seed: int
    best: float
    mean: float
    stddev: float


# ── scoring ──────────────────────────────────────────────────────


def qa_loss(scores: torch.Tensor, gold: Sequence[int | None]) -> torch.Tensor:
    """Mean over questions of -log p(a* | q); scores (Q, n)."""
    if any(g is None for g in gold):
        raise ValueError("qa_loss needs a gold answer for every question")
    if len(gold) != scores.shape[0]:
        raise ValueError("one gold index per question is required")
    target = torch.tensor(list(gold), dtype=torch.long)
    return F.cross_entropy(scores, target)


def score_questions(
    model: MultipleChoiceReasoner,
    questions: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    cache: KnowledgeCache | None,
    *,
    max_len: int = 128,
    prefix: bool | None = None,
) -> torch.Tensor:
    """Scores (Q, n) for one batch of equal-arity questions."""
    n = uniform_arity(questions)
    max_len = min(max_len, model.lm.config.max_len)
    pairs = encode_questions(questions, tokenizer, max_len=max_len, prefix=prefix)
    knowledge = cache.gather(questions) if cache is not None else None
    if knowledge is not None:
        knowledge = knowledge.to(next(model.parameters()).dtype)
    return model(pairs, knowledge, n)  # type: ignore[no-any-return]


@torch.no_grad()
def predict(
    model: MultipleChoiceReasoner,
    questions: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    cache: KnowledgeCache | None,
    *,
    max_len: int = 128,
    prefix: bool | None = None,
    batch_size: int = 32,
) -> torch.Tensor:
    """Probabilities over each question's choices, (Q, n)."""
    return choice_probabilities(
        _all_scores(model, questions, tokenizer, cache, max_len, prefix, batch_size)
    )


def _all_scores(
    model: MultipleChoiceReasoner,
    questions: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    cache: KnowledgeCache | None,
    max_len: int,
    prefix: bool | None,
    batch_size: int,
) -> torch.Tensor:
    was_training = model.training
    model.eval()
    chunks = [
        score_questions(
            model,
            questions[i : i + batch_size],
            tokenizer,
            cache,
            max_len=max_len,
            prefix=prefix,
        )
        for i in range(0, len(questions), batch_size)
    ]
    model.train(was_training)
    return torch.cat(chunks, dim=0)


@torch.no_grad()
def evaluate(
    model: MultipleChoiceReasoner,
    questions: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    cache: KnowledgeCache | None,
    *,
    max_len: int = 128,
    prefix: bool | None = None,
    batch_size: int = 32,
) -> QAEvaluation:
    """Argmax accuracy; torch.argmax picks the lowest index among ties."""
    if not questions:
        raise ValueError("cannot evaluate zero questions")
    scores = _all_scores(model, questions, tokenizer, cache, max_len, prefix, batch_size)
    preds = scores.argmax(dim=-1).tolist()
    predictions = [
        Prediction(id=q.id, scores=[float(s) for s in row], pred=int(p), gold=q.gold)
        for q, row, p in zip(questions, scores, preds, strict=True)
    ]
    labelled = [(p.pred, p.gold) for p in predictions if p.gold is not None]
    accuracy = sum(p == g for p, g in labelled) / len(labelled) if labelled else None
    loss = None
    if len(labelled) == len(predictions):
        loss = float(qa_loss(scores, [q.gold for q in questions]))
    return QAEvaluation(accuracy=accuracy, predictions=predictions, loss=loss)


# ── optimisation ─────────────────────────────────────────────────


def make_qa_optimizer(model: nn.Module, config: QATrainConfig) -> torch.optim.AdamW:
    """Decoupled weight decay on Linear weights and M; none on biases, norms, embeddings."""
    decay, no_decay = [], []
    for module in model.modules():
        for name, param in module.named_parameters(recurse=False):
            if name == "bias" or isinstance(module, nn.LayerNorm | nn.Embedding):
                no_decay.append(param)
            else:
                decay.append(param)
    groups = [
        {"params": decay, "weight_decay": config.weight_decay},
        {"params": no_decay, "weight_decay": 0.0},
    ]
    return torch.optim.AdamW(groups, lr=config.lr)


def warmup_linear(total_steps: int, warmup: float) -> tuple[int, Callable[[int], float]]:
    """Linear rise over the first warmup fraction of steps, then linear decay to 0."""
    warm = int(math.ceil(warmup * total_steps))

    def factor(step: int) -> float:
        if step < warm:
            return (step + 1) / warm
        return max(0.0, (total_steps - step) / max(1, total_steps - warm))

    return warm, factor


def finetune(
    train: Sequence[MCQuestion],
    dev: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    lm_config: EncoderConfig,
    knowledge: KnowledgeEncoder | None,
    config: QATrainConfig,
    *,
    metrics_log: MetricsLogProtocol | None = None,
    feature_caches: tuple[KnowledgeCache, KnowledgeCache] | None = None,
) -> FinetuneResult:
    """Train the LM, M and h; the knowledge encoder must come out bit-identical.

    Returns the weights of the epoch with the best dev accuracy. *feature_caches*
    (train, dev) are filled on first use and reused by later calls.
    """
    if not train:
        raise ValueError("no training questions")
    if not dev:
        raise ValueError("no dev questions")
    if any(q.gold is None for q in (*train, *dev)):
        raise ValueError("training and dev questions need gold answers")
    torch.manual_seed(config.seed)

    digest_before = knowledge.digest() if knowledge is not None else None
    train_cache = dev_cache = None
    if knowledge is not None:
        train_cache, dev_cache = feature_caches or (KnowledgeCache(), KnowledgeCache())
        precompute_knowledge(
            knowledge, train, max_len=config.max_len, prefix=config.prefix, cache=train_cache
        )
        precompute_knowledge(
            knowledge, dev, max_len=config.max_len, prefix=config.prefix, cache=dev_cache
        )

    model = MultipleChoiceReasoner(
        lm_config.with_vocab(len(tokenizer)).model_copy(update={"seed": config.seed}),
        knowledge.dim if knowledge is not None else None,
        seed=config.seed,
    )
    optimizer = make_qa_optimizer(model, config)
    steps_per_epoch = math.ceil(len(train) / config.batch_size)
    _, factor = warmup_linear(steps_per_epoch * config.epochs, config.warmup)
    scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, factor)

    best_acc, best_epoch = -1.0, 0
    best_state = copy.deepcopy(model.state_dict())
    history: list[dict[str, object]] = []
    order = list(range(len(train)))
    for epoch in range(1, config.epochs + 1):
        model.train()
        random.Random(config.seed * 1000 + epoch).shuffle(order)  # noqa: S311
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = [train[i] for i in order[start : start + config.batch_size]]
            scores = score_questions(
                model, chunk, tokenizer, train_cache, max_len=config.max_len, prefix=config.prefix
            )
            loss = qa_loss(scores, [q.gold for q in chunk])
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite QA loss at epoch {epoch}",
                    epoch=epoch,
                    question_ids=[q.id for q in chunk],
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            loss_sum += float(loss) * len(chunk)

        result = evaluate(
            model, dev, tokenizer, dev_cache, max_len=config.max_len, prefix=config.prefix
        )
        dev_acc = float(result.accuracy or 0.0)
        records: list[dict[str, object]] = [
            {"epoch": epoch, "split": "train", "seed": config.seed, "loss": loss_sum / len(train)},
            {
                "epoch": epoch,
                "split": "dev",
                "seed": config.seed,
                "accuracy": dev_acc,
                "loss": result.loss,
            },
        ]
        for record in records:
            history.append(record)
            if metrics_log is not None:
                metrics_log.append(record)
        logger.info(
            "qa_epoch", epoch=epoch, train_loss=loss_sum / len(train), dev_accuracy=dev_acc
        )
        if dev_acc > best_acc:
            best_acc, best_epoch = dev_acc, epoch
            best_state = copy.deepcopy(model.state_dict())

    if knowledge is not None:
        digest_after = knowledge.digest()
        if digest_after != digest_before:
            raise FrozenEncoderTouchedError(
                f"{knowledge.variant} encoder changed during fine-tuning",
                before=digest_before,
                after=digest_after,
            )
    model.load_state_dict(best_state)
    model.eval()
    return FinetuneResult(
        model=model,
        best_dev_accuracy=best_acc,
        best_epoch=best_epoch,
        knowledge_digest=digest_before,
        history=history,
    )


def finetune_restarts(
    seeds: Sequence[int],
    train: Sequence[MCQuestion],
    dev: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    lm_config: EncoderConfig,
    knowledge: KnowledgeEncoder | None,
    config: QATrainConfig,
    *,
    metrics_log: MetricsLogProtocol | None = None,
    feature_caches: tuple[KnowledgeCache, KnowledgeCache] | None = None,
) -> tuple[RestartSummary, FinetuneResult]:
    """One fine-tuning run per seed; returns the summary and the best run.

    stddev is the sample standard deviation (0 for a single seed).
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    runs: list[FinetuneResult] = []
    caches = feature_caches or (KnowledgeCache(), KnowledgeCache())
    for seed in seeds:
        run_config = config.model_copy(update={"seed": seed})
        runs.append(
            finetune(
                train,
                dev,
                tokenizer,
                lm_config,
                knowledge,
                run_config,
                metrics_log=metrics_log,
                feature_caches=caches,
            )
        )
    accs = np.array([r.best_dev_accuracy for r in runs], dtype=np.float64)
    best_i = int(accs.argmax())
    summary = RestartSummary(
        seeds=list(seeds),
        accuracies=accs.tolist(),
        best_seed=int(seeds[best_i]),
        best=float(accs[best_i]),
        mean=float(accs.mean()),
        stddev=float(accs.std(ddof=1)) if len(accs) > 1 else 0.0,
    )
    logger.info("qa_restarts", seeds=list(seeds), mean=summary.mean, stddev=summary.stddev)
    return summary, runs[best_i]


# ── grid search ──────────────────────────────────────────────────


@dataclass(frozen=True)
class GridPoint:
    lr: float
    epochs: int
    batch_size: int
    summary: RestartSummary


def qa_grid(
    base: QATrainConfig,
    lrs: Sequence[float],
    epochs: Sequence[int],
    batch_sizes: Sequence[int],
) -> list[QATrainConfig]:
    """Cartesian product in (lr, epochs, batch) order; other fields come from *base*."""
    return [
        base.model_copy(update={"lr": lr, "epochs": n, "batch_size": b})
        for lr, n, b in itertools.product(lrs, epochs, batch_sizes)
    ]


def grid_search(
    configs: Sequence[QATrainConfig],
    seeds: Sequence[int],
    train: Sequence[MCQuestion],
    dev: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    lm_config: EncoderConfig,
    knowledge: KnowledgeEncoder | None,
    *,
    metrics_log: MetricsLogProtocol | None = None,
) -> tuple[list[GridPoint], int, FinetuneResult]:
    """Restarts at every grid point; returns all points, the winner's index and its best run.

    The winner has the best single-run dev accuracy; ties keep the earlier point.
    """
    if not configs:
        raise ValueError("the grid is empty")
    caches = (KnowledgeCache(), KnowledgeCache())
    points: list[GridPoint] = []
    best_i = 0
    best_run: FinetuneResult | None = None
    for config in configs:
        summary, run = finetune_restarts(
            seeds,
            train,
            dev,
            tokenizer,
            lm_config,
            knowledge,
            config,
            metrics_log=metrics_log,
            feature_caches=caches,
        )
        points.append(GridPoint(config.lr, config.epochs, config.batch_size, summary))
        # only the leading model is kept alive
        if best_run is None or summary.best > best_run.best_dev_accuracy:
            best_i, best_run = len(points) - 1, run
    assert best_run is not None
    logger.info("qa_grid", points=len(points), best=best_i, accuracy=best_run.best_dev_accuracy)
    return points, best_i, best_run


def qa_grad_check(
    model: MultipleChoiceReasoner,
    questions: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    cache: KnowledgeCache | None,
    *,
    max_len: int = 128,
    prefix: bool | None = None,
    epsilon: float = 1e-5,
    samples: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Finite-difference check of qa_loss through the head and the LM, at 64-bit."""
    model.double().eval()
    gold = [q.gold for q in questions]

    def loss_fn() -> torch.Tensor:
        scores = score_questions(
            model, questions, tokenizer, cache, max_len=max_len, prefix=prefix
        )
        return qa_loss(scores, gold)

    report = max_relative_error(
        loss_fn, list(model.named_parameters()), epsilon=epsilon, samples=samples, seed=seed
    )
    return GradCheckReport(
        part="reasoner",
        max_rel_error=report.max_rel_error,
        checked=report.checked,
        worst=report.worst,
    )
