"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 validation failure, 2 runtime failure. Failures
print a JSON error payload (``specs/contracts/error.schema.json``) on
stderr; summaries go to stdout; structured logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, NoReturn

import torch

from layoutprior.artifacts.config import RunConfig, load_run_config
from layoutprior.artifacts.metrics_log import JsonLinesMetricsLog, MetricsLogProtocol
from layoutprior.artifacts.models import (
    load_layout_model,
    load_reasoner,
    save_encoder,
    save_layout_model,
    save_reasoner,
    warm_start_encoder,
)
from layoutprior.artifacts.render import glyphs, render_layout, svg_document, text_grid
from layoutprior.data.coco import coco_label_vocab, coco_to_records, write_records
from layoutprior.data.layouts import (
    Rejection,
    canonical_order,
    derive_label_vocab,
    filter_and_normalize,
    load_layout_dataset,
    read_scene_records,
    write_scenes,
)
from layoutprior.data.mcqa import WINOGRANDE_TRAIN_SIZES, load_mcqa, write_csqa
from layoutprior.data.synthetic import synth_grammar_generate, synth_qa_generate
from layoutprior.data.types import LabelVocab, MCQuestion, Scene
from layoutprior.determinism import seed_everything
from layoutprior.errors import (
    ArtifactWriteError,
    ConfigError,
    ConfigMismatchError,
    GradientCheckError,
    InputNotFoundError,
    LayoutPriorError,
    UsageError,
    error_payload,
)
from layoutprior.layout.batching import make_batch
from layoutprior.layout.decoder import LayoutGenerator
from layoutprior.layout.generation import generate, relation_accuracy
from layoutprior.layout.gradcheck import GradCheckReport, grad_check
from layoutprior.layout.mlm_ablation import train_mlm_ablation
from layoutprior.layout.training import eval_layout, train_layout
from layoutprior.logging import configure_logging, get_logger, new_run_id, run_id_var
from layoutprior.reasoning.ablation import build_knowledge_encoder, run_ablation
from layoutprior.reasoning.features import EncoderVariant, KnowledgeEncoder, precompute_knowledge
from layoutprior.reasoning.head import MultipleChoiceReasoner
from layoutprior.reasoning.training import (
    evaluate,
    finetune_restarts,
    grid_search,
    qa_grad_check,
    qa_grid,
)
from layoutprior.settings import Settings
from layoutprior.textenc.tokenizer import Tokenizer, build_vocab

__all__ = ["build_parser", "main"]

logger = get_logger()

GRADCHECK_TOLERANCE = 1e-3


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors share exit code 1."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class _Context:
    config: RunConfig
    settings: Settings
    metrics_log: MetricsLogProtocol | None


Handler = Callable[[argparse.Namespace, _Context], int]


# ── shared helpers ───────────────────────────────────────────────


def _emit(summary: dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _existing(path: str | Path, what: str) -> Path:
    candidate = Path(path)
    if not candidate.exists():
        raise InputNotFoundError(f"{what} not found: {candidate}", path=str(candidate))
    return candidate


def _data_path(ctx: _Context, raw: str | None, what: str) -> Path:
    if raw is None:
        raise ConfigError(f"no {what} configured")
    return _existing(ctx.settings.resolve(raw), what)


def _label_vocab(ctx: _Context, scenes_path: Path) -> LabelVocab:
    labels = ctx.config.data.labels
    if labels is not None and ctx.settings.resolve(labels).exists():
        return LabelVocab.from_file(ctx.settings.resolve(labels))
    return derive_label_vocab(read_scene_records(scenes_path))


def _tokenizer(ctx: _Context) -> Tokenizer:
    return Tokenizer.from_file(_data_path(ctx, ctx.config.data.tokens, "token vocabulary"))


def _ordered(scene: Scene) -> Scene:
    return Scene(id=scene.id, caption=scene.caption, boxes=tuple(canonical_order(scene.boxes)))


def _prepared(scenes: Sequence[Scene], ctx: _Context) -> tuple[list[Scene], list[Rejection]]:
    kept: list[Scene] = []
    rejected: list[Rejection] = []
    data = ctx.config.data
    for scene in scenes:
        outcome = filter_and_normalize(scene, data.min_area_frac, data.max_objects)
        if isinstance(outcome, Rejection):
            rejected.append(outcome)
        else:
            kept.append(_ordered(outcome))
    return kept, rejected


def _layout_scenes(ctx: _Context, path: Path, vocab: LabelVocab) -> list[Scene]:
    kept, rejected = _prepared(load_layout_dataset(path, vocab), ctx)
    if rejected:
        logger.info("scenes_rejected", count=len(rejected), path=str(path))
    return kept


def _questions(ctx: _Context, raw: str | None, what: str) -> list[MCQuestion]:
    return load_mcqa(_data_path(ctx, raw, what), ctx.config.data.qa_style)


def _training_questions(ctx: _Context) -> list[MCQuestion]:
    data = ctx.config.data
    questions = _questions(ctx, data.qa_train_file(), "QA training file")
    if data.winogrande_size is not None:
        expected = WINOGRANDE_TRAIN_SIZES[data.winogrande_size]
        if len(questions) != expected:
            logger.warning(
                "winogrande_size_mismatch",
                size=data.winogrande_size,
                expected=expected,
                found=len(questions),
            )
    return questions


def _write_json(path: str | Path, payload: dict[str, Any]) -> None:
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write {out}: {exc.strerror}", path=str(out)) from exc


def _seeds(raw: str | None, ctx: _Context) -> list[int]:
    if raw is None:
        return list(ctx.config.reasoner.restarts)
    try:
        return [int(s) for s in raw.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"--seeds expects comma-separated integers, got {raw!r}") from exc


# ── data ─────────────────────────────────────────────────────────


def _cmd_prepare_data(args: argparse.Namespace, ctx: _Context) -> int:
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.coco_instances or args.coco_captions:
        if not (args.coco_instances and args.coco_captions):
            raise UsageError("--coco-instances and --coco-captions go together")
        instances = _existing(args.coco_instances, "COCO instances file")
        captions = _existing(args.coco_captions, "COCO captions file")
        source = out.with_suffix(".raw.jsonl")
        write_records(coco_to_records(instances, captions), source)
        vocab = coco_label_vocab(instances)
    else:
        if not args.input:
            raise UsageError("prepare-data needs --input or the COCO annotation pair")
        source = _existing(args.input, "scene file")
        if args.labels:
            vocab = LabelVocab.from_file(_existing(args.labels, "label vocabulary"))
        else:
            vocab = derive_label_vocab(read_scene_records(source))

    scenes = load_layout_dataset(source, vocab)
    kept, rejected = _prepared(scenes, ctx)
    for rejection in rejected:
        logger.debug(
            "scene_rejected",
            scene_id=rejection.scene_id,
            reason=rejection.reason,
            box_count=rejection.box_count,
        )
    write_scenes(kept, vocab, out)
    labels_out = Path(args.labels_out) if args.labels_out else out.with_name("labels.txt")
    vocab.to_file(labels_out)
    summary: dict[str, Any] = {
        "scenes_in": len(scenes),
        "kept": len(kept),
        "rejected": len(rejected),
        "rejections": {
            reason: sum(r.reason == reason for r in rejected)
            for reason in ("no_boxes", "too_many_objects")
        },
        "labels": str(labels_out),
        "output": str(out),
    }
    if args.tokens_out:
        data = ctx.config.data
        tokenizer = build_vocab(
            (s.caption for s in kept), min_freq=data.min_freq, max_size=data.max_vocab
        )
        tokenizer.to_file(args.tokens_out)
        summary["tokens"] = len(tokenizer)
    _emit(summary)
    return 0


def _cmd_synth(args: argparse.Namespace, ctx: _Context) -> int:
    synth = ctx.config.synth
    grammar = synth.grammar
    if args.seed is not None:
        grammar = grammar.model_copy(update={"seed": args.seed})
    n_scenes = args.n if args.n is not None else synth.scenes
    n_questions = args.questions if args.questions is not None else synth.questions

    vocab, scenes = synth_grammar_generate(grammar, n_scenes)
    questions = synth_qa_generate(grammar, scenes, n_questions)
    n_dev = max(1, round(len(questions) * synth.dev_fraction))
    train, dev = questions[:-n_dev], questions[-n_dev:]

    out = Path(args.out) if args.out else ctx.settings.resolve("synth")
    out.mkdir(parents=True, exist_ok=True)
    write_scenes(scenes, vocab, out / "scenes.jsonl")
    vocab.to_file(out / "labels.txt")
    write_csqa(train, out / "qa_train.jsonl")
    write_csqa(dev, out / "qa_dev.jsonl")
    texts = [s.caption for s in scenes] + [
        text for q in questions for text in (q.stem, *q.choices)
    ]
    tokenizer = build_vocab(texts, min_freq=1)
    tokenizer.to_file(out / "tokens.txt")
    _emit(
        {
            "out": str(out),
            "scenes": len(scenes),
            "qa_train": len(train),
            "qa_dev": len(dev),
            "labels": vocab.num_classes,
            "tokens": len(tokenizer),
            "grammar_seed": grammar.seed,
        }
    )
    return 0


# ── stage 1 ──────────────────────────────────────────────────────


def _new_layout_model(
    cfg: RunConfig, tokenizer: Tokenizer, vocab: LabelVocab
) -> LayoutGenerator:
    encoder_cfg = cfg.encoder.with_vocab(len(tokenizer)).model_copy(update={"seed": cfg.seed})
    layout_cfg = cfg.layout.with_classes(vocab.num_classes).model_copy(update={"seed": cfg.seed})
    return LayoutGenerator(encoder_cfg, layout_cfg)


def _cmd_train_layout(args: argparse.Namespace, ctx: _Context) -> int:
    cfg = ctx.config
    scenes_path = _data_path(ctx, args.scenes or cfg.data.scenes, "scene file")
    vocab = _label_vocab(ctx, scenes_path)
    tokenizer = _tokenizer(ctx)
    scenes = _layout_scenes(ctx, scenes_path, vocab)
    model = _new_layout_model(cfg, tokenizer, vocab)
    if args.init_encoder:
        manifest = warm_start_encoder(
            model, _existing(args.init_encoder, "encoder checkpoint"), tokenizer=tokenizer
        )
        logger.info("encoder_warm_started", source=args.init_encoder, kind=manifest.kind)
    train_cfg = cfg.layout_train.model_copy(update={"seed": cfg.seed})
    result = train_layout(model, scenes, tokenizer, train_cfg, metrics_log=ctx.metrics_log)
    save_layout_model(
        args.out,
        model,
        tokenizer=tokenizer,
        vocab=vocab,
        seed=cfg.seed,
        extra={"best_epoch": result.best_epoch},
    )
    best = [r for r in result.history if r["epoch"] == result.best_epoch]
    _emit({"checkpoint": str(args.out), "best_epoch": result.best_epoch, "best": best})
    return 0


def _cmd_eval_layout(args: argparse.Namespace, ctx: _Context) -> int:
    cfg = ctx.config
    loaded = load_layout_model(_existing(args.checkpoint, "layout checkpoint"))
    scenes_path = _data_path(ctx, args.scenes or cfg.data.scenes, "scene file")
    scenes = _layout_scenes(ctx, scenes_path, loaded.vocab)
    metrics = eval_layout(
        loaded.model,
        scenes,
        loaded.tokenizer,
        batch_size=cfg.layout_train.batch_size,
        max_len=cfg.layout_train.max_len,
    )
    summary: dict[str, Any] = {"scenes": len(scenes), **asdict(metrics)}
    if args.relations:
        captions = [s.caption for s in scenes[: args.relations]]
        summary["relation_accuracy"] = relation_accuracy(
            loaded.model, loaded.tokenizer, loaded.vocab, captions, max_steps=cfg.max_steps
        )
    _emit(summary)
    return 0


def _cmd_gradcheck(args: argparse.Namespace, ctx: _Context) -> int:
    cfg = ctx.config
    tokenizer = _tokenizer(ctx)
    if args.target == "layout":
        report = _layout_gradcheck(args, ctx, tokenizer)
    else:
        report = _qa_gradcheck(args, ctx, tokenizer)
    passed = report.max_rel_error < args.tolerance
    summary = {"target": args.target, **asdict(report), "passed": passed}
    _emit(summary)
    if not passed:
        raise GradientCheckError(
            f"max relative error {report.max_rel_error:.3g} >= {args.tolerance:g} "
            f"at {report.worst}",
            seed=cfg.seed,
            **asdict(report),
        )
    return 0


def _layout_gradcheck(
    args: argparse.Namespace, ctx: _Context, tokenizer: Tokenizer
) -> GradCheckReport:
    cfg = ctx.config
    scenes_path = _data_path(ctx, cfg.data.scenes, "scene file")
    vocab = _label_vocab(ctx, scenes_path)
    scenes = _layout_scenes(ctx, scenes_path, vocab)[: args.examples]
    model = _new_layout_model(cfg, tokenizer, vocab)
    batch = make_batch(
        scenes,
        tokenizer,
        num_classes=vocab.num_classes,
        raster_size=model.config.raster,
        max_len=model.text_encoder.config.max_len,
        dtype=torch.float64,
    )
    return grad_check(
        model, batch, args.part, epsilon=args.epsilon, samples=args.samples, seed=cfg.seed
    )


def _qa_gradcheck(
    args: argparse.Namespace, ctx: _Context, tokenizer: Tokenizer
) -> GradCheckReport:
    cfg = ctx.config
    questions = _training_questions(ctx)[: args.examples]
    knowledge = build_knowledge_encoder(
        EncoderVariant.FROZEN_INIT, cfg.encoder, tokenizer=tokenizer, seed=cfg.seed
    )
    if knowledge is None:
        raise ConfigError("the QA gradient check needs a knowledge encoder")
    max_len, prefix = cfg.qa_train.max_len, cfg.qa_train.prefix
    cache = precompute_knowledge(knowledge, questions, max_len=max_len, prefix=prefix)
    model = MultipleChoiceReasoner(
        cfg.reasoner.lm.with_vocab(len(tokenizer)), knowledge.dim, seed=cfg.seed
    )
    return qa_grad_check(
        model,
        questions,
        tokenizer,
        cache,
        max_len=max_len,
        prefix=prefix,
        epsilon=args.epsilon,
        samples=args.samples,
        seed=cfg.seed,
    )


def _cmd_train_mlm(args: argparse.Namespace, ctx: _Context) -> int:
    cfg = ctx.config
    source = _data_path(ctx, cfg.data.captions_for_mlm or cfg.data.scenes, "caption corpus")
    captions = [c for record in read_scene_records(source) for c in record.all_captions()]
    tokenizer = _tokenizer(ctx)
    encoder_cfg = cfg.encoder.model_copy(update={"seed": cfg.seed})
    mlm_cfg = cfg.mlm.model_copy(update={"seed": cfg.seed})
    result = train_mlm_ablation(
        captions, tokenizer, encoder_cfg, mlm_cfg, metrics_log=ctx.metrics_log
    )
    save_encoder(
        args.out, result.encoder, tokenizer=tokenizer, seed=cfg.seed, source="caption-mlm"
    )
    final = result.history[-1] if result.history else {}
    _emit(
        {
            "checkpoint": str(args.out),
            "captions": len(captions),
            "initial_loss": result.initial_loss,
            "final": final,
        }
    )
    return 0


# ── stage 2 ──────────────────────────────────────────────────────


def _cmd_finetune_qa(args: argparse.Namespace, ctx: _Context) -> int:
    cfg = ctx.config
    variant = EncoderVariant.parse(args.variant)
    tokenizer = _tokenizer(ctx)
    knowledge = build_knowledge_encoder(
        variant,
        cfg.encoder,
        checkpoint=_existing(args.encoder, "encoder checkpoint") if args.encoder else None,
        tokenizer=tokenizer,
        seed=cfg.seed,
    )
    train = _training_questions(ctx)
    dev = _questions(ctx, cfg.data.qa_dev, "QA dev file")
    seeds = _seeds(args.seeds, ctx)
    qa_cfg = cfg.qa_train
    report: dict[str, Any] = {}
    if args.grid:
        grid = qa_grid(
            qa_cfg, cfg.reasoner.grid_lr, cfg.reasoner.grid_epochs, cfg.reasoner.grid_batch
        )
        points, best_i, best = grid_search(
            grid,
            seeds,
            train,
            dev,
            tokenizer,
            cfg.reasoner.lm,
            knowledge,
            metrics_log=ctx.metrics_log,
        )
        qa_cfg, summary = grid[best_i], points[best_i].summary
        report["grid"] = [asdict(p) for p in points]
    else:
        summary, best = finetune_restarts(
            seeds,
            train,
            dev,
            tokenizer,
            cfg.reasoner.lm,
            knowledge,
            qa_cfg,
            metrics_log=ctx.metrics_log,
        )
    save_reasoner(
        args.out,
        best.model,
        tokenizer=tokenizer,
        seed=summary.best_seed,
        variant=str(variant),
        knowledge_digest=best.knowledge_digest,
        extra={
            "best_epoch": best.best_epoch,
            "knowledge_seed": cfg.seed,
            "qa_train": qa_cfg.model_dump(),
        },
    )
    _emit(
        {"checkpoint": str(args.out), "variant": str(variant), **asdict(summary), **report}
    )
    return 0


def _cmd_eval_qa(args: argparse.Namespace, ctx: _Context) -> int:
    cfg = ctx.config
    loaded = load_reasoner(_existing(args.checkpoint, "reasoner checkpoint"))
    variant = EncoderVariant.parse(loaded.variant)
    knowledge_seed = int(loaded.manifest.config.get("knowledge_seed", cfg.seed))
    knowledge = build_knowledge_encoder(
        variant,
        cfg.encoder,
        checkpoint=_existing(args.encoder, "encoder checkpoint") if args.encoder else None,
        tokenizer=loaded.tokenizer,
        seed=knowledge_seed,
    )
    if knowledge is not None and knowledge.digest() != loaded.knowledge_digest:
        raise ConfigMismatchError(
            f"{variant} encoder differs from the one the reasoner was trained with",
            expected=loaded.knowledge_digest,
            found=knowledge.digest(),
        )
    questions = _questions(ctx, args.questions or cfg.data.qa_dev, "QA file")
    # inputs are formatted the way the weights were trained
    trained = loaded.qa_train or cfg.qa_train
    prefix, max_len = trained.prefix, trained.max_len
    cache = (
        precompute_knowledge(knowledge, questions, max_len=max_len, prefix=prefix)
        if knowledge is not None
        else None
    )
    result = evaluate(
        loaded.model, questions, loaded.tokenizer, cache, max_len=max_len, prefix=prefix
    )
    if args.predictions:
        out = Path(args.predictions)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            with out.open("w", encoding="utf-8") as fh:
                for prediction in result.predictions:
                    fh.write(json.dumps(prediction.as_record(), sort_keys=True) + "\n")
        except OSError as exc:
            raise ArtifactWriteError(f"cannot write {out}: {exc.strerror}", path=str(out)) from exc
    _emit(
        {
            "variant": str(variant),
            "questions": len(questions),
            "accuracy": result.accuracy,
            "loss": result.loss,
            "max_len": max_len,
            "prefix": prefix,
        }
    )
    return 0


def _cmd_ablation(args: argparse.Namespace, ctx: _Context) -> int:
    cfg = ctx.config
    tokenizer = _tokenizer(ctx)
    checkpoints = {
        EncoderVariant.VIBERT: args.vibert,
        EncoderVariant.CAPTION_MLM: args.caption_mlm,
    }
    variants = [EncoderVariant.parse(v) for v in args.variants.split(",") if v.strip()]
    if not variants:
        raise UsageError("--variants names no variant")
    knowledge: dict[EncoderVariant, KnowledgeEncoder | None] = {}
    for variant in variants:
        raw = checkpoints.get(variant)
        knowledge[variant] = build_knowledge_encoder(
            variant,
            cfg.encoder,
            checkpoint=_existing(raw, f"{variant} checkpoint") if raw else None,
            tokenizer=tokenizer,
            seed=cfg.seed,
        )
    train = _training_questions(ctx)
    dev = _questions(ctx, cfg.data.qa_dev, "QA dev file")
    table = run_ablation(
        train,
        dev,
        tokenizer,
        cfg.reasoner.lm,
        knowledge,
        cfg.qa_train,
        _seeds(args.seeds, ctx),
        metrics_log=ctx.metrics_log,
    )
    payload = table.to_json()
    if args.out:
        _write_json(args.out, payload)
    _emit(payload)
    return 0


def _cmd_render(args: argparse.Namespace, ctx: _Context) -> int:
    loaded = load_layout_model(_existing(args.checkpoint, "layout checkpoint"))
    text = args.text
    if args.question:
        matches = [
            q for q in _questions(ctx, args.questions_file, "QA file") if q.id == args.question
        ]
        if not matches:
            raise UsageError(f"question {args.question!r} not found")
        q = matches[0]
        if args.choice is not None and not 0 <= args.choice < q.num_choices:
            raise UsageError(
                f"--choice {args.choice} out of range; question {q.id!r} has "
                f"{q.num_choices} choices",
                choice=args.choice,
            )
        text = q.stem if args.choice is None else f"{q.stem} {q.choices[args.choice]}"
    if not text:
        raise UsageError("render needs --text or --question")
    layout = generate(loaded.model, loaded.tokenizer, text, max_steps=ctx.config.max_steps)
    if args.out:
        render_layout(
            layout.boxes, loaded.vocab, args.out, args.format, grid=args.grid, title=text
        )
    elif args.format == "text-grid":
        sys.stdout.write(text_grid(layout.boxes, loaded.vocab, args.grid, args.grid))
    else:
        sys.stdout.write(svg_document(layout.boxes, loaded.vocab, title=text))
    table = glyphs(loaded.vocab)
    logger.info(
        "layout_rendered",
        boxes=len(layout.boxes),
        terminated=layout.terminated,
        out=args.out,
        legend={table[b.label]: loaded.vocab.name(b.label) for b in layout.boxes},
    )
    return 0


# ── parser ───────────────────────────────────────────────────────


def _common() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--profile", choices=["desk", "paper"])
    common.add_argument("--seed", type=int)
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted override, e.g. layout.raster=64 (repeatable)",
    )
    common.add_argument("--metrics", help="JSON Lines metrics log (truncated on start)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="layoutprior", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name: str, handler: Handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=handler)
        return p

    p = command("prepare-data", _cmd_prepare_data, "filter, normalize and order scenes")
    p.add_argument("--input", help="scene JSON Lines file")
    p.add_argument("--labels", help="label vocabulary; derived from the scenes when omitted")
    p.add_argument("--coco-instances")
    p.add_argument("--coco-captions")
    p.add_argument("--output", required=True)
    p.add_argument("--labels-out")
    p.add_argument("--tokens-out", help="also build a word vocabulary from the kept captions")

    p = command("synth", _cmd_synth, "emit the grammar scene corpus and its QA corpus")
    p.add_argument("--n", type=int, help="number of scenes")
    p.add_argument("--questions", type=int)
    p.add_argument("--out", help="output directory (default: <data_root>/synth)")

    p = command("train-layout", _cmd_train_layout, "train the caption-to-layout generator")
    p.add_argument("--scenes")
    p.add_argument("--out", required=True, help="layout checkpoint path")
    p.add_argument(
        "--init-encoder", help="start the text encoder from a layout or encoder checkpoint"
    )

    p = command("eval-layout", _cmd_eval_layout, "teacher-forced layout metrics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenes")
    p.add_argument(
        "--relations", type=int, default=0, help="also check relations on the first N captions"
    )

    p = command("gradcheck", _cmd_gradcheck, "finite-difference gradient verification")
    p.add_argument("--target", choices=["layout", "qa"], default="layout")
    p.add_argument(
        "--part", choices=["encoder", "convgru", "label_head", "box_head", "full"], default="full"
    )
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--examples", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)

    p = command("train-mlm", _cmd_train_mlm, "masked-LM encoder on captions only")
    p.add_argument("--out", required=True, help="encoder checkpoint path")

    variants = [v.value for v in EncoderVariant]
    p = command("finetune-qa", _cmd_finetune_qa, "fine-tune the multiple-choice reasoner")
    p.add_argument("--variant", choices=variants, default="vibert")
    p.add_argument("--encoder", help="layout or encoder checkpoint for the variant")
    p.add_argument("--seeds", help="comma-separated restart seeds")
    p.add_argument(
        "--grid", action="store_true", help="search reasoner.grid_lr x grid_epochs x grid_batch"
    )
    p.add_argument("--out", required=True, help="reasoner checkpoint path")

    p = command("eval-qa", _cmd_eval_qa, "score a QA file with a fine-tuned reasoner")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--encoder")
    p.add_argument("--questions")
    p.add_argument("--predictions", help="write one prediction per line")

    p = command("ablation", _cmd_ablation, "compare knowledge-encoder variants")
    p.add_argument("--variants", default="none,vibert,frozen-init,caption-mlm")
    p.add_argument("--vibert", help="layout checkpoint")
    p.add_argument("--caption-mlm", help="encoder checkpoint")
    p.add_argument("--seeds")
    p.add_argument("--out", help="ablation table JSON")

    p = command("render", _cmd_render, "generate and draw a layout for a text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text")
    p.add_argument("--question", help="question id in --questions-file")
    p.add_argument("--questions-file")
    p.add_argument("--choice", type=int)
    p.add_argument("--format", choices=["svg", "text-grid"], default="svg")
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--out")
    return parser


def _run(argv: Sequence[str] | None) -> int:
    args = build_parser().parse_args(argv)
    config = load_run_config(
        args.config, profile=args.profile, overrides=args.overrides, seed=args.seed
    )
    seed_everything(config.seed, serial=config.serial)
    metrics_log = JsonLinesMetricsLog(args.metrics) if args.metrics else None
    ctx = _Context(config=config, settings=Settings(), metrics_log=metrics_log)
    logger.info("command_start", command=args.command, profile=config.profile, seed=config.seed)
    handler: Handler = args.handler
    code = handler(args, ctx)
    logger.info("command_done", command=args.command)
    return code


def _report(exc: LayoutPriorError) -> int:
    payload = {**error_payload(exc), "run_id": run_id_var.get()}
    logger.error("command_failed", error_code=exc.error_code, message=exc.message)
    sys.stderr.write(json.dumps(payload, sort_keys=True, default=str) + "\n")
    return exc.exit_code


def main(argv: Sequence[str] | None = None) -> int:
    settings = Settings()
    configure_logging(json_output=settings.log_json, level=settings.log_level)
    new_run_id()
    try:
        return _run(argv)
    except LayoutPriorError as exc:
        return _report(exc)
    except Exception as exc:
        logger.exception("command_crashed")
        return _report(LayoutPriorError(f"internal error: {type(exc).__name__}"))


if __name__ == "__main__":
    raise SystemExit(main())
