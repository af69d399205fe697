"""Command-line entry point.

Subcommands: segment, ask, gen-dataset, calibrate, evaluate, sensitivity,
serve, plus make-store to build a synthetic demo store.  Everything runs
offline by default; network access happens only when an --llm-endpoint or
--service URL is given explicitly.

Exit codes: 0 success, 2 usage, 3 invalid data or plan, 4 backend or
execution failure, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import figures
from .calib import AnnotationStore, recompute_constants
from .errors import (
    CompletionError,
    DomainError,
    ExecutionError,
    PlanParseError,
    PlanValidationError,
    RasterQAError,
    StoreError,
    UnparseableGenerationError,
)
from .fixtures import build_fixture_corpus, build_showcase_store, showcase_record
from .llm import CompletionConfig, PromptSpec, build_prompt, extract_plan, request_completion
from .plans import execute_plan, parse_plan, validate_plan
from .questions import QuestionRecord, build_mock_table, emit_dataset, generate_questions, load_dataset
from .scoring import (
    Prediction,
    aggregate,
    emit_report,
    emit_sensitivity,
    load_predictions,
    range_sensitivity,
    save_predictions,
)
from .service import ServiceClient, make_server, serve_forever
from .store import BackendStore

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BACKEND = 4
EXIT_IO = 5


def _open_backend(args) -> tuple[object, object]:
    """Returns (backend, store-or-None) per the --store/--service flags."""
    if getattr(args, "service", None):
        return ServiceClient(args.service), None
    store = BackendStore(args.store)
    return store, store


def _plan_for(record: QuestionRecord, args, store) -> object:
    """Resolve one plan per the configured source (file, mock, or live)."""
    if getattr(args, "plan", None):
        return parse_plan(Path(args.plan).read_text())
    if getattr(args, "mock_table", None):
        mock = json.loads(Path(args.mock_table).read_text())
        cfg = CompletionConfig(mock=mock)
    else:
        cfg = CompletionConfig(
            endpoint=args.llm_endpoint,
            model=args.model,
            temperature=args.temperature,
        )
    topics = store.topics if store is not None else args.topics.split(",")
    prompt = build_prompt(
        PromptSpec(question=record.question, gsd=record.gsd, topics=topics)
    )
    raw = request_completion(prompt, cfg, key=record.id)
    return extract_plan(raw)


def _predict_one(record: QuestionRecord, args, backend, store) -> Prediction:
    try:
        plan = _plan_for(record, args, store)
    except (UnparseableGenerationError, PlanParseError) as exc:
        return Prediction(record.id, None, "unparseable", trace=str(exc))
    try:
        if store is not None:
            topics = set(store.topics) | set(store.available_classes(record.image))
            issues = validate_plan(plan, sorted(topics))
            if issues:
                raise PlanValidationError(issues)
        answer = execute_plan(plan, record.image, record.gsd, backend)
    except (ExecutionError, PlanValidationError, RasterQAError) as exc:
        return Prediction(record.id, None, "execution_error", trace=str(exc))
    value = answer.value
    if isinstance(value, bool):
        value = str(value)
    return Prediction(record.id, value, "answered", trace="\n".join(answer.trace))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_segment(args) -> int:
    backend, _ = _open_backend(args)
    topics = [t.strip() for t in args.topics.split(",") if t.strip()]
    result = backend.segment(args.image, topics, args.min_area_pixels, args.gsd)
    for topic in topics:
        n = sum(1 for s in result.shapes if s.class_type == topic)
        print(f"Initial {topic} shapes: {n}")
    print(f"image: {result.image_width}x{result.image_height}, total_pixels={result.total_pixels}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=2) + "\n")
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_ask(args) -> int:
    backend, store = _open_backend(args)
    if args.dataset and args.question_id:
        records = {r.id: r for r in load_dataset(args.dataset)}
        if args.question_id not in records:
            raise DomainError(f"question {args.question_id!r} not in dataset")
        record = records[args.question_id]
    else:
        if not (args.question and args.image):
            raise DomainError("ask needs --dataset/--question-id or --question and --image")
        gsd = args.gsd if args.gsd else (store.gsd(args.image) if store else 1.0)
        record = QuestionRecord(
            id=args.question_id or "adhoc_0000",
            image=args.image,
            question=args.question,
            answer=0,
            type="count",
            tier=1,
            gsd=gsd,
            acceptable_range=(0, 0),
        )
    plan = _plan_for(record, args, store)
    answer = execute_plan(plan, record.image, record.gsd, backend)
    for line in answer.trace:
        print(line)
    print(f"answer: {answer.value}")
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    store = BackendStore(args.store)
    workers = args.workers or os.cpu_count() or 1
    records = generate_questions(store, size=args.size, seed=args.seed, workers=workers)
    out = Path(args.out)
    emit_dataset(records, out / "dataset.json")
    mocks = build_mock_table(records)
    (out / "mocks.json").write_text(json.dumps(mocks, indent=2, sort_keys=True) + "\n")
    by_type: dict[str, int] = {}
    for r in records:
        by_type[r.type] = by_type.get(r.type, 0) + 1
    zeros = sum(
        1 for r in records if not isinstance(r.answer, str) and float(r.answer) == 0.0
    )
    print(f"generated {len(records)} questions over {len(store.image_ids())} images")
    print(f"zero-valued answers: {zeros}")
    for t, n in sorted(by_type.items(), key=lambda kv: -kv[1]):
        print(f"  {t}: {n}")
    print(f"wrote {out / 'dataset.json'} and {out / 'mocks.json'}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    store = AnnotationStore(args.annotations)
    records = store.current()
    if not records:
        raise DomainError(f"no annotations in {args.annotations}")
    qtypes = {r.id: r.type for r in load_dataset(args.dataset)}
    consts = recompute_constants(records, qtypes)
    print(f"annotations: {len(records)}")
    print(f"mad_percentage: {consts.mad_percentage:.4f}")
    print(f"mad_proximity:  {consts.mad_proximity:.4f}")
    print(f"madc_count:     {consts.madc_count:.4f}")
    print(f"rel_area:       {consts.rel_area:.6f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(
            json.dumps(
                {
                    "mad_percentage": consts.mad_percentage,
                    "mad_proximity": consts.mad_proximity,
                    "madc_count": consts.madc_count,
                    "rel_area": consts.rel_area,
                },
                indent=2,
            )
            + "\n"
        )
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    questions = load_dataset(args.dataset)
    if args.predictions:
        predictions = load_predictions(args.predictions)
    else:
        backend, store = _open_backend(args)
        workers = args.workers or os.cpu_count() or 1
        with ThreadPoolExecutor(max_workers=workers) as pool:
            predictions = list(
                pool.map(lambda r: _predict_one(r, args, backend, store), questions)
            )
    table = aggregate(predictions, questions)
    out = Path(args.out)
    paths = emit_report(table, out)
    figures.render_report_figures(table, out)
    if not args.predictions:
        save_predictions(predictions, out / "predictions.jsonl")
    print(f"accuracy: {100 * table.overall.accuracy:.2f}% "
          f"({table.overall.correct}/{table.overall.total})")
    for t in sorted(table.tiers):
        cell = table.tiers[t]
        print(f"tier {t}: {100 * cell.accuracy:.2f}% ({cell.correct}/{cell.total})")
    print(f"wrote {paths['report']}, {paths['results']}, {paths['summary']}")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    questions = load_dataset(args.dataset)
    predictions = load_predictions(args.predictions)
    multipliers = [float(m) for m in args.multipliers.split(",")]
    points = range_sensitivity(predictions, questions, multipliers)
    out = Path(args.out)
    emit_sensitivity(points, out / "sensitivity.csv")
    figures.render_sensitivity_figure(points, out / "sensitivity.png")
    for p in points:
        print(f"x{p.multiplier:.2f}: accuracy {100 * p.accuracy:.2f}% "
              f"(delta {100 * p.delta:+.2f})")
    print(f"wrote {out / 'sensitivity.csv'} and {out / 'sensitivity.png'}")
    return EXIT_OK


def cmd_serve(args) -> int:
    store = BackendStore(args.store)
    annotations = AnnotationStore(args.annotations)
    dataset = load_dataset(args.dataset) if args.dataset else None
    server = make_server(store, annotations, dataset, args.host, args.port)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (store: {args.store})")
    serve_forever(server)
    return EXIT_OK


def cmd_make_store(args) -> int:
    out = Path(args.out)
    if args.showcase:
        build_showcase_store(out)
        record = showcase_record()
        emit_dataset([record], out / "dataset.json")
        mocks = build_mock_table([record])
        (out / "mocks.json").write_text(json.dumps(mocks, indent=2, sort_keys=True) + "\n")
        print(f"wrote showcase store, dataset.json and mocks.json under {out}")
    else:
        manifest = build_fixture_corpus(out, n_images=args.images, seed=args.seed)
        print(f"wrote synthetic store with {len(manifest['images'])} images under {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_backend_flags(p: argparse.ArgumentParser, need_store: bool = True):
    p.add_argument("--store", required=need_store, help="backend store directory")
    p.add_argument("--service", help="base URL of a running service to use instead")


def _add_plan_source_flags(p: argparse.ArgumentParser):
    p.add_argument("--plan", help="plan document file (skip the generator)")
    p.add_argument("--mock-table", help="canned generations JSON (question id -> plan text)")
    p.add_argument("--llm-endpoint", help="chat-completions endpoint URL")
    p.add_argument("--model", default="default", help="model name for live completions")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--topics", default="", help="topic list override when no store is given")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rasterqa",
        description="Quantitative spatial question answering over segmentation rasters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="run the segmentation backend for one image")
    _add_backend_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--topics", required=True, help="comma-separated topic list")
    p.add_argument("--min-area-pixels", type=int, default=0)
    p.add_argument("--gsd", type=float, default=None)
    p.add_argument("--out", help="write the SegmentationResult JSON here")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("ask", help="answer one question end to end, printing the trace")
    _add_backend_flags(p)
    _add_plan_source_flags(p)
    p.add_argument("--dataset", help="dataset file to pull the question from")
    p.add_argument("--question-id", help="dataset question id")
    p.add_argument("--question", help="free-form question text")
    p.add_argument("--image", help="image id for free-form questions")
    p.add_argument("--gsd", type=float, default=None)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("gen-dataset", help="generate a benchmark from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--size", type=int, default=120)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--workers", type=int, default=0, help="0 means machine parallelism")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("calibrate", help="recompute range constants from annotations")
    p.add_argument("--annotations", required=True, help="annotation log (JSONL)")
    p.add_argument("--dataset", required=True, help="dataset giving question types")
    p.add_argument("--out", help="write constants JSON here")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="score predictions or drive plans over a dataset")
    _add_backend_flags(p, need_store=False)
    _add_plan_source_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", help="score this predictions file instead of running plans")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--workers", type=int, default=0, help="0 means machine parallelism")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sensitivity", help="accuracy versus range multiplier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--multipliers", default="1.0,1.2,1.4,1.6,1.8,2.0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--dataset", help="dataset file providing annotation tasks")
    p.add_argument("--annotations", required=True, help="annotation log path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8763)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-store", help="build a synthetic demo store")
    p.add_argument("--out", required=True)
    p.add_argument("--images", type=int, default=56)
    p.add_argument("--seed", type=int, default=20240811)
    p.add_argument("--showcase", action="store_true",
                   help="build the single-image walkthrough store instead")
    p.set_defaults(func=cmd_make_store)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PlanParseError, PlanValidationError, UnparseableGenerationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ExecutionError, CompletionError, StoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
