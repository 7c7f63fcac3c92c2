"""Command-line interface.

Thin argument-parsing shell over the run layer: every subcommand body is
a few lines that call into the library and print the result. Exit codes:
0 success, 1 domain error (one machine-parsable line on stderr), 2 usage.
"""

import argparse
import json
import sys
import time
from datetime import datetime, timezone

from .config import load_config
from .errors import PTracerError
from .feedback import FeedbackRecord, ReasonCategory, Verdict, record_feedback
from .runs import run_eval, run_ingest, run_predict, run_retrain, run_train
from .store import Store

REASONS = [r.value for r in ReasonCategory]


def _parse_ts(value: str) -> int:
    """Epoch seconds from either a bare integer or an ISO-8601 timestamp."""
    try:
        return int(value)
    except ValueError:
        pass
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{value!r} is neither epoch seconds nor ISO-8601"
        )
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptracer",
        description="Closed-loop triage bot for kernel bug-fix patches.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="collect and label one monitoring window")
    p.add_argument("--config", required=True)
    p.add_argument("--since", type=_parse_ts)
    p.add_argument("--until", type=_parse_ts)

    p = sub.add_parser("train", help="train a model bundle from a corpus file")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="score a window and write a report")
    p.add_argument("--config", required=True)
    p.add_argument("--since", type=_parse_ts)
    p.add_argument("--until", type=_parse_ts)
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["json", "markdown"], default="json")

    p = sub.add_parser("feedback", help="expert verdicts")
    fsub = p.add_subparsers(dest="feedback_command", required=True)
    f = fsub.add_parser("add", help="record one verdict for a scored patch")
    f.add_argument("--config", required=True)
    f.add_argument("--sha", required=True)
    group = f.add_mutually_exclusive_group(required=True)
    group.add_argument("--accept", action="store_true")
    group.add_argument("--reject", choices=REASONS)
    f.add_argument("--note", default="")
    f.add_argument("--reviewer", default="")

    p = sub.add_parser("retrain", help="retrain from the store with feedback applied")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)

    p = sub.add_parser("eval", help="evaluate the deployed bundle on a corpus file")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--no-ccstable", action="store_true",
                   help="suppress the maintainer-tag score boost")
    return parser


def _cmd_ingest(args) -> int:
    cfg = load_config(args.config)
    summary = run_ingest(cfg, since=args.since, until=args.until)
    print(json.dumps(summary))
    return 0


def _cmd_train(args) -> int:
    load_config(args.config)  # validate early; training needs no knobs from it
    summary = run_train(args.corpus, args.out)
    print(json.dumps(summary))
    return 0


def _cmd_predict(args) -> int:
    cfg = load_config(args.config)
    text, scored, funnel, _ = run_predict(
        cfg, since=args.since, until=args.until, fmt=args.format
    )
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"analyzed {funnel.analyzed}, concerned {funnel.concerned}, "
          f"recommended {funnel.recommended}; report written to {args.report}")
    return 0


def _cmd_feedback_add(args) -> int:
    cfg = load_config(args.config)
    store = Store(cfg.store_dir)
    rec = FeedbackRecord(
        sha=args.sha,
        verdict=Verdict.ACCEPTED if args.accept else Verdict.REJECTED,
        reason=ReasonCategory(args.reject) if args.reject else None,
        note=args.note,
        reviewer=args.reviewer,
        ts=int(time.time()),
    )
    record_feedback(rec, store.feedback, known_shas=set(store.load_scored()))
    print(f"recorded {rec.verdict.value} for {rec.sha}")
    return 0


def _cmd_retrain(args) -> int:
    cfg = load_config(args.config)
    summary = run_retrain(cfg, args.out)
    print(json.dumps(summary))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = load_config(args.config)
    uvicorn.run(create_app(cfg), host="127.0.0.1", port=cfg.http_port)
    return 0


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    metrics = run_eval(cfg, args.corpus, revision_enabled=not args.no_ccstable)
    print(json.dumps(metrics.as_dict(), indent=2))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "retrain": _cmd_retrain,
    "serve": _cmd_serve,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "feedback":
            return _cmd_feedback_add(args)
        return _COMMANDS[args.command](args)
    except PTracerError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: invalid_argument: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
