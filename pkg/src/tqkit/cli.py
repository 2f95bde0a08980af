"""Command-line frontend. Verbs: ingest, linearize, retrieve, eval, bench,
serve, ask. stdout carries machine-readable JSON or JSONL only; diagnostics
go to stderr. Exit codes: 0 success, 1 usage error, 2 runtime error."""

from __future__ import annotations

import argparse
import json
import sys

from .benchmark import assemble, load_bench_config
from .errors import TqkError
from .evaluation import METRIC_NAMES, evaluate_dataset, format_report, report_to_dict
from .ingest import AdapterSpec, adapter_names, convert, import_delimited, load_unified
from .linearize import TokenBudget, count_tokens, to_flatten, to_markdown, \
    truncate_rows
from .reasoner import InputFormat, LlmEndpoint, PromptScheme, PromptSpec, \
    answer_question, prompt_id
from .retrieval import ExternalScorer, RetrieverConfig, UnitKind, retrieve, unit_key
from .tables import Answer, AnswerFormat, Category, QAExample


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _metric_list(text: str) -> list[str]:
    metrics = [m.strip() for m in text.split(",") if m.strip()]
    for m in metrics:
        if m not in METRIC_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown metric '{m}' (valid: {', '.join(METRIC_NAMES)})"
            )
    return metrics


def _options_dict(pairs: list[str]) -> dict[str, str]:
    options = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise TqkError(f"bad option '{pair}' (want key=value)")
        options[key] = value
    return options


def _emit(obj: object) -> None:
    print(json.dumps(obj, ensure_ascii=False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tqkit", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="convert a raw dataset file to unified JSONL")
    p.add_argument("--adapter", required=True, choices=adapter_names())
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--opt", action="append", default=[],
                   help="adapter option key=value; repeatable")
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("linearize", help="render unified examples as text")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--format", default="markdown", choices=["markdown", "flatten"])
    p.add_argument("--budget", type=int, default=None,
                   help="max tokens; tables are row-truncated to fit")
    p.add_argument("--vocab", default=None, help="tokenizer vocabulary file")
    p.set_defaults(fn=_cmd_linearize)

    p = sub.add_parser("retrieve", help="rank table units against questions")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--granularity", default="row",
                   choices=["row", "column", "cell"])
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--include-passages", action="store_true")
    p.add_argument("--scores", default=None,
                   help="external score file instead of BM25")
    p.set_defaults(fn=_cmd_retrieve)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--metrics", type=_metric_list, default=["em", "f1"])
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("bench", help="benchmark assembly")
    p.add_argument("action", choices=["build"])
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--addr", default="127.0.0.1:8080")
    p.add_argument("--config", default=None, help="service config JSON")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("ask", help="one-shot question over a delimited table")
    p.add_argument("--table", required=True, help="CSV/TSV file")
    p.add_argument("--question", required=True)
    p.add_argument("--scheme", default="direct", choices=["direct", "cot", "pot"])
    p.add_argument("--format", default="markdown", choices=["markdown", "flatten"])
    p.add_argument("--budget", type=int, default=4096)
    p.add_argument("--granularity", default=None,
                   choices=["row", "column", "cell"])
    p.add_argument("--topk", type=int, default=5)
    p.set_defaults(fn=_cmd_ask)
    return parser


def _cmd_ingest(args) -> int:
    spec = AdapterSpec(args.adapter, _options_dict(args.opt))
    written = convert(spec, args.in_path, args.out)
    _emit({"adapter": args.adapter, "written": written, "out": args.out})
    return 0


def _cmd_linearize(args) -> int:
    budget = TokenBudget(args.budget, args.vocab) if args.budget else None
    for ex in load_unified(args.in_path):
        table = ex.table
        if budget is not None:
            table = truncate_rows(table, budget)
        text = to_markdown(table) if args.format == "markdown" else to_flatten(table)
        _emit({"id": ex.id, "text": text,
               "tokens": count_tokens(text, args.vocab)})
    return 0


def _cmd_retrieve(args) -> int:
    cfg = RetrieverConfig(
        granularity=UnitKind(args.granularity),
        top_k=args.topk,
        include_passages=args.include_passages,
    )
    scorer = ExternalScorer(args.scores) if args.scores else None
    for ex in load_unified(args.in_path):
        ranked = retrieve(ex, cfg, scorer=scorer)
        _emit({
            "id": ex.id,
            "results": [
                {"unit": unit_key(u), "score": score, "text": u.text}
                for u, score in ranked
            ],
        })
    return 0


def _cmd_eval(args) -> int:
    report = evaluate_dataset(args.pred, args.gold, args.metrics)
    print(format_report(report), file=sys.stderr)
    _emit(report_to_dict(report))
    return 0


def _cmd_bench(args) -> int:
    cfg, inputs, out_path = load_bench_config(args.config)
    report = assemble(cfg, inputs, out_path)
    _emit({"out": str(out_path), **report.to_dict()})
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app, load_service_config

    host, _, port_text = args.addr.partition(":")
    if not port_text.isdigit():
        raise TqkError(f"bad --addr '{args.addr}' (want host:port)")
    cfg = load_service_config(args.config) if args.config else ServiceConfig()
    _emit({"serving": args.addr})
    sys.stdout.flush()
    uvicorn.run(create_app(cfg), host=host or "127.0.0.1", port=int(port_text))
    return 0


def _cmd_ask(args) -> int:
    table = import_delimited(args.table)
    ex = QAExample(
        id="cli-ask",
        dataset="upload",
        category=Category.SPREADSHEET,
        question=args.question,
        table=table,
        answer=Answer(AnswerFormat.DIRECT, ""),
    )
    spec = PromptSpec(
        input_format=InputFormat(args.format),
        scheme=PromptScheme(args.scheme),
        budget=TokenBudget(args.budget),
    )
    retriever_cfg = None
    if args.granularity:
        retriever_cfg = RetrieverConfig(
            granularity=UnitKind(args.granularity), top_k=args.topk
        )
    answer = answer_question(ex, spec, LlmEndpoint.from_env(), retriever_cfg)
    _emit({
        "answer": answer.value,
        "derivation": answer.derivation,
        "prompt_id": prompt_id(spec),
    })
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except TqkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
