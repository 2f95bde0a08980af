"""The four official metrics behind a one-call dataset evaluator.

Metric names: em (exact match), f1 (token F1), exe (execution accuracy),
prog (program accuracy). exe and prog score derivations; em and f1 score
answer strings after normalization.
"""

from __future__ import annotations

import json
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import TqkError
from .ingest import load_unified
from .programs import (
    ProgramError,
    execute_derivation,
    format_number,
    parse_numeric_literal,
    parse_program,
    programs_equal,
)
from .tables import AnswerFormat, UnifiedTable

METRIC_NAMES = ("em", "f1", "exe", "prog")

_ARTICLES = {"a", "an", "the"}
_PUNCT = set(string.punctuation)

# Relative tolerance for numeric answer comparison; absorbs rounding in
# financial answers.
EXE_REL_TOL = 1e-4
PROG_ARG_TOL = 1e-9


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace.

    A string that is numeric as a whole is instead canonicalized the way
    derivation literals are ("$1,200.0" and "1200" agree).
    """
    num = parse_numeric_literal(text)
    if num is not None:
        return format_number(num)
    cleaned = "".join(ch for ch in text.lower() if ch not in _PUNCT)
    tokens = [t for t in cleaned.split() if t not in _ARTICLES]
    return " ".join(tokens)


def exact_match(pred: str, gold: str) -> float:
    return 1.0 if normalize_answer(pred) == normalize_answer(gold) else 0.0


def token_f1(pred: str, gold: str) -> float:
    """Multiset token overlap 2PR/(P+R) over normalized tokens."""
    p_tokens = normalize_answer(pred).split()
    g_tokens = normalize_answer(gold).split()
    if not p_tokens and not g_tokens:
        return 1.0
    if not p_tokens or not g_tokens:
        return 0.0
    overlap = sum((Counter(p_tokens) & Counter(g_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(p_tokens)
    recall = overlap / len(g_tokens)
    return 2 * precision * recall / (precision + recall)


def exec_acc(
    pred_derivation: str, gold_value: str, table: UnifiedTable | None = None
) -> tuple[float, str | None]:
    """Execute the predicted derivation and compare to the gold value.

    Numeric results pass within a relative tolerance, others by normalized
    string equality. Unexecutable predictions score 0 with a flag rather
    than raising.
    """
    try:
        value, _ = execute_derivation(pred_derivation, table)
    except TqkError as exc:
        flag = "unparseable" if "no supported grammar" in str(exc) else str(exc)
        return 0.0, flag
    pred_num = parse_numeric_literal(value)
    gold_num = parse_numeric_literal(gold_value)
    if pred_num is not None and gold_num is not None:
        ok = abs(pred_num - gold_num) <= EXE_REL_TOL * max(1.0, abs(gold_num))
        return (1.0 if ok else 0.0), None
    return (1.0 if normalize_answer(value) == normalize_answer(gold_value) else 0.0,
            None)


def program_acc(pred_derivation: str, gold_derivation: str) -> tuple[float, str | None]:
    """Structural program equality: ops and reference structure must match
    exactly, numeric args within a small tolerance. No commutative
    matching; users wanting it should pre-canonicalize."""
    try:
        pred = parse_program(pred_derivation)
    except ProgramError:
        return 0.0, "unparseable"
    try:
        gold = parse_program(gold_derivation)
    except ProgramError:
        return 0.0, "unparseable gold"
    return (1.0 if programs_equal(pred, gold, tol=PROG_ARG_TOL) else 0.0), None


@dataclass(frozen=True)
class EvalReport:
    per_example: tuple[dict, ...]
    aggregate: dict[str, float]
    counts: dict[str, int]


def load_predictions(path: str | Path) -> dict[str, dict]:
    """Prediction JSONL {id, answer, derivation?} keyed by example id."""
    preds: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TqkError(f"line {n}: malformed JSON: {exc.msg}") from None
            if "id" not in record:
                raise TqkError(f"line {n}: missing field id")
            pid = str(record["id"])
            if pid in preds:
                raise TqkError(f"duplicate prediction id '{pid}'")
            preds[pid] = record
    return preds


def evaluate_dataset(
    preds_path: str | Path,
    gold_path: str | Path,
    metrics: Sequence[str] = ("em", "f1"),
) -> EvalReport:
    """Join predictions to gold examples by id and score the requested
    metrics. Gold examples without a prediction score 0 on every requested
    metric; prog is only defined where the gold answer is a program."""
    for m in metrics:
        if m not in METRIC_NAMES:
            raise TqkError(
                f"unknown metric '{m}' (valid: {', '.join(METRIC_NAMES)})"
            )
    preds = load_predictions(preds_path)

    rows: list[dict] = []
    missing = 0
    flagged = 0
    for ex in load_unified(gold_path):
        pred = preds.get(ex.id)
        flags: list[str] = []
        if pred is None:
            missing += 1
            flags.append("missing prediction")
        pred_answer = str(pred.get("answer", "")) if pred else ""
        pred_derivation = str(pred.get("derivation") or "") if pred else ""
        row: dict = {"id": ex.id}
        if "em" in metrics:
            row["em"] = exact_match(pred_answer, ex.answer.value) if pred else 0.0
        if "f1" in metrics:
            row["f1"] = token_f1(pred_answer, ex.answer.value) if pred else 0.0
        if "exe" in metrics:
            if pred is None:
                row["exe_acc"] = 0.0
            else:
                score, flag = exec_acc(pred_derivation, ex.answer.value, ex.table)
                row["exe_acc"] = score
                if flag:
                    flags.append(f"exe: {flag}")
        if "prog" in metrics:
            gold_is_program = (
                ex.answer.format is AnswerFormat.PROGRAM
                and ex.answer.derivation is not None
            )
            if gold_is_program:
                if pred is None:
                    row["prog_acc"] = 0.0
                else:
                    score, flag = program_acc(pred_derivation, ex.answer.derivation)
                    row["prog_acc"] = score
                    if flag:
                        flags.append(f"prog: {flag}")
        if flags:
            flagged += 1
            row["flags"] = flags
        rows.append(row)

    field_of = {"em": "em", "f1": "f1", "exe": "exe_acc", "prog": "prog_acc"}
    aggregate: dict[str, float] = {}
    defined_counts: dict[str, int] = {}
    for m in metrics:
        values = [row[field_of[m]] for row in rows if field_of[m] in row]
        defined_counts[m] = len(values)
        if values:
            aggregate[m] = sum(values) / len(values)
    counts = {
        "examples": len(rows),
        "missing_predictions": missing,
        "flagged": flagged,
        **{f"{m}_defined": n for m, n in defined_counts.items()},
    }
    return EvalReport(tuple(rows), aggregate, counts)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "aggregate": report.aggregate,
        "counts": report.counts,
        "per_example": list(report.per_example),
    }


def format_report(report: EvalReport) -> str:
    """Aligned plain-text summary table."""
    lines = [f"{'metric':<8}{'mean':>10}{'defined':>10}"]
    for name, value in report.aggregate.items():
        n = report.counts.get(f"{name}_defined", report.counts["examples"])
        lines.append(f"{name:<8}{value:>10.4f}{n:>10}")
    lines.append(
        f"examples={report.counts['examples']} "
        f"missing={report.counts['missing_predictions']} "
        f"flagged={report.counts['flagged']}"
    )
    return "\n".join(lines)
