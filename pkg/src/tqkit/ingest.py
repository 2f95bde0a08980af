"""Adapters converting raw dataset records and user uploads into the unified
format, plus unified-format (de)serialization.

Each adapter documents the record shape it accepts. Source data downloads
are the caller's responsibility; adapters only map shapes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .errors import TqkError
from .programs import (
    BinOp,
    SqlCondition,
    SqlQuery,
    eval_program,
    exec_sql,
    format_number,
    parse_math_expr,
    parse_program,
    print_sql,
)
from .tables import (
    Answer,
    AnswerFormat,
    Category,
    Cell,
    ImageRef,
    Passage,
    QAExample,
    UnifiedTable,
    normalize_table,
    validate_example,
)

# Dataset family assignments; ad-hoc uploads count as spreadsheets.
DATASET_CATEGORY = {
    "tatqa": Category.SPREADSHEET,
    "finqa": Category.SPREADSHEET,
    "hitab": Category.SPREADSHEET,
    "multihiertt": Category.SPREADSHEET,
    "hybridqa": Category.ENCYCLOPEDIA,
    "multimodalqa": Category.ENCYCLOPEDIA,
    "wikisql": Category.STRUCTURED,
    "wtq": Category.STRUCTURED,
    "sqa": Category.STRUCTURED,
    "delimited": Category.SPREADSHEET,
}


@dataclass(frozen=True)
class AdapterSpec:
    name: str
    options: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Unified JSONL (de)serialization
# ---------------------------------------------------------------------------


def table_to_dict(t: UnifiedTable) -> dict:
    return {
        "id": t.id,
        "header_rows": t.header_rows,
        "caption": t.caption,
        "cells": [
            [
                {"text": c.text, "links": list(c.links), "images": list(c.images)}
                for c in row
            ]
            for row in t.cells
        ],
        "merged_regions": [list(r) for r in t.merged_regions],
    }


def example_to_dict(ex: QAExample) -> dict:
    """Unified-schema JSON object with a fixed field order."""
    return {
        "id": ex.id,
        "dataset": ex.dataset,
        "category": ex.category.value,
        "question": ex.question,
        "table": table_to_dict(ex.table),
        "passages": [
            {"id": p.id, "title": p.title, "text": p.text} for p in ex.passages
        ],
        "images": [
            {"id": im.id, "uri": im.uri, "caption": im.caption} for im in ex.images
        ],
        "answer": {
            "format": ex.answer.format.value,
            "value": ex.answer.value,
            "derivation": ex.answer.derivation,
        },
    }


def _require(record: dict, key: str, context: str = "") -> object:
    if key not in record:
        name = f"{context}.{key}" if context else key
        raise TqkError(f"missing field {name}")
    return record[key]


def example_from_dict(record: dict) -> QAExample:
    """Inverse of example_to_dict; raises on missing required fields."""
    raw_table = _require(record, "table")
    cells = tuple(
        tuple(
            Cell(
                text=str(c.get("text", "")),
                links=tuple(c.get("links", ())),
                images=tuple(c.get("images", ())),
            )
            for c in row
        )
        for row in _require(raw_table, "cells", "table")
    )
    table = UnifiedTable(
        id=str(_require(raw_table, "id", "table")),
        cells=cells,
        header_rows=int(_require(raw_table, "header_rows", "table")),
        merged_regions=tuple(
            tuple(int(x) for x in region)
            for region in raw_table.get("merged_regions") or ()
        ),
        caption=raw_table.get("caption"),
    )
    raw_answer = _require(record, "answer")
    try:
        fmt = AnswerFormat(str(_require(raw_answer, "format", "answer")))
    except ValueError:
        raise TqkError(f"bad answer format '{raw_answer['format']}'") from None
    try:
        category = Category(str(_require(record, "category")))
    except ValueError:
        raise TqkError(f"bad category '{record['category']}'") from None
    return QAExample(
        id=str(_require(record, "id")),
        dataset=str(_require(record, "dataset")),
        category=category,
        question=str(_require(record, "question")),
        table=table,
        passages=tuple(
            Passage(
                id=str(_require(p, "id", "passages")),
                title=str(_require(p, "title", "passages")),
                text=str(_require(p, "text", "passages")),
            )
            for p in record.get("passages") or ()
        ),
        images=tuple(
            ImageRef(
                id=str(_require(im, "id", "images")),
                uri=str(_require(im, "uri", "images")),
                caption=str(im.get("caption") or ""),
            )
            for im in record.get("images") or ()
        ),
        answer=Answer(
            format=fmt,
            value=str(_require(raw_answer, "value", "answer")),
            derivation=raw_answer.get("derivation"),
        ),
    )


def load_unified(path: str | Path) -> Iterator[QAExample]:
    """Yield validated examples in file order; errors carry line numbers."""
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TqkError(f"line {n}: malformed JSON: {exc.msg}") from None
            try:
                ex = example_from_dict(record)
            except TqkError as exc:
                raise TqkError(f"line {n}: {exc}") from None
            violations = validate_example(ex)
            if violations:
                raise TqkError(f"line {n}: invalid example: {'; '.join(violations)}")
            yield ex


def save_unified(examples: Iterable[QAExample], path: str | Path) -> int:
    """Write unified JSONL; returns the number of examples written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_dict(ex), ensure_ascii=False,
                                separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# Delimited uploads
# ---------------------------------------------------------------------------


def import_delimited(
    path: str | Path, delimiter: str = ",", has_header: bool = True
) -> UnifiedTable:
    """Read CSV/TSV text into a table; ragged rows are padded.

    With has_header the first row is the single header row, otherwise the
    header depth is computed from cell emptiness.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_delimited(text, delimiter=delimiter, has_header=has_header,
                           table_id=Path(path).stem)


def parse_delimited(
    text: str, delimiter: str = ",", has_header: bool = True, table_id: str = "upload"
) -> UnifiedTable:
    reader = csv.reader(io.StringIO(text), delimiter=delimiter, strict=True)
    rows = []
    try:
        for row in reader:
            rows.append([cell for cell in row])
    except csv.Error as exc:
        raise TqkError(f"row {reader.line_num}: {exc}") from None
    rows = [r for r in rows if r]  # csv yields [] for blank trailing lines
    table = normalize_table(rows, id=table_id)
    if has_header:
        table = dataclasses.replace(table, header_rows=1)
    return table


# ---------------------------------------------------------------------------
# Adapter registry
# ---------------------------------------------------------------------------

AdapterFn = Callable[[dict, AdapterSpec, int], QAExample]
_ADAPTERS: dict[str, AdapterFn] = {}


def register_adapter(name: str) -> Callable[[AdapterFn], AdapterFn]:
    def wrap(fn: AdapterFn) -> AdapterFn:
        _ADAPTERS[name] = fn
        return fn

    return wrap


def adapter_names() -> list[str]:
    return sorted([*_ADAPTERS, "delimited"])


def get_adapter(name: str) -> AdapterFn:
    if name not in _ADAPTERS:
        raise TqkError(
            f"unknown adapter '{name}' (registered: {', '.join(adapter_names())})"
        )
    return _ADAPTERS[name]


def convert(spec: AdapterSpec, in_path: str | Path, out_path: str | Path) -> int:
    """Convert a raw dataset file to unified JSONL; returns examples written.

    Inputs may be a JSON array or JSONL. The delimited adapter instead
    treats the input as one uploaded table plus a question in its options.
    """
    if spec.name == "delimited":
        examples = [_delimited_example(spec, in_path)]
    else:
        adapter = get_adapter(spec.name)
        examples = []
        for i, record in enumerate(_read_records(in_path)):
            try:
                ex = adapter(record, spec, i)
            except TqkError as exc:
                raise TqkError(f"record {i}: {exc}") from None
            violations = validate_example(ex)
            if violations:
                raise TqkError(f"record {i}: invalid example: "
                               f"{'; '.join(violations)}")
            examples.append(ex)
    return save_unified(examples, out_path)


def _read_records(path: str | Path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        records = json.loads(text)
        if not isinstance(records, list):
            raise TqkError("expected a JSON array of records")
        return records
    records = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise TqkError(f"line {n}: malformed JSON: {exc.msg}") from None
    return records


def _delimited_example(spec: AdapterSpec, in_path: str | Path) -> QAExample:
    question = spec.options.get("question")
    if not question:
        raise TqkError("delimited adapter requires options[question]")
    table = import_delimited(
        in_path,
        delimiter=spec.options.get("delimiter", ","),
        has_header=spec.options.get("has_header", "true").lower() != "false",
    )
    answer = Answer(AnswerFormat.DIRECT, spec.options.get("answer", ""))
    return QAExample(
        id=spec.options.get("id", f"delimited-{table.id}"),
        dataset="delimited",
        category=DATASET_CATEGORY["delimited"],
        question=question,
        table=table,
        answer=answer,
    )


# ---------------------------------------------------------------------------
# Shared mapping helpers
# ---------------------------------------------------------------------------


def _text_of(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, float)):
        return format_number(float(value))
    return str(value)


def _join_values(value: object) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(_text_of(v) for v in value)
    return _text_of(value)


def _rich_cell(value: object) -> Cell:
    """Fixture cells are plain text or {text, links, images} objects."""
    if isinstance(value, dict):
        return Cell(
            text=_text_of(value.get("text", "")),
            links=tuple(value.get("links", ())),
            images=tuple(value.get("images", ())),
        )
    return Cell(text=_text_of(value))


def _simple_table(
    header: list, rows: list, *, table_id: str, caption: str | None = None
) -> UnifiedTable:
    """One header row over a body grid; cells may carry links/images."""
    grid = [[_rich_cell(h) for h in header]] + [
        [_rich_cell(v) for v in row] for row in rows
    ]
    width = max(len(r) for r in grid)
    padded = tuple(
        tuple(list(row) + [Cell()] * (width - len(row))) for row in grid
    )
    return UnifiedTable(id=table_id, cells=padded, header_rows=1, caption=caption)


def _record_id(record: dict, key: str, dataset: str, index: int) -> str:
    value = record.get(key)
    return str(value) if value not in (None, "") else f"{dataset}-{index}"


# ---------------------------------------------------------------------------
# Dataset adapters
# ---------------------------------------------------------------------------

_WIKISQL_AGGS = {0: None, 1: "MAX", 2: "MIN", 3: "COUNT", 4: "SUM", 5: "AVG"}
_WIKISQL_OPS = {0: "=", 1: ">", 2: "<"}


@register_adapter("wikisql")
def _adapt_wikisql(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: {id?, question, table: {id?, header, rows},
    sql: {sel, agg, conds: [[col, op, literal], ...]}}."""
    raw_table = _require(record, "table")
    table = _simple_table(
        _require(raw_table, "header", "table"),
        _require(raw_table, "rows", "table"),
        table_id=_record_id(raw_table, "id", "wikisql-table", index),
    )
    sql = _require(record, "sql")
    agg_code = int(sql.get("agg", 0))
    if agg_code not in _WIKISQL_AGGS:
        raise TqkError(f"bad agg code {agg_code}")
    conditions = []
    for cond in sql.get("conds", ()):
        col, op_code, literal = cond
        if int(op_code) not in _WIKISQL_OPS:
            raise TqkError(f"bad cond op code {op_code}")
        conditions.append(
            SqlCondition(int(col), _WIKISQL_OPS[int(op_code)], _text_of(literal))
        )
    query = SqlQuery(
        select_col=int(_require(sql, "sel", "sql")),
        agg=_WIKISQL_AGGS[agg_code],
        conditions=tuple(conditions),
    )
    derivation = print_sql(query, table)
    return QAExample(
        id=_record_id(record, "id", "wikisql", index),
        dataset="wikisql",
        category=DATASET_CATEGORY["wikisql"],
        question=str(_require(record, "question")),
        table=table,
        answer=Answer(AnswerFormat.SQL, exec_sql(query, table), derivation),
    )


@register_adapter("wtq")
def _adapt_wtq(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: {id?, question, table: {id?, header, rows, caption?},
    answers: [...]}."""
    raw_table = _require(record, "table")
    table = _simple_table(
        _require(raw_table, "header", "table"),
        _require(raw_table, "rows", "table"),
        table_id=_record_id(raw_table, "id", "wtq-table", index),
        caption=raw_table.get("caption"),
    )
    return QAExample(
        id=_record_id(record, "id", "wtq", index),
        dataset="wtq",
        category=DATASET_CATEGORY["wtq"],
        question=str(_require(record, "question")),
        table=table,
        answer=Answer(AnswerFormat.DIRECT, _join_values(_require(record, "answers"))),
    )


@register_adapter("sqa")
def _adapt_sqa(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: one conversation turn, {id?, position?, question,
    table: {id?, header, rows}, answers: [...]}."""
    raw_table = _require(record, "table")
    table = _simple_table(
        _require(raw_table, "header", "table"),
        _require(raw_table, "rows", "table"),
        table_id=_record_id(raw_table, "id", "sqa-table", index),
    )
    base = _record_id(record, "id", "sqa", index)
    position = record.get("position")
    ex_id = f"{base}-t{position}" if position is not None else base
    return QAExample(
        id=ex_id,
        dataset="sqa",
        category=DATASET_CATEGORY["sqa"],
        question=str(_require(record, "question")),
        table=table,
        answer=Answer(AnswerFormat.DIRECT, _join_values(_require(record, "answers"))),
    )


@register_adapter("finqa")
def _adapt_finqa(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: {id?, pre_text: [...], post_text: [...],
    table: [[...]] with the first row as header, qa: {question, program,
    answer?}}. Programs that fail to parse fall back to Direct."""
    grid = _require(record, "table")
    table = _simple_table(grid[0], grid[1:], table_id=f"finqa-table-{index}")
    qa = _require(record, "qa")
    question = str(_require(qa, "question", "qa"))
    ex_id = _record_id(record, "id", "finqa", index)
    passages = []
    for part in ("pre_text", "post_text"):
        text = " ".join(str(p) for p in record.get(part) or [] if str(p).strip())
        if text:
            passages.append(Passage(id=f"{ex_id}-{part}", title="", text=text))

    program_text = qa.get("program") or ""
    answer: Answer
    try:
        program = parse_program(program_text)
        value = qa.get("answer")
        if value in (None, ""):
            value = eval_program(program)
            value = value if isinstance(value, str) else format_number(value)
        answer = Answer(AnswerFormat.PROGRAM, _text_of(value), program_text)
    except TqkError:
        answer = Answer(AnswerFormat.DIRECT, _text_of(qa.get("answer", "")))
    return QAExample(
        id=ex_id,
        dataset="finqa",
        category=DATASET_CATEGORY["finqa"],
        question=question,
        table=table,
        passages=tuple(passages),
        answer=answer,
    )


@register_adapter("tatqa")
def _adapt_tatqa(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: one question over a financial table, {uid?,
    table: {uid?, table: [[...]]}, paragraphs: [{uid?, text}],
    question: {uid?, question, answer, derivation?}}. Arithmetic
    derivations keep the math-expression format; everything else is
    Direct."""
    raw_table = _require(record, "table")
    table = normalize_table(
        [[_text_of(c) for c in row] for row in _require(raw_table, "table", "table")],
        id=str(raw_table.get("uid") or f"tatqa-table-{index}"),
    )
    q = _require(record, "question")
    ex_id = str(q.get("uid") or record.get("uid") or f"tatqa-{index}")
    passages = tuple(
        Passage(
            id=str(p.get("uid") or f"{ex_id}-p{i}"),
            title="",
            text=str(_require(p, "text", "paragraphs")),
        )
        for i, p in enumerate(record.get("paragraphs") or ())
    )
    value = _join_values(_require(q, "answer", "question"))
    derivation = str(q.get("derivation") or "")
    answer = Answer(AnswerFormat.DIRECT, value)
    if derivation:
        try:
            expr = parse_math_expr(derivation)
            if isinstance(expr.root, BinOp):  # bare literals stay Direct
                answer = Answer(AnswerFormat.MATH_EXPR, value, derivation)
        except TqkError:
            pass
    return QAExample(
        id=ex_id,
        dataset="tatqa",
        category=DATASET_CATEGORY["tatqa"],
        question=str(_require(q, "question", "question")),
        table=table,
        passages=passages,
        answer=answer,
    )


@register_adapter("hitab")
def _adapt_hitab(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: {id?, question, answer: [...], table: {id?,
    cells: [[...]], merged_regions?: [[r0,c0,r1,c1]], caption?}}. Header
    depth is computed from cell emptiness after merge resolution."""
    raw_table = _require(record, "table")
    table = normalize_table(
        [[_text_of(c) for c in row] for row in _require(raw_table, "cells", "table")],
        merged=[tuple(r) for r in raw_table.get("merged_regions") or ()],
        id=_record_id(raw_table, "id", "hitab-table", index),
        caption=raw_table.get("caption"),
    )
    return QAExample(
        id=_record_id(record, "id", "hitab", index),
        dataset="hitab",
        category=DATASET_CATEGORY["hitab"],
        question=str(_require(record, "question")),
        table=table,
        answer=Answer(AnswerFormat.DIRECT, _join_values(_require(record, "answer"))),
    )


@register_adapter("multihiertt")
def _adapt_multihiertt(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: {uid?, paragraphs: [...], table: [[...]],
    qa: {question, answer, program?}}. The source bundles several tables
    per document; records here carry the one the question needs."""
    table = normalize_table(
        [[_text_of(c) for c in row] for row in _require(record, "table")],
        id=f"multihiertt-table-{index}",
    )
    qa = _require(record, "qa")
    ex_id = _record_id(record, "uid", "multihiertt", index)
    passages = tuple(
        Passage(id=f"{ex_id}-p{i}", title="", text=str(p))
        for i, p in enumerate(record.get("paragraphs") or ())
        if str(p).strip()
    )
    value = _join_values(_require(qa, "answer", "qa"))
    program_text = qa.get("program") or ""
    answer = Answer(AnswerFormat.DIRECT, value)
    if program_text:
        try:
            parse_program(program_text)
            answer = Answer(AnswerFormat.PROGRAM, value, program_text)
        except TqkError:
            pass
    return QAExample(
        id=ex_id,
        dataset="multihiertt",
        category=DATASET_CATEGORY["multihiertt"],
        question=str(_require(qa, "question", "qa")),
        table=table,
        passages=passages,
        answer=answer,
    )


@register_adapter("hybridqa")
def _adapt_hybridqa(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: {id?, question, answer, table: {id?, header, rows},
    passages: [{id, title?, text}]}. Row cells may be {text, links}
    objects whose links name passage ids."""
    raw_table = _require(record, "table")
    table = _simple_table(
        _require(raw_table, "header", "table"),
        _require(raw_table, "rows", "table"),
        table_id=_record_id(raw_table, "id", "hybridqa-table", index),
    )
    passages = tuple(
        Passage(
            id=str(_require(p, "id", "passages")),
            title=str(p.get("title") or ""),
            text=str(_require(p, "text", "passages")),
        )
        for p in record.get("passages") or ()
    )
    return QAExample(
        id=_record_id(record, "id", "hybridqa", index),
        dataset="hybridqa",
        category=DATASET_CATEGORY["hybridqa"],
        question=str(_require(record, "question")),
        table=table,
        passages=passages,
        answer=Answer(AnswerFormat.DIRECT, _join_values(_require(record, "answer"))),
    )


@register_adapter("multimodalqa")
def _adapt_multimodalqa(record: dict, spec: AdapterSpec, index: int) -> QAExample:
    """Record shape: {qid?, question, answer, table: {id?, header, rows},
    images: [{id, uri, caption?}], passages?: [{id, title?, text}]}. Row
    cells may carry image-id lists."""
    raw_table = _require(record, "table")
    table = _simple_table(
        _require(raw_table, "header", "table"),
        _require(raw_table, "rows", "table"),
        table_id=_record_id(raw_table, "id", "multimodalqa-table", index),
    )
    images = tuple(
        ImageRef(
            id=str(_require(im, "id", "images")),
            uri=str(_require(im, "uri", "images")),
            caption=str(im.get("caption") or ""),
        )
        for im in record.get("images") or ()
    )
    passages = tuple(
        Passage(
            id=str(_require(p, "id", "passages")),
            title=str(p.get("title") or ""),
            text=str(_require(p, "text", "passages")),
        )
        for p in record.get("passages") or ()
    )
    return QAExample(
        id=_record_id(record, "qid", "multimodalqa", index),
        dataset="multimodalqa",
        category=DATASET_CATEGORY["multimodalqa"],
        question=str(_require(record, "question")),
        table=table,
        images=images,
        passages=passages,
        answer=Answer(AnswerFormat.DIRECT, _join_values(_require(record, "answer"))),
    )
