"""Unified retrieval over table units: row, column, or cell granularity
(plus linked passages), a lexical BM25 default scorer behind a pluggable
Scorer interface, and recall@k."""

from __future__ import annotations

import json
import math
import re
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import TqkError
from .linearize import flatten_row
from .tables import QAExample, header_paths


class UnitKind(Enum):
    ROW = "row"
    COLUMN = "column"
    CELL = "cell"
    PASSAGE = "passage"


Locator = "int | tuple[int, int] | str"


@dataclass(frozen=True)
class RetrievalUnit:
    kind: UnitKind
    # Row/column index, (row, col) pair, or passage id; row and cell
    # coordinates are absolute 0-based positions in the grid.
    locator: int | tuple[int, int] | str
    text: str


@dataclass(frozen=True)
class RetrieverConfig:
    granularity: UnitKind = UnitKind.ROW
    k1: float = 1.2
    b: float = 0.75
    top_k: int = 5
    include_passages: bool = False

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


def unit_key(unit: RetrievalUnit) -> str:
    """Stable string form of a locator, used by external score files."""
    if unit.kind is UnitKind.CELL:
        r, c = unit.locator
        return f"cell:{r},{c}"
    return f"{unit.kind.value}:{unit.locator}"


def extract_units(
    ex: QAExample, granularity: UnitKind, *, include_passages: bool = False
) -> list[RetrievalUnit]:
    """Build the unit corpus for one example.

    Row units are flattened body rows, column units join the column's body
    cells under its header path, cell units are "path: text" and skip
    empty cells. Passage units are appended on request.
    """
    table = ex.table
    paths = header_paths(table)
    units: list[RetrievalUnit] = []
    if granularity is UnitKind.ROW:
        for i, row in enumerate(table.body_rows()):
            units.append(
                RetrievalUnit(
                    kind=UnitKind.ROW,
                    locator=table.header_rows + i,
                    text=flatten_row(paths, row, i + 1),
                )
            )
    elif granularity is UnitKind.COLUMN:
        for c in range(table.n_cols):
            texts = [row[c].text for row in table.body_rows()]
            units.append(
                RetrievalUnit(
                    kind=UnitKind.COLUMN,
                    locator=c,
                    text=f"{paths[c]}: " + "; ".join(texts),
                )
            )
    elif granularity is UnitKind.CELL:
        for i, row in enumerate(table.body_rows()):
            for c, cell in enumerate(row):
                if cell.text == "":
                    continue
                units.append(
                    RetrievalUnit(
                        kind=UnitKind.CELL,
                        locator=(table.header_rows + i, c),
                        text=f"{paths[c]}: {cell.text}",
                    )
                )
    elif granularity is not UnitKind.PASSAGE:
        raise TqkError(f"unknown granularity '{granularity}'")
    if include_passages or granularity is UnitKind.PASSAGE:
        for p in ex.passages:
            text = f"{p.title}: {p.text}" if p.title else p.text
            units.append(RetrievalUnit(UnitKind.PASSAGE, p.id, text))
    return units


# ---------------------------------------------------------------------------
# Scorers
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[^\W_]+")


def retrieval_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class Scorer(ABC):
    """Assigns one score per unit; ranking and tie-breaks stay outside."""

    @abstractmethod
    def score(
        self, example_id: str, question: str, units: list[RetrievalUnit]
    ) -> list[float]:
        raise NotImplementedError


class Bm25Scorer(Scorer):
    """Okapi BM25 with a non-negative idf floor."""

    def __init__(self, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b

    def score(self, example_id, question, units):
        docs = [retrieval_tokens(u.text) for u in units]
        n = len(docs)
        df: Counter[str] = Counter()
        for doc in docs:
            df.update(set(doc))
        idf = {
            t: max(0.0, math.log((n - d + 0.5) / (d + 0.5))) for t, d in df.items()
        }
        avgdl = sum(len(d) for d in docs) / n if n else 0.0
        query = retrieval_tokens(question)
        scores = []
        for doc in docs:
            tf = Counter(doc)
            total = 0.0
            for term in query:
                f = tf.get(term, 0)
                if f == 0:
                    continue
                norm = self.k1 * (1 - self.b + self.b * len(doc) / avgdl)
                total += idf[term] * f * (self.k1 + 1) / (f + norm)
            scores.append(total)
        return scores


class ConstantScorer(Scorer):
    """Every unit gets the same score; ranking collapses to unit order."""

    def __init__(self, value: float = 0.0):
        self.value = value

    def score(self, example_id, question, units):
        return [self.value] * len(units)


class ExternalScorer(Scorer):
    """Scores read from a JSONL file of {id, scores: {locator key: score}};
    units absent from the file score 0."""

    def __init__(self, path: str | Path):
        self.by_example: dict[str, dict[str, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TqkError(f"line {n}: malformed JSON: {exc.msg}") from None
                if "id" not in record or "scores" not in record:
                    raise TqkError(f"line {n}: expected fields id and scores")
                self.by_example[str(record["id"])] = {
                    str(k): float(v) for k, v in record["scores"].items()
                }

    def score(self, example_id, question, units):
        scores = self.by_example.get(example_id, {})
        return [scores.get(unit_key(u), 0.0) for u in units]


# ---------------------------------------------------------------------------
# Ranking and recall
# ---------------------------------------------------------------------------


def retrieve(
    ex: QAExample,
    cfg: RetrieverConfig,
    question: str | None = None,
    scorer: Scorer | None = None,
) -> list[tuple[RetrievalUnit, float]]:
    """Rank units by score, descending; ties keep extraction order.

    Returns exactly min(top_k, unit count) pairs. The question defaults to
    the example's own.
    """
    units = extract_units(
        ex, cfg.granularity, include_passages=cfg.include_passages
    )
    if not units:
        raise TqkError("nothing to index")
    if question is None:
        question = ex.question
    if scorer is None:
        scorer = Bm25Scorer(cfg.k1, cfg.b)
    scores = scorer.score(ex.id, question, units)
    if len(scores) != len(units):
        raise TqkError("scorer returned a wrong-length score list")
    order = sorted(range(len(units)), key=lambda i: -scores[i])  # stable
    return [(units[i], scores[i]) for i in order[: cfg.top_k]]


def recall_at_k(
    ranked: list[tuple[RetrievalUnit, float]],
    gold: Iterable[int | tuple[int, int] | str],
    k: int,
) -> float:
    """|gold locators in the top k| / |gold|."""
    gold_set = set(gold)
    if not gold_set:
        raise TqkError("no gold units")
    if k < 1:
        raise TqkError("k must be >= 1")
    top = {unit.locator for unit, _ in ranked[:k]}
    return len(gold_set & top) / len(gold_set)
