"""Canonical in-memory table and QA-example model, plus hierarchical-header detection.

Tables are rectangular cell grids with a count of leading header rows.
Hierarchical (multi-row) column headers are detected by scanning for the
first row whose cells are all non-empty; everything up to and including
that row is the header region.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import EmptyTableError, TqkError


class Category(enum.Enum):
    """The three table-QA families a dataset can belong to."""

    SPREADSHEET = "SpreadSheet"
    ENCYCLOPEDIA = "Encyclopedia"
    STRUCTURED = "Structured"


class AnswerFormat(enum.Enum):
    """How a gold (or predicted) answer is expressed."""

    DIRECT = "Direct"
    PROGRAM = "Program"
    MATH_EXPR = "MathExpr"
    SQL = "Sql"


@dataclass(frozen=True)
class Cell:
    """One table cell. Empty text means an empty cell.

    links/images hold ids that must resolve against the owning example's
    passages/images lists.
    """

    text: str = ""
    links: tuple[str, ...] = ()
    images: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "images", tuple(self.images))


@dataclass(frozen=True)
class UnifiedTable:
    """Rectangular cell grid with header-row count and merged-region metadata.

    merged_regions are (r0, c0, r1, c1) inclusive rectangles. Construction is
    lenient; use validate_example / normalize_table to detect or repair
    structural problems.
    """

    id: str
    cells: tuple[tuple[Cell, ...], ...]
    header_rows: int = 1
    merged_regions: tuple[tuple[int, int, int, int], ...] = ()
    caption: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(tuple(row) for row in self.cells))
        object.__setattr__(
            self, "merged_regions", tuple(tuple(r) for r in self.merged_regions)
        )

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    def body_rows(self) -> tuple[tuple[Cell, ...], ...]:
        """Rows below the header region."""
        return self.cells[self.header_rows:]


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    text: str


@dataclass(frozen=True)
class ImageRef:
    id: str
    uri: str
    caption: str = ""


@dataclass(frozen=True)
class Answer:
    """Gold or predicted answer. derivation carries the program / math
    expression / SQL text whenever format is not Direct."""

    format: AnswerFormat
    value: str
    derivation: str | None = None


@dataclass(frozen=True)
class QAExample:
    """One question over one table, with optional linked passages and images."""

    id: str
    dataset: str
    category: Category
    question: str
    table: UnifiedTable
    passages: tuple[Passage, ...] = ()
    images: tuple[ImageRef, ...] = ()
    answer: Answer = field(default_factory=lambda: Answer(AnswerFormat.DIRECT, ""))

    def __post_init__(self) -> None:
        object.__setattr__(self, "passages", tuple(self.passages))
        object.__setattr__(self, "images", tuple(self.images))

    def with_question(self, question: str) -> QAExample:
        """Copy with the question replaced (used for custom-question asks)."""
        return QAExample(
            id=self.id,
            dataset=self.dataset,
            category=self.category,
            question=question,
            table=self.table,
            passages=self.passages,
            images=self.images,
            answer=self.answer,
        )


def find_header_rows(table: UnifiedTable) -> int:
    """Locate the first body row of a (possibly hierarchical) column header.

    Scans row 1's per-column emptiness flags; while any flag is FALSE and
    rows remain, the flags are overwritten with the next row's emptiness
    pattern. Returns n, where rows 1..n-1 (1-based) form the column-header
    region and row n starts the body.

    Returns N+1 when no row is fully populated; callers must then fall back
    to a single header row.
    """
    if table.n_rows == 0 or table.n_cols == 0:
        raise EmptyTableError("empty table")
    non_empty = [cell.text != "" for cell in table.cells[0]]
    n = 2
    while n <= table.n_rows and not all(non_empty):
        non_empty = [cell.text != "" for cell in table.cells[n - 1]]
        n += 1
    return n


GridLike = list  # rows of str or Cell; rows may be ragged


def _as_cell(value) -> Cell:
    if isinstance(value, Cell):
        return value
    return Cell(text=str(value))


def _regions_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def normalize_table(
    raw: GridLike,
    merged: list[tuple[int, int, int, int]] | None = None,
    *,
    id: str = "",
    caption: str | None = None,
) -> UnifiedTable:
    """Build a UnifiedTable from a ragged grid of strings or Cells.

    Pads short rows with empty cells, copies each merged region's anchor
    (top-left) text into every covered cell, then detects the header-row
    count. A degenerate header scan (no fully populated row) falls back to
    header_rows=1.
    """
    if not raw:
        raise EmptyTableError("empty table")
    rows = [[_as_cell(c) for c in row] for row in raw]
    width = max(len(row) for row in rows)
    if width == 0:
        raise EmptyTableError("empty table")
    for row in rows:
        row.extend(Cell() for _ in range(width - len(row)))

    regions = [tuple(r) for r in (merged or [])]
    for region in regions:
        r0, c0, r1, c1 = region
        if not (0 <= r0 <= r1 < len(rows) and 0 <= c0 <= c1 < width):
            raise TqkError(f"merged region {region} out of bounds")
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            if _regions_overlap(a, b):
                raise TqkError(f"overlapping merged regions {a} and {b}")
    for r0, c0, r1, c1 in regions:
        anchor = rows[r0][c0].text
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                old = rows[r][c]
                rows[r][c] = Cell(text=anchor, links=old.links, images=old.images)

    table = UnifiedTable(id=id, cells=tuple(tuple(r) for r in rows),
                         header_rows=0, merged_regions=tuple(regions),
                         caption=caption)
    n = find_header_rows(table)
    header_rows = 1 if n == table.n_rows + 1 else n - 1
    return UnifiedTable(id=id, cells=table.cells, header_rows=header_rows,
                        merged_regions=table.merged_regions, caption=caption)


def header_paths(table: UnifiedTable) -> list[str]:
    """Per-column header label: the non-empty header-level texts joined ' / '."""
    paths = []
    for c in range(table.n_cols):
        parts = [
            table.cells[r][c].text
            for r in range(min(table.header_rows, table.n_rows))
            if table.cells[r][c].text != ""
        ]
        paths.append(" / ".join(parts))
    return paths


def validate_example(ex: QAExample) -> list[str]:
    """Collect every invariant violation; an empty list means the example is valid.

    Violations are data for callers to report, never exceptions.
    """
    violations: list[str] = []
    if ex.question == "":
        violations.append("empty question")

    table = ex.table
    if table.n_rows == 0:
        violations.append("empty table")
    else:
        widths = {len(row) for row in table.cells}
        if len(widths) > 1:
            violations.append("non-rectangular grid")
        if not (0 <= table.header_rows <= table.n_rows):
            violations.append(
                f"header_rows {table.header_rows} out of range 0..{table.n_rows}"
            )
        for region in table.merged_regions:
            r0, c0, r1, c1 = region
            if not (0 <= r0 <= r1 < table.n_rows and 0 <= c0 <= c1 <= min(
                    (len(row) - 1 for row in table.cells), default=-1)):
                violations.append(f"merged region {region} out of bounds")
        regions = list(table.merged_regions)
        for i, a in enumerate(regions):
            for b in regions[i + 1:]:
                if _regions_overlap(a, b):
                    violations.append(f"overlapping merged regions {a} and {b}")

    passage_ids = {p.id for p in ex.passages}
    image_ids = {im.id for im in ex.images}
    for row in table.cells:
        for cell in row:
            for pid in cell.links:
                if pid not in passage_ids:
                    violations.append(f"dangling passage id {pid}")
            for iid in cell.images:
                if iid not in image_ids:
                    violations.append(f"dangling image id {iid}")

    if ex.answer.format is AnswerFormat.DIRECT:
        if ex.answer.derivation is not None:
            violations.append("unexpected derivation")
    elif ex.answer.derivation is None:
        violations.append("missing derivation")

    return violations
