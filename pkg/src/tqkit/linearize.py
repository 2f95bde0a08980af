"""Table serialization for prompts: markdown and flattened-sentence forms,
token counting, and row truncation to a token budget."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import TqkError
from .tables import Cell, UnifiedTable, header_paths


class BudgetError(TqkError):
    """Raised when a token budget cannot accommodate even the table header."""


@dataclass(frozen=True)
class TokenBudget:
    """A token ceiling plus the tokenizer that measures against it.

    vocab_path=None selects the built-in counting rule; a path selects
    greedy longest-match over that vocabulary file (one token per line).
    """

    max_tokens: int
    vocab_path: str | None = None

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def _escape_md(text: str) -> str:
    return text.replace("|", "\\|")


def to_markdown(table: UnifiedTable) -> str:
    """Render as a markdown table.

    Multi-row headers collapse into a single header row by joining each
    column's non-empty header texts with " / ". Pipes in cell text are
    escaped as "\\|".
    """
    headers = [_escape_md(h) for h in header_paths(table)]
    lines = ["| " + " | ".join(headers) + " |"]
    lines.append("| " + " | ".join("---" for _ in headers) + " |")
    for row in table.body_rows():
        lines.append("| " + " | ".join(_escape_md(c.text) for c in row) + " |")
    return "\n".join(lines)


def flatten_row(headers: list[str], row: tuple[Cell, ...], k: int) -> str:
    """One body row as a sentence: "row k: H1 is c1 ; H2 is c2". Empty cells
    render as "-"."""
    parts = [
        f"{h} is {cell.text if cell.text != '' else '-'}"
        for h, cell in zip(headers, row)
    ]
    return f"row {k}: " + " ; ".join(parts)


def to_flatten(table: UnifiedTable) -> str:
    """Render as one sentence per body row, rows separated by newlines."""
    headers = header_paths(table)
    return "\n".join(
        flatten_row(headers, row, k)
        for k, row in enumerate(table.body_rows(), start=1)
    )


def _default_token_count(text: str) -> int:
    # A token is a maximal run of alphanumerics or a single punctuation
    # character; whitespace separates and is never counted.
    count = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isalnum():
            while i < n and text[i].isalnum():
                i += 1
        else:
            i += 1
        count += 1
    return count


@lru_cache(maxsize=8)
def _load_vocab(path: str) -> tuple[frozenset[str], int]:
    try:
        with open(path, encoding="utf-8") as fh:
            entries = frozenset(line.rstrip("\n") for line in fh if line.rstrip("\n"))
    except OSError as exc:
        raise TqkError(f"unreadable vocab file {path}: {exc}") from exc
    max_len = max((len(e) for e in entries), default=1)
    return entries, max_len


def _plugged_token_count(text: str, vocab_path: str) -> int:
    vocab, max_len = _load_vocab(vocab_path)
    count = 0
    i = 0
    n = len(text)
    while i < n:
        matched = 0
        for length in range(min(max_len, n - i), 0, -1):
            if text[i:i + length] in vocab:
                matched = length
                break
        if matched:
            i += matched
            count += 1
        elif text[i].isspace():
            i += 1
        else:
            i += 1
            count += 1
    return count


def count_tokens(text: str, vocab_path: str | None = None) -> int:
    """Token count under the built-in rule, or greedy longest-match when a
    vocabulary file is plugged in."""
    if vocab_path is None:
        return _default_token_count(text)
    return _plugged_token_count(text, vocab_path)


def truncate_rows(table: UnifiedTable, budget: TokenBudget) -> UnifiedTable:
    """Keep the header plus the longest body-row prefix whose markdown
    rendering fits the budget. Raises BudgetError when the header alone
    does not fit."""
    header_only = keep_body_rows(table, 0)
    if count_tokens(to_markdown(header_only), budget.vocab_path) > budget.max_tokens:
        raise BudgetError("budget too small")
    n_body = table.n_rows - table.header_rows
    for keep in range(n_body, -1, -1):
        candidate = keep_body_rows(table, keep)
        if count_tokens(to_markdown(candidate), budget.vocab_path) <= budget.max_tokens:
            return candidate
    return header_only


def keep_body_rows(table: UnifiedTable, keep: int) -> UnifiedTable:
    """The table cut to its first `keep` body rows; merged regions that
    extend past the cut are dropped."""
    total = table.header_rows + keep
    if total >= table.n_rows:
        return table
    kept_regions = tuple(
        r for r in table.merged_regions if r[2] < total
    )
    return UnifiedTable(
        id=table.id,
        cells=table.cells[:total],
        header_rows=table.header_rows,
        merged_regions=kept_regions,
        caption=table.caption,
    )
