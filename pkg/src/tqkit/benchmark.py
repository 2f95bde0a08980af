"""Benchmark assembly: per-category quotas, table token-length filters,
seeded sampling, and a statistics report that names its tokenizer (token
counts from different tokenizers must never be compared silently)."""

from __future__ import annotations

import configparser
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import TqkError
from .ingest import load_unified, save_unified
from .linearize import count_tokens, to_markdown
from .tables import Category, QAExample

DEFAULT_QUOTAS = {
    Category.SPREADSHEET: 300,
    Category.ENCYCLOPEDIA: 300,
    Category.STRUCTURED: 400,
}

# Assembly writes categories in this fixed order.
CATEGORY_ORDER = (Category.SPREADSHEET, Category.ENCYCLOPEDIA, Category.STRUCTURED)


@dataclass(frozen=True)
class BenchConfig:
    quotas: dict[Category, int] = field(
        default_factory=lambda: dict(DEFAULT_QUOTAS)
    )
    min_table_tokens: dict[Category, int] = field(default_factory=dict)
    max_table_tokens: dict[Category, int] = field(default_factory=dict)
    seed: int = 0
    vocab_path: str | None = None

    def __post_init__(self):
        for cat, quota in self.quotas.items():
            if quota < 0:
                raise ValueError(f"negative quota for {cat.value}")
        for bounds in (self.min_table_tokens, self.max_table_tokens):
            for cat, bound in bounds.items():
                if bound is not None and bound < 0:
                    raise ValueError(f"negative bound for {cat.value}")
        for cat, lower in self.min_table_tokens.items():
            upper = self.max_table_tokens.get(cat)
            if lower is not None and upper is not None and lower >= upper:
                raise ValueError(f"bounds for {cat.value} must satisfy lower < upper")


@dataclass(frozen=True)
class StatsReport:
    tokenizer: str
    per_category: dict[str, dict]
    total: int
    mean_table_tokens: float

    def to_dict(self) -> dict:
        return {
            "tokenizer": self.tokenizer,
            "per_category": self.per_category,
            "total": self.total,
            "mean_table_tokens": self.mean_table_tokens,
        }


def table_tokens(ex: QAExample, vocab_path: str | None = None) -> int:
    return count_tokens(to_markdown(ex.table), vocab_path)


def filter_by_length(
    examples: Iterable[QAExample],
    lower: int | None,
    upper: int | None,
    vocab_path: str | None = None,
) -> Iterator[QAExample]:
    """Keep examples whose table-markdown token count t satisfies
    lower < t < upper; an unset bound is no constraint."""
    for ex in examples:
        t = table_tokens(ex, vocab_path)
        if lower is not None and t <= lower:
            continue
        if upper is not None and t >= upper:
            continue
        yield ex


def sample_quota(
    examples: Iterable[QAExample], quota: int, seed: int
) -> list[QAExample]:
    """Uniform sample without replacement, reproducible from the seed, with
    the input order preserved in the output."""
    pool = list(examples)
    if len(pool) < quota:
        raise TqkError(f"need {quota}, have {len(pool)}")
    picked = random.Random(seed).sample(range(len(pool)), quota)
    return [pool[i] for i in sorted(picked)]


def assemble(
    cfg: BenchConfig,
    inputs: dict[Category, str | Path],
    out_path: str | Path,
) -> StatsReport:
    """Filter, sample, and concatenate per-category inputs into one unified
    JSONL benchmark. Input files are expected to hold their category's
    examples; records of other categories are skipped."""
    chosen: list[QAExample] = []
    per_category: dict[str, dict] = {}
    for cat in CATEGORY_ORDER:
        quota = cfg.quotas.get(cat, 0)
        if quota == 0:
            continue
        if cat not in inputs:
            raise TqkError(f"{cat.value}: no input file configured")
        stream = (ex for ex in load_unified(inputs[cat]) if ex.category is cat)
        filtered = filter_by_length(
            stream,
            cfg.min_table_tokens.get(cat),
            cfg.max_table_tokens.get(cat),
            cfg.vocab_path,
        )
        try:
            sample = sample_quota(filtered, quota, cfg.seed)
        except TqkError as exc:
            raise TqkError(f"{cat.value}: {exc}") from None
        token_counts = [table_tokens(ex, cfg.vocab_path) for ex in sample]
        per_category[cat.value] = {
            "count": len(sample),
            "mean_table_tokens": sum(token_counts) / len(token_counts),
        }
        chosen.extend(sample)
    if not chosen:
        raise TqkError("empty benchmark: all quotas are zero")
    save_unified(chosen, out_path)
    all_counts = [table_tokens(ex, cfg.vocab_path) for ex in chosen]
    return StatsReport(
        tokenizer=cfg.vocab_path or "default",
        per_category=per_category,
        total=len(chosen),
        mean_table_tokens=sum(all_counts) / len(all_counts),
    )


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------

_TOP_KEYS = {"seed", "out", "vocab"}
_CATEGORY_KEYS = {"quota", "input", "min_table_tokens", "max_table_tokens"}


def load_bench_config(
    path: str | Path,
) -> tuple[BenchConfig, dict[Category, Path], Path]:
    """Plain-text config: top-level key=value lines for seed/out/vocab and
    one [CategoryName] section per category with quota/input/bounds.
    Returns (config, input paths, output path)."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(strict=False)
    try:
        parser.read_string("[bench]\n" + text)
    except configparser.Error as exc:
        raise TqkError(f"bad config: {exc}") from None

    top = parser["bench"]
    for key in top:
        if key not in _TOP_KEYS:
            raise TqkError(f"unknown config key '{key}'")
    out = top.get("out")
    if not out:
        raise TqkError("config missing 'out'")

    by_value = {c.value: c for c in Category}
    quotas: dict[Category, int] = {}
    lowers: dict[Category, int] = {}
    uppers: dict[Category, int] = {}
    inputs: dict[Category, Path] = {}
    for section in parser.sections():
        if section == "bench":
            continue
        if section not in by_value:
            raise TqkError(
                f"unknown category '{section}' "
                f"(valid: {', '.join(c.value for c in Category)})"
            )
        cat = by_value[section]
        for key in parser[section]:
            if key not in _CATEGORY_KEYS:
                raise TqkError(f"unknown config key '{key}' in [{section}]")
        sec = parser[section]
        if "quota" in sec:
            quotas[cat] = sec.getint("quota")
        if "input" in sec:
            inputs[cat] = Path(sec["input"])
        if "min_table_tokens" in sec:
            lowers[cat] = sec.getint("min_table_tokens")
        if "max_table_tokens" in sec:
            uppers[cat] = sec.getint("max_table_tokens")

    cfg = BenchConfig(
        quotas=quotas or dict(DEFAULT_QUOTAS),
        min_table_tokens=lowers,
        max_table_tokens=uppers,
        seed=top.getint("seed", 0),
        vocab_path=top.get("vocab") or None,
    )
    return cfg, inputs, Path(out)
