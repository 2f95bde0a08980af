"""LLM prompting pipeline: prompt construction over markdown or flattened
tables with direct, chain-of-thought, and program-of-thought schemes, an
OpenAI-compatible chat-completions client, answer extraction, and the
end-to-end ask pipeline.

Prompt templates are versioned through PROMPT_TEMPLATE_VERSION so reported
numbers can name the exact template that produced them.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum

import httpx

from .errors import TqkError
from .linearize import BudgetError, TokenBudget, count_tokens, keep_body_rows, \
    to_flatten, to_markdown
from .programs import execute_derivation, parse_program, parse_sql_draft
from .retrieval import RetrievalUnit, RetrieverConfig, retrieve
from .tables import Answer, AnswerFormat, QAExample

PROMPT_TEMPLATE_VERSION = "v1"


class InputFormat(Enum):
    MARKDOWN = "markdown"
    FLATTEN = "flatten"


class PromptScheme(Enum):
    DIRECT = "direct"
    COT = "cot"
    POT = "pot"


@dataclass(frozen=True)
class PromptSpec:
    input_format: InputFormat = InputFormat.MARKDOWN
    scheme: PromptScheme = PromptScheme.DIRECT
    shots: tuple[QAExample, ...] = ()
    budget: TokenBudget = field(default_factory=lambda: TokenBudget(4096))

    def __post_init__(self):
        object.__setattr__(self, "shots", tuple(self.shots))


@dataclass(frozen=True)
class LlmEndpoint:
    base_url: str
    model: str
    api_key: str = ""
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2
    backoff_s: float = 0.25
    max_in_flight: int = 4

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "LlmEndpoint":
        env = os.environ if env is None else env
        base_url = env.get("TQK_LLM_BASE_URL", "")
        model = env.get("TQK_LLM_MODEL", "")
        if not base_url or not model:
            raise TqkError(
                "endpoint not configured: set TQK_LLM_BASE_URL and TQK_LLM_MODEL"
            )
        return cls(
            base_url=base_url,
            model=model,
            api_key=env.get("TQK_LLM_API_KEY", ""),
        )


class LlmError(TqkError):
    pass


class LlmAuthError(LlmError):
    pass


def prompt_id(spec: PromptSpec) -> str:
    return (
        f"{PROMPT_TEMPLATE_VERSION}-{spec.input_format.value}"
        f"-{spec.scheme.value}-s{len(spec.shots)}"
    )


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------

_INSTRUCTIONS = {
    PromptScheme.DIRECT: (
        "Answer the question using the table and any passages. "
        "Respond with only the answer."
    ),
    PromptScheme.COT: (
        "Answer the question using the table and any passages. "
        'Reason step by step and finish with "the answer is <answer>".'
    ),
    PromptScheme.POT: (
        "Answer the question using the table and any passages. Respond with "
        "only a derivation in one of two forms: program steps op(a, b) over "
        "the ops add, subtract, multiply, divide, exp, greater, where #k "
        "references the value of step k, or a query "
        "SELECT [AGG(]column[)] FROM t [WHERE column OP literal [AND ...]] "
        "with AGG in MAX, MIN, COUNT, SUM, AVG and OP in =, >, <."
    ),
}

_CUE = {
    PromptScheme.DIRECT: "Answer:",
    PromptScheme.COT: "Answer:",
    PromptScheme.POT: "Program:",
}


def _render_table(ex: QAExample, fmt: InputFormat, body_rows: int | None) -> str:
    table = ex.table
    if body_rows is not None:
        table = keep_body_rows(table, body_rows)
    rendered = to_markdown(table) if fmt is InputFormat.MARKDOWN else to_flatten(table)
    lines = ["Table:"]
    if table.caption:
        lines.append(f"Caption: {table.caption}")
    lines.append(rendered)
    return "\n".join(lines)


def _render_units(units: list[RetrievalUnit]) -> str:
    return "\n".join(["Relevant units:"] + [f"- {u.text}" for u in units])


def _render_passages(ex: QAExample) -> str | None:
    if not ex.passages:
        return None
    lines = ["Passages:"]
    for p in ex.passages:
        lines.append(f"- {p.title}: {p.text}" if p.title else f"- {p.text}")
    return "\n".join(lines)


def _gold_line(ex: QAExample, scheme: PromptScheme) -> str:
    if scheme is PromptScheme.POT:
        derivation = ex.answer.derivation or ex.answer.value
        return f"Program: {derivation}"
    if scheme is PromptScheme.COT:
        return f"Answer: the answer is {ex.answer.value}."
    return f"Answer: {ex.answer.value}"


def _shot_block(shot: QAExample, spec: PromptSpec) -> str:
    parts = [_render_table(shot, spec.input_format, None)]
    passages = _render_passages(shot)
    if passages:
        parts.append(passages)
    parts.append(f"Question: {shot.question}\n{_gold_line(shot, spec.scheme)}")
    return "\n\n".join(parts)


def _target_block(
    ex: QAExample,
    spec: PromptSpec,
    retrieved: list[RetrievalUnit] | None,
    body_rows: int | None,
) -> str:
    if retrieved is not None:
        table_section = _render_units(retrieved)
    else:
        table_section = _render_table(ex, spec.input_format, body_rows)
    parts = [table_section]
    passages = _render_passages(ex)
    if passages:
        parts.append(passages)
    parts.append(f"Question: {ex.question}\n{_CUE[spec.scheme]}")
    return "\n\n".join(parts)


def _assemble(
    ex: QAExample,
    spec: PromptSpec,
    shots: list[QAExample],
    retrieved: list[RetrievalUnit] | None,
    body_rows: int | None,
) -> str:
    blocks = [_INSTRUCTIONS[spec.scheme]]
    blocks.extend(_shot_block(s, spec) for s in shots)
    blocks.append(_target_block(ex, spec, retrieved, body_rows))
    return "\n\n".join(blocks)


def build_prompt(
    ex: QAExample,
    spec: PromptSpec,
    retrieved: list[RetrievalUnit] | None = None,
) -> str:
    """Deterministic prompt: instruction, few-shot blocks, target table (or
    retrieved units), passages, question, completion cue.

    Over budget, target body rows are truncated first; then shots are
    dropped from the tail and truncation retried. Raises BudgetError when
    even zero shots and a header-only table cannot fit.
    """
    budget = spec.budget

    def fits(text: str) -> bool:
        return count_tokens(text, budget.vocab_path) <= budget.max_tokens

    n_body = ex.table.n_rows - ex.table.header_rows
    for n_shots in range(len(spec.shots), -1, -1):
        shots = list(spec.shots[:n_shots])
        prompt = _assemble(ex, spec, shots, retrieved, None)
        if fits(prompt):
            return prompt
        if retrieved is None:
            for keep in range(n_body - 1, -1, -1):
                prompt = _assemble(ex, spec, shots, retrieved, keep)
                if fits(prompt):
                    return prompt
    raise BudgetError("budget unsatisfiable")


# ---------------------------------------------------------------------------
# Completion client
# ---------------------------------------------------------------------------

_TRANSIENT_STATUSES = {429, 500, 502, 503, 504}


class LlmClient:
    """Chat-completions client with exponential backoff on transient
    failures and a bounded in-flight request cap."""

    def __init__(self, endpoint: LlmEndpoint):
        self.endpoint = endpoint
        self.last_retries = 0
        self._gate = threading.BoundedSemaphore(endpoint.max_in_flight)

    def complete(self, prompt: str) -> str:
        ep = self.endpoint
        url = ep.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if ep.api_key:
            headers["Authorization"] = f"Bearer {ep.api_key}"
        payload = {
            "model": ep.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": ep.temperature,
        }
        self.last_retries = 0
        attempt = 0
        with self._gate:
            while True:
                error: str
                try:
                    response = httpx.post(
                        url, json=payload, headers=headers, timeout=ep.timeout
                    )
                except httpx.HTTPError as exc:
                    error = f"transport failure: {exc}"
                else:
                    if response.status_code in (401, 403):
                        raise LlmAuthError(f"auth failure ({response.status_code})")
                    if response.status_code == 200:
                        return _completion_text(response)
                    if response.status_code not in _TRANSIENT_STATUSES:
                        raise LlmError(f"unexpected status {response.status_code}")
                    error = f"status {response.status_code}"
                if attempt >= ep.max_retries:
                    raise LlmError(f"gave up after {attempt} retries: {error}")
                time.sleep(ep.backoff_s * (2 ** attempt))
                attempt += 1
                self.last_retries = attempt


def _completion_text(response: httpx.Response) -> str:
    try:
        body = response.json()
        text = body["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        raise LlmError("malformed response body") from None
    if not isinstance(text, str):
        raise LlmError("malformed response body")
    return text


def complete(endpoint: LlmEndpoint, prompt: str) -> str:
    return LlmClient(endpoint).complete(prompt)


# ---------------------------------------------------------------------------
# Answer extraction and the full pipeline
# ---------------------------------------------------------------------------

COT_MARKER = "answer is"


def extract_answer(
    raw: str, scheme: PromptScheme, cot_marker: str = COT_MARKER
) -> tuple[str, str | None]:
    """(answer, derivation) per scheme.

    Direct: the trimmed text. CoT: text after the last (case-insensitive)
    marker, one trailing period stripped, falling back to the last line.
    PoT: answer empty, derivation the longest suffix that parses as a
    program or SQL draft, or None when nothing parses.
    """
    if scheme is PromptScheme.DIRECT:
        return raw.strip(), None
    if scheme is PromptScheme.COT:
        idx = raw.lower().rfind(cot_marker.lower())
        if idx >= 0:
            answer = raw[idx + len(cot_marker):].strip()
            answer = answer.lstrip(":").strip()
        else:
            lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
            answer = lines[-1] if lines else ""
        if answer.endswith("."):
            answer = answer[:-1].strip()
        return answer, None
    for i in range(len(raw)):
        if i > 0 and raw[i - 1].isalnum():
            continue  # suffixes never start mid-word
        candidate = raw[i:].strip()
        if not candidate:
            break
        if _parses_as_derivation(candidate):
            return "", candidate
    return "", None


def _parses_as_derivation(text: str) -> bool:
    try:
        parse_program(text)
        return True
    except TqkError:
        pass
    try:
        parse_sql_draft(text)
        return True
    except TqkError:
        return False


def answer_question(
    ex: QAExample,
    spec: PromptSpec,
    endpoint: LlmEndpoint,
    retriever_cfg: RetrieverConfig | None = None,
    client: LlmClient | None = None,
) -> Answer:
    """Optional retrieval, prompt, completion, extraction, and (for PoT)
    derivation execution. Stage failures propagate with a stage label."""
    retrieved = None
    if retriever_cfg is not None:
        try:
            ranked = retrieve(ex, retriever_cfg)
        except TqkError as exc:
            raise TqkError(f"retrieve: {exc}") from None
        retrieved = [unit for unit, _ in ranked]
    try:
        prompt = build_prompt(ex, spec, retrieved)
    except TqkError as exc:
        raise TqkError(f"prompt: {exc}") from None
    if client is None:
        client = LlmClient(endpoint)
    try:
        raw = client.complete(prompt)
    except TqkError as exc:
        raise TqkError(f"complete: {exc}") from None
    answer, derivation = extract_answer(raw, spec.scheme)
    if spec.scheme is not PromptScheme.POT:
        return Answer(AnswerFormat.DIRECT, answer)
    if derivation is None:
        raise TqkError("extract: no parseable derivation in completion")
    try:
        value, fmt = execute_derivation(derivation, ex.table)
    except TqkError as exc:
        raise TqkError(f"execute: {exc}") from None
    return Answer(fmt, value, derivation)
