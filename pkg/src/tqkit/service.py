"""HTTP service backing the playground: dataset browsing with gold answers,
table upload/download/delete backed by a directory-persisted store, and the
/ask pipeline over the configured LLM endpoint."""

from __future__ import annotations

import csv
import io
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from .errors import TqkError
from .ingest import example_to_dict, load_unified, parse_delimited, table_to_dict
from .linearize import TokenBudget, to_markdown
from .reasoner import (
    InputFormat,
    LlmEndpoint,
    PromptScheme,
    PromptSpec,
    answer_question,
    prompt_id,
)
from .retrieval import RetrieverConfig, UnitKind
from .tables import Answer, AnswerFormat, Category, QAExample, UnifiedTable

DOWNLOAD_FORMATS = ("csv", "json", "md")


@dataclass(frozen=True)
class ServiceConfig:
    datasets: dict[str, dict[str, Path]] = field(default_factory=dict)
    store_dir: Path = Path("tqkit-store")


def load_service_config(path: str | Path) -> ServiceConfig:
    """JSON config {datasets: {name: {split: jsonl path}}, store_dir};
    relative paths resolve against the config file's directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TqkError(f"bad service config: {exc.msg}") from None
    base = path.parent
    datasets = {
        str(name): {str(split): base / p for split, p in splits.items()}
        for name, splits in (raw.get("datasets") or {}).items()
    }
    store_dir = base / raw.get("store_dir", "tqkit-store")
    return ServiceConfig(datasets=datasets, store_dir=store_dir)


class TableStore:
    """Uploaded tables persisted to a directory, reloaded on restart.

    Each table is a raw delimited-text file plus a small metadata JSON;
    a lock serializes writers, parsed reads are lock-free.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._meta: dict[str, dict] = {}
        for meta_path in sorted(self.directory.glob("*.meta.json")):
            table_id = meta_path.name[: -len(".meta.json")]
            try:
                self._meta[table_id] = json.loads(
                    meta_path.read_text(encoding="utf-8")
                )
            except (OSError, json.JSONDecodeError):
                continue  # skip torn writes from a previous crash

    def _data_path(self, table_id: str) -> Path:
        return self.directory / f"{table_id}.txt"

    def _meta_path(self, table_id: str) -> Path:
        return self.directory / f"{table_id}.meta.json"

    def put(self, text: str, name: str) -> str:
        delimiter = "\t" if name.lower().endswith(".tsv") else ","
        parse_delimited(text, delimiter=delimiter)  # reject malformed uploads
        with self._lock:
            while True:
                table_id = uuid.uuid4().hex[:12]
                if table_id not in self._meta:
                    break
            meta = {
                "id": table_id,
                "name": name,
                "delimiter": delimiter,
                "uploaded_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            }
            self._data_path(table_id).write_text(text, encoding="utf-8")
            self._meta_path(table_id).write_text(
                json.dumps(meta), encoding="utf-8"
            )
            self._meta[table_id] = meta
        return table_id

    def raw(self, table_id: str) -> str:
        self.meta(table_id)
        return self._data_path(table_id).read_text(encoding="utf-8")

    def meta(self, table_id: str) -> dict:
        meta = self._meta.get(table_id)
        if meta is None:
            raise TqkError(f"unknown table id '{table_id}'")
        return meta

    def table(self, table_id: str) -> UnifiedTable:
        meta = self.meta(table_id)
        table = parse_delimited(
            self.raw(table_id), delimiter=meta.get("delimiter", ",")
        )
        return UnifiedTable(
            id=table_id,
            cells=table.cells,
            header_rows=table.header_rows,
            merged_regions=table.merged_regions,
            caption=meta.get("name"),
        )

    def delete(self, table_id: str) -> None:
        with self._lock:
            if table_id not in self._meta:
                raise TqkError(f"unknown table id '{table_id}'")
            del self._meta[table_id]
            self._data_path(table_id).unlink(missing_ok=True)
            self._meta_path(table_id).unlink(missing_ok=True)

    def list(self) -> list[dict]:
        with self._lock:
            items = sorted(
                self._meta.values(), key=lambda m: (m["uploaded_at"], m["id"])
            )
            return [dict(m) for m in items]


class _DatasetIndex:
    """Registered unified JSONL files, loaded lazily and cached."""

    def __init__(self, datasets: dict[str, dict[str, Path]]):
        self.datasets = datasets
        self._cache: dict[tuple[str, str], list[QAExample]] = {}
        self._lock = threading.Lock()

    def listing(self) -> list[dict]:
        return [
            {
                "name": name,
                "splits": [
                    {"split": split, "count": len(self.examples(name, split))}
                    for split in sorted(splits)
                ],
            }
            for name, splits in sorted(self.datasets.items())
        ]

    def examples(self, name: str, split: str) -> list[QAExample]:
        splits = self.datasets.get(name)
        if splits is None:
            raise TqkError(f"unknown dataset '{name}'")
        if split not in splits:
            raise TqkError(f"unknown split '{split}' of dataset '{name}'")
        key = (name, split)
        with self._lock:
            if key not in self._cache:
                self._cache[key] = list(load_unified(splits[split]))
            return self._cache[key]


def _csv_text(table: UnifiedTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for row in table.cells:
        writer.writerow([cell.text for cell in row])
    return out.getvalue()


def _parse_prompt_spec(raw: dict) -> PromptSpec:
    try:
        input_format = InputFormat(raw.get("input_format", "markdown"))
    except ValueError:
        raise TqkError(f"bad input_format '{raw.get('input_format')}'") from None
    try:
        scheme = PromptScheme(raw.get("scheme", "direct"))
    except ValueError:
        raise TqkError(f"bad scheme '{raw.get('scheme')}'") from None
    try:
        budget = TokenBudget(int(raw.get("max_tokens", 4096)))
    except ValueError as exc:
        raise TqkError(str(exc)) from None
    return PromptSpec(input_format=input_format, scheme=scheme, budget=budget)


def _parse_retriever_cfg(raw: dict | None) -> RetrieverConfig | None:
    if not raw:
        return None
    try:
        granularity = UnitKind(raw.get("granularity", "row"))
        return RetrieverConfig(
            granularity=granularity,
            top_k=int(raw.get("top_k", 5)),
            include_passages=bool(raw.get("include_passages", False)),
        )
    except ValueError as exc:
        raise TqkError(str(exc)) from None


def create_app(cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    app = FastAPI(title="tqkit service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    index = _DatasetIndex(cfg.datasets)
    store = TableStore(cfg.store_dir)
    app.state.store = store

    @app.get("/datasets")
    def list_datasets() -> JSONResponse:
        return JSONResponse(index.listing())

    @app.get("/datasets/{name}/{split}/{example_index}")
    def get_example(name: str, split: str, example_index: int) -> JSONResponse:
        try:
            examples = index.examples(name, split)
        except TqkError as exc:
            raise HTTPException(404, str(exc)) from None
        if not examples:
            raise HTTPException(404, f"dataset '{name}/{split}' is empty")
        if not 0 <= example_index < len(examples):
            raise HTTPException(
                404,
                f"index {example_index} out of range "
                f"(valid range 0..{len(examples) - 1})",
            )
        return JSONResponse(example_to_dict(examples[example_index]))

    @app.get("/tables")
    def list_tables() -> JSONResponse:
        return JSONResponse(store.list())

    @app.post("/tables")
    async def upload_table(request: Request, filename: str = "upload.csv"):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            uploads = [v for v in form.values() if hasattr(v, "read")]
            if not uploads:
                raise HTTPException(400, "multipart body contains no file")
            upload = uploads[0]
            text = (await upload.read()).decode("utf-8", errors="replace")
            filename = upload.filename or filename
        else:
            text = (await request.body()).decode("utf-8", errors="replace")
        if not text.strip():
            raise HTTPException(400, "empty table body")
        try:
            table_id = store.put(text, filename)
        except TqkError as exc:
            raise HTTPException(400, str(exc)) from None
        return JSONResponse({"id": table_id, "name": filename}, status_code=201)

    @app.delete("/tables/{table_id}")
    def delete_table(table_id: str) -> JSONResponse:
        try:
            store.delete(table_id)
        except TqkError as exc:
            raise HTTPException(404, str(exc)) from None
        return JSONResponse({"deleted": table_id})

    @app.get("/tables/{table_id}/download")
    def download_table(table_id: str, format: str = "csv"):
        if format not in DOWNLOAD_FORMATS:
            raise HTTPException(
                400,
                f"invalid format '{format}' "
                f"(valid: {', '.join(DOWNLOAD_FORMATS)})",
            )
        try:
            table = store.table(table_id)
        except TqkError as exc:
            raise HTTPException(404, str(exc)) from None
        if format == "json":
            return JSONResponse(table_to_dict(table))
        if format == "md":
            return PlainTextResponse(
                to_markdown(table), media_type="text/markdown; charset=utf-8"
            )
        return PlainTextResponse(
            _csv_text(table), media_type="text/csv; charset=utf-8"
        )

    def _resolve_source(source: str, question: str) -> QAExample:
        if "/" in source:
            parts = source.split("/")
            if len(parts) != 3 or not parts[2].isdigit():
                raise TqkError(
                    f"bad source '{source}' (want dataset/split/index or a "
                    "table id)"
                )
            name, split, idx_text = parts
            examples = index.examples(name, split)
            idx = int(idx_text)
            if not 0 <= idx < len(examples):
                raise TqkError(
                    f"index {idx} out of range (valid range 0..{len(examples) - 1})"
                )
            ex = examples[idx]
            return ex.with_question(question) if question else ex
        table = store.table(source)
        return QAExample(
            id=f"ask-{source}",
            dataset="upload",
            category=Category.SPREADSHEET,
            question=question,
            table=table,
            answer=Answer(AnswerFormat.DIRECT, ""),
        )

    @app.post("/ask")
    async def ask(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise HTTPException(400, "body must be JSON") from None
        source = str(body.get("source", ""))
        question = str(body.get("question", "")).strip()
        if not source:
            raise HTTPException(400, "missing source")
        try:
            ex = _resolve_source(source, question)
        except TqkError as exc:
            raise HTTPException(400, str(exc)) from None
        if not ex.question:
            raise HTTPException(400, "missing question")
        try:
            spec = _parse_prompt_spec(body.get("spec") or {})
            retriever_cfg = _parse_retriever_cfg(body.get("retrieve"))
        except TqkError as exc:
            raise HTTPException(400, str(exc)) from None
        try:
            endpoint = LlmEndpoint.from_env()
        except TqkError as exc:
            raise HTTPException(502, f"auth: {exc}") from None
        started = time.perf_counter()
        try:
            answer = await run_in_threadpool(
                answer_question, ex, spec, endpoint, retriever_cfg
            )
        except TqkError as exc:
            raise HTTPException(502, str(exc)) from None
        return JSONResponse(
            {
                "answer": answer.value,
                "derivation": answer.derivation,
                "prompt_id": prompt_id(spec),
                "timing": round(time.perf_counter() - started, 6),
            }
        )

    return app
