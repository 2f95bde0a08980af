"""HTTP service tests: config loading, the persisted table store, and the
REST surface exercised through an in-process test client."""

import json

import pytest
from fastapi.testclient import TestClient

from tqkit import (
    Answer,
    AnswerFormat,
    Category,
    QAExample,
    ServiceConfig,
    TableStore,
    TqkError,
    create_app,
    load_service_config,
    save_unified,
)
from tqkit.ingest import example_to_dict

from helpers import make_table
from mock_llm import MockLlm

CSV_TEXT = "Name,Age\nAlice,34\nBob,28\n"


def demo_example(i):
    table = make_table(
        (("Name", "Age"), ("Alice", "34"), ("Bob", "28")),
        table_id=f"t{i}",
    )
    return QAExample(
        id=f"demo-{i}",
        dataset="demo",
        category=Category.ENCYCLOPEDIA,
        question=f"How old is Alice in row {i}?",
        table=table,
        answer=Answer(AnswerFormat.DIRECT, "34"),
    )


def make_client(tmp_path, n=3):
    data = tmp_path / "demo-dev.jsonl"
    save_unified([demo_example(i) for i in range(n)], data)
    cfg = ServiceConfig(
        datasets={"demo": {"dev": data}}, store_dir=tmp_path / "store"
    )
    return TestClient(create_app(cfg))


def set_endpoint(monkeypatch, llm):
    monkeypatch.setenv("TQK_LLM_BASE_URL", llm.base_url)
    monkeypatch.setenv("TQK_LLM_MODEL", "mock-model")
    monkeypatch.delenv("TQK_LLM_API_KEY", raising=False)


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------


def test_load_service_config_resolves_relative_paths(tmp_path):
    (tmp_path / "svc.json").write_text(
        json.dumps(
            {
                "datasets": {"demo": {"dev": "data/demo.jsonl"}},
                "store_dir": "blobs",
            }
        ),
        encoding="utf-8",
    )
    cfg = load_service_config(tmp_path / "svc.json")
    assert cfg.datasets == {"demo": {"dev": tmp_path / "data" / "demo.jsonl"}}
    assert cfg.store_dir == tmp_path / "blobs"


def test_load_service_config_defaults(tmp_path):
    (tmp_path / "svc.json").write_text("{}", encoding="utf-8")
    cfg = load_service_config(tmp_path / "svc.json")
    assert cfg.datasets == {}
    assert cfg.store_dir == tmp_path / "tqkit-store"


def test_load_service_config_rejects_bad_json(tmp_path):
    (tmp_path / "svc.json").write_text("{nope", encoding="utf-8")
    with pytest.raises(TqkError, match="bad service config"):
        load_service_config(tmp_path / "svc.json")


# ---------------------------------------------------------------------------
# Table store
# ---------------------------------------------------------------------------


def test_store_put_and_read_back(tmp_path):
    store = TableStore(tmp_path / "store")
    table_id = store.put(CSV_TEXT, "people.csv")
    assert len(table_id) == 12
    int(table_id, 16)  # ids are hex
    assert store.raw(table_id) == CSV_TEXT
    meta = store.meta(table_id)
    assert meta["id"] == table_id
    assert meta["name"] == "people.csv"
    assert meta["delimiter"] == ","
    assert "T" in meta["uploaded_at"]
    table = store.table(table_id)
    assert table.id == table_id
    assert table.caption == "people.csv"
    assert table.header_rows == 1
    assert [c.text for c in table.cells[1]] == ["Alice", "34"]


def test_store_tsv_name_selects_tab_delimiter(tmp_path):
    store = TableStore(tmp_path)
    table_id = store.put("a\tb\n1\t2\n", "grid.tsv")
    assert store.meta(table_id)["delimiter"] == "\t"
    assert [c.text for c in store.table(table_id).cells[0]] == ["a", "b"]


def test_store_rejects_malformed_upload(tmp_path):
    store = TableStore(tmp_path)
    with pytest.raises(TqkError, match="row"):
        store.put('"a"b,c\n', "bad.csv")
    assert store.list() == []


def test_store_unknown_id(tmp_path):
    store = TableStore(tmp_path)
    for call in (store.raw, store.meta, store.table, store.delete):
        with pytest.raises(TqkError, match="unknown table id 'zzz'"):
            call("zzz")


def test_store_delete_removes_files(tmp_path):
    store = TableStore(tmp_path)
    table_id = store.put(CSV_TEXT, "people.csv")
    store.delete(table_id)
    assert store.list() == []
    assert list(tmp_path.glob("*")) == []
    with pytest.raises(TqkError):
        store.delete(table_id)


def test_store_reloads_from_directory(tmp_path):
    first = TableStore(tmp_path)
    table_id = first.put(CSV_TEXT, "people.csv")
    second = TableStore(tmp_path)
    assert second.raw(table_id) == CSV_TEXT
    assert second.meta(table_id)["name"] == "people.csv"


def test_store_skips_torn_meta_files(tmp_path):
    (tmp_path / "deadbeef0000.meta.json").write_text("{torn", encoding="utf-8")
    store = TableStore(tmp_path)
    assert store.list() == []


def test_store_list_sorts_by_upload_time_then_id(tmp_path):
    for table_id, stamp in (
        ("b" * 12, "2026-01-02T00:00:00Z"),
        ("a" * 12, "2026-01-03T00:00:00Z"),
        ("c" * 12, "2026-01-02T00:00:00Z"),
    ):
        (tmp_path / f"{table_id}.txt").write_text(CSV_TEXT, encoding="utf-8")
        (tmp_path / f"{table_id}.meta.json").write_text(
            json.dumps({"id": table_id, "name": "x.csv", "uploaded_at": stamp}),
            encoding="utf-8",
        )
    store = TableStore(tmp_path)
    assert [m["id"] for m in store.list()] == ["b" * 12, "c" * 12, "a" * 12]


# ---------------------------------------------------------------------------
# Dataset endpoints
# ---------------------------------------------------------------------------


def test_list_datasets(tmp_path):
    client = make_client(tmp_path)
    resp = client.get("/datasets")
    assert resp.status_code == 200
    assert resp.json() == [
        {"name": "demo", "splits": [{"split": "dev", "count": 3}]}
    ]


def test_get_example_round_trips_unified_dict(tmp_path):
    client = make_client(tmp_path)
    resp = client.get("/datasets/demo/dev/1")
    assert resp.status_code == 200
    assert resp.json() == example_to_dict(demo_example(1))


def test_get_example_unknown_dataset_and_split(tmp_path):
    client = make_client(tmp_path)
    resp = client.get("/datasets/nope/dev/0")
    assert resp.status_code == 404
    assert resp.json()["detail"] == "unknown dataset 'nope'"
    resp = client.get("/datasets/demo/test/0")
    assert resp.status_code == 404
    assert resp.json()["detail"] == "unknown split 'test' of dataset 'demo'"


def test_get_example_out_of_range(tmp_path):
    client = make_client(tmp_path)
    resp = client.get("/datasets/demo/dev/99")
    assert resp.status_code == 404
    assert resp.json()["detail"] == "index 99 out of range (valid range 0..2)"


def test_get_example_empty_split(tmp_path):
    data = tmp_path / "empty.jsonl"
    save_unified([], data)
    cfg = ServiceConfig(
        datasets={"demo": {"dev": data}}, store_dir=tmp_path / "store"
    )
    client = TestClient(create_app(cfg))
    resp = client.get("/datasets/demo/dev/0")
    assert resp.status_code == 404
    assert resp.json()["detail"] == "dataset 'demo/dev' is empty"


# ---------------------------------------------------------------------------
# Table endpoints
# ---------------------------------------------------------------------------


def test_upload_raw_body_and_list(tmp_path):
    client = make_client(tmp_path)
    assert client.get("/tables").json() == []
    resp = client.post("/tables?filename=people.csv", content=CSV_TEXT)
    assert resp.status_code == 201
    body = resp.json()
    assert body["name"] == "people.csv"
    listed = client.get("/tables").json()
    assert [m["id"] for m in listed] == [body["id"]]
    assert listed[0]["name"] == "people.csv"


def test_upload_default_filename(tmp_path):
    client = make_client(tmp_path)
    resp = client.post("/tables", content=CSV_TEXT)
    assert resp.status_code == 201
    assert resp.json()["name"] == "upload.csv"


def test_upload_multipart_uses_file_name(tmp_path):
    client = make_client(tmp_path)
    resp = client.post(
        "/tables",
        files={"file": ("grid.tsv", b"a\tb\n1\t2\n", "text/tab-separated-values")},
    )
    assert resp.status_code == 201
    table_id = resp.json()["id"]
    assert resp.json()["name"] == "grid.tsv"
    # tsv upload converts through the tab delimiter on download
    got = client.get(f"/tables/{table_id}/download", params={"format": "csv"})
    assert got.text == "a,b\n1,2\n"


def test_upload_multipart_without_file(tmp_path):
    client = make_client(tmp_path)
    boundary = "b0undary"
    body = (
        f"--{boundary}\r\n"
        'Content-Disposition: form-data; name="note"\r\n\r\n'
        "hello\r\n"
        f"--{boundary}--\r\n"
    )
    resp = client.post(
        "/tables",
        content=body,
        headers={"content-type": f"multipart/form-data; boundary={boundary}"},
    )
    assert resp.status_code == 400
    assert resp.json()["detail"] == "multipart body contains no file"


def test_upload_rejections(tmp_path):
    client = make_client(tmp_path)
    resp = client.post("/tables", content="   \n  ")
    assert resp.status_code == 400
    assert resp.json()["detail"] == "empty table body"
    resp = client.post("/tables", content='"a"b,c\n')
    assert resp.status_code == 400
    assert "row" in resp.json()["detail"]


def test_delete_table(tmp_path):
    client = make_client(tmp_path)
    table_id = client.post("/tables", content=CSV_TEXT).json()["id"]
    resp = client.delete(f"/tables/{table_id}")
    assert resp.status_code == 200
    assert resp.json() == {"deleted": table_id}
    assert client.delete(f"/tables/{table_id}").status_code == 404


def test_download_formats(tmp_path):
    client = make_client(tmp_path)
    text = 'Name,Note\nAlice,"likes, commas"\n'
    table_id = client.post("/tables?filename=notes.csv", content=text).json()["id"]

    got = client.get(f"/tables/{table_id}/download", params={"format": "csv"})
    assert got.status_code == 200
    assert got.headers["content-type"].startswith("text/csv")
    assert got.text == text

    got = client.get(f"/tables/{table_id}/download", params={"format": "md"})
    assert got.headers["content-type"].startswith("text/markdown")
    assert got.text == (
        "| Name | Note |\n| --- | --- |\n| Alice | likes, commas |"
    )

    got = client.get(f"/tables/{table_id}/download", params={"format": "json"})
    body = got.json()
    assert body["id"] == table_id
    assert body["caption"] == "notes.csv"
    assert body["header_rows"] == 1
    assert body["cells"][1][1]["text"] == "likes, commas"


def test_download_defaults_to_csv(tmp_path):
    client = make_client(tmp_path)
    table_id = client.post("/tables", content=CSV_TEXT).json()["id"]
    got = client.get(f"/tables/{table_id}/download")
    assert got.text == CSV_TEXT


def test_download_bad_format_and_unknown_id(tmp_path):
    client = make_client(tmp_path)
    table_id = client.post("/tables", content=CSV_TEXT).json()["id"]
    resp = client.get(f"/tables/{table_id}/download", params={"format": "xlsx"})
    assert resp.status_code == 400
    assert resp.json()["detail"] == "invalid format 'xlsx' (valid: csv, json, md)"
    resp = client.get("/tables/zzz/download")
    assert resp.status_code == 404
    assert resp.json()["detail"] == "unknown table id 'zzz'"


def test_app_exposes_store(tmp_path):
    app = create_app(ServiceConfig(store_dir=tmp_path / "store"))
    assert isinstance(app.state.store, TableStore)


# ---------------------------------------------------------------------------
# /ask
# ---------------------------------------------------------------------------


def test_ask_requires_json_body_and_source(tmp_path):
    client = make_client(tmp_path)
    resp = client.post("/ask", content="{nope")
    assert resp.status_code == 400
    assert resp.json()["detail"] == "body must be JSON"
    resp = client.post("/ask", json={"question": "?"})
    assert resp.status_code == 400
    assert resp.json()["detail"] == "missing source"


def test_ask_bad_source_forms(tmp_path):
    client = make_client(tmp_path)
    for source in ("demo/dev", "demo/dev/x", "a/b/c/0"):
        resp = client.post("/ask", json={"source": source, "question": "?"})
        assert resp.status_code == 400
        assert "bad source" in resp.json()["detail"]
    resp = client.post("/ask", json={"source": "nope/dev/0", "question": "?"})
    assert resp.status_code == 400
    assert resp.json()["detail"] == "unknown dataset 'nope'"
    resp = client.post("/ask", json={"source": "demo/dev/99", "question": "?"})
    assert resp.status_code == 400
    assert "index 99 out of range" in resp.json()["detail"]
    resp = client.post("/ask", json={"source": "deadbeef", "question": "?"})
    assert resp.status_code == 400
    assert resp.json()["detail"] == "unknown table id 'deadbeef'"


def test_ask_table_source_requires_question(tmp_path):
    client = make_client(tmp_path)
    table_id = client.post("/tables", content=CSV_TEXT).json()["id"]
    resp = client.post("/ask", json={"source": table_id})
    assert resp.status_code == 400
    assert resp.json()["detail"] == "missing question"


def test_ask_validates_spec_and_retrieve(tmp_path):
    client = make_client(tmp_path)
    resp = client.post(
        "/ask", json={"source": "demo/dev/0", "spec": {"input_format": "xml"}}
    )
    assert resp.status_code == 400
    assert resp.json()["detail"] == "bad input_format 'xml'"
    resp = client.post(
        "/ask", json={"source": "demo/dev/0", "spec": {"scheme": "fancy"}}
    )
    assert resp.status_code == 400
    assert resp.json()["detail"] == "bad scheme 'fancy'"
    resp = client.post(
        "/ask", json={"source": "demo/dev/0", "spec": {"max_tokens": 0}}
    )
    assert resp.status_code == 400
    assert resp.json()["detail"] == "max_tokens must be >= 1"
    resp = client.post(
        "/ask",
        json={"source": "demo/dev/0", "retrieve": {"granularity": "table"}},
    )
    assert resp.status_code == 400
    resp = client.post(
        "/ask",
        json={"source": "demo/dev/0", "retrieve": {"granularity": "row", "top_k": 0}},
    )
    assert resp.status_code == 400
    assert resp.json()["detail"] == "top_k must be >= 1"


def test_ask_unconfigured_endpoint(tmp_path, monkeypatch):
    monkeypatch.delenv("TQK_LLM_BASE_URL", raising=False)
    monkeypatch.delenv("TQK_LLM_MODEL", raising=False)
    client = make_client(tmp_path)
    resp = client.post("/ask", json={"source": "demo/dev/0"})
    assert resp.status_code == 502
    assert resp.json()["detail"] == (
        "auth: endpoint not configured: set TQK_LLM_BASE_URL and TQK_LLM_MODEL"
    )


def test_ask_dataset_source_direct(tmp_path, monkeypatch):
    client = make_client(tmp_path)
    with MockLlm(reply=lambda prompt: "34") as llm:
        set_endpoint(monkeypatch, llm)
        resp = client.post("/ask", json={"source": "demo/dev/0"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["answer"] == "34"
        assert body["derivation"] is None
        assert body["prompt_id"] == "v1-markdown-direct-s0"
        assert body["timing"] >= 0
        # the example's own question reaches the prompt untouched
        assert "How old is Alice in row 0?" in llm.prompts[0]


def test_ask_dataset_source_question_override(tmp_path, monkeypatch):
    client = make_client(tmp_path)
    with MockLlm(reply=lambda prompt: "28") as llm:
        set_endpoint(monkeypatch, llm)
        resp = client.post(
            "/ask",
            json={"source": "demo/dev/0", "question": "How old is Bob?"},
        )
        assert resp.status_code == 200
        assert "How old is Bob?" in llm.prompts[0]
        assert "How old is Alice" not in llm.prompts[0]


def test_ask_uploaded_table_pot(tmp_path, monkeypatch):
    client = make_client(tmp_path)
    table_id = client.post("/tables", content=CSV_TEXT).json()["id"]
    with MockLlm(reply=lambda prompt: "subtract(34, 28)") as llm:
        set_endpoint(monkeypatch, llm)
        resp = client.post(
            "/ask",
            json={
                "source": table_id,
                "question": "Age gap between Alice and Bob?",
                "spec": {"scheme": "pot", "input_format": "flatten"},
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["answer"] == "6"
        assert body["derivation"] == "subtract(34, 28)"
        assert body["prompt_id"] == "v1-flatten-pot-s0"
        assert "Alice" in llm.prompts[0]


def test_ask_with_retrieval_narrows_prompt(tmp_path, monkeypatch):
    client = make_client(tmp_path)
    with MockLlm(reply=lambda prompt: "34") as llm:
        set_endpoint(monkeypatch, llm)
        resp = client.post(
            "/ask",
            json={
                "source": "demo/dev/0",
                "question": "Alice age?",
                "retrieve": {"granularity": "row", "top_k": 1},
            },
        )
        assert resp.status_code == 200
        prompt = llm.prompts[0]
        assert "Alice" in prompt
        assert "Bob" not in prompt


def test_ask_surfaces_pipeline_failures_as_502(tmp_path, monkeypatch):
    client = make_client(tmp_path)
    with MockLlm(fail_first=[404]) as llm:
        set_endpoint(monkeypatch, llm)
        resp = client.post("/ask", json={"source": "demo/dev/0"})
    assert resp.status_code == 502
    assert resp.json()["detail"] == "complete: unexpected status 404"
