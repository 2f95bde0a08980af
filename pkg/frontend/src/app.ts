// Playground shell: two modes against the question-answering service.
// Default Dataset QA browses packaged examples; Custom Table QA uploads a
// table and asks questions against it. The page is a thin client: every
// displayed value comes from a service response.

import { Api, ApiError } from "./api";
import type { DatasetInfo } from "./api";
import { el, renderExample, renderHistory } from "./render";
import { ViewState } from "./state";

/** Minimal file surface so tests can pass plain objects instead of File. */
export interface UploadSource {
  name: string;
  text(): Promise<string>;
  arrayBuffer(): Promise<ArrayBuffer>;
}

export interface AppHandle {
  state: ViewState;
  /** Resolves once every operation queued so far has settled. */
  whenIdle(): Promise<void>;
  /** Programmatic entry to the upload flow; same path the picker uses. */
  uploadFile(file: UploadSource): void;
}

function messageOf(exc: unknown): string {
  if (exc instanceof ApiError) return exc.detail;
  if (exc instanceof Error) return `request failed: ${exc.message}`;
  return `request failed: ${String(exc)}`;
}

export function mountApp(root: HTMLElement, api: Api): AppHandle {
  const state = new ViewState();

  // Handlers enqueue onto one chain so operations never interleave. A
  // failed operation paints the banner and leaves the chain usable.
  let chain: Promise<void> = Promise.resolve();
  const enqueue = (op: () => Promise<void>): void => {
    chain = chain.then(async () => {
      clearError();
      try {
        await op();
      } catch (exc) {
        showError(messageOf(exc));
      }
    });
  };

  const banner = el("div", "error-banner");
  banner.hidden = true;
  const showError = (msg: string) => {
    banner.textContent = msg;
    banner.hidden = false;
  };
  const clearError = () => {
    banner.textContent = "";
    banner.hidden = true;
  };

  // Mode tabs.
  const tabs = el("nav", "tabs");
  const browseTab = el("button", "tab tab-browse active", "Default Dataset QA");
  const customTab = el("button", "tab tab-custom", "Custom Table QA");
  tabs.appendChild(browseTab);
  tabs.appendChild(customTab);

  const browseSection = el("section", "browse-section");
  const customSection = el("section", "custom-section");
  customSection.hidden = true;

  const setMode = (mode: ViewState["mode"]) => {
    state.mode = mode;
    const browsing = mode === "DefaultDataset";
    browseSection.hidden = !browsing;
    customSection.hidden = browsing;
    browseTab.classList.toggle("active", browsing);
    customTab.classList.toggle("active", !browsing);
    if (!browsing) enqueue(refreshTables);
  };
  browseTab.addEventListener("click", () => setMode("DefaultDataset"));
  customTab.addEventListener("click", () => setMode("CustomTable"));

  // Browse controls: dataset and split selectors, an index, a load button.
  const datasetSel = el("select", "dataset-select");
  const splitSel = el("select", "split-select");
  const indexInput = el("input", "index-input");
  indexInput.type = "number";
  indexInput.min = "0";
  indexInput.value = "0";
  const countLabel = el("span", "split-count");
  const loadBtn = el("button", "load-button", "Load");
  const exampleView = el("div", "example-slot");

  let datasets: DatasetInfo[] = [];

  const fillOptions = (sel: HTMLSelectElement, values: string[]) => {
    sel.replaceChildren();
    for (const v of values) {
      const opt = el("option", "", v);
      opt.value = v;
      sel.appendChild(opt);
    }
  };

  const syncSplits = () => {
    const info = datasets.find((d) => d.name === datasetSel.value);
    fillOptions(splitSel, info ? info.splits.map((s) => s.split) : []);
    syncCount();
  };

  const syncCount = () => {
    const info = datasets.find((d) => d.name === datasetSel.value);
    const split = info?.splits.find((s) => s.split === splitSel.value);
    const count = split ? split.count : 0;
    countLabel.textContent = `${count} examples`;
    indexInput.max = String(Math.max(count - 1, 0));
  };

  datasetSel.addEventListener("change", syncSplits);
  splitSel.addEventListener("change", syncCount);

  const loadExample = async () => {
    state.dataset = datasetSel.value;
    state.split = splitSel.value;
    state.index = Number(indexInput.value);
    const ex = await api.getExample(state.dataset, state.split, state.index);
    exampleView.replaceChildren(
      renderExample(ex, (fmt) => api.downloadUrl(ex.table.id, fmt)),
    );
  };
  loadBtn.addEventListener("click", () => enqueue(loadExample));

  const browseBar = el("div", "controls");
  browseBar.appendChild(datasetSel);
  browseBar.appendChild(splitSel);
  browseBar.appendChild(indexInput);
  browseBar.appendChild(countLabel);
  browseBar.appendChild(loadBtn);
  browseSection.appendChild(browseBar);
  browseSection.appendChild(exampleView);

  // Custom controls: upload, the stored-table list, and the ask form.
  const fileInput = el("input", "file-input");
  fileInput.type = "file";
  fileInput.accept = ".csv,.tsv,.xlsx";
  const uploadBtn = el("button", "upload-button", "Upload");
  const tableList = el("ul", "table-list");

  const doUpload = async (file: UploadSource) => {
    let name = file.name;
    let text: string;
    if (name.toLowerCase().endsWith(".xlsx")) {
      // Loaded on demand so the sheet parser stays out of the base bundle.
      const { xlsxToCsv } = await import("./xlsx");
      text = xlsxToCsv(await file.arrayBuffer());
      name = name.slice(0, -5) + ".csv";
    } else {
      text = await file.text();
    }
    const created = await api.uploadTable(name, text);
    state.activeTableId = created.id;
    await refreshTables();
  };

  uploadBtn.addEventListener("click", () => {
    const file = fileInput.files && fileInput.files[0];
    if (!file) {
      enqueue(async () => showError("choose a file first"));
      return;
    }
    enqueue(() => doUpload(file));
  });

  const refreshTables = async () => {
    const tables = await api.listTables();
    if (state.activeTableId && !tables.some((t) => t.id === state.activeTableId)) {
      state.activeTableId = null;
    }
    tableList.replaceChildren();
    for (const meta of tables) {
      const item = el("li", "table-row");
      if (meta.id === state.activeTableId) item.classList.add("active");
      const pick = el("button", "table-pick", meta.name);
      pick.addEventListener("click", () => {
        state.activeTableId = meta.id;
        for (const row of tableList.children) row.classList.remove("active");
        item.classList.add("active");
      });
      item.appendChild(pick);
      for (const fmt of ["csv", "md", "json"] as const) {
        const a = el("a", "download-link", fmt);
        a.href = api.downloadUrl(meta.id, fmt);
        item.appendChild(a);
      }
      const del = el("button", "table-delete", "delete");
      del.addEventListener("click", () =>
        enqueue(async () => {
          await api.deleteTable(meta.id);
          await refreshTables();
        }),
      );
      item.appendChild(del);
      tableList.appendChild(item);
    }
  };

  const questionInput = el("input", "question-input");
  questionInput.type = "text";
  questionInput.placeholder = "Ask about the selected table";
  const schemeSel = el("select", "scheme-select");
  fillOptions(schemeSel, ["direct", "cot", "pot"]);
  const sendBtn = el("button", "send-button", "Send");
  const historyView = el("div", "history-slot");
  historyView.appendChild(renderHistory(state.entries));

  // One in-flight question at a time; the button re-enables on settle and
  // a failed ask leaves the question in the box for another try.
  sendBtn.addEventListener("click", () => {
    const question = questionInput.value.trim();
    const source = state.activeTableId;
    if (!source) {
      enqueue(async () => showError("upload or select a table first"));
      return;
    }
    if (!question) {
      enqueue(async () => showError("type a question first"));
      return;
    }
    sendBtn.disabled = true;
    enqueue(async () => {
      try {
        const res = await api.ask({
          source,
          question,
          spec: { scheme: schemeSel.value },
        });
        state.appendHistory({
          question,
          answer: res.answer,
          derivation: res.derivation,
        });
        historyView.replaceChildren(renderHistory(state.entries));
        questionInput.value = "";
      } finally {
        sendBtn.disabled = false;
      }
    });
  });

  const uploadBar = el("div", "controls");
  uploadBar.appendChild(fileInput);
  uploadBar.appendChild(uploadBtn);
  const askBar = el("div", "controls");
  askBar.appendChild(questionInput);
  askBar.appendChild(schemeSel);
  askBar.appendChild(sendBtn);
  customSection.appendChild(uploadBar);
  customSection.appendChild(tableList);
  customSection.appendChild(askBar);
  customSection.appendChild(historyView);

  root.replaceChildren();
  root.appendChild(tabs);
  root.appendChild(banner);
  root.appendChild(browseSection);
  root.appendChild(customSection);

  enqueue(async () => {
    datasets = await api.listDatasets();
    fillOptions(
      datasetSel,
      datasets.map((d) => d.name),
    );
    syncSplits();
  });

  return {
    state,
    whenIdle: () => chain,
    uploadFile: (file) => enqueue(() => doUpload(file)),
  };
}
