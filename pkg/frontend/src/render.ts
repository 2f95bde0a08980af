// DOM builders for the panels: table grid, passages, pictures, answers.
// Everything shown is taken verbatim from service responses.

import type {
  AnswerDto,
  CellDto,
  ExampleDto,
  TableDto,
} from "./api";
import type { HistoryEntry } from "./state";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function renderCell(cell: CellDto, tag: "th" | "td"): HTMLElement {
  const node = el(tag, "cell");
  if (cell.links.length > 0) {
    const a = el("a", "", cell.text);
    a.href = cell.links[0];
    node.appendChild(a);
  } else {
    node.textContent = cell.text;
  }
  return node;
}

/** Header rows become <thead><th>, body rows <tbody><td>. */
export function renderGrid(table: TableDto): HTMLTableElement {
  const grid = el("table", "grid");
  const thead = document.createElement("thead");
  const tbody = document.createElement("tbody");
  table.cells.forEach((row, r) => {
    const isHeader = r < table.header_rows;
    const tr = document.createElement("tr");
    for (const cell of row) tr.appendChild(renderCell(cell, isHeader ? "th" : "td"));
    (isHeader ? thead : tbody).appendChild(tr);
  });
  grid.appendChild(thead);
  grid.appendChild(tbody);
  return grid;
}

export function renderAnswer(answer: AnswerDto): HTMLElement {
  const panel = el("div", "answer-panel");
  panel.appendChild(el("h3", "", "Answer"));
  panel.appendChild(el("p", "answer-value", answer.value));
  panel.appendChild(el("p", "answer-format", answer.format));
  if (answer.derivation) {
    panel.appendChild(el("pre", "answer-derivation", answer.derivation));
  }
  return panel;
}

export function renderExample(ex: ExampleDto, downloadUrl: (fmt: "csv" | "md" | "json") => string): HTMLElement {
  const view = el("div", "example-view");

  const head = el("div", "example-head");
  head.appendChild(el("p", "example-meta", `${ex.dataset} · ${ex.category} · ${ex.id}`));
  head.appendChild(el("p", "example-question", ex.question));
  view.appendChild(head);

  const tablePanel = el("div", "table-panel");
  tablePanel.appendChild(el("h3", "", "Table"));
  if (ex.table.caption) tablePanel.appendChild(el("p", "table-caption", ex.table.caption));
  tablePanel.appendChild(renderGrid(ex.table));
  const downloads = el("div", "downloads");
  for (const fmt of ["csv", "md", "json"] as const) {
    const a = el("a", "download-link", fmt);
    a.href = downloadUrl(fmt);
    downloads.appendChild(a);
  }
  tablePanel.appendChild(downloads);
  view.appendChild(tablePanel);

  if (ex.passages.length > 0) {
    const textPanel = el("div", "text-panel");
    textPanel.appendChild(el("h3", "", "Text"));
    for (const p of ex.passages) {
      const block = el("div", "passage");
      if (p.title) block.appendChild(el("h4", "passage-title", p.title));
      block.appendChild(el("p", "passage-text", p.text));
      textPanel.appendChild(block);
    }
    view.appendChild(textPanel);
  }

  if (ex.images.length > 0) {
    const picturePanel = el("div", "picture-panel");
    picturePanel.appendChild(el("h3", "", "Pictures"));
    for (const im of ex.images) {
      const figure = el("figure", "picture");
      const img = el("img");
      img.src = im.uri;
      img.alt = im.caption || im.id;
      figure.appendChild(img);
      if (im.caption) figure.appendChild(el("figcaption", "", im.caption));
      picturePanel.appendChild(figure);
    }
    view.appendChild(picturePanel);
  }

  view.appendChild(renderAnswer(ex.answer));
  return view;
}

export function renderHistory(entries: readonly HistoryEntry[]): HTMLElement {
  const list = el("ol", "history");
  for (const entry of entries) {
    const item = el("li", "history-entry");
    item.appendChild(el("p", "history-question", entry.question));
    item.appendChild(el("p", "history-answer", entry.answer));
    if (entry.derivation) {
      item.appendChild(el("pre", "history-derivation", entry.derivation));
    }
    list.appendChild(item);
  }
  return list;
}
