// Session view state. The question history is append-only: entries are
// pushed and never mutated or removed, so users can build on earlier answers.

export type Mode = "DefaultDataset" | "CustomTable";

export interface HistoryEntry {
  question: string;
  answer: string;
  derivation: string | null;
}

export class ViewState {
  mode: Mode = "DefaultDataset";
  dataset = "";
  split = "";
  index = 0;
  activeTableId: string | null = null;

  private readonly history: HistoryEntry[] = [];

  get entries(): readonly HistoryEntry[] {
    return this.history;
  }

  appendHistory(entry: HistoryEntry): void {
    this.history.push(entry);
  }
}
