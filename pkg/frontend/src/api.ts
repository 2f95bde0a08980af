// Typed client for the table-QA service. The whole UI talks to the backend
// exclusively through this module.

export interface CellDto {
  text: string;
  links: string[];
  images: string[];
}

export interface TableDto {
  id: string;
  header_rows: number;
  caption: string | null;
  cells: CellDto[][];
  merged_regions: number[][];
}

export interface PassageDto {
  id: string;
  title: string;
  text: string;
}

export interface ImageDto {
  id: string;
  uri: string;
  caption: string;
}

export interface AnswerDto {
  format: string;
  value: string;
  derivation: string | null;
}

export interface ExampleDto {
  id: string;
  dataset: string;
  category: string;
  question: string;
  table: TableDto;
  passages: PassageDto[];
  images: ImageDto[];
  answer: AnswerDto;
}

export interface SplitInfo {
  split: string;
  count: number;
}

export interface DatasetInfo {
  name: string;
  splits: SplitInfo[];
}

export interface TableMeta {
  id: string;
  name: string;
  uploaded_at: string;
}

export interface AskRequest {
  source: string;
  question: string;
  spec?: { scheme?: string; input_format?: string; max_tokens?: number };
  retrieve?: { granularity?: string; top_k?: number };
}

export interface AskResult {
  answer: string;
  derivation: string | null;
  prompt_id: string;
  timing: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** Minimal response surface so tests can stub fetch with plain objects. */
export interface FetchResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchFn = (url: string, init?: RequestInit) => Promise<FetchResponse>;

async function detailOf(resp: FetchResponse): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${resp.status}`;
}

export class Api {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) throw new ApiError(resp.status, await detailOf(resp));
    return resp.json();
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return this.request("/datasets") as Promise<DatasetInfo[]>;
  }

  getExample(name: string, split: string, index: number): Promise<ExampleDto> {
    const path = `/datasets/${encodeURIComponent(name)}/${encodeURIComponent(split)}/${index}`;
    return this.request(path) as Promise<ExampleDto>;
  }

  listTables(): Promise<TableMeta[]> {
    return this.request("/tables") as Promise<TableMeta[]>;
  }

  uploadTable(name: string, text: string): Promise<{ id: string; name: string }> {
    const path = `/tables?filename=${encodeURIComponent(name)}`;
    return this.request(path, { method: "POST", body: text }) as Promise<{
      id: string;
      name: string;
    }>;
  }

  deleteTable(id: string): Promise<{ deleted: string }> {
    return this.request(`/tables/${encodeURIComponent(id)}`, {
      method: "DELETE",
    }) as Promise<{ deleted: string }>;
  }

  downloadUrl(tableId: string, format: "csv" | "md" | "json"): string {
    return `${this.baseUrl}/tables/${encodeURIComponent(tableId)}/download?format=${format}`;
  }

  ask(body: AskRequest): Promise<AskResult> {
    return this.request("/ask", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }) as Promise<AskResult>;
  }
}
