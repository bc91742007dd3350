// Typed client for the fieldbook HTTP API. The server is authoritative for
// all validation; this layer only shapes requests and classifies failures
// (server rejection vs. network unreachable) for the offline queue.

export interface OptionDoc {
  id: string;
  label: string;
}

export interface FieldInfo {
  name: string;
  kind: string;
  unit_label: string | null;
  options: OptionDoc[] | null;
}

export interface VisibilityDoc {
  kind: "always" | "when-equals" | "when-one-of";
  field_id?: string;
  option_ids?: string[];
}

export interface SpecEntry {
  field_id: string;
  prompt: string | null;
  required: boolean;
  visibility: VisibilityDoc;
  allow_add_option: boolean;
}

export interface FormSpecDoc {
  id: string;
  table_id: string;
  title: string;
  description: string;
  entries: SpecEntry[];
}

export interface ViewEntry {
  field_id: string;
  prompt: string;
  required: boolean;
  kind: string;
  unit_label: string | null;
  options: OptionDoc[] | null;
  allow_add_option: boolean;
}

export interface FormViewDoc {
  form_id: string;
  title: string;
  description: string;
  entries: ViewEntry[];
  spec: FormSpecDoc;
  fields: Record<string, FieldInfo>;
  base_name: string;
}

export interface CellDoc {
  kind: string;
  value: unknown;
}

export interface RecordDoc {
  id: string;
  table_id: string;
  cells: Record<string, CellDoc>;
  created_time: string;
  seq: number;
  replayed?: boolean;
}

export interface FieldDoc {
  id: string;
  name: string;
  kind: string;
  unit_label: string | null;
  options?: OptionDoc[];
}

export interface TableDoc {
  id: string;
  name: string;
  fields: FieldDoc[];
}

export interface BaseDoc {
  id: string;
  name: string;
  tables: TableDoc[];
  forms: { id: string; table_id: string; title: string }[];
  your_role: string | null;
}

export type Answers = Record<string, string | string[]>;
export type NewOption = { field: string; label: string };

/** A reachable server said no. */
export class RequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

/** The server could not be reached at all (offline, down, DNS). */
export class NetworkError extends Error {}

export type FormRef = { token: string } | { formId: string };

export class ApiClient {
  constructor(
    public baseUrl: string,
    public bearer?: string,
  ) {}

  private headers(extra?: Record<string, string>): Record<string, string> {
    const out: Record<string, string> = { ...extra };
    if (this.bearer) out["Authorization"] = `Bearer ${this.bearer}`;
    return out;
  }

  private async request<T>(method: string, path: string, body?: unknown, extra?: Record<string, string>): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers: this.headers({
          ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
          ...extra,
        }),
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!response.ok) {
      let code = "http-error";
      let message = `${response.status}`;
      let field: string | undefined;
      try {
        const doc = await response.json();
        if (doc && doc.error) {
          code = doc.error.code ?? code;
          message = doc.error.message ?? message;
          field = doc.error.field;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new RequestError(response.status, code, message, field);
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  private formPath(ref: FormRef): string {
    return "token" in ref ? `/f/${ref.token}` : `/forms/${ref.formId}`;
  }

  async renderForm(ref: FormRef, draft?: Record<string, string>): Promise<FormViewDoc> {
    const query = draft && Object.keys(draft).length ? `?${new URLSearchParams(draft)}` : "";
    return this.request<FormViewDoc>("GET", this.formPath(ref) + query);
  }

  async submit(ref: FormRef, answers: Answers, newOptions: NewOption[], idempotencyKey?: string): Promise<RecordDoc> {
    return this.request<RecordDoc>(
      "POST",
      `${this.formPath(ref)}/submissions`,
      { answers, new_options: newOptions },
      idempotencyKey ? { "Idempotency-Key": idempotencyKey } : undefined,
    );
  }

  async base(baseId: string): Promise<BaseDoc> {
    return this.request<BaseDoc>("GET", `/bases/${baseId}`);
  }

  async records(baseId: string, tableRef: string): Promise<RecordDoc[]> {
    return this.request<RecordDoc[]>("GET", `/bases/${baseId}/tables/${encodeURIComponent(tableRef)}/records`);
  }

  async updateRecord(baseId: string, tableRef: string, recordId: string, cells: Answers): Promise<RecordDoc> {
    return this.request<RecordDoc>(
      "PATCH",
      `/bases/${baseId}/tables/${encodeURIComponent(tableRef)}/records/${recordId}`,
      { cells },
    );
  }

  async exportCsv(baseId: string, tableRef: string, datetimeFormat = "iso"): Promise<Blob> {
    let response: Response;
    try {
      response = await fetch(
        `${this.baseUrl}/bases/${baseId}/tables/${encodeURIComponent(tableRef)}/export.csv?datetime_format=${datetimeFormat}`,
        { headers: this.headers() },
      );
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!response.ok) throw new RequestError(response.status, "export-failed", `${response.status}`);
    return response.blob();
  }
}
