// Grid view: the table's records in created-time order with client-side sort
// and filter mirroring the server's predicates, a CSV download that comes
// straight from the service, and inline cell editing for editors and owners
// (every edit goes through the records API; the server stays authoritative).

import { ApiClient, BaseDoc, FieldDoc, RecordDoc, RequestError, TableDoc } from "./api.js";
import { clear, el } from "./dom.js";

export interface GridFilter {
  field: string; // display name
  op: "eq" | "contains" | "empty" | "notempty" | "gt" | "gte" | "lt" | "lte";
  value: string;
}

const TEXT_KINDS = new Set(["short-text", "long-text", "url", "attachment-ref"]);
const NUMBER_KINDS = new Set(["integer", "real"]);

export function displayCell(field: FieldDoc, record: RecordDoc): string {
  if (field.kind === "created-time") return record.created_time.replace("T", " ");
  const cell = record.cells[field.id];
  if (!cell) return "";
  if (cell.kind === "option-ref") {
    const option = (field.options ?? []).find((o) => o.id === cell.value);
    return option ? option.label : String(cell.value);
  }
  if (cell.kind === "option-ref-list") {
    return (cell.value as string[])
      .map((ref) => (field.options ?? []).find((o) => o.id === ref)?.label ?? ref)
      .join("; ");
  }
  return String(cell.value);
}

export function opsForKind(kind: string): GridFilter["op"][] {
  if (NUMBER_KINDS.has(kind)) return ["eq", "empty", "notempty", "gt", "gte", "lt", "lte"];
  if (TEXT_KINDS.has(kind)) return ["eq", "contains", "empty", "notempty"];
  return ["eq", "empty", "notempty"];
}

export function applyFilter(records: RecordDoc[], field: FieldDoc, filter: GridFilter): RecordDoc[] {
  return records.filter((record) => {
    const cell = field.kind === "created-time" ? { kind: "timestamp", value: record.created_time } : record.cells[field.id];
    switch (filter.op) {
      case "empty":
        return cell === undefined;
      case "notempty":
        return cell !== undefined;
      case "eq": {
        if (cell === undefined) return false;
        if (NUMBER_KINDS.has(field.kind)) return Number(cell.value) === Number(filter.value);
        return displayCell(field, record) === filter.value || String(cell.value) === filter.value;
      }
      case "contains":
        return cell !== undefined && TEXT_KINDS.has(field.kind) && String(cell.value).includes(filter.value);
      default: {
        if (cell === undefined || !NUMBER_KINDS.has(field.kind)) return false;
        const have = Number(cell.value);
        const bound = Number(filter.value);
        if (filter.op === "gt") return have > bound;
        if (filter.op === "gte") return have >= bound;
        if (filter.op === "lt") return have < bound;
        return have <= bound;
      }
    }
  });
}

export function applySort(records: RecordDoc[], field: FieldDoc, dir: "asc" | "desc"): RecordDoc[] {
  const keyed = records.map((record, index) => {
    const missing = field.kind !== "created-time" && record.cells[field.id] === undefined;
    let key: number | string = "";
    if (!missing) {
      const cell = record.cells[field.id];
      if (field.kind === "created-time") key = record.created_time;
      else if (NUMBER_KINDS.has(field.kind)) key = Number(cell!.value);
      else key = displayCell(field, record);
    }
    return { record, index, missing, key };
  });
  keyed.sort((a, b) => {
    // empty cells sort before non-empty ascending; full reverse for desc
    let cmp = Number(a.missing ? 0 : 1) - Number(b.missing ? 0 : 1);
    if (cmp === 0 && !a.missing && !b.missing) cmp = a.key < b.key ? -1 : a.key > b.key ? 1 : 0;
    if (dir === "desc") cmp = -cmp;
    return cmp !== 0 ? cmp : a.index - b.index;
  });
  return keyed.map((k) => k.record);
}

export class GridPage {
  base: BaseDoc | null = null;
  table: TableDoc | null = null;
  records: RecordDoc[] = [];
  filter: GridFilter | null = null;
  sort: { field: string; dir: "asc" | "desc" } | null = null;
  forbidden = false;
  loadError = "";
  editError = "";
  lastExport: Blob | null = null;
  private editing: { recordId: string; fieldId: string } | null = null;

  constructor(
    private container: HTMLElement,
    private api: ApiClient,
    private baseId: string,
    private tableRef: string,
  ) {}

  get canEdit(): boolean {
    return this.base?.your_role === "editor" || this.base?.your_role === "owner";
  }

  async load(): Promise<void> {
    try {
      this.base = await this.api.base(this.baseId);
      this.table =
        this.base.tables.find((t) => t.id === this.tableRef || t.name === this.tableRef) ?? null;
      this.records = await this.api.records(this.baseId, this.tableRef);
    } catch (err) {
      if (err instanceof RequestError && err.status === 403) {
        this.forbidden = true;
      } else {
        this.loadError = String((err as Error).message ?? err);
      }
    }
    this.render();
  }

  visibleRecords(): RecordDoc[] {
    if (!this.table) return [];
    let rows = this.records; // server order: created time ascending
    if (this.filter) {
      const field = this.table.fields.find((f) => f.name === this.filter!.field);
      if (field) rows = applyFilter(rows, field, this.filter);
    }
    if (this.sort) {
      const field = this.table.fields.find((f) => f.name === this.sort!.field);
      if (field) rows = applySort(rows, field, this.sort.dir);
    }
    return rows;
  }

  async commitEdit(recordId: string, fieldId: string, rawValue: string): Promise<void> {
    const field = this.table!.fields.find((f) => f.id === fieldId)!;
    const value = field.kind === "multi-select" ? rawValue.split(";").map((part) => part.trim()).filter(Boolean) : rawValue;
    try {
      await this.api.updateRecord(this.baseId, this.tableRef, recordId, { [field.name]: value });
      this.editError = "";
      this.records = await this.api.records(this.baseId, this.tableRef);
    } catch (err) {
      this.editError = err instanceof RequestError ? err.message : String(err);
    }
    this.editing = null;
    this.render();
  }

  async downloadCsv(): Promise<Blob> {
    const blob = await this.api.exportCsv(this.baseId, this.tableRef, "iso");
    this.lastExport = blob;
    const url = globalThis.URL as typeof URL & { createObjectURL?: (b: Blob) => string };
    if (typeof url.createObjectURL === "function" && typeof document !== "undefined") {
      const href = url.createObjectURL(blob);
      const anchor = el("a", { href, download: `${this.table?.name ?? "table"}.csv` });
      document.body.append(anchor);
      anchor.click();
      anchor.remove();
    }
    return blob;
  }

  render(): void {
    clear(this.container);
    if (this.forbidden) {
      this.container.append(
        el("p", { class: "error forbidden", role: "alert" },
          "This link only allows form submissions; the grid is not available."),
      );
      return;
    }
    if (this.loadError) {
      this.container.append(el("p", { class: "error", role: "alert" }, this.loadError));
      return;
    }
    if (!this.base || !this.table) return;

    this.container.append(
      el("header", {}, el("h1", {}, this.base.name), el("h2", {}, this.table.name)),
      this.renderToolbar(),
    );
    if (this.editError) {
      this.container.append(el("p", { class: "error edit-error", role: "alert" }, this.editError));
    }

    const head = el("tr", {});
    for (const field of this.table.fields) head.append(el("th", {}, field.name));
    const body = el("tbody", {});
    for (const record of this.visibleRecords()) {
      const row = el("tr", { "data-record": record.id });
      for (const field of this.table.fields) {
        row.append(this.renderCell(record, field));
      }
      body.append(row);
    }
    this.container.append(el("table", { class: "grid" }, el("thead", {}, head), body));
  }

  private renderCell(record: RecordDoc, field: FieldDoc): HTMLElement {
    const editable = this.canEdit && field.kind !== "created-time";
    const cell = el("td", { "data-field": field.name, class: editable ? "editable" : "" }, displayCell(field, record));
    if (!editable) return cell;
    if (this.editing && this.editing.recordId === record.id && this.editing.fieldId === field.id) {
      clear(cell);
      const input = el("input", {
        type: "text",
        class: "cell-editor",
        onkeydown: (event: Event) => {
          const key = (event as KeyboardEvent).key;
          if (key === "Enter") void this.commitEdit(record.id, field.id, (event.target as HTMLInputElement).value);
          if (key === "Escape") {
            this.editing = null;
            this.render();
          }
        },
      });
      input.value = displayCell(field, record);
      cell.append(input);
      queueMicrotask(() => input.focus());
      return cell;
    }
    cell.addEventListener("dblclick", () => {
      this.editing = { recordId: record.id, fieldId: field.id };
      this.render();
    });
    return cell;
  }

  private renderToolbar(): HTMLElement {
    const table = this.table!;
    const fieldSelect = el("select", { class: "filter-field" });
    for (const field of table.fields) fieldSelect.append(el("option", { value: field.name }, field.name));
    const opSelect = el("select", { class: "filter-op" });
    const refreshOps = () => {
      clear(opSelect);
      const kind = table.fields.find((f) => f.name === fieldSelect.value)?.kind ?? "short-text";
      for (const op of opsForKind(kind)) opSelect.append(el("option", { value: op }, op));
    };
    refreshOps();
    fieldSelect.addEventListener("change", refreshOps);
    const valueInput = el("input", { type: "text", class: "filter-value", placeholder: "value" });

    const sortSelect = el("select", { class: "sort-field" });
    sortSelect.append(el("option", { value: "" }, "created time (default)"));
    for (const field of table.fields) sortSelect.append(el("option", { value: field.name }, field.name));
    const dirSelect = el("select", { class: "sort-dir" });
    dirSelect.append(el("option", { value: "asc" }, "asc"), el("option", { value: "desc" }, "desc"));

    return el("div", { class: "toolbar" },
      fieldSelect,
      opSelect,
      valueInput,
      el("button", {
        type: "button",
        class: "apply-filter",
        onclick: () => {
          this.filter = { field: fieldSelect.value, op: opSelect.value as GridFilter["op"], value: valueInput.value };
          this.render();
        },
      }, "Filter"),
      el("button", {
        type: "button",
        class: "clear-filter",
        onclick: () => {
          this.filter = null;
          this.render();
        },
      }, "Clear"),
      sortSelect,
      dirSelect,
      el("button", {
        type: "button",
        class: "apply-sort",
        onclick: () => {
          this.sort = sortSelect.value ? { field: sortSelect.value, dir: dirSelect.value as "asc" | "desc" } : null;
          this.render();
        },
      }, "Sort"),
      el("button", { type: "button", class: "export", onclick: () => void this.downloadCsv() }, "Export CSV"),
    );
  }
}
