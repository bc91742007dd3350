// The entry-form page. Field visibility updates instantly on every change of
// a controlling field, using the same rule evaluation the server applies
// (see visibility.ts); values typed into fields that stay visible survive
// every toggle, and drafts persist in localStorage per form so an
// interrupted entry survives a reload. Submissions that cannot reach the
// server land in the offline queue with the idempotency key the attempt
// already used.

import {
  Answers,
  ApiClient,
  FormRef,
  FormViewDoc,
  NetworkError,
  NewOption,
  RecordDoc,
  RequestError,
} from "./api.js";
import { clear, el } from "./dom.js";
import { OfflineQueue } from "./offlineQueue.js";
import { Draft, OptionIndex, visibleFields } from "./visibility.js";

function freshKey(): string {
  const c = globalThis.crypto as Crypto | undefined;
  if (c && typeof c.randomUUID === "function") return c.randomUUID();
  return `k-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class FormPage {
  view: FormViewDoc | null = null;
  draft: Draft = {};
  pendingOptions: Record<string, string[]> = {};
  fieldErrors: Record<string, string> = {};
  formError = "";
  notice = "";
  loadError = "";
  queue: OfflineQueue;

  private draftKey: string;
  private storage: Storage;
  private addingOption: string | null = null;

  constructor(
    private container: HTMLElement,
    public api: ApiClient, // swappable: connectivity can come and go
    private ref: FormRef,
    storage: Storage = globalThis.localStorage,
  ) {
    const key = "token" in ref ? ref.token : ref.formId;
    this.storage = storage;
    this.queue = new OfflineQueue(`fieldbook-queue-${key}`, storage);
    this.draftKey = `fieldbook-draft-${key}`;
  }

  async load(): Promise<void> {
    try {
      this.view = await this.api.renderForm(this.ref);
      this.loadError = "";
    } catch (err) {
      this.loadError = err instanceof NetworkError ? "Server unreachable." : String((err as Error).message ?? err);
      this.render();
      return;
    }
    this.restoreDraft();
    this.render();
    await this.flushQueue();
    if (typeof window !== "undefined") {
      window.addEventListener("online", () => void this.flushQueue());
    }
  }

  // -- draft persistence ------------------------------------------------------

  private restoreDraft(): void {
    const raw = this.storage.getItem(this.draftKey);
    if (!raw) return;
    try {
      const saved = JSON.parse(raw) as { draft: Draft; pendingOptions: Record<string, string[]> };
      this.draft = saved.draft ?? {};
      this.pendingOptions = saved.pendingOptions ?? {};
    } catch {
      this.storage.removeItem(this.draftKey);
    }
  }

  private persistDraft(): void {
    const hasContent = Object.keys(this.draft).length || Object.keys(this.pendingOptions).length;
    if (!hasContent) {
      this.storage.removeItem(this.draftKey);
      return;
    }
    this.storage.setItem(this.draftKey, JSON.stringify({ draft: this.draft, pendingOptions: this.pendingOptions }));
  }

  private clearDraft(): void {
    this.draft = {};
    this.pendingOptions = {};
    this.storage.removeItem(this.draftKey);
  }

  // -- derived state ------------------------------------------------------------

  optionIndex(): OptionIndex {
    const index: OptionIndex = {};
    if (!this.view) return index;
    for (const [fieldId, info] of Object.entries(this.view.fields)) {
      if (info.options === null) {
        index[fieldId] = null;
        continue;
      }
      const pending = (this.pendingOptions[fieldId] ?? []).map((label) => ({ id: label, label }));
      index[fieldId] = [...info.options, ...pending];
    }
    return index;
  }

  visibleNow(): string[] {
    if (!this.view) return [];
    return visibleFields(this.view.spec, this.draft, this.optionIndex());
  }

  private controllers(): Set<string> {
    const out = new Set<string>();
    for (const entry of this.view?.spec.entries ?? []) {
      if (entry.visibility.field_id) out.add(entry.visibility.field_id);
    }
    return out;
  }

  // -- interaction ----------------------------------------------------------------

  setValue(fieldId: string, value: string | string[]): void {
    const blank = Array.isArray(value) ? value.length === 0 : value.trim() === "";
    if (blank) delete this.draft[fieldId];
    else this.draft[fieldId] = value;
    delete this.fieldErrors[fieldId];
    this.persistDraft();
    if (this.controllers().has(fieldId)) this.render();
  }

  addOption(fieldId: string, label: string): void {
    const trimmed = label.trim();
    if (!trimmed) return;
    const existing = this.optionIndex()[fieldId] ?? [];
    const match = existing.find((o) => o.label.toLowerCase() === trimmed.toLowerCase());
    const info = this.view!.fields[fieldId];
    if (!match) {
      this.pendingOptions[fieldId] = [...(this.pendingOptions[fieldId] ?? []), trimmed];
    }
    const chosen = match ? match.id : trimmed;
    if (info.kind === "multi-select") {
      const current = Array.isArray(this.draft[fieldId]) ? (this.draft[fieldId] as string[]) : [];
      if (!current.includes(chosen)) this.draft[fieldId] = [...current, chosen];
    } else {
      this.draft[fieldId] = chosen;
    }
    this.addingOption = null;
    this.persistDraft();
    this.render();
  }

  async submit(): Promise<void> {
    if (!this.view) return;
    const visible = this.visibleNow();
    const visibleSet = new Set(visible);

    // Hidden fields' drafts are cleared before submit, never sent.
    for (const fieldId of Object.keys(this.draft)) {
      if (!visibleSet.has(fieldId)) delete this.draft[fieldId];
    }
    for (const fieldId of Object.keys(this.pendingOptions)) {
      if (!visibleSet.has(fieldId)) delete this.pendingOptions[fieldId];
    }
    this.persistDraft();

    const answers: Answers = {};
    for (const fieldId of visible) {
      const value = this.draft[fieldId];
      if (value !== undefined) answers[fieldId] = value;
    }
    const newOptions: NewOption[] = [];
    for (const [fieldId, labels] of Object.entries(this.pendingOptions)) {
      for (const label of labels) newOptions.push({ field: fieldId, label });
    }

    this.fieldErrors = {};
    this.formError = "";
    const key = freshKey();
    try {
      const record = await this.api.submit(this.ref, answers, newOptions, key);
      this.clearDraft();
      this.notice = `Saved entry ${record.id}.`;
      try {
        this.view = await this.api.renderForm(this.ref); // refresh MRU ordering
      } catch {
        // keep the stale view; next load refreshes
      }
      this.render();
    } catch (err) {
      if (err instanceof NetworkError) {
        // The attempt may or may not have reached the server; queue it under
        // the same idempotency key so the eventual flush cannot duplicate it.
        this.queue.enqueue(answers, newOptions, key);
        this.clearDraft();
        this.notice = "No connection; entry queued and will send automatically.";
        this.render();
        return;
      }
      if (err instanceof RequestError) {
        if (err.field) {
          const entry = this.view.spec.entries.find(
            (e) => this.view!.fields[e.field_id]?.name === err.field || e.field_id === err.field,
          );
          if (entry) this.fieldErrors[entry.field_id] = err.message;
          else this.formError = err.message;
        } else {
          this.formError = err.message;
        }
        this.render();
        return;
      }
      throw err;
    }
  }

  async flushQueue(): Promise<void> {
    const result = await this.queue.flush((item) => this.api.submit(this.ref, item.answers, item.newOptions, item.key));
    if (result.delivered > 0) {
      this.notice = `${result.delivered} queued ${result.delivered === 1 ? "entry" : "entries"} delivered.`;
    }
    this.render();
  }

  // -- rendering ----------------------------------------------------------------------

  render(): void {
    clear(this.container);
    if (this.loadError) {
      this.container.append(el("p", { class: "error", role: "alert" }, this.loadError));
      return;
    }
    if (!this.view) return;

    this.container.append(
      el("header", {},
        el("h1", {}, this.view.base_name),
        el("h2", {}, this.view.title),
        this.view.description ? el("p", { class: "description" }, this.view.description) : null,
      ),
    );
    this.renderBanner();
    if (this.notice) {
      this.container.append(
        el("div", { class: "notice", role: "status" },
          el("span", {}, this.notice),
          el("button", { type: "button", class: "submit-another", onclick: () => { this.notice = ""; this.render(); } }, "Submit another"),
        ),
      );
      return;
    }
    if (this.formError) {
      this.container.append(el("p", { class: "error form-error", role: "alert" }, this.formError));
    }

    const form = el("form", {
      class: "entry-form",
      onsubmit: (event: Event) => {
        event.preventDefault();
        void this.submit();
      },
    });
    const visible = new Set(this.visibleNow());
    for (const entry of this.view.spec.entries) {
      if (!visible.has(entry.field_id)) continue;
      form.append(this.renderField(entry.field_id));
    }
    form.append(el("button", { type: "submit", class: "submit" }, "Save record"));
    this.container.append(form);
  }

  private renderBanner(): void {
    const pending = this.queue.pendingCount();
    const rejected = this.queue.rejectedItems();
    if (pending === 0 && rejected.length === 0) return; // zero items: no banner
    const banner = el("div", { class: "queue-banner", role: "status" });
    if (pending > 0) {
      banner.append(
        el("span", { class: "pending-count" }, `${pending} ${pending === 1 ? "entry" : "entries"} queued offline`),
        el("button", { type: "button", class: "retry", onclick: () => void this.flushQueue() }, "Retry now"),
      );
    }
    for (const item of rejected) {
      banner.append(
        el("div", { class: "rejected" },
          el("span", {}, `Rejected: ${item.rejected!.message}`),
          el("button", { type: "button", class: "discard", onclick: () => { this.queue.discard(item.key); this.render(); } }, "Discard"),
        ),
      );
    }
    this.container.append(banner);
  }

  private renderField(fieldId: string): HTMLElement {
    const view = this.view!;
    const entry = view.spec.entries.find((e) => e.field_id === fieldId)!;
    const info = view.fields[fieldId];
    const wrap = el("div", { class: "field", "data-field": fieldId, "data-name": info.name });
    const label = el("label", { for: `in-${fieldId}` }, entry.prompt ?? info.name);
    if (entry.required) label.append(el("span", { class: "req", "aria-label": "required" }, " *"));
    wrap.append(label);

    const error = this.fieldErrors[fieldId];
    if (error) wrap.append(el("p", { class: "error field-error", role: "alert" }, error));

    wrap.append(this.renderInput(fieldId, info.kind));

    if (entry.allow_add_option) {
      if (this.addingOption === fieldId) {
        const input = el("input", { type: "text", class: "add-option-input", placeholder: "New option" });
        wrap.append(
          el("div", { class: "add-option-row" },
            input,
            el("button", { type: "button", class: "add-option-confirm", onclick: () => this.addOption(fieldId, input.value) }, "Add"),
            el("button", { type: "button", class: "add-option-cancel", onclick: () => { this.addingOption = null; this.render(); } }, "Cancel"),
          ),
        );
      } else {
        wrap.append(
          el("button", { type: "button", class: "add-option", onclick: () => { this.addingOption = fieldId; this.render(); } }, "+ Add"),
        );
      }
    }
    return wrap;
  }

  private renderInput(fieldId: string, kind: string): HTMLElement {
    const value = this.draft[fieldId];
    const options = this.optionIndex()[fieldId] ?? [];
    const set = (v: string | string[]) => this.setValue(fieldId, v);

    if (kind === "single-select") {
      const select = el("select", { id: `in-${fieldId}`, onchange: (e: Event) => set((e.target as HTMLSelectElement).value) });
      select.append(el("option", { value: "" }, "—"));
      for (const option of options) {
        const node = el("option", { value: option.id }, option.label);
        if (value === option.id) node.selected = true;
        select.append(node);
      }
      return select;
    }
    if (kind === "multi-select") {
      const chosen = Array.isArray(value) ? value : [];
      const group = el("div", { class: "checkbox-group", id: `in-${fieldId}` });
      for (const option of options) {
        const box = el("input", {
          type: "checkbox",
          value: option.id,
          onchange: (e: Event) => {
            const target = e.target as HTMLInputElement;
            // read the live draft, not the render-time snapshot
            const current = Array.isArray(this.draft[fieldId]) ? [...(this.draft[fieldId] as string[])] : [];
            const next = target.checked ? [...current, option.id] : current.filter((v) => v !== option.id);
            set(next);
          },
        });
        if (chosen.includes(option.id)) box.checked = true;
        group.append(el("label", { class: "checkbox" }, box, option.label));
      }
      return group;
    }
    if (kind === "long-text") {
      const area = el("textarea", { id: `in-${fieldId}`, onchange: (e: Event) => set((e.target as HTMLTextAreaElement).value) });
      area.value = typeof value === "string" ? value : "";
      return area;
    }
    const attrs: Record<string, string | ((e: Event) => void)> = {
      id: `in-${fieldId}`,
      type: "text",
      onchange: (e: Event) => set((e.target as HTMLInputElement).value),
    };
    if (kind === "date") {
      attrs["type"] = "date";
      attrs["placeholder"] = "mm/dd/yyyy";
    } else if (kind === "integer" || kind === "real") {
      attrs["inputmode"] = "decimal";
    } else if (kind === "url") {
      attrs["inputmode"] = "url";
      attrs["placeholder"] = "https://";
    }
    const input = el("input", attrs);
    input.value = typeof value === "string" ? value : "";
    return input;
  }
}
