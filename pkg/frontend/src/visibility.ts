// Conditional-field evaluation, mirroring the server rule for rule: an entry
// is visible when its rule is "always", or when its controlling field is
// itself visible and the draft value for it resolves to one of the rule's
// option ids. Values of hidden fields never influence anything. Kept in
// lockstep with the server by the divergence test in tests/visibility.test.ts.

import type { FormSpecDoc, OptionDoc } from "./api.js";

export type DraftValue = string | string[] | undefined;
export type Draft = Record<string, DraftValue>;
export type OptionIndex = Record<string, OptionDoc[] | null>;

/** Resolve a draft value against a single-select option list: exact id match
 * first, then a trimmed case-insensitive label match; anything else is unset. */
export function resolveSelected(options: OptionDoc[] | null | undefined, raw: DraftValue): string | null {
  if (raw === undefined || Array.isArray(raw)) return null;
  const text = raw.trim();
  if (!text || !options) return null;
  for (const option of options) {
    if (option.id === raw) return option.id;
  }
  const folded = text.toLowerCase();
  for (const option of options) {
    if (option.label.toLowerCase() === folded) return option.id;
  }
  return null;
}

export function visibleFields(spec: FormSpecDoc, draft: Draft, options: OptionIndex): string[] {
  const visible: string[] = [];
  for (const entry of spec.entries) {
    const rule = entry.visibility;
    if (rule.kind === "always") {
      visible.push(entry.field_id);
      continue;
    }
    const controller = rule.field_id;
    if (!controller || !visible.includes(controller)) continue;
    const selected = resolveSelected(options[controller], draft[controller]);
    if (selected !== null && (rule.option_ids ?? []).includes(selected)) {
      visible.push(entry.field_id);
    }
  }
  return visible;
}
