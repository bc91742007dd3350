// Divergence test: the client-side visibility evaluation must agree with the
// server's rendered visible set for arbitrary drafts. The client is allowed
// its own evaluator only because this test pins it to the service.

import { describe, expect, it } from "vitest";
import { visibleFields, type Draft, type OptionIndex } from "../src/visibility.js";
import { anonApi, cfg } from "./helpers.js";

function mulberry32(seed: number): () => number {
  let a = seed;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("visibility parity with the service", () => {
  it("matches the server's visible set for 100 random drafts", async () => {
    const api = anonApi();
    const ref = { token: cfg().fieldRecords.formToken };
    const view = await api.renderForm(ref);
    const optionIndex: OptionIndex = {};
    for (const [fieldId, info] of Object.entries(view.fields)) optionIndex[fieldId] = info.options;

    const rand = mulberry32(20221220);
    const fieldIds = view.spec.entries.map((e) => e.field_id);
    const pick = <T>(items: T[]): T => items[Math.floor(rand() * items.length)];

    for (let round = 0; round < 100; round++) {
      const draft: Record<string, string> = {};
      for (const fieldId of fieldIds) {
        if (rand() < 0.55) continue;
        const info = view.fields[fieldId];
        const roll = rand();
        if (info.options && info.options.length && roll < 0.45) {
          draft[fieldId] = pick(info.options).id;
        } else if (info.options && info.options.length && roll < 0.8) {
          const label = pick(info.options).label;
          draft[fieldId] = rand() < 0.5 ? label : label.toUpperCase();
        } else {
          draft[fieldId] = pick(["", "garbage", "42", "2023-01-01", "Mow"]);
        }
      }

      const local = visibleFields(view.spec, draft as Draft, optionIndex);
      const remote = (await api.renderForm(ref, draft)).entries.map((e) => e.field_id);
      expect(local, JSON.stringify(draft)).toEqual(remote);
    }
  });
});
