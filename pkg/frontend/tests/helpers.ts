import { inject } from "vitest";
import { ApiClient } from "../src/api.js";
import type { FieldbookTestConfig } from "./globalSetup.js";

export function cfg(): FieldbookTestConfig {
  return inject("fieldbookConfig");
}

export function adminApi(): ApiClient {
  const c = cfg();
  return new ApiClient(c.serverUrl, c.adminToken);
}

export function anonApi(): ApiClient {
  return new ApiClient(cfg().serverUrl);
}

/** A client whose requests always fail at the network layer. */
export function deadApi(): ApiClient {
  return new ApiClient("http://127.0.0.1:9");
}

export function mount(): HTMLElement {
  const node = document.createElement("main");
  document.body.append(node);
  return node;
}

export function texts(root: HTMLElement, selector: string): string[] {
  return [...root.querySelectorAll(selector)].map((node) => (node.textContent ?? "").trim());
}

export function fieldNames(root: HTMLElement): string[] {
  return [...root.querySelectorAll(".field")].map((node) => node.getAttribute("data-name") ?? "");
}

export function setInput(root: HTMLElement, name: string, value: string): void {
  const input = root.querySelector(`.field[data-name="${name}"] input, .field[data-name="${name}"] textarea`) as
    | HTMLInputElement
    | HTMLTextAreaElement;
  input.value = value;
  input.dispatchEvent(new Event("change"));
}

export function selectOption(root: HTMLElement, name: string, label: string): void {
  const select = root.querySelector(`.field[data-name="${name}"] select`) as HTMLSelectElement;
  const option = [...select.options].find((o) => o.textContent === label);
  if (!option) throw new Error(`no option ${label} in ${name}`);
  select.value = option.value;
  select.dispatchEvent(new Event("change"));
}
