// DOM wiring: form, results list, history panel.

import { ApiClient } from "./api.js";
import { AppController } from "./controller.js";
import type { ViewState } from "./controller.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function renderResults(state: ViewState, list: HTMLOListElement, status: HTMLElement): void {
  list.innerHTML = "";
  if (state.results && state.resultRequest) {
    status.textContent =
      `${state.results.candidates.length} candidates for ` +
      `"${state.resultRequest.definition}" (${state.results.backend})`;
    for (const c of state.results.candidates) {
      const li = document.createElement("li");
      li.className = "candidate";
      const rank = document.createElement("span");
      rank.className = "rank";
      rank.textContent = String(c.rank);
      const word = document.createElement("span");
      word.className = "word";
      word.textContent = c.word;
      const score = document.createElement("span");
      score.className = "score";
      score.textContent = c.score.toFixed(4);
      li.append(rank, word, score);
      list.appendChild(li);
    }
  } else {
    status.textContent = "";
  }
}

function renderError(state: ViewState, box: HTMLElement, retryBtn: HTMLButtonElement): void {
  if (state.error) {
    box.textContent = `error: ${state.error.code}`;
    box.hidden = false;
    retryBtn.hidden = !state.error.retryable;
  } else {
    box.hidden = true;
    retryBtn.hidden = true;
  }
}

function renderHistory(controller: AppController, panel: HTMLUListElement): void {
  panel.innerHTML = "";
  const entries = controller.session.list();
  const total = controller.session.length;
  entries.forEach((entry, i) => {
    const index = total - 1 - i; // list() is newest first
    const li = document.createElement("li");
    const text = document.createElement("span");
    text.textContent = `${entry.request.definition} [${entry.request.lang}, k=${entry.request.k}]`;
    const rerun = document.createElement("button");
    rerun.type = "button";
    rerun.textContent = "rerun";
    rerun.addEventListener("click", () => void controller.rerun(index));
    li.append(rerun, text);
    panel.appendChild(li);
  });
}

function renderLanguages(state: ViewState, select: HTMLSelectElement): void {
  const current = select.value;
  select.innerHTML = "";
  for (const lang of state.languages) {
    const opt = document.createElement("option");
    opt.value = lang;
    opt.textContent = lang;
    select.appendChild(opt);
  }
  if (state.languages.includes(current)) {
    select.value = current;
  }
}

export function start(): void {
  const form = el<HTMLFormElement>("query-form");
  const input = el<HTMLTextAreaElement>("definition");
  const langSelect = el<HTMLSelectElement>("lang");
  const kInput = el<HTMLInputElement>("k");
  const submit = el<HTMLButtonElement>("submit");
  const results = el<HTMLOListElement>("results");
  const status = el<HTMLElement>("status");
  const errorBox = el<HTMLElement>("error");
  const retryBtn = el<HTMLButtonElement>("retry");
  const historyPanel = el<HTMLUListElement>("history");

  const controller = new AppController(new ApiClient(), (state) => {
    submit.disabled = state.busy || !input.value.trim();
    renderLanguages(state, langSelect);
    renderResults(state, results, status);
    renderError(state, errorBox, retryBtn);
    renderHistory(controller, historyPanel);
  });

  input.addEventListener("input", () => {
    submit.disabled = !input.value.trim();
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const k = Math.max(1, Number(kInput.value) || 10);
    void controller.submit(input.value, langSelect.value || "en", k);
  });
  retryBtn.addEventListener("click", () => void controller.retry());

  submit.disabled = true;
  void controller.loadLanguages();
}

start();
