// DOM wiring. All data flows through ApiClient; this file only moves
// payloads into ViewState and ViewState into innerHTML.

import { ApiClient, ApiFailure } from "./api.js";
import { parseHex } from "./heat.js";
import {
  initialState,
  parsePhrases,
  withFilter,
  withGeneration,
  withPanel,
  withSelection,
  withSettings,
  withSteer,
} from "./state.js";
import type { ViewState } from "./state.js";
import {
  renderCandidatePanel,
  renderError,
  renderHistory,
  renderLegend,
  renderSegments,
} from "./render.js";
import type { Filter } from "./types.js";

const api = new ApiClient((url, init) => fetch(url, init));

let state: ViewState = initialState();
let busy = false; // one generate/steer in flight at a time

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function paint(): void {
  const output = el<HTMLDivElement>("output");
  output.innerHTML = state.session
    ? renderSegments(state.session, state.settings, state.selectedPosition)
    : `<p class="placeholder">enter a prefix and generate</p>`;
  el<HTMLDivElement>("panel").innerHTML = state.panel
    ? renderCandidatePanel(state.panel, state.filter)
    : "";
  el<HTMLDivElement>("legend").innerHTML = renderLegend(state.settings);
  el<HTMLDivElement>("history").innerHTML =
    renderHistory(state.history, state.session?.session_id ?? null);
}

function showError(code: string, message: string): void {
  el<HTMLDivElement>("message").innerHTML = renderError(code, message);
}

function clearError(): void {
  el<HTMLDivElement>("message").innerHTML = "";
}

async function refreshPanel(): Promise<void> {
  if (state.session === null || state.selectedPosition === null) return;
  try {
    const payload = await api.candidates(
      state.session.session_id, state.selectedPosition, state.filter);
    state = withPanel(state, payload); // stale payloads fall out here
    paint();
  } catch (err) {
    if (err instanceof ApiFailure) showError(err.code, err.message);
    else throw err;
  }
}

async function onGenerate(): Promise<void> {
  const prefix = el<HTMLInputElement>("prefix").value;
  if (!prefix.trim()) {
    showError("invalid_prefix", "enter a nonempty prefix first");
    return;
  }
  if (busy) return;
  busy = true;
  clearError();
  try {
    const phrases = parsePhrases(el<HTMLInputElement>("phrases").value);
    const payload = await api.generate(prefix, phrases);
    state = withGeneration({ ...state, prefix, phrases }, payload);
    paint();
  } catch (err) {
    if (err instanceof ApiFailure) showError(err.code, err.message);
    else throw err;
  } finally {
    busy = false;
  }
}

async function onSteer(replacementId: number): Promise<void> {
  if (busy || state.session === null || state.selectedPosition === null) return;
  busy = true;
  clearError();
  try {
    const payload = await api.steer(
      state.session.session_id, state.selectedPosition, replacementId);
    state = withSteer(state, payload);
    paint();
  } catch (err) {
    if (err instanceof ApiFailure) {
      showError(err.code, err.message);
      if (err.code === "unknown_session") {
        showError(err.code, `${err.message} - generate again to continue`);
      }
    } else {
      throw err;
    }
  } finally {
    busy = false;
  }
}

function onOutputClick(event: Event): void {
  const target = (event.target as HTMLElement).closest("[data-position]");
  if (!(target instanceof HTMLElement) || state.session === null) return;
  const position = Number(target.dataset.position);
  state = withSelection(state, position);
  paint();
  void refreshPanel();
}

function onPanelClick(event: Event): void {
  const target = (event.target as HTMLElement).closest("button[data-id]");
  if (!(target instanceof HTMLElement)) return;
  void onSteer(Number(target.dataset.id));
}

function onFilterChange(value: string): void {
  state = withFilter(state, value as Filter);
  paint();
  void refreshPanel(); // selection survives the re-query
}

function onSettingsInput(): void {
  const token = parseHex(el<HTMLInputElement>("token-color").value);
  const phrase = parseHex(el<HTMLInputElement>("phrase-color").value);
  const size = Number(el<HTMLInputElement>("font-size").value);
  state = withSettings(state, {
    tokenRamp: token ? { ...state.settings.tokenRamp, dark: token }
                     : state.settings.tokenRamp,
    phraseRamp: phrase ? { ...state.settings.phraseRamp, dark: phrase }
                       : state.settings.phraseRamp,
    fontSizePx: Number.isFinite(size) && size >= 8 ? size : state.settings.fontSizePx,
  });
  paint(); // settings are client-side only: repaint, never re-query
}

async function boot(): Promise<void> {
  el<HTMLButtonElement>("generate").addEventListener("click", () => void onGenerate());
  el<HTMLDivElement>("output").addEventListener("click", onOutputClick);
  el<HTMLDivElement>("panel").addEventListener("click", onPanelClick);
  for (const radio of document.querySelectorAll<HTMLInputElement>("input[name=filter]")) {
    radio.addEventListener("change", () => onFilterChange(radio.value));
  }
  for (const id of ["token-color", "phrase-color", "font-size"]) {
    el<HTMLInputElement>(id).addEventListener("input", onSettingsInput);
  }
  paint();
  try {
    const health = await api.health();
    el<HTMLSpanElement>("health").textContent =
      `model ${health.model.fingerprint.slice(0, 8)} | vocab ${health.model.vocab_size}`
      + ` | retrieval ${health.retrieval ? "on" : "off"}`;
  } catch {
    el<HTMLSpanElement>("health").textContent = "service unreachable";
  }
}

void boot();
