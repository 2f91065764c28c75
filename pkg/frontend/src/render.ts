// HTML builders. Pure functions from payloads + settings to markup strings,
// so the contract tests can run without a browser. main.ts owns the DOM.

import type { RenderSettings } from "./heat.js";
import { legendStops, rampFor, shade, textColor } from "./heat.js";
import type { HistoryEntry } from "./state.js";
import type { CandidateRow, Filter, SegmentPayload, SessionPayload } from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function segmentSpan(seg: SegmentPayload, position: number,
                     settings: RenderSettings, selected: boolean): string {
  const ramp = rampFor(settings, seg.kind);
  const classes = [`seg`, `seg-${seg.kind}`];
  if (selected) classes.push("seg-selected");
  const style = `background:${shade(ramp, seg.probability)};`
    + `color:${textColor(seg.probability)};`
    + `font-size:${settings.fontSizePx}px`;
  return `<span class="${classes.join(" ")}" data-position="${position}"`
    + ` style="${style}" title="p=${seg.probability.toFixed(3)}">`
    + escapeHtml(seg.text) + `</span>`;
}

/**
 * The clickable output area. One span per emitted id, in order; phrase
 * segments carry their own class and ramp so they read differently from
 * tokens at a glance.
 */
export function renderSegments(session: SessionPayload, settings: RenderSettings,
                               selected: number | null = null): string {
  const spans = session.segments.map((seg, i) =>
    segmentSpan(seg, i, settings, i === selected));
  return `<div class="output" data-session="${escapeHtml(session.session_id)}">`
    + spans.join(" ") + `</div>`;
}

/** Markup for the segments strictly before `position` — the part a
 * replacement at `position` must not disturb. */
export function renderPrefixSegments(session: SessionPayload, position: number,
                                     settings: RenderSettings): string {
  const spans = session.segments.slice(0, position).map((seg, i) =>
    segmentSpan(seg, i, settings, false));
  return spans.join(" ");
}

/**
 * The candidate panel: one row per API row, in the API's order (the server
 * sends probability-descending). Rows whose kind falls outside the filter
 * are never rendered, whatever the payload holds.
 */
export function renderCandidatePanel(rows: CandidateRow[], filter: Filter): string {
  const visible = rows.filter((row) =>
    filter === "both" || (filter === "tokens" ? row.kind === "token"
                                              : row.kind === "phrase"));
  const items = visible.map((row) =>
    `<li class="cand cand-${row.kind}">`
    + `<button type="button" data-id="${row.id}">`
    + `<span class="cand-prob">${row.probability.toFixed(3)}</span>`
    + `<span class="cand-kind">${row.kind}</span>`
    + `<span class="cand-text">${escapeHtml(row.text)}</span>`
    + `</button></li>`);
  return `<ol class="panel">` + items.join("") + `</ol>`;
}

export function renderLegend(settings: RenderSettings): string {
  const strip = (label: string, stops: string[]) =>
    `<div class="legend-row"><span class="legend-label">${label}</span>`
    + stops.map((c) => `<span class="legend-swatch" style="background:${c}"></span>`).join("")
    + `</div>`;
  return `<div class="legend">`
    + strip("tokens", legendStops(settings.tokenRamp))
    + strip("phrases", legendStops(settings.phraseRamp))
    + `</div>`;
}

export function renderHistory(entries: HistoryEntry[], activeId: string | null): string {
  const items = entries.map((e) => {
    const classes = e.sessionId === activeId ? "hist hist-active" : "hist";
    const origin = e.parentSessionId === null ? "generate" : "steer";
    return `<li class="${classes}" data-session="${escapeHtml(e.sessionId)}">`
      + `<span class="hist-origin">${origin}</span> `
      + escapeHtml(e.text) + `</li>`;
  });
  return `<ul class="history">` + items.join("") + `</ul>`;
}

export function renderError(code: string, message: string): string {
  return `<div class="error" data-code="${escapeHtml(code)}">`
    + escapeHtml(message) + `</div>`;
}
