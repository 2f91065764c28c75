// Probability-to-color ramps. Pure rendering transforms: the probability
// itself always comes from the API. Defaults match the server's SVG ramps
// (light-to-dark blues for tokens, pinks-to-magenta for phrases).

import type { SegmentKind } from "./types.js";

export type Rgb = readonly [number, number, number];

export interface Ramp {
  light: Rgb;
  dark: Rgb;
}

export const TOKEN_RAMP: Ramp = { light: [222, 235, 247], dark: [8, 48, 107] };
export const PHRASE_RAMP: Ramp = { light: [253, 224, 221], dark: [122, 1, 119] };

export interface RenderSettings {
  tokenRamp: Ramp;
  phraseRamp: Ramp;
  fontSizePx: number;
}

export function defaultSettings(): RenderSettings {
  return { tokenRamp: TOKEN_RAMP, phraseRamp: PHRASE_RAMP, fontSizePx: 16 };
}

function clamp01(p: number): number {
  return p < 0 ? 0 : p > 1 ? 1 : p;
}

/** Linear interpolation light -> dark, clamped, rounded to 8-bit. */
export function shade(ramp: Ramp, probability: number): string {
  const t = clamp01(probability);
  const channel = (i: number) =>
    Math.round(ramp.light[i] + (ramp.dark[i] - ramp.light[i]) * t);
  return `rgb(${channel(0)}, ${channel(1)}, ${channel(2)})`;
}

export function rampFor(settings: RenderSettings, kind: SegmentKind): Ramp {
  return kind === "phrase" ? settings.phraseRamp : settings.tokenRamp;
}

/** Dark backgrounds need light text; the flip point matches the server. */
export function textColor(probability: number): string {
  return probability > 0.55 ? "#ffffff" : "#111111";
}

/** Evenly spaced swatches for a legend strip. */
export function legendStops(ramp: Ramp, count = 12): string[] {
  const stops: string[] = [];
  for (let i = 0; i < count; i++) {
    stops.push(shade(ramp, count === 1 ? 0 : i / (count - 1)));
  }
  return stops;
}

/** "#rrggbb" -> Rgb, for the settings color inputs. */
export function parseHex(hex: string): Rgb | null {
  const m = /^#([0-9a-f]{6})$/i.exec(hex.trim());
  if (!m) return null;
  const n = parseInt(m[1], 16);
  return [(n >> 16) & 0xff, (n >> 8) & 0xff, n & 0xff];
}
