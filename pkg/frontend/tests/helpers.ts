import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api";

const here = dirname(fileURLToPath(import.meta.url));

/** Load one captured service response from tests/fixtures. */
export function fixture<T>(name: string): T {
  const raw = readFileSync(join(here, "fixtures", `${name}.json`), "utf-8");
  return JSON.parse(raw) as T;
}

/** A fetch stub mapping `METHOD path` (query included) to canned bodies. */
export function stubFetch(routes: Record<string, { status: number; body: unknown }>):
    FetchLike & { calls: string[] } {
  const calls: string[] = [];
  const doFetch: FetchLike = (url, init) => {
    const key = `${init?.method ?? "GET"} ${url}`;
    calls.push(key);
    const route = routes[key];
    if (!route) {
      throw new Error(`no stub for ${key}`);
    }
    return Promise.resolve({
      status: route.status,
      json: () => Promise.resolve(route.body),
    });
  };
  return Object.assign(doFetch, { calls });
}

/** Pull data-id attributes out of panel markup, in document order. */
export function renderedIds(html: string): number[] {
  return [...html.matchAll(/data-id="(\d+)"/g)].map((m) => Number(m[1]));
}

/** Pull the rendered probability cells, in document order. */
export function renderedProbs(html: string): number[] {
  return [...html.matchAll(/class="cand-prob">([\d.]+)</g)].map((m) => Number(m[1]));
}
