// The client speaks the five endpoints verbatim and surfaces the server's
// structured errors without reshaping them.

import { describe, expect, it } from "vitest";

import { ApiClient, ApiFailure } from "../src/api";
import type {
  CandidatesPayload,
  ErrorPayload,
  HealthPayload,
  SessionPayload,
  SteerPayload,
  VizPayload,
} from "../src/types";
import { fixture, stubFetch } from "./helpers";

const health = fixture<HealthPayload>("health");
const generated = fixture<SessionPayload>("generate");
const both = fixture<CandidatesPayload>("candidates_both");
const steered = fixture<SteerPayload>("steer_alternative");
const viz = fixture<VizPayload>("viz");
const unknown = fixture<ErrorPayload>("error_unknown_session");

const sid = generated.session_id;

function client() {
  const doFetch = stubFetch({
    "GET /api/health": { status: 200, body: health },
    "POST /api/generate": { status: 200, body: generated },
    [`GET /api/candidates?session_id=${sid}&position=1&filter=both&limit=12`]:
      { status: 200, body: both },
    "POST /api/steer": { status: 200, body: steered },
    [`GET /api/viz?session_id=${sid}`]: { status: 200, body: viz },
    "GET /api/candidates?session_id=ghost&position=0&filter=both&limit=50":
      { status: 404, body: unknown },
  });
  return { api: new ApiClient(doFetch), doFetch };
}

describe("api client", () => {
  it("round-trips all five endpoints", async () => {
    const { api } = client();
    expect((await api.health()).status).toBe("ok");
    expect((await api.generate("the cat")).session_id).toBe(sid);
    expect((await api.candidates(sid, 1, "both", 12)).candidates.length)
      .toBe(both.candidates.length);
    expect((await api.steer(sid, 1, 26)).parent_session_id).toBe(sid);
    expect((await api.viz(sid)).svg).toContain("<svg");
  });

  it("posts the generate body the server expects", async () => {
    const routes = stubFetch({ "POST /api/generate": { status: 200, body: generated } });
    let captured = "";
    const api = new ApiClient((url, init) => {
      captured = init?.body ?? "";
      return routes(url, init);
    });
    await api.generate(" the cat ", ["on the mat"], { seed: 9 });
    expect(JSON.parse(captured)).toEqual({
      prefix: " the cat ",
      phrases: ["on the mat"],
      config: { seed: 9 },
    });
  });

  it("omits empty phrase lists entirely", async () => {
    const routes = stubFetch({ "POST /api/generate": { status: 200, body: generated } });
    let captured = "";
    const api = new ApiClient((url, init) => {
      captured = init?.body ?? "";
      return routes(url, init);
    });
    await api.generate("the cat", []);
    expect(JSON.parse(captured)).toEqual({ prefix: "the cat" });
  });

  it("throws ApiFailure carrying the server's code for unknown sessions", async () => {
    const { api } = client();
    const failure = await api.candidates("ghost", 0, "both").then(
      () => null,
      (err: unknown) => err,
    );
    expect(failure).toBeInstanceOf(ApiFailure);
    expect((failure as ApiFailure).status).toBe(404);
    expect((failure as ApiFailure).code).toBe("unknown_session");
    expect((failure as ApiFailure).message).toBe(unknown.error.message);
  });

  it("sends steer ids exactly as listed by the panel", async () => {
    const routes = stubFetch({ "POST /api/steer": { status: 200, body: steered } });
    let captured = "";
    const api = new ApiClient((url, init) => {
      captured = init?.body ?? "";
      return routes(url, init);
    });
    const row = both.candidates[3];
    await api.steer(sid, both.position, row.id);
    expect(JSON.parse(captured)).toEqual({
      session_id: sid,
      position: both.position,
      replacement_id: row.id,
    });
  });
});
