// View state and its transitions. Every function returns a fresh state and
// enforces the two structural invariants: the selected position stays valid
// for the active session, and the filter is always one of the three values.

import type { RenderSettings } from "./heat.js";
import { defaultSettings } from "./heat.js";
import type {
  CandidateRow,
  CandidatesPayload,
  Filter,
  SessionPayload,
  SteerPayload,
} from "./types.js";
import { FILTERS } from "./types.js";

export interface HistoryEntry {
  sessionId: string;
  text: string;
  parentSessionId: string | null;
}

export interface ViewState {
  prefix: string;
  phrases: string[];
  session: SessionPayload | null;
  selectedPosition: number | null;
  filter: Filter;
  panel: CandidateRow[] | null;
  history: HistoryEntry[];
  settings: RenderSettings;
}

export function initialState(): ViewState {
  return {
    prefix: "",
    phrases: [],
    session: null,
    selectedPosition: null,
    filter: "both",
    panel: null,
    history: [],
    settings: defaultSettings(),
  };
}

/** Split a `one phrase ; another phrase` entry box into surfaces. */
export function parsePhrases(raw: string): string[] {
  return raw
    .split(";")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
}

function remember(state: ViewState, parentId: string | null): HistoryEntry[] {
  if (state.session === null) return state.history;
  const entry: HistoryEntry = {
    sessionId: state.session.session_id,
    text: state.session.text,
    parentSessionId: parentId,
  };
  // most recent first, no duplicate ids
  const rest = state.history.filter((e) => e.sessionId !== entry.sessionId);
  return [entry, ...rest];
}

/** A fresh generation replaces the view; the old session goes to history. */
export function withGeneration(state: ViewState, payload: SessionPayload): ViewState {
  return {
    ...state,
    session: payload,
    selectedPosition: null,
    panel: null,
    history: remember(state, null),
  };
}

/** Steering switches the view to the child session; the parent is kept. */
export function withSteer(state: ViewState, payload: SteerPayload): ViewState {
  if (state.session === null || payload.parent_session_id !== state.session.session_id) {
    throw new Error("steer payload does not belong to the active session");
  }
  return {
    ...state,
    session: payload,
    selectedPosition: null,
    panel: null,
    history: remember(state, payload.parent_session_id),
  };
}

export function withSelection(state: ViewState, position: number): ViewState {
  if (state.session === null) {
    throw new Error("no active session to inspect");
  }
  if (!Number.isInteger(position) || position < 0
      || position >= state.session.segments.length) {
    throw new Error(`position ${position} outside the session's segments`);
  }
  return { ...state, selectedPosition: position, panel: null };
}

/** Changing the filter re-queries but must not lose the selection. */
export function withFilter(state: ViewState, filter: Filter): ViewState {
  if (!FILTERS.includes(filter)) {
    throw new Error(`filter must be one of ${FILTERS.join(", ")}`);
  }
  return { ...state, filter, panel: null };
}

/**
 * Install a candidate panel. Responses for a session other than the active
 * one are stale (the view moved on while the request was in flight) and
 * are dropped without touching the state.
 */
export function withPanel(state: ViewState, payload: CandidatesPayload): ViewState {
  if (state.session === null
      || payload.session_id !== state.session.session_id
      || payload.position !== state.selectedPosition) {
    return state;
  }
  return { ...state, panel: payload.candidates };
}

export function withSettings(state: ViewState, settings: RenderSettings): ViewState {
  return { ...state, settings };
}
