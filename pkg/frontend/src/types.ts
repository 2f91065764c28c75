// Wire types for the five service endpoints. Field names mirror the JSON
// payloads exactly; nothing here is computed client-side.

export type SegmentKind = "token" | "phrase";

export type Filter = "phrases" | "both" | "tokens";

export const FILTERS: readonly Filter[] = ["phrases", "both", "tokens"];

export interface HealthPayload {
  status: string;
  model: {
    fingerprint: string;
    vocab_size: number;
    d_model: number;
    n_layers: number;
    max_seq_len: number;
  };
  retrieval: boolean;
  sessions: number;
}

export interface SegmentPayload {
  text: string;
  kind: SegmentKind;
  probability: number;
}

export interface SessionPayload {
  session_id: string;
  prefix: string;
  ids: number[];
  text: string;
  segments: SegmentPayload[];
  candidates: string[];
}

export interface SteerPayload extends SessionPayload {
  parent_session_id: string;
  position: number;
}

export interface CandidateRow {
  id: number;
  text: string;
  kind: SegmentKind;
  probability: number;
}

export interface CandidatesPayload {
  session_id: string;
  position: number;
  filter: Filter;
  candidates: CandidateRow[];
}

export interface VizPayload {
  session_id: string;
  segments: SegmentPayload[];
  svg: string;
}

export interface ErrorPayload {
  error: { code: string; message: string };
}

export interface GenerateOverrides {
  strategy?: string;
  temperature?: number;
  top_k?: number;
  min_new_ids?: number;
  max_new_ids?: number;
  seed?: number;
  k_docs?: number;
  candidate_cap?: number;
  top_record?: number;
}
