/**
 * Wire types for the diagnostics API.
 *
 * These mirror the JSON the service actually sends; nothing here is
 * invented client-side. `AttributionPayload.values` is the flattened
 * out_len x in_len matrix in row-major order.
 */

export type SegmentKind = "template" | "document" | "query";

export interface SegmentPayload {
  kind: SegmentKind;
  doc_id: number | null;
  token_start: number;
  token_end: number;
  tokens: string[];
}

export interface AttributionPayload {
  out_len: number;
  in_len: number;
  values: number[];
}

export interface DocScorePayload {
  doc_id: number;
  raw: number;
  share: number;
}

export interface HitPayload {
  doc_id: number;
  score: number;
}

export interface QueryResponse {
  request_id: string;
  answer_tokens: string[];
  segments: SegmentPayload[];
  attribution: AttributionPayload;
  doc_scores: DocScorePayload[];
  hits: HitPayload[];
  timings: Record<string, number>;
  warnings: string[];
  exclusions_applied: number[];
  backend_info: Record<string, unknown>;
}

export interface QueryRequestBody {
  query: string;
  k?: number;
  snippet_method?: "naive_first" | "sliding_window";
  excluded_doc_ids?: number[];
}
