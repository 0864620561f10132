/**
 * Client-side attribution math.
 *
 * The service sends one attention matrix per answer: out_len rows (one
 * per generated token), in_len columns (one per prompt token), each row
 * summing to 1. Everything the UI shows — highlight intensities for a
 * clicked set of answer tokens, per-document shares — is recomputed
 * here from that matrix, so these functions must agree with the
 * backend's own aggregation to floating-point accuracy.
 */

import { AttributionPayload, SegmentPayload } from "./types";

/** Unflatten the row-major payload into out_len rows of in_len columns. */
export function reshapeAttribution(att: AttributionPayload): number[][] {
  if (att.values.length !== att.out_len * att.in_len) {
    throw new Error(
      `attribution payload is ${att.values.length} values, expected ${att.out_len}x${att.in_len}`,
    );
  }
  const rows: number[][] = [];
  for (let o = 0; o < att.out_len; o++) {
    rows.push(att.values.slice(o * att.in_len, (o + 1) * att.in_len));
  }
  return rows;
}

/**
 * Column-wise sum of the rows named by `outputs`.
 *
 * Duplicate and unsorted indices are tolerated (a double-clicked token
 * must not count twice). Out-of-range indices are an error: silently
 * dropping them would desynchronize the highlight from the selection.
 */
export function selectionSums(matrix: number[][], outputs: number[]): number[] {
  const outLen = matrix.length;
  const inLen = outLen > 0 ? matrix[0]!.length : 0;
  const unique = [...new Set(outputs)].sort((a, b) => a - b);
  for (const o of unique) {
    if (!Number.isInteger(o) || o < 0 || o >= outLen) {
      throw new Error(`selected output ${o} out of range [0, ${outLen})`);
    }
  }
  const sums = new Array<number>(inLen).fill(0);
  for (const o of unique) {
    const row = matrix[o]!;
    for (let i = 0; i < inLen; i++) {
      sums[i]! += row[i]!;
    }
  }
  return sums;
}

/** Rescale so the brightest token is exactly 1; zeros stay zeros. */
export function scaleToUnitMax(values: number[]): number[] {
  let peak = 0;
  for (const v of values) {
    if (v > peak) peak = v;
  }
  if (peak <= 0) return values.map(() => 0);
  return values.map((v) => v / peak);
}

/** Convenience: sums and display scaling for one click-selection. */
export function selectionHighlight(
  att: AttributionPayload,
  outputs: number[],
): { sums: number[]; scaled: number[] } {
  if (outputs.length === 0) {
    const zeros = new Array<number>(att.in_len).fill(0);
    return { sums: zeros, scaled: [...zeros] };
  }
  const sums = selectionSums(reshapeAttribution(att), outputs);
  return { sums, scaled: scaleToUnitMax(sums) };
}

/**
 * Per-document attention shares recomputed from the raw matrix and the
 * segment layout. The service sends doc_scores too; recomputing lets
 * the UI cross-check the payload it renders.
 */
export function documentShares(
  att: AttributionPayload,
  segments: SegmentPayload[],
): Map<number, number> {
  const matrix = reshapeAttribution(att);
  const raws = new Map<number, number>();
  for (const seg of segments) {
    if (seg.kind !== "document" || seg.doc_id === null) continue;
    let acc = 0;
    for (const row of matrix) {
      for (let i = seg.token_start; i < seg.token_end; i++) {
        acc += row[i]!;
      }
    }
    raws.set(seg.doc_id, acc / Math.max(1, att.out_len));
  }
  let total = 0;
  for (const raw of raws.values()) total += raw;
  const shares = new Map<number, number>();
  for (const [docId, raw] of raws) {
    shares.set(docId, total > 0 ? raw / total : 0);
  }
  return shares;
}
