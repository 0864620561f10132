/**
 * DOM rendering. Tokens are spans whose background opacity tracks the
 * selection highlight; documents are cards with a share bar and an
 * exclude toggle. No framework — the page is small and the state is
 * already managed in state.ts.
 */

import { selectionHighlight } from "./attribution";
import { Panel } from "./state";
import { QueryResponse, SegmentPayload } from "./types";

export interface RenderCallbacks {
  onToggleAnswerToken: (index: number) => void;
  onToggleExclusion: (docId: number) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function segmentClass(seg: SegmentPayload): string {
  return `seg seg-${seg.kind}`;
}

/** The generated answer as clickable token chips. */
export function renderAnswer(
  container: HTMLElement,
  response: QueryResponse,
  selected: ReadonlySet<number>,
  cb: RenderCallbacks,
): void {
  container.textContent = "";
  response.answer_tokens.forEach((token, index) => {
    const chip = el("button", "answer-token", token);
    chip.type = "button";
    if (selected.has(index)) chip.classList.add("selected");
    chip.addEventListener("click", () => cb.onToggleAnswerToken(index));
    container.appendChild(chip);
  });
}

/** Prompt tokens, tinted by the current selection's attribution. */
export function renderPrompt(
  container: HTMLElement,
  response: QueryResponse,
  selected: ReadonlySet<number>,
): void {
  container.textContent = "";
  const { scaled } = selectionHighlight(response.attribution, [...selected]);
  for (const seg of response.segments) {
    const block = el("div", segmentClass(seg));
    if (seg.kind === "document" && seg.doc_id !== null) {
      block.appendChild(el("div", "seg-head", `doc ${seg.doc_id}`));
    }
    const body = el("div", "seg-body");
    seg.tokens.forEach((token, j) => {
      const weight = scaled[seg.token_start + j] ?? 0;
      const span = el("span", "prompt-token", token);
      if (weight > 0) {
        span.style.backgroundColor = `rgba(255, 170, 0, ${(0.85 * weight).toFixed(3)})`;
      }
      body.appendChild(span);
      body.appendChild(document.createTextNode(" "));
    });
    block.appendChild(body);
    container.appendChild(block);
  }
}

/** Retrieved documents with share bars and exclusion toggles. */
export function renderDocs(
  container: HTMLElement,
  response: QueryResponse,
  excluded: ReadonlySet<number>,
  cb: RenderCallbacks,
): void {
  container.textContent = "";
  for (const score of response.doc_scores) {
    const card = el("div", "doc-card");
    const head = el("div", "doc-head");
    head.appendChild(el("span", "doc-id", `doc ${score.doc_id}`));
    head.appendChild(el("span", "doc-share", `${(100 * score.share).toFixed(1)}%`));
    const bar = el("div", "share-bar");
    const fill = el("div", "share-fill");
    fill.style.width = `${(100 * score.share).toFixed(1)}%`;
    bar.appendChild(fill);
    const toggle = el(
      "button",
      "exclude-toggle",
      excluded.has(score.doc_id) ? "include again" : "exclude & re-ask",
    );
    toggle.type = "button";
    toggle.addEventListener("click", () => cb.onToggleExclusion(score.doc_id));
    card.append(head, bar, toggle);
    container.appendChild(card);
  }
  if (response.doc_scores.length === 0) {
    container.appendChild(
      el("p", "empty-note", "No documents in this answer's context."),
    );
  }
}

/** One comparison panel (baseline or current). */
export function renderPanel(
  container: HTMLElement,
  panel: Panel,
  selected: ReadonlySet<number>,
  cb: RenderCallbacks,
): void {
  container.textContent = "";
  container.appendChild(el("h3", "panel-label", panel.label));
  if (panel.response.warnings.length > 0) {
    const warn = el("div", "warnings");
    for (const w of panel.response.warnings) warn.appendChild(el("p", undefined, w));
    container.appendChild(warn);
  }
  const answer = el("div", "answer-row");
  renderAnswer(answer, panel.response, selected, cb);
  const docs = el("div", "docs-col");
  renderDocs(docs, panel.response, new Set(panel.response.exclusions_applied), cb);
  const prompt = el("div", "prompt-col");
  renderPrompt(prompt, panel.response, selected);
  container.append(answer, docs, prompt);
}
