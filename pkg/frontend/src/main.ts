/**
 * Page wiring: one query box, a current panel, and an optional baseline
 * panel that appears when an answer is re-asked with documents excluded.
 */

import { ApiClient, ApiError } from "./api";
import { renderPanel, RenderCallbacks } from "./render";
import { SessionState } from "./state";

// State
const state = new SessionState();
const selectedTokens = new Set<number>();
let lastQuery = "";

// DOM elements
const queryInput = document.getElementById("query-input") as HTMLInputElement;
const askBtn = document.getElementById("ask-btn") as HTMLButtonElement;
const pinBtn = document.getElementById("pin-btn") as HTMLButtonElement;
const statusLine = document.getElementById("status-line")!;
const currentPanelEl = document.getElementById("current-panel")!;
const baselinePanelEl = document.getElementById("baseline-panel")!;

const api = new ApiClient(
  (window as { RAGSCOPE_API?: string }).RAGSCOPE_API ?? "",
  (window as { RAGSCOPE_KEY?: string }).RAGSCOPE_KEY ?? "",
);

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.classList.toggle("error", isError);
}

const callbacks: RenderCallbacks = {
  onToggleAnswerToken(index) {
    if (selectedTokens.has(index)) {
      selectedTokens.delete(index);
    } else {
      selectedTokens.add(index);
    }
    redraw();
  },
  onToggleExclusion(docId) {
    state.toggleExclusion(docId);
    void issueRewrite();
  },
};

function redraw(): void {
  const current = state.current;
  if (current) {
    renderPanel(currentPanelEl, current, selectedTokens, callbacks);
  } else {
    currentPanelEl.textContent = "";
  }
  const baseline = state.baseline;
  baselinePanelEl.classList.toggle("hidden", baseline === null);
  if (baseline) {
    // the baseline is a frozen snapshot; its toggles are display-only
    renderPanel(baselinePanelEl, baseline, selectedTokens, {
      onToggleAnswerToken: callbacks.onToggleAnswerToken,
      onToggleExclusion: () => undefined,
    });
  }
}

async function issueQuery(): Promise<void> {
  const query = queryInput.value.trim();
  if (!query) return;
  lastQuery = query;
  selectedTokens.clear();
  state.resetForNewQuery();
  const ticket = state.beginRequest();
  setStatus("asking…");
  try {
    const response = await api.query(query);
    if (state.acceptResponse(ticket, response, "answer")) {
      setStatus(`request ${response.request_id}`);
      redraw();
    }
  } catch (err) {
    setStatus(err instanceof ApiError ? err.message : String(err), true);
  }
}

async function issueRewrite(): Promise<void> {
  if (!lastQuery) return;
  const ticket = state.beginRequest();
  const excluded = [...state.excludedDocIds].sort((a, b) => a - b).join(", ");
  setStatus(`re-asking without [${excluded}]…`);
  try {
    const response = await api.rewrite(lastQuery, state.excludedDocIds);
    if (state.acceptResponse(ticket, response, `rewrite minus [${excluded}]`)) {
      setStatus(`request ${response.request_id}`);
      redraw();
    }
  } catch (err) {
    setStatus(err instanceof ApiError ? err.message : String(err), true);
  }
}

askBtn.addEventListener("click", () => void issueQuery());
queryInput.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") void issueQuery();
});
pinBtn.addEventListener("click", () => {
  state.pinCurrent();
  redraw();
});

void api
  .health()
  .then((h) => setStatus(`connected: ${h.workers} workers, ${h.backend}`))
  .catch(() => setStatus("backend unreachable — set window.RAGSCOPE_API / RAGSCOPE_KEY", true));
