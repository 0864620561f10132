/**
 * UI session state: the current answer, the pinned baseline it is
 * compared against, the document-exclusion toggles, and the request
 * sequencing that discards stale responses.
 *
 * Responses are deep-frozen on arrival. The comparison view depends on
 * the baseline staying byte-identical to what the user saw when they
 * pinned it; freezing turns any accidental mutation into a loud error
 * instead of a silently drifting display.
 */

import { QueryResponse } from "./types";

function deepFreeze<T>(value: T): T {
  if (value && typeof value === "object" && !Object.isFrozen(value)) {
    Object.freeze(value);
    for (const key of Object.getOwnPropertyNames(value)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
  }
  return value;
}

export interface Panel {
  readonly label: string;
  readonly response: QueryResponse;
}

export class SessionState {
  private currentPanel: Panel | null = null;
  private baselinePanel: Panel | null = null;
  private excluded = new Set<number>();
  private issued = 0;
  private accepted = 0;

  get current(): Panel | null {
    return this.currentPanel;
  }

  get baseline(): Panel | null {
    return this.baselinePanel;
  }

  get excludedDocIds(): ReadonlySet<number> {
    return this.excluded;
  }

  /** Flip one document's exclusion toggle; returns its new state. */
  toggleExclusion(docId: number): boolean {
    if (this.excluded.has(docId)) {
      this.excluded.delete(docId);
      return false;
    }
    this.excluded.add(docId);
    return true;
  }

  clearExclusions(): void {
    this.excluded.clear();
  }

  /**
   * Mark a request as in flight and get its ticket. Tickets make
   * out-of-order arrivals safe: only the newest request may publish.
   */
  beginRequest(): number {
    return ++this.issued;
  }

  /**
   * Publish a response if its ticket is still the newest. When the
   * arriving answer is a rewrite, the answer it replaces is kept as the
   * baseline panel so both render side by side.
   */
  acceptResponse(ticket: number, response: QueryResponse, label: string): boolean {
    if (ticket < this.issued || ticket <= this.accepted) {
      return false; // a newer request exists or already published
    }
    this.accepted = ticket;
    const frozen = deepFreeze(response);
    if (this.currentPanel && label.startsWith("rewrite")) {
      this.baselinePanel = this.currentPanel;
    }
    this.currentPanel = { label, response: frozen };
    return true;
  }

  /** Explicitly pin the current answer as the comparison baseline. */
  pinCurrent(): void {
    if (this.currentPanel) {
      this.baselinePanel = this.currentPanel;
    }
  }

  unpin(): void {
    this.baselinePanel = null;
  }

  /** Fresh question: comparison and toggles no longer apply. */
  resetForNewQuery(): void {
    this.baselinePanel = null;
    this.currentPanel = null;
    this.excluded.clear();
  }
}
