/**
 * View state for the three-panel workflow. Pure data and transitions, no DOM
 * and no I/O, so the whole machine is unit-testable.
 */

import type { JobInfo, ReconstructionDoc, RewriteSessionDoc, RewriteState } from "./api.js";

export type Panel = "reverse_engineer" | "rewrite" | "generate";

export interface ComparisonSlots {
  a: number | null;
  b: number | null;
}

export interface ViewState {
  rewriteId: string | null;
  panel: Panel;
  session: RewriteSessionDoc | null;
  reconstruction: ReconstructionDoc | null;
  pendingJobs: JobInfo[];
  failedJobs: JobInfo[];
  comparison: ComparisonSlots;
  editorText: string;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    rewriteId: null,
    panel: "reverse_engineer",
    session: null,
    reconstruction: null,
    pendingJobs: [],
    failedJobs: [],
    comparison: { a: null, b: null },
    editorText: "",
    error: null,
  };
}

/** Fold a polled GET /rewrites/{id} response into the view. */
export function applyRewriteState(state: ViewState, fetched: RewriteState): ViewState {
  const pending = fetched.jobs.filter((j) => j.state === "queued" || j.state === "running");
  const failed = fetched.jobs.filter((j) => j.state === "failed");
  const session = fetched.session ?? state.session;
  // The editor follows the server's working prompt unless the user has
  // local edits in flight (caller decides by passing keepEditor).
  return {
    ...state,
    rewriteId: fetched.id,
    session,
    reconstruction: fetched.reconstruction ?? state.reconstruction,
    pendingJobs: pending,
    failedJobs: failed,
    error: failed.length ? (failed[failed.length - 1].error ?? "job failed") : null,
  };
}

export function syncEditorToWorkingPrompt(state: ViewState): ViewState {
  if (!state.session) return state;
  return { ...state, editorText: state.session.working_prompt.text };
}

export function hasPendingJobs(state: ViewState): boolean {
  return state.pendingJobs.length > 0;
}

export function versionCount(state: ViewState): number {
  return state.session ? state.session.versions.length : 0;
}

/** Comparison is selectable only once at least one version exists. */
export function canCompare(state: ViewState): boolean {
  return versionCount(state) >= 1;
}

export function selectComparison(
  state: ViewState,
  slot: "a" | "b",
  index: number,
): ViewState {
  if (!canCompare(state)) {
    throw new Error("comparison requires at least one generated version");
  }
  const known = new Set(state.session!.versions.map((v) => v.version_index));
  if (!known.has(index)) {
    throw new Error(`version ${index} does not exist`);
  }
  return { ...state, comparison: { ...state.comparison, [slot]: index } };
}

export function gotoPanel(state: ViewState, panel: Panel): ViewState {
  // "Return to Rewrite" and its siblings never touch session data.
  return { ...state, panel };
}

export function reconstructionProgress(state: ViewState): {
  iterations: number;
  status: string | null;
} {
  const recon = state.reconstruction;
  return {
    iterations: recon ? recon.records.length : 0,
    status: recon ? recon.status : null,
  };
}

/**
 * The pre-filled starter message shown when the assist chat opens. Must stay
 * byte-identical to the scaffold the backend sends for a session's first
 * assist request.
 */
export function assistStarter(creativeGoal: string, promptText: string): string {
  return (
    `I want to repurpose my video. My goal is to ${creativeGoal}. ` +
    `Here is the text-to-video prompt of my original video: ${promptText}. ` +
    `Help me rewrite the prompt…`
  );
}
