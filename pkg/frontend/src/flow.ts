/**
 * Workflow controller: drives the API from view-level intents and owns the
 * polling loop. DOM-free so the whole flow can run under node for tests; the
 * page layer subscribes via the onChange callback.
 */

import { ApiClient, type VersionDoc } from "./api.js";
import {
  applyRewriteState,
  gotoPanel,
  hasPendingJobs,
  initialState,
  selectComparison,
  syncEditorToWorkingPrompt,
  type Panel,
  type ViewState,
} from "./state.js";

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class RewriteFlow {
  state: ViewState = initialState();

  constructor(
    private api: ApiClient,
    private onChange: (state: ViewState) => void = () => {},
    private pollIntervalMs = 1500,
  ) {}

  private set(next: ViewState): void {
    this.state = next;
    this.onChange(next);
  }

  /** Upload a clip and kick off the reverse-engineering run. */
  async uploadAndStart(data: Blob | Uint8Array, filename = "clip.json"): Promise<void> {
    const clip = await this.api.uploadClip(data, filename);
    const started = await this.api.startRewrite(clip.id);
    this.set({ ...initialState(), rewriteId: started.id, panel: "reverse_engineer" });
    await this.refresh();
  }

  /** Rebuild the whole view from GET endpoints (page load / reload). */
  async hydrate(rewriteId: string): Promise<void> {
    this.set({ ...initialState(), rewriteId });
    await this.refresh();
    this.set(syncEditorToWorkingPrompt(this.state));
  }

  async refresh(): Promise<void> {
    if (!this.state.rewriteId) return;
    const fetched = await this.api.getRewrite(this.state.rewriteId);
    const hadSession = this.state.session !== null;
    let next = applyRewriteState(this.state, fetched);
    if (!hadSession && next.session) {
      next = syncEditorToWorkingPrompt(next);
    }
    this.set(next);
  }

  /** Poll until no jobs are pending (reconnect-safe; read-only requests). */
  async waitForIdle(timeoutMs = 120_000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    await this.refresh();
    while (hasPendingJobs(this.state)) {
      if (Date.now() > deadline) throw new Error("timed out waiting for jobs");
      await sleep(this.pollIntervalMs);
      await this.refresh();
    }
  }

  setEditorText(text: string): void {
    this.set({ ...this.state, editorText: text });
  }

  /** Persist the editor content as the working prompt. */
  async savePrompt(): Promise<void> {
    if (!this.state.rewriteId) throw new Error("no active session");
    await this.api.putPrompt(this.state.rewriteId, this.state.editorText);
    await this.refresh();
  }

  async requestAssist(goal: string): Promise<void> {
    if (!this.state.rewriteId) throw new Error("no active session");
    await this.api.requestAssist(this.state.rewriteId, goal);
    await this.waitForIdle();
  }

  /** One-click copy of an assistant suggestion into the editor. */
  copySuggestion(chatIndex: number): void {
    const chat = this.state.session?.chat ?? [];
    const message = chat[chatIndex];
    if (!message || message.role !== "assistant") {
      throw new Error("only assistant messages can be copied");
    }
    this.setEditorText(message.text);
  }

  async requestFirstFrame(goal: string): Promise<void> {
    if (!this.state.rewriteId) throw new Error("no active session");
    await this.api.requestFirstFrame(this.state.rewriteId, goal);
    await this.waitForIdle();
  }

  async revertFirstFrame(): Promise<void> {
    if (!this.state.rewriteId) throw new Error("no active session");
    await this.api.revertFirstFrame(this.state.rewriteId);
    await this.refresh();
  }

  async generate(): Promise<void> {
    if (!this.state.rewriteId) throw new Error("no active session");
    await this.api.generateVersion(this.state.rewriteId);
    this.set(gotoPanel(this.state, "generate"));
    await this.waitForIdle();
  }

  selectComparison(slot: "a" | "b", index: number): void {
    this.set(selectComparison(this.state, slot, index));
  }

  async comparison(): Promise<{ a: VersionDoc; b: VersionDoc } | null> {
    const { a, b } = this.state.comparison;
    if (!this.state.rewriteId || a === null || b === null) return null;
    return this.api.compareVersions(this.state.rewriteId, a, b);
  }

  goto(panel: Panel): void {
    this.set(gotoPanel(this.state, panel));
  }
}
