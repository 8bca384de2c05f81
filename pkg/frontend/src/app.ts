/**
 * DOM layer: renders the three panels from ViewState and forwards intents to
 * the flow controller. All business behavior lives server-side; this file is
 * wiring only.
 */

import { ApiClient } from "./api.js";
import { RewriteFlow } from "./flow.js";
import {
  assistStarter,
  canCompare,
  hasPendingJobs,
  reconstructionProgress,
  type ViewState,
} from "./state.js";

const api = new ApiClient("");
const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

function render(state: ViewState): void {
  for (const panel of ["reverse_engineer", "rewrite", "generate"] as const) {
    $(`panel-${panel}`).classList.toggle("active", state.panel === panel);
  }
  $("status").textContent = state.error
    ? `error: ${state.error}`
    : hasPendingJobs(state)
      ? `working: ${state.pendingJobs.map((j) => j.kind).join(", ")}`
      : "idle";

  const progress = reconstructionProgress(state);
  $("re-progress").textContent = progress.status
    ? `${progress.iterations} iterations (${progress.status})`
    : "upload a clip to begin";

  const editor = $<HTMLTextAreaElement>("prompt-editor");
  if (editor.value !== state.editorText) editor.value = state.editorText;

  if (state.session) {
    $<HTMLImageElement>("first-frame").src = api.mediaUrl(
      state.session.working_first_frame.image_ref,
    );
    $("revert-frame").toggleAttribute("disabled", state.session.frame_history.length === 0);

    const chat = $("chat-log");
    chat.replaceChildren(
      ...state.session.chat.map((m, i) => {
        const row = document.createElement("div");
        row.className = `chat-${m.role}`;
        row.textContent = m.text;
        if (m.role === "assistant") {
          const copy = document.createElement("button");
          copy.textContent = "Copy to editor";
          copy.onclick = () => flow.copySuggestion(i);
          row.appendChild(copy);
        }
        return row;
      }),
    );

    const versions = $("version-list");
    versions.replaceChildren(
      ...state.session.versions.map((v) => {
        const row = document.createElement("div");
        row.className = "version";
        row.textContent = `v${v.version_index}: ${v.prompt_snapshot.text.slice(0, 80)}`;
        const pickA = document.createElement("button");
        pickA.textContent = "A";
        pickA.onclick = () => flow.selectComparison("a", v.version_index);
        const pickB = document.createElement("button");
        pickB.textContent = "B";
        pickB.onclick = () => flow.selectComparison("b", v.version_index);
        row.append(pickA, pickB);
        return row;
      }),
    );
    $("compare-toggle").toggleAttribute("disabled", !canCompare(state));
  }
}

const flow = new RewriteFlow(api, render);

async function renderComparison(): Promise<void> {
  const pair = await flow.comparison();
  if (!pair) return;
  $("compare-a-prompt").textContent = pair.a.prompt_snapshot.text;
  $("compare-b-prompt").textContent = pair.b.prompt_snapshot.text;
  $<HTMLImageElement>("compare-a-frame").src = api.mediaUrl(pair.a.first_frame_ref);
  $<HTMLImageElement>("compare-b-frame").src = api.mediaUrl(pair.b.first_frame_ref);
}

function wire(): void {
  $<HTMLInputElement>("upload").onchange = async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (!file) return;
    await flow.uploadAndStart(file, file.name);
    window.location.hash = flow.state.rewriteId ?? "";
    await flow.waitForIdle();
    flow.goto("rewrite");
  };

  $("save-prompt").onclick = () => void flow.savePrompt();

  $("ask-ai-help").onclick = () => {
    const goal = $<HTMLInputElement>("assist-goal").value;
    const prompt = flow.state.session?.working_prompt.text ?? "";
    $<HTMLTextAreaElement>("assist-preview").value = assistStarter(goal, prompt);
  };
  $("send-assist").onclick = () => {
    void flow.requestAssist($<HTMLInputElement>("assist-goal").value);
  };

  $("edit-first-frame").onclick = () => {
    void flow.requestFirstFrame($<HTMLInputElement>("frame-goal").value);
  };
  $("revert-frame").onclick = () => void flow.revertFirstFrame();

  $("generate").onclick = () => void flow.generate();
  $("return-to-rewrite").onclick = () => flow.goto("rewrite");
  $("compare-toggle").onclick = () => void renderComparison();

  $("goto-rewrite").onclick = () => flow.goto("rewrite");
  $("goto-generate").onclick = () => flow.goto("generate");
}

window.addEventListener("DOMContentLoaded", () => {
  wire();
  const fromHash = window.location.hash.replace(/^#/, "");
  if (fromHash) {
    void flow.hydrate(fromHash).then(() => flow.waitForIdle());
  } else {
    render(flow.state);
  }
});
