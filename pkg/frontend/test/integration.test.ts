/**
 * End-to-end: the three-panel flow against a real simulation-backed service.
 *
 * Spawns `clipscript serve --adapter sim` (the python package must be
 * installed), drives the full script through the flow controller, and checks
 * that a "page reload" (a fresh controller hydrated from GETs alone) sees the
 * same state.
 */

import assert from "node:assert/strict";
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { after, before, test } from "node:test";

import { ApiClient } from "../src/api.js";
import { RewriteFlow } from "../src/flow.js";
import { assistStarter, canCompare } from "../src/state.js";

const PYTHON = process.env.CLIPSCRIPT_PYTHON ?? "python3";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

// Minimal sceneclip document the simulation backend understands.
const SCENECLIP = JSON.stringify({
  format: "sceneclip.v1",
  scene: {
    subject: "fox",
    subject_color: "orange",
    background: "forest",
    lighting: "golden hour",
    camera_angle: "eye level",
    camera_motion: "static",
    subject_motion: "running",
    style: "photorealistic",
  },
  duration: 8.0,
  fps: 16.0,
  width: 64,
  height: 64,
});

let server: ChildProcess | null = null;
let api: ApiClient;

before(async () => {
  const port = await freePort();
  const dataDir = mkdtempSync(path.join(os.tmpdir(), "clipscript-ui-"));
  server = spawn(
    PYTHON,
    [
      "-m", "clipscript.cli", "serve",
      "--port", String(port),
      "--host", "127.0.0.1",
      "--data-dir", dataDir,
      "--adapter", "sim",
      "--seed", "5",
      "--workers", "1",
    ],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  const stderr: string[] = [];
  server.stderr?.on("data", (chunk) => stderr.push(String(chunk)));

  api = new ApiClient(`http://127.0.0.1:${port}`);
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      await api.health();
      break;
    } catch {
      if (Date.now() > deadline) {
        throw new Error(`service never came up:\n${stderr.join("")}`);
      }
      await new Promise((r) => setTimeout(r, 250));
    }
  }
});

after(() => {
  server?.kill("SIGTERM");
});

test("three-panel flow completes against the live service", { timeout: 120_000 }, async () => {
  const flow = new RewriteFlow(api, () => {}, 100);

  // Panel 1: reverse-engineer. Upload and wait for the six-iteration run.
  await flow.uploadAndStart(new TextEncoder().encode(SCENECLIP));
  await flow.waitForIdle();
  assert.ok(flow.state.session, "session document appears when the job is done");
  assert.equal(flow.state.reconstruction?.records.length, 6);
  assert.ok(flow.state.editorText.length > 0, "prompt box populates with the best prompt");
  assert.equal(flow.state.editorText, flow.state.session!.working_prompt.text);

  // Panel 2: rewrite. Direct edit, AI help, first-frame edit.
  flow.goto("rewrite");
  flow.setEditorText("subject: robot\nstyle: anime");
  await flow.savePrompt();
  assert.equal(flow.state.session!.working_prompt.text, "subject: robot\nstyle: anime");
  assert.equal(flow.state.session!.working_prompt.provenance, "user_edited");

  await flow.requestAssist("lighting: neon");
  const chat = flow.state.session!.chat;
  assert.equal(chat.length, 2);
  assert.equal(
    chat[0].text,
    assistStarter("lighting: neon", "subject: robot\nstyle: anime"),
    "first outgoing assist message is the verbatim scaffold",
  );
  assert.equal(chat[1].role, "assistant");

  flow.copySuggestion(1);
  assert.equal(flow.state.editorText, chat[1].text);
  await flow.savePrompt();

  const frameBefore = flow.state.session!.working_first_frame.image_ref;
  await flow.requestFirstFrame("style: vhs");
  assert.notEqual(flow.state.session!.working_first_frame.image_ref, frameBefore);
  assert.equal(flow.state.session!.frame_history.length, 1);

  // Panel 3: generate twice, then compare snapshots.
  await flow.generate();
  assert.equal(flow.state.panel, "generate");
  flow.goto("rewrite"); // "Return to Rewrite" keeps everything intact
  await flow.generate();
  assert.equal(flow.state.session!.versions.length, 2);
  assert.ok(canCompare(flow.state));

  flow.selectComparison("a", 1);
  flow.selectComparison("b", 2);
  const pair = await flow.comparison();
  assert.ok(pair);
  assert.equal(pair!.a.version_index, 1);
  assert.equal(pair!.b.version_index, 2);
  assert.equal(pair!.a.prompt_snapshot.text, chat[1].text);
  assert.equal(pair!.b.prompt_snapshot.text, chat[1].text);

  // Generation never mutates working state ("return to rewrite" semantics).
  assert.equal(flow.state.session!.working_prompt.text, chat[1].text);

  // Page reload: a fresh controller hydrated from GET endpoints alone.
  const reloaded = new RewriteFlow(api, () => {}, 100);
  await reloaded.hydrate(flow.state.rewriteId!);
  assert.equal(reloaded.state.session!.working_prompt.text, chat[1].text);
  assert.equal(reloaded.state.session!.versions.length, 2);
  assert.deepEqual(
    reloaded.state.session!.chat.map((m) => m.role),
    ["user", "assistant"],
  );
  assert.equal(reloaded.state.reconstruction?.records.length, 6);
  assert.equal(reloaded.state.editorText, chat[1].text);

  // Version media is reachable through the documented media endpoint.
  const versions = await api.listVersions(flow.state.rewriteId!);
  const resp = await fetch(api.mediaUrl(versions.versions[0].first_frame_ref));
  assert.equal(resp.status, 200);
  assert.equal(resp.headers.get("content-type"), "image/png");
});
