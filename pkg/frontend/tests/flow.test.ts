/** Drives the UI controller through upload, rank, override-click, apply,
 * and undo against the real service, then checks the resulting server
 * state matches the same flow performed with direct HTTP calls. */

import { Window } from "happy-dom";
import { describe, expect, inject, test } from "vitest";

import { ApiClient, type StepSummary } from "../src/api.js";
import { App } from "../src/app.js";
import { decodeMask } from "../src/mask.js";
import {
  GREEN_DISK_CENTER,
  SCENE_HEIGHT,
  SCENE_WIDTH,
  scenePngBlob,
} from "./fixtures.js";

function makeApp(sessionId: string | null = null) {
  const win = new Window({ url: "http://localhost/" });
  const doc = win.document;
  const rootNode = doc.createElement("div");
  doc.body.appendChild(rootNode);
  const root = rootNode as unknown as HTMLElement;
  const client = new ApiClient(inject("serviceUrl"));
  const app = new App(root, client, sessionId);
  return { win, root, app, client };
}

function query<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node as T;
}

function comparableStep(step: StepSummary) {
  return {
    index: step.index,
    status: step.status,
    instruction: step.instruction,
    seed: step.seed,
    error: step.error,
    selection: step.selection,
  };
}

describe("scripted browser flow", () => {
  test("upload, rank, override-click, apply, undo matches direct HTTP", async () => {
    const { root, app, client } = makeApp();

    // Upload: creates the session; the frame shows server step 0.
    await app.uploadFile(scenePngBlob());
    await app.settled();
    const uiSession = app.sessionId;
    expect(uiSession).not.toBeNull();
    expect(app.currentImageSrc).toContain(`/steps/0/image`);
    expect(query(root, ".history .strip").children.length).toBe(1);

    // Rank: submit the source prompt through the button.
    query<HTMLInputElement>(root, ".source-input").value = "red circle";
    query<HTMLButtonElement>(root, ".rank-btn").click();
    await app.settled();
    expect(app.rankNoteText).toContain("Best match");
    expect(app.applyEnabled).toBe(true);

    // Override-click: pick the green disk, which is not the top match.
    app.clickOverlayAt(GREEN_DISK_CENTER[0], GREEN_DISK_CENTER[1]);
    const overrideId = app.overrideSegmentId;
    expect(overrideId).not.toBeNull();

    // Apply: mutation buttons lock while the edit is in flight.
    query<HTMLInputElement>(root, ".target-input").value = "blue circle";
    const applyButton = query<HTMLButtonElement>(root, ".apply-btn");
    applyButton.click();
    expect(applyButton.disabled).toBe(true);
    expect(query<HTMLButtonElement>(root, ".rank-btn").disabled).toBe(true);
    await app.settled();

    const afterApply = await client.getSession(uiSession!);
    expect(afterApply.current_step).toBe(1);
    expect(afterApply.steps[0]?.status).toBe("applied");
    expect(afterApply.steps[0]?.selection?.overridden).toBe(true);
    expect(afterApply.steps[0]?.selection?.selected_segment_id).toBe(overrideId);
    expect(app.currentImageSrc).toContain(`/steps/1/image`);
    expect(query(root, ".history .strip").children.length).toBe(2);
    const uiStepSummary = afterApply.steps[0]!;
    const uiStepImage = await client.fetchStepImage(uiSession!, 1);

    // Undo: click the base thumbnail in the history strip.
    (query(root, ".history .strip").children[0] as HTMLButtonElement).click();
    await app.settled();
    const afterUndo = await client.getSession(uiSession!);
    expect(afterUndo.current_step).toBe(0);
    expect(afterUndo.steps).toEqual([]);
    expect(app.currentImageSrc).toContain(`/steps/0/image`);
    const uiBaseImage = await client.fetchStepImage(uiSession!, 0);

    // The same flow, driven by direct HTTP calls on a fresh session.
    const direct = new ApiClient(inject("serviceUrl"));
    const created = await direct.createSession(scenePngBlob());
    const preview = await direct.rank(created.session_id, "red circle");
    expect(preview.outcome).toBe("matched");
    const [cx, cy] = GREEN_DISK_CENTER;
    const target = preview.segments.find(
      (seg) => decodeMask(seg.mask)[cy * SCENE_WIDTH + cx] === 1,
    );
    expect(target).toBeDefined();
    expect(target!.segment_id).toBe(overrideId);
    expect(target!.rank).not.toBe(1);

    const directStep = await direct.edit(created.session_id, {
      source_prompt: "red circle",
      target_prompt: "blue circle",
      override_segment_id: target!.segment_id,
    });
    const directStepImage = await direct.fetchStepImage(created.session_id, 1);
    await direct.undoTo(created.session_id, 0);
    const directFinal = await direct.getSession(created.session_id);
    const directBaseImage = await direct.fetchStepImage(created.session_id, 0);

    // Both flows produced the same step record and the same pixels.
    expect(comparableStep(uiStepSummary)).toEqual(comparableStep(directStep));
    expect(uiStepImage).toEqual(directStepImage);
    expect(afterUndo.current_step).toBe(directFinal.current_step);
    expect(afterUndo.steps).toEqual(directFinal.steps);
    expect(uiBaseImage).toEqual(directBaseImage);
  });

  test("deep link restores an existing session from the server", async () => {
    const seedApp = makeApp();
    await seedApp.app.uploadFile(scenePngBlob());
    await seedApp.app.settled();
    const sessionId = seedApp.app.sessionId!;

    const revisit = makeApp(sessionId);
    await revisit.app.settled();
    expect(revisit.app.sessionId).toBe(sessionId);
    expect(revisit.app.currentImageSrc).toContain(`/steps/0/image`);
    const summary = await revisit.client.getSession(sessionId);
    expect(summary.width).toBe(SCENE_WIDTH);
    expect(summary.height).toBe(SCENE_HEIGHT);
  });

  test("rank with an unmatched prompt disables apply until an override click", async () => {
    const { root, app } = makeApp();
    await app.uploadFile(scenePngBlob());
    await app.settled();

    // Raise the threshold far above any softmax score by recreating the
    // session with a strict config through the same client.
    const strict = await app.client.createSession(scenePngBlob(), {
      threshold: 0.9,
      on_no_match: "skip",
    });
    const strictApp = makeApp(strict.session_id);
    await strictApp.app.settled();

    query<HTMLInputElement>(strictApp.root, ".source-input").value = "red circle";
    query<HTMLButtonElement>(strictApp.root, ".rank-btn").click();
    await strictApp.app.settled();
    expect(strictApp.app.rankNoteText).toContain("No segment matched");
    expect(strictApp.app.applyEnabled).toBe(false);

    strictApp.app.clickOverlayAt(GREEN_DISK_CENTER[0], GREEN_DISK_CENTER[1]);
    expect(strictApp.app.overrideSegmentId).not.toBeNull();
    expect(strictApp.app.applyEnabled).toBe(true);
  });
});
