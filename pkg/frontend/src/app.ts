/** Session editor controller: all state lives on the server; the UI
 * re-fetches after every mutation and never touches pixels client-side. */

import { ApiClient, ApiError } from "./api.js";
import type { RankPreview, SessionSummary } from "./api.js";
import { buildOverlayModel, hitTest, paintOverlay } from "./overlay.js";
import type { OverlayModel } from "./overlay.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  private readonly doc: Document;

  private session: SessionSummary | null = null;
  private preview: RankPreview | null = null;
  private overlayModel: OverlayModel | null = null;
  private overrideId: string | null = null;
  private busy = false;
  private inFlight: Promise<void> | null = null;

  private readonly banner: HTMLDivElement;
  private readonly fileInput: HTMLInputElement;
  private readonly workspace: HTMLElement;
  private readonly frame: HTMLImageElement;
  private readonly canvas: HTMLCanvasElement;
  private readonly sourceInput: HTMLInputElement;
  private readonly targetInput: HTMLInputElement;
  private readonly rankButton: HTMLButtonElement;
  private readonly applyButton: HTMLButtonElement;
  private readonly rankNote: HTMLDivElement;
  private readonly overrideNote: HTMLDivElement;
  private readonly sessionLabel: HTMLSpanElement;
  private readonly historySection: HTMLElement;
  private readonly historyStrip: HTMLDivElement;

  constructor(
    readonly root: HTMLElement,
    readonly client: ApiClient,
    initialSessionId: string | null = null,
  ) {
    this.doc = root.ownerDocument;
    const doc = this.doc;

    const shell = el(doc, "div", "segedit-app");

    const header = el(doc, "header");
    header.appendChild(el(doc, "h1", undefined, "segedit"));
    this.sessionLabel = el(doc, "span", "session-label");
    header.appendChild(this.sessionLabel);
    shell.appendChild(header);

    this.banner = el(doc, "div", "banner");
    this.banner.hidden = true;
    shell.appendChild(this.banner);

    const uploadRow = el(doc, "section", "upload-row");
    this.fileInput = el(doc, "input", "file-input");
    this.fileInput.type = "file";
    this.fileInput.accept = "image/png";
    uploadRow.appendChild(this.fileInput);
    uploadRow.appendChild(el(doc, "span", "hint", "Upload a PNG to start a session"));
    shell.appendChild(uploadRow);

    this.workspace = el(doc, "main", "workspace");
    this.workspace.hidden = true;
    const viewer = el(doc, "div", "viewer");
    this.frame = el(doc, "img", "frame");
    this.frame.alt = "current image";
    this.canvas = el(doc, "canvas", "overlay");
    viewer.appendChild(this.frame);
    viewer.appendChild(this.canvas);
    this.workspace.appendChild(viewer);

    const controls = el(doc, "aside", "controls");
    const sourceLabel = el(doc, "label", undefined, "Source prompt ");
    this.sourceInput = el(doc, "input", "source-input");
    this.sourceInput.placeholder = "red circle";
    sourceLabel.appendChild(this.sourceInput);
    controls.appendChild(sourceLabel);
    this.rankButton = el(doc, "button", "rank-btn", "Rank segments");
    controls.appendChild(this.rankButton);
    this.rankNote = el(doc, "div", "rank-note");
    this.rankNote.hidden = true;
    controls.appendChild(this.rankNote);
    const targetLabel = el(doc, "label", undefined, "Target prompt ");
    this.targetInput = el(doc, "input", "target-input");
    this.targetInput.placeholder = "blue circle";
    targetLabel.appendChild(this.targetInput);
    controls.appendChild(targetLabel);
    this.applyButton = el(doc, "button", "apply-btn", "Apply edit");
    controls.appendChild(this.applyButton);
    this.overrideNote = el(doc, "div", "override-note");
    this.overrideNote.hidden = true;
    controls.appendChild(this.overrideNote);
    this.workspace.appendChild(controls);
    shell.appendChild(this.workspace);

    this.historySection = el(doc, "section", "history");
    this.historySection.hidden = true;
    this.historySection.appendChild(el(doc, "h2", undefined, "History"));
    this.historyStrip = el(doc, "div", "strip");
    this.historySection.appendChild(this.historyStrip);
    shell.appendChild(this.historySection);

    root.appendChild(shell);

    this.fileInput.addEventListener("change", () => {
      const file = this.fileInput.files && this.fileInput.files[0];
      if (file) void this.uploadFile(file);
    });
    this.rankButton.addEventListener("click", () => void this.doRank());
    this.applyButton.addEventListener("click", () => void this.doApply());
    this.canvas.addEventListener("click", (event) => {
      const coords = this.eventToImageCoords(event as MouseEvent);
      if (coords) this.clickOverlayAt(coords[0], coords[1]);
    });

    this.updateControls();
    if (initialSessionId) {
      void this.runExclusive(async () => {
        this.session = await this.client.getSession(initialSessionId);
        this.afterSessionChange();
      });
    }
  }

  /** Resolves once no fetch or mutation is in flight. */
  async settled(): Promise<void> {
    while (this.inFlight) {
      await this.inFlight;
    }
  }

  get sessionId(): string | null {
    return this.session ? this.session.session_id : null;
  }

  get overrideSegmentId(): string | null {
    return this.overrideId;
  }

  get applyEnabled(): boolean {
    return !this.applyButton.disabled;
  }

  get bannerText(): string {
    return this.banner.hidden ? "" : this.banner.textContent || "";
  }

  get rankNoteText(): string {
    return this.rankNote.hidden ? "" : this.rankNote.textContent || "";
  }

  get currentImageSrc(): string {
    return this.frame.getAttribute("src") || "";
  }

  uploadFile(file: Blob): Promise<void> {
    return this.runExclusive(async () => {
      const created = await this.client.createSession(file);
      this.session = await this.client.getSession(created.session_id);
      this.preview = null;
      this.overlayModel = null;
      this.overrideId = null;
      this.afterSessionChange();
    });
  }

  doRank(): Promise<void> {
    return this.runExclusive(async () => {
      if (!this.session) return;
      const prompt = this.sourceInput.value.trim();
      if (!prompt) {
        this.showBanner("Type a source prompt before ranking.");
        return;
      }
      this.preview = await this.client.rank(this.session.session_id, prompt);
      this.overrideId = null;
      this.renderPreview();
    });
  }

  doApply(): Promise<void> {
    return this.runExclusive(async () => {
      if (!this.session) return;
      const body: {
        source_prompt: string;
        target_prompt: string;
        override_segment_id?: string;
      } = {
        source_prompt: this.sourceInput.value.trim(),
        target_prompt: this.targetInput.value.trim(),
      };
      if (this.overrideId) body.override_segment_id = this.overrideId;
      await this.client.edit(this.session.session_id, body);
      this.session = await this.client.getSession(this.session.session_id);
      this.preview = null;
      this.overlayModel = null;
      this.overrideId = null;
      this.afterSessionChange();
    });
  }

  doUndo(toStep: number): Promise<void> {
    return this.runExclusive(async () => {
      if (!this.session) return;
      await this.client.undoTo(this.session.session_id, toStep);
      this.session = await this.client.getSession(this.session.session_id);
      this.preview = null;
      this.overlayModel = null;
      this.overrideId = null;
      this.afterSessionChange();
    });
  }

  /** Override selection at image-pixel coordinates (used by canvas clicks). */
  clickOverlayAt(x: number, y: number): void {
    if (!this.overlayModel) return;
    const hit = hitTest(this.overlayModel, x, y);
    this.overrideId = hit;
    if (hit) {
      this.overrideNote.hidden = false;
      this.overrideNote.textContent = `Override: next edit repaints segment ${hit}.`;
    } else {
      this.overrideNote.hidden = true;
      this.overrideNote.textContent = "";
    }
    this.paint();
    this.updateControls();
  }

  private eventToImageCoords(event: MouseEvent): [number, number] | null {
    if (!this.overlayModel) return null;
    const rect = this.canvas.getBoundingClientRect();
    if (rect.width > 0 && rect.height > 0) {
      const x = ((event.clientX - rect.left) / rect.width) * this.overlayModel.width;
      const y = ((event.clientY - rect.top) / rect.height) * this.overlayModel.height;
      return [x, y];
    }
    return [event.offsetX, event.offsetY];
  }

  private runExclusive(action: () => Promise<void>): Promise<void> {
    if (this.busy) return Promise.resolve();
    this.busy = true;
    this.hideBanner();
    this.updateControls();
    const task = (async () => {
      try {
        await action();
      } catch (err) {
        this.showActionError(err);
      } finally {
        this.busy = false;
        this.inFlight = null;
        this.updateControls();
      }
    })();
    this.inFlight = task;
    return task;
  }

  private showActionError(err: unknown): void {
    if (err instanceof ApiError) {
      if (err.code === "session_busy") {
        this.showBanner("Session busy: another edit is in progress. Retry in a moment.");
        return;
      }
      if (err.code === "no_match") {
        this.rankNote.hidden = false;
        this.rankNote.textContent = `No segment matched: ${err.detail}`;
        return;
      }
      this.showBanner(`${err.code}: ${err.detail} (retry when ready)`);
      return;
    }
    this.showBanner(`Request failed: ${String(err)} (retry when ready)`);
  }

  private showBanner(text: string): void {
    this.banner.hidden = false;
    this.banner.textContent = text;
  }

  private hideBanner(): void {
    this.banner.hidden = true;
    this.banner.textContent = "";
  }

  private afterSessionChange(): void {
    this.updateDeepLink();
    this.render();
  }

  private updateDeepLink(): void {
    if (!this.session) return;
    const view = this.doc.defaultView;
    if (view && view.history && typeof view.history.replaceState === "function") {
      view.history.replaceState(null, "", `?session=${this.session.session_id}`);
    }
  }

  private render(): void {
    if (!this.session) return;
    const s = this.session;
    this.workspace.hidden = false;
    this.historySection.hidden = false;
    this.sessionLabel.textContent = `session ${s.session_id} | step ${s.current_step}`;

    // The frame always shows the server's current step; the query
    // parameter defeats caching when a step index is reused after undo.
    this.frame.setAttribute(
      "src",
      `${this.client.stepImageUrl(s.session_id, s.current_step)}?v=${Date.now()}`,
    );
    this.canvas.width = s.width;
    this.canvas.height = s.height;

    this.historyStrip.textContent = "";
    for (let index = 0; index <= s.steps.length; index++) {
      const thumb = el(this.doc, "button", "thumb");
      const img = el(this.doc, "img");
      img.setAttribute(
        "src",
        `${this.client.stepImageUrl(s.session_id, index)}?v=${Date.now()}`,
      );
      img.alt = index === 0 ? "base image" : `step ${index}`;
      thumb.appendChild(img);
      const caption =
        index === 0
          ? "base"
          : `${index}: ${s.steps[index - 1]?.instruction.source_prompt ?? ""}`;
      thumb.appendChild(el(this.doc, "span", undefined, caption));
      if (index === s.current_step) thumb.classList.add("current");
      thumb.addEventListener("click", () => void this.doUndo(index));
      this.historyStrip.appendChild(thumb);
    }

    this.renderPreview();
  }

  private renderPreview(): void {
    if (!this.session) return;
    if (!this.preview) {
      this.overlayModel = null;
      this.rankNote.hidden = true;
      this.rankNote.textContent = "";
      this.overrideNote.hidden = true;
      this.paint();
      this.updateControls();
      return;
    }
    try {
      this.overlayModel = buildOverlayModel(
        this.preview,
        this.session.width,
        this.session.height,
      );
    } catch (err) {
      this.overlayModel = null;
      this.preview = null;
      this.showBanner(`Overlay unavailable: ${String(err)}`);
      this.paint();
      this.updateControls();
      return;
    }
    if (this.preview.outcome === "no_match") {
      this.rankNote.hidden = false;
      this.rankNote.textContent =
        this.preview.segments.length === 0
          ? "No segment matched."
          : `No segment matched "${this.preview.source_prompt}" at threshold ` +
            `${this.preview.threshold_used}. Click a segment to override.`;
    } else {
      this.rankNote.hidden = false;
      this.rankNote.textContent =
        `Best match: ${this.preview.selected_segment_id}. ` +
        "Click a different segment to override.";
    }
    this.paint();
    this.updateControls();
  }

  private paint(): void {
    // happy-dom has no 2D context; hit-testing works off the model alone.
    const ctx =
      typeof this.canvas.getContext === "function"
        ? this.canvas.getContext("2d")
        : null;
    if (!ctx) return;
    if (this.overlayModel) {
      paintOverlay(ctx, this.overlayModel, this.overrideId);
    } else {
      ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    }
  }

  private updateControls(): void {
    const haveSession = this.session !== null;
    this.fileInput.disabled = this.busy;
    this.rankButton.disabled = this.busy || !haveSession;
    const matched = this.preview !== null && this.preview.outcome === "matched";
    const canApply = matched || this.overrideId !== null;
    this.applyButton.disabled = this.busy || !haveSession || !canApply;
    for (const thumb of Array.from(this.historyStrip.children)) {
      (thumb as HTMLButtonElement).disabled = this.busy;
    }
  }
}
