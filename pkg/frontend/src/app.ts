/** Studio controller: wires the upload/invert, text-edit, and cube-preview
 * views to the texture service.
 *
 * Thin-client rule: nothing here computes pixels. Every texture shown or
 * saved is the byte payload of a service artifact endpoint, fetched at most
 * once per artifact and reused for display, preview, and download.
 */

import {
  EditSource,
  InvertParams,
  JobRecord,
  ServiceApiError,
  ServiceClient,
} from "./api.js";
import { createCubePreview, attachDragRotation, CubePreview, CubeOptions } from "./cube.js";
import { pollJob } from "./poller.js";
import { StudioSession } from "./session.js";
import { displayBlob, saveBlob } from "./textures.js";

/** Slider position 0..100 to lambda_l2 in [0, 0.1], log-scaled above zero. */
export function mapLambdaL2(position: number): number {
  if (position <= 0) return 0;
  return 10 ** (-4 + (3 * position) / 100);
}

/** Inverse of mapLambdaL2 for seeding the slider from a default value. */
export function lambdaL2Position(value: number): number {
  if (value <= 0) return 0;
  return Math.min(100, Math.max(0, ((Math.log10(value) + 4) * 100) / 3));
}

const ACTION_LABELS: Record<string, string> = {
  invert: "inverted upload",
  edit: "text edit",
  generate_random: "random face",
  generate_average: "average face",
};

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface StudioAppOptions {
  cube?: CubeOptions;
}

export class StudioApp {
  readonly cube: CubePreview;

  // Upload / invert view.
  readonly invertFile: HTMLInputElement;
  readonly invertLambdaMse: HTMLInputElement;
  readonly invertLambdaStat: HTMLInputElement;
  readonly invertSteps: HTMLInputElement;
  readonly invertSubmit: HTMLButtonElement;
  readonly invertError: HTMLElement;
  readonly invertOriginal: HTMLImageElement;
  readonly invertResult: HTMLImageElement;
  readonly progressBar: HTMLProgressElement;

  // Edit view.
  readonly editSource: HTMLSelectElement;
  readonly editSourceSeed: HTMLInputElement;
  readonly editPrompt: HTMLInputElement;
  readonly editLambda: HTMLInputElement;
  readonly editLambdaValue: HTMLElement;
  readonly editSteps: HTMLInputElement;
  readonly editSeed: HTMLInputElement;
  readonly editSubmit: HTMLButtonElement;
  readonly editIterate: HTMLButtonElement;
  readonly editError: HTMLElement;
  readonly editBefore: HTMLImageElement;
  readonly editAfter: HTMLImageElement;
  readonly breadcrumb: HTMLOListElement;

  // Preview view.
  readonly canvas: HTMLCanvasElement;
  readonly downloadFaceButton: HTMLButtonElement;
  readonly downloadSkinButton: HTMLButtonElement;
  readonly toast: HTMLElement;

  private readonly doc: Document;
  private rx = -0.35;
  private ry = 0.65;

  constructor(
    readonly root: HTMLElement,
    readonly client: ServiceClient,
    readonly session: StudioSession,
    options: StudioAppOptions = {},
  ) {
    this.doc = root.ownerDocument;
    const doc = this.doc;

    this.toast = el(doc, "div", { id: "toast", role: "alert", hidden: "" });

    // --- upload & invert ---
    this.invertFile = el(doc, "input", { id: "invert-file", type: "file", accept: "image/*" });
    this.invertLambdaMse = el(doc, "input", {
      id: "invert-lambda-mse", type: "range", min: "0", max: "5", step: "0.05", value: "1",
    });
    this.invertLambdaStat = el(doc, "input", {
      id: "invert-lambda-stat", type: "range", min: "0", max: "5", step: "0.05", value: "0.5",
    });
    this.invertSteps = el(doc, "input", {
      id: "invert-steps", type: "range", min: "10", max: "2000", step: "10", value: "500",
    });
    this.invertSubmit = el(doc, "button", { id: "invert-submit", type: "button" }, "Invert");
    this.invertError = el(doc, "p", { id: "invert-error", class: "inline-error", hidden: "" });
    this.invertOriginal = el(doc, "img", { id: "invert-original", alt: "uploaded photo" });
    this.invertResult = el(doc, "img", { id: "invert-result", alt: "inverted face" });
    this.progressBar = el(doc, "progress", { id: "job-progress", max: "1", value: "0" });

    // --- text edit ---
    this.editSource = el(doc, "select", { id: "edit-source" });
    for (const [value, label] of [
      ["current", "current artifact"],
      ["average", "average face"],
      ["random", "random latent"],
    ]) {
      this.editSource.appendChild(el(doc, "option", { value }, label));
    }
    this.editSourceSeed = el(doc, "input", {
      id: "edit-source-seed", type: "number", value: "0", step: "1",
    });
    this.editPrompt = el(doc, "input", {
      id: "edit-prompt", type: "text", placeholder: "describe the change",
    });
    this.editLambda = el(doc, "input", {
      id: "edit-lambda", type: "range", min: "0", max: "100", step: "1",
      value: String(Math.round(lambdaL2Position(0.008))),
    });
    this.editLambdaValue = el(doc, "span", { id: "edit-lambda-value" });
    // Slider position 0 means "no leash"; otherwise log-spaced up to 0.1.
    this.editSteps = el(doc, "input", {
      id: "edit-steps", type: "range", min: "0", max: "2000", step: "10", value: "100",
    });
    this.editSeed = el(doc, "input", { id: "edit-seed", type: "number", value: "0", step: "1" });
    this.editSubmit = el(doc, "button", { id: "edit-submit", type: "button" }, "Edit");
    this.editIterate = el(doc, "button", { id: "edit-iterate", type: "button" }, "Iterate");
    this.editError = el(doc, "p", { id: "edit-error", class: "inline-error", hidden: "" });
    this.editBefore = el(doc, "img", { id: "edit-before", alt: "source face" });
    this.editAfter = el(doc, "img", { id: "edit-after", alt: "edited face" });
    this.breadcrumb = el(doc, "ol", { id: "breadcrumb" });

    // --- cube preview & downloads ---
    this.canvas = el(doc, "canvas", { id: "cube-canvas", width: "256", height: "256" });
    this.downloadFaceButton = el(doc, "button", { id: "download-face", type: "button" }, "Download face.png");
    this.downloadSkinButton = el(doc, "button", { id: "download-skin", type: "button" }, "Download skin.png");

    this.mount();

    this.cube = createCubePreview(this.canvas, options.cube ?? {});
    attachDragRotation(this.canvas, this.cube);

    this.invertSubmit.addEventListener("click", () => void this.submitInvert());
    this.editSubmit.addEventListener("click", () => void this.submitEdit());
    this.editIterate.addEventListener("click", () => {
      this.editSource.value = "current";
    });
    this.downloadFaceButton.addEventListener("click", () => void this.downloadFace());
    this.downloadSkinButton.addEventListener("click", () => void this.downloadSkin());
    this.editLambda.addEventListener("input", () => this.showLambda());
    this.invertFile.addEventListener("change", () => this.showOriginal());

    this.showLambda();
    this.renderBreadcrumb();
  }

  private mount(): void {
    const doc = this.doc;
    const section = (id: string, title: string, ...children: HTMLElement[]) => {
      const box = el(doc, "section", { id });
      box.appendChild(el(doc, "h2", {}, title));
      for (const child of children) box.appendChild(child);
      return box;
    };
    const labeled = (text: string, control: HTMLElement) => {
      const wrap = el(doc, "label", {}, text);
      wrap.appendChild(control);
      return wrap;
    };
    this.root.appendChild(this.toast);
    this.root.appendChild(
      section(
        "invert-view", "Upload & invert",
        labeled("Photo", this.invertFile),
        labeled("Reconstruction weight", this.invertLambdaMse),
        labeled("Statistics weight", this.invertLambdaStat),
        labeled("Steps", this.invertSteps),
        this.invertSubmit,
        this.invertError,
        this.progressBar,
        this.invertOriginal,
        this.invertResult,
      ),
    );
    const lambdaLabel = labeled("Leash", this.editLambda);
    lambdaLabel.appendChild(this.editLambdaValue);
    this.root.appendChild(
      section(
        "edit-view", "Text edit",
        labeled("Source", this.editSource),
        labeled("Source seed", this.editSourceSeed),
        labeled("Prompt", this.editPrompt),
        lambdaLabel,
        labeled("Steps", this.editSteps),
        labeled("Seed", this.editSeed),
        this.editSubmit,
        this.editIterate,
        this.editError,
        this.editBefore,
        this.editAfter,
        this.breadcrumb,
      ),
    );
    this.root.appendChild(
      section(
        "preview-view", "Cube preview",
        this.canvas,
        this.downloadFaceButton,
        this.downloadSkinButton,
      ),
    );
  }

  private showLambda(): void {
    const value = mapLambdaL2(Number(this.editLambda.value));
    this.editLambdaValue.textContent = value === 0 ? "0" : value.toPrecision(2);
  }

  private showOriginal(): void {
    const file = this.invertFile.files?.[0];
    if (file) displayBlob(this.invertOriginal, file);
  }

  get busy(): boolean {
    return this.session.pendingJob !== null;
  }

  private setBusy(busy: boolean): void {
    for (const control of [
      this.invertFile, this.invertLambdaMse, this.invertLambdaStat, this.invertSteps,
      this.invertSubmit, this.editSource, this.editSourceSeed, this.editPrompt,
      this.editLambda, this.editSteps, this.editSeed, this.editSubmit, this.editIterate,
    ]) {
      control.disabled = busy;
    }
  }

  private showToast(message: string): void {
    this.toast.textContent = message;
    this.toast.hidden = false;
  }

  private inlineError(target: HTMLElement, message: string | null): void {
    target.textContent = message ?? "";
    target.hidden = message === null;
  }

  private renderBreadcrumb(): void {
    this.breadcrumb.textContent = "";
    for (const entry of this.session.history) {
      this.breadcrumb.appendChild(
        el(this.doc, "li", { "data-artifact": entry.artifact }, `${entry.action} (${entry.artifact})`),
      );
    }
  }

  /** Face bytes for an artifact; the client caches, so repeat calls reuse
   * the single fetch. */
  private faceBlob(artifactId: string): Promise<Blob> {
    return this.client.artifactBlob(artifactId, "face.png");
  }

  private async refreshPreview(artifactId: string): Promise<void> {
    const face = await this.faceBlob(artifactId);
    const skin = await this.client.artifactBlob(artifactId, "skin.png");
    if (typeof createImageBitmap === "function") {
      const [faceImage, skinImage] = await Promise.all([
        createImageBitmap(face),
        createImageBitmap(skin),
      ]);
      this.cube.setTextures(faceImage, skinImage);
    }
    this.cube.setRotation(this.rx, this.ry);
    this.cube.render();
  }

  private async completeJob(job: JobRecord): Promise<void> {
    if (job.state === "failed") {
      this.session.setPending(null);
      this.setBusy(false);
      this.showToast(job.error ?? "job failed");
      return;
    }
    const artifactId = job.result_ref ?? job.id;
    const action = ACTION_LABELS[job.kind] ?? job.kind;
    this.session.commit(artifactId, action);
    this.setBusy(false);
    this.renderBreadcrumb();
    const face = await this.faceBlob(artifactId);
    const target = job.kind === "invert" ? this.invertResult : this.editAfter;
    displayBlob(target, face);
    await this.refreshPreview(artifactId);
  }

  private async track(job: JobRecord): Promise<void> {
    this.session.setPending(job.id);
    this.setBusy(true);
    this.progressBar.value = 0;
    try {
      const settled = await pollJob(this.client, job.id, (update) => {
        this.progressBar.value = update.progress;
      });
      await this.completeJob(settled);
    } catch (error) {
      this.session.setPending(null);
      this.setBusy(false);
      this.showToast(error instanceof Error ? error.message : String(error));
    }
  }

  /** Resume polling a job persisted by a previous page load. */
  async resume(): Promise<void> {
    const pending = this.session.pendingJob;
    if (pending === null) {
      if (this.session.current) await this.refreshPreview(this.session.current);
      return;
    }
    this.setBusy(true);
    try {
      const settled = await pollJob(this.client, pending, (update) => {
        this.progressBar.value = update.progress;
      });
      await this.completeJob(settled);
    } catch (error) {
      this.session.setPending(null);
      this.setBusy(false);
      this.showToast(error instanceof Error ? error.message : String(error));
    }
  }

  async submitInvert(): Promise<void> {
    if (this.busy) return;
    this.inlineError(this.invertError, null);
    const file = this.invertFile.files?.[0];
    if (!file) {
      this.inlineError(this.invertError, "choose an image first");
      return;
    }
    const params: InvertParams = {
      lambda_mse: Number(this.invertLambdaMse.value),
      lambda_stat: Number(this.invertLambdaStat.value),
      steps: Number(this.invertSteps.value),
    };
    try {
      const job = await this.client.submitInvert(file, params);
      await this.track(job);
    } catch (error) {
      if (error instanceof ServiceApiError && error.reason === "too_small") {
        this.inlineError(this.invertError, error.message);
        return;
      }
      this.showToast(error instanceof Error ? error.message : String(error));
    }
  }

  async submitEdit(): Promise<void> {
    if (this.busy) return;
    this.inlineError(this.editError, null);
    const prompt = this.editPrompt.value.trim();
    if (prompt === "") {
      this.inlineError(this.editError, "prompt must not be empty");
      return;
    }
    let source: EditSource;
    const choice = this.editSource.value;
    if (choice === "average") {
      source = "average";
    } else if (choice === "random") {
      source = { random: Number(this.editSourceSeed.value) };
    } else {
      const current = this.session.current;
      if (current === null) {
        this.inlineError(this.editError, "no current artifact; invert or generate one first");
        return;
      }
      source = current;
    }
    try {
      if (typeof source === "string" && source !== "average") {
        displayBlob(this.editBefore, await this.faceBlob(source));
      }
      const job = await this.client.submitEdit(source, prompt, {
        lambda_l2: mapLambdaL2(Number(this.editLambda.value)),
        steps: Number(this.editSteps.value),
        seed: Number(this.editSeed.value),
      });
      await this.track(job);
    } catch (error) {
      this.showToast(error instanceof Error ? error.message : String(error));
    }
  }

  async downloadFace(): Promise<Blob | null> {
    const current = this.session.current;
    if (current === null) return null;
    const blob = await this.faceBlob(current);
    return saveBlob(blob, `${current}-face.png`, this.doc);
  }

  async downloadSkin(): Promise<Blob | null> {
    const current = this.session.current;
    if (current === null) return null;
    const blob = await this.client.artifactBlob(current, "skin.png");
    return saveBlob(blob, `${current}-skin.png`, this.doc);
  }

  rotatePreview(rx: number, ry: number): void {
    this.rx = rx;
    this.ry = ry;
    this.cube.setRotation(rx, ry);
    this.cube.render();
  }

  dispose(): void {
    this.cube.dispose();
  }
}
