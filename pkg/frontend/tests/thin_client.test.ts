/* Thin-client property: every displayed texture byte-matches the mocked
 * service's response, the full upload/invert/edit/download flow completes,
 * and downloads are verbatim endpoint payloads. */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ServiceClient } from "../src/api.js";
import { StudioApp } from "../src/app.js";
import { StudioSession } from "../src/session.js";
import { MockService, blobBytes, bytesEqual } from "./mock_service.js";
import { blobForUrl } from "./setup.js";

function makeApp(mock: MockService) {
  const root = document.createElement("main");
  document.body.appendChild(root);
  const client = new ServiceClient(mock.base);
  const session = new StudioSession(mock.base, window.localStorage);
  const app = new StudioApp(root, client, session, { cube: { getContext: () => null } });
  return { app, root, client, session };
}

function attachUpload(app: StudioApp, size: number, name = "photo.png"): void {
  const file = new File([new Uint8Array(size).fill(7)], name, { type: "image/png" });
  Object.defineProperty(app.invertFile, "files", { value: [file], configurable: true });
}

async function shownBytes(img: HTMLImageElement): Promise<Uint8Array> {
  const blob = blobForUrl.get(img.src);
  expect(blob, `no blob behind ${img.id}`).toBeDefined();
  return blobBytes(blob!);
}

let mock: MockService;

beforeEach(() => {
  mock = new MockService();
  vi.stubGlobal("fetch", mock.fetch);
  window.localStorage.clear();
});

afterEach(() => {
  vi.unstubAllGlobals();
  vi.useRealTimers();
  document.body.innerHTML = "";
});

describe("upload and invert", () => {
  it("displays exactly the face bytes the service returned", async () => {
    const { app, session } = makeApp(mock);
    attachUpload(app, 200);
    await app.submitInvert();

    const artifact = session.current!;
    expect(artifact).not.toBeNull();
    const shown = await shownBytes(app.invertResult);
    expect(bytesEqual(shown, mock.faceBytes(mock.descOf(artifact)))).toBe(true);
  });

  it("shows an inline too-small error and creates no job", async () => {
    const { app, session } = makeApp(mock);
    attachUpload(app, 10, "tiny.png");
    await app.submitInvert();

    expect(app.invertError.hidden).toBe(false);
    expect(app.invertError.textContent).toContain("at least");
    expect(mock.jobs.size).toBe(0);
    expect(session.pendingJob).toBeNull();
  });

  it("requires a file before submitting", async () => {
    const { app } = makeApp(mock);
    await app.submitInvert();
    expect(app.invertError.hidden).toBe(false);
    expect(mock.jobs.size).toBe(0);
  });
});

describe("full flow", () => {
  it("upload, invert, edit, download completes and downloads match endpoints", async () => {
    const { app, session } = makeApp(mock);
    attachUpload(app, 200);
    await app.submitInvert();
    const inverted = session.current!;

    app.editPrompt.value = "redder";
    await app.submitEdit();
    const edited = session.current!;
    expect(edited).not.toBe(inverted);
    expect(session.history.map((entry) => entry.artifact)).toEqual([inverted, edited]);

    const editShown = await shownBytes(app.editAfter);
    expect(bytesEqual(editShown, mock.faceBytes(mock.descOf(edited)))).toBe(true);

    const skin = await app.downloadSkin();
    expect(bytesEqual(await blobBytes(skin!), mock.skinBytes(mock.descOf(edited)))).toBe(true);
    const face = await app.downloadFace();
    expect(bytesEqual(await blobBytes(face!), mock.faceBytes(mock.descOf(edited)))).toBe(true);
  });

  it("edit provenance chains through the inverted artifact", async () => {
    const { app, session } = makeApp(mock);
    attachUpload(app, 200);
    await app.submitInvert();
    const inverted = session.current!;
    app.editPrompt.value = "redder";
    await app.submitEdit();

    const meta = await new ServiceClient(mock.base).getMeta(session.current!);
    expect(meta.provenance).toEqual([inverted, session.current]);
  });

  it("breadcrumb appends one entry per completed action", async () => {
    const { app } = makeApp(mock);
    attachUpload(app, 200);
    await app.submitInvert();
    expect(app.breadcrumb.querySelectorAll("li").length).toBe(1);

    app.editPrompt.value = "bluer";
    await app.submitEdit();
    expect(app.breadcrumb.querySelectorAll("li").length).toBe(2);
  });

  it("iterate points the source selector back at the current artifact", async () => {
    const { app } = makeApp(mock);
    app.editSource.value = "average";
    app.editIterate.click();
    expect(app.editSource.value).toBe("current");
  });
});

describe("edit determinism", () => {
  it("same source, prompt, and seed produce identical bytes", async () => {
    const { app } = makeApp(mock);
    app.editSource.value = "average";
    app.editPrompt.value = "redder";
    app.editSeed.value = "3";

    await app.submitEdit();
    const first = await shownBytes(app.editAfter);
    await app.submitEdit();
    const second = await shownBytes(app.editAfter);

    expect(bytesEqual(first, second)).toBe(true);
  });

  it("zero-step edit from average shows the service's average face", async () => {
    const { app } = makeApp(mock);
    app.editSource.value = "average";
    app.editPrompt.value = "anything";
    app.editSteps.value = "0";
    await app.submitEdit();

    const shown = await shownBytes(app.editAfter);
    expect(bytesEqual(shown, mock.faceBytes("average"))).toBe(true);
  });

  it("blocks an empty prompt client-side", async () => {
    const { app } = makeApp(mock);
    const fetches = mock.fetchCounts.size;
    app.editPrompt.value = "   ";
    await app.submitEdit();

    expect(app.editError.hidden).toBe(false);
    expect(mock.fetchCounts.size).toBe(fetches);
    expect(mock.jobs.size).toBe(0);
  });
});

describe("network economy", () => {
  it("fetches each artifact payload once across display, preview, and download", async () => {
    const { app, client, session } = makeApp(mock);
    attachUpload(app, 200);
    await app.submitInvert();
    const artifact = session.current!;

    app.rotatePreview(0.3, 0.4);
    app.rotatePreview(0.5, 0.6);
    await app.downloadFace();
    await app.downloadSkin();

    expect(mock.fetchCounts.get(client.artifactUrl(artifact, "face.png"))).toBe(1);
    expect(mock.fetchCounts.get(client.artifactUrl(artifact, "skin.png"))).toBe(1);
  });
});

describe("pending job concurrency", () => {
  it("disables controls while a job runs and refuses a second submission", async () => {
    vi.useFakeTimers();
    mock.script = ["queued", "running", "done"];
    const { app, session } = makeApp(mock);
    attachUpload(app, 200);

    const pending = app.submitInvert();
    await vi.advanceTimersByTimeAsync(1);
    expect(session.pendingJob).not.toBeNull();
    expect(app.invertSubmit.disabled).toBe(true);
    expect(app.editSubmit.disabled).toBe(true);

    app.editPrompt.value = "redder";
    await app.submitEdit();
    expect(mock.jobs.size).toBe(1);

    await vi.advanceTimersByTimeAsync(2000);
    await pending;
    expect(session.pendingJob).toBeNull();
    expect(app.invertSubmit.disabled).toBe(false);
  });
});

describe("error surfacing", () => {
  it("shows the server reason in a toast on 4xx", async () => {
    const { app } = makeApp(mock);
    window.localStorage.setItem(
      `facecraft-studio:${mock.base}`,
      JSON.stringify({ current: "ghost", history: [], pendingJob: null }),
    );
    const session = new StudioSession(mock.base, window.localStorage);
    const app2 = new StudioApp(
      document.body.appendChild(document.createElement("div")),
      new ServiceClient(mock.base),
      session,
      { cube: { getContext: () => null } },
    );
    app2.editPrompt.value = "redder";
    await app2.submitEdit();

    expect(app2.toast.hidden).toBe(false);
    expect(app2.toast.textContent).toContain("ghost");
    expect(app.toast.hidden).toBe(true);
  });
});
