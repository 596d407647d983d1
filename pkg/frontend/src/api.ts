/** Typed client for the texture service HTTP API.
 *
 * The studio is a thin client: every pixel it shows originates from bytes
 * served by these endpoints, and artifact payloads are cached so each
 * artifact is fetched at most once.
 */

export interface JobRecord {
  id: string;
  kind: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  params?: Record<string, unknown>;
  result_ref: string | null;
  error: string | null;
}

export interface ArtifactMeta {
  id: string;
  provenance: string[];
}

export interface InvertParams {
  lambda_mse?: number;
  lambda_stat?: number;
  steps?: number;
  learning_rate?: number;
  init?: "average" | "random";
  seed?: number;
}

/** An artifact id, "average", or a seeded random latent. */
export type EditSource = string | { random: number };

export interface EditParams {
  scorer?: string;
  lambda_l2?: number;
  steps?: number;
  learning_rate?: number;
  seed?: number;
}

export class ServiceApiError extends Error {
  constructor(
    readonly status: number,
    readonly reason: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceApiError";
  }
}

async function errorFrom(response: Response): Promise<ServiceApiError> {
  let reason = "unknown";
  let message = `service returned ${response.status}`;
  try {
    const body = (await response.json()) as { detail?: { reason?: string; message?: string } };
    if (body.detail?.reason) {
      reason = body.detail.reason;
      message = body.detail.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ServiceApiError(response.status, reason, message);
}

export class ServiceClient {
  private readonly blobs = new Map<string, Promise<Blob>>();

  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/+$/, "")}${path}`;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.url(path), init);
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as T;
  }

  submitInvert(image: File, params: InvertParams = {}): Promise<JobRecord> {
    const form = new FormData();
    form.append("image", image, image.name);
    const defined = Object.fromEntries(
      Object.entries(params).filter(([, value]) => value !== undefined),
    );
    if (Object.keys(defined).length > 0) form.append("params", JSON.stringify(defined));
    return this.json<JobRecord>("/v1/invert", { method: "POST", body: form });
  }

  submitEdit(source: EditSource, prompt: string, params: EditParams = {}): Promise<JobRecord> {
    const defined = Object.fromEntries(
      Object.entries(params).filter(([, value]) => value !== undefined),
    );
    return this.json<JobRecord>("/v1/edit", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ source, prompt, ...defined }),
    });
  }

  submitGenerate(mode: "random" | "average", seed = 0, truncation = 1.0): Promise<JobRecord> {
    return this.json<JobRecord>("/v1/generate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ mode, seed, truncation }),
    });
  }

  getJob(id: string): Promise<JobRecord> {
    return this.json<JobRecord>(`/v1/jobs/${encodeURIComponent(id)}`);
  }

  getMeta(artifactId: string): Promise<ArtifactMeta> {
    return this.json<ArtifactMeta>(`/v1/artifacts/${encodeURIComponent(artifactId)}/meta`);
  }

  artifactUrl(artifactId: string, name: "face.png" | "skin.png" | "latent.fclt", base?: string): string {
    const query = name === "skin.png" && base ? `?base=${encodeURIComponent(base)}` : "";
    return this.url(`/v1/artifacts/${encodeURIComponent(artifactId)}/${name}${query}`);
  }

  /** Fetch artifact bytes, at most once per URL; a failed fetch is not cached. */
  artifactBlob(artifactId: string, name: "face.png" | "skin.png" | "latent.fclt", base?: string): Promise<Blob> {
    const url = this.artifactUrl(artifactId, name, base);
    let pending = this.blobs.get(url);
    if (!pending) {
      pending = (async () => {
        const response = await fetch(url);
        if (!response.ok) throw await errorFrom(response);
        return response.blob();
      })();
      this.blobs.set(url, pending);
      pending.catch(() => this.blobs.delete(url));
    }
    return pending;
  }
}
