/** Per-service studio state, persisted to localStorage on every change.
 *
 * History is append-only: entries are only ever pushed, and a page reload
 * restores the exact list. Separate service URLs get separate sessions.
 */

export interface HistoryEntry {
  artifact: string;
  action: string;
}

interface SessionData {
  current: string | null;
  history: HistoryEntry[];
  pendingJob: string | null;
}

function emptyData(): SessionData {
  return { current: null, history: [], pendingJob: null };
}

export class StudioSession {
  readonly storageKey: string;
  private data: SessionData;

  constructor(serviceUrl: string, private readonly storage: Storage) {
    this.storageKey = `facecraft-studio:${serviceUrl}`;
    this.data = this.read();
  }

  private read(): SessionData {
    try {
      const raw = this.storage.getItem(this.storageKey);
      if (!raw) return emptyData();
      const parsed = JSON.parse(raw) as Partial<SessionData>;
      return {
        current: typeof parsed.current === "string" ? parsed.current : null,
        history: Array.isArray(parsed.history)
          ? parsed.history.filter(
              (entry): entry is HistoryEntry =>
                typeof entry?.artifact === "string" && typeof entry?.action === "string",
            )
          : [],
        pendingJob: typeof parsed.pendingJob === "string" ? parsed.pendingJob : null,
      };
    } catch {
      return emptyData();
    }
  }

  private write(): void {
    this.storage.setItem(this.storageKey, JSON.stringify(this.data));
  }

  get current(): string | null {
    return this.data.current;
  }

  get pendingJob(): string | null {
    return this.data.pendingJob;
  }

  get history(): readonly HistoryEntry[] {
    return this.data.history;
  }

  setPending(jobId: string | null): void {
    this.data.pendingJob = jobId;
    this.write();
  }

  /** Append a finished artifact to history and make it current. */
  commit(artifact: string, action: string): void {
    this.data.history.push({ artifact, action });
    this.data.current = artifact;
    this.data.pendingJob = null;
    this.write();
  }
}
