/**
 * Session state machine behind the annotation screen.
 *
 * One operator, strictly sequential server interaction keyed by the
 * session revision.  The controller owns the draft judgment vector and
 * the authoritative server snapshots; the view is a pure function of
 * the published state.
 *
 * Conflict handling is non-destructive by design: a 409 refetches the
 * session and the pinned proposal, while the draft stays saved locally
 * and is replayed for the judge to confirm.
 */

import {
  ApiError,
  NetworkError,
  type ApiClient,
  type FinalReport,
  type OutcomeSymbol,
  type Proposal,
  type SessionConfig,
  type SessionSummary,
} from "./api.js";
import { blindingFor, type Blinding } from "./blinding.js";
import type { DraftStore } from "./drafts.js";

/** The slice of the client the controller actually uses (swappable in tests). */
export type SessionApi = Pick<
  ApiClient,
  | "createSession"
  | "getState"
  | "nextProposal"
  | "submitJudgments"
  | "finalize"
>;

export type Phase = "setup" | "judging" | "finished" | "failed";

export interface ViewState {
  phase: Phase;
  busy: boolean;
  summary: SessionSummary | null;
  proposal: Proposal | null;
  blinding: Blinding | null;
  draft: Readonly<Record<string, OutcomeSymbol>>;
  report: FinalReport | null;
  /** Transient operator-facing message (conflict refresh, retry hint). */
  notice: string | null;
  /** Inline setup error; the session was not created. */
  setupError: string | null;
  /** Fatal session error; only a new session recovers. */
  error: string | null;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.detail;
  if (err instanceof Error) return err.message;
  return String(err);
}

export class SessionController {
  private readonly listeners = new Set<(state: ViewState) => void>();

  private phase: Phase = "setup";
  private busy = false;
  private sessionId: string | null = null;
  private revision = 0;
  private summary: SessionSummary | null = null;
  private proposal: Proposal | null = null;
  private blinding: Blinding | null = null;
  private draft: Record<string, OutcomeSymbol> = {};
  private report: FinalReport | null = null;
  private notice: string | null = null;
  private setupError: string | null = null;
  private error: string | null = null;

  constructor(
    private readonly api: SessionApi,
    private readonly drafts: DraftStore,
  ) {}

  subscribe(listener: (state: ViewState) => void): () => void {
    this.listeners.add(listener);
    listener(this.snapshot());
    return () => this.listeners.delete(listener);
  }

  snapshot(): ViewState {
    return {
      phase: this.phase,
      busy: this.busy,
      summary: this.summary,
      proposal: this.proposal,
      blinding: this.blinding,
      draft: { ...this.draft },
      report: this.report,
      notice: this.notice,
      setupError: this.setupError,
      error: this.error,
    };
  }

  private emit(): void {
    const state = this.snapshot();
    for (const listener of this.listeners) listener(state);
  }

  private candidateIds(): string[] {
    if (!this.proposal) return [];
    return Object.keys(this.proposal.candidate_responses);
  }

  /** Submit stays disabled until the draft covers every candidate. */
  draftComplete(): boolean {
    const ids = this.candidateIds();
    return ids.length > 0 && ids.every((id) => this.draft[id] !== undefined);
  }

  async start(config: SessionConfig): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    this.setupError = null;
    this.emit();
    try {
      const created = await this.api.createSession(config);
      this.sessionId = created.session_id;
      this.adopt(created.state);
      await this.fetchProposal();
      this.phase = "judging";
    } catch (err) {
      // No session exists; the setup form reports the reason inline.
      this.setupError = describe(err);
      this.phase = "setup";
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Re-attach to a live session (page reload, server restart recovery). */
  async resume(sessionId: string): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    this.emit();
    try {
      this.sessionId = sessionId;
      const summary = await this.api.getState(sessionId);
      this.adopt(summary);
      if (summary.status === "active") {
        await this.fetchProposal();
        this.phase = "judging";
      } else if (summary.status === "exhausted") {
        // Budget spent before the reload; only finalize remains.
        this.phase = "judging";
        this.proposal = null;
      } else {
        this.phase = "failed";
        this.error = "session is already finalized";
      }
    } catch (err) {
      this.phase = "failed";
      this.error = describe(err);
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  setOutcome(modelId: string, outcome: OutcomeSymbol): void {
    if (!this.sessionId || !this.proposal) return;
    if (!(modelId in this.proposal.candidate_responses)) return;
    this.draft = { ...this.draft, [modelId]: outcome };
    this.drafts.save(this.sessionId, this.proposal.query_id, this.draft);
    this.emit();
  }

  async submit(): Promise<void> {
    if (this.busy || !this.sessionId || !this.proposal) return;
    if (!this.draftComplete()) return;
    this.busy = true;
    this.notice = null;
    this.emit();
    const queryId = this.proposal.query_id;
    try {
      const summary = await this.api.submitJudgments(this.sessionId, {
        query_id: queryId,
        outcomes: { ...this.draft },
        expected_revision: this.revision,
      });
      this.drafts.clear(this.sessionId, queryId);
      this.adopt(summary);
      this.proposal = null;
      this.blinding = null;
      this.draft = {};
      if (summary.status === "exhausted") {
        await this.finalizeInner();
      } else {
        await this.fetchProposal();
      }
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        this.notice = `submission not counted (${err.detail}); the draft is kept for you to confirm`;
        await this.recoverFromConflict();
      } else if (err instanceof NetworkError) {
        this.notice = "network failure; the draft is saved locally, submit again";
      } else if (err instanceof ApiError) {
        this.notice = `server rejected the judgments: ${err.detail}`;
      } else {
        this.phase = "failed";
        this.error = describe(err);
      }
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Manual finalize for an exhausted session surfaced without a proposal. */
  async finalize(): Promise<void> {
    if (this.busy || !this.sessionId) return;
    this.busy = true;
    this.emit();
    try {
      await this.finalizeInner();
    } catch (err) {
      this.notice = `finalize failed: ${describe(err)}`;
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Refetch the pinned proposal after a transient failure. */
  async reload(): Promise<void> {
    if (this.busy || !this.sessionId) return;
    this.busy = true;
    this.emit();
    try {
      const summary = await this.api.getState(this.sessionId);
      this.adopt(summary);
      if (summary.status === "active") await this.fetchProposal();
    } catch (err) {
      this.notice = `reload failed: ${describe(err)}`;
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  private adopt(summary: SessionSummary): void {
    this.summary = summary;
    this.revision = summary.revision;
  }

  private async fetchProposal(): Promise<void> {
    if (!this.sessionId) return;
    const proposal = await this.api.nextProposal(this.sessionId);
    this.proposal = proposal;
    this.revision = proposal.revision;
    this.blinding = blindingFor(
      this.sessionId,
      proposal.query_id,
      Object.keys(proposal.candidate_responses),
    );
    this.draft = this.drafts.load(this.sessionId, proposal.query_id);
  }

  private async finalizeInner(): Promise<void> {
    if (!this.sessionId) return;
    this.report = await this.api.finalize(this.sessionId);
    this.proposal = null;
    this.blinding = null;
    this.draft = {};
    this.phase = "finished";
  }

  private async recoverFromConflict(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const summary = await this.api.getState(this.sessionId);
      this.adopt(summary);
      if (summary.status === "active") {
        // The draft store still holds the vector; fetchProposal replays it.
        await this.fetchProposal();
      } else if (summary.status === "exhausted") {
        this.proposal = null;
        this.blinding = null;
        this.draft = {};
      } else {
        this.phase = "failed";
        this.error = "session was finalized elsewhere";
      }
    } catch (err) {
      this.notice = `state refresh failed (${describe(err)}); reload to retry`;
    }
  }
}
