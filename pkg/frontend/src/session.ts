/** Session controller: one rater's loop against the service.
 *
 * Holds the single source of truth (a SessionState) and guarantees at
 * most one request in flight.  Submissions carry an idempotency token
 * that survives network failures, so a retry that races a recorded
 * answer yields the same ack instead of a duplicate.
 */

import { ApiError, makeToken, ServiceClient } from "./api.js";
import type { SessionState, ViewState } from "./state.js";
import { initialState, reduce } from "./state.js";

export type StateListener = (state: SessionState) => void;

export class Session {
  private state: SessionState;
  private inFlight = false;
  private registered = false;
  private readonly newToken: () => string;

  constructor(
    private readonly client: ServiceClient,
    rater: string,
    private readonly onChange: StateListener = () => {},
    newToken: () => string = makeToken,
  ) {
    this.state = initialState(rater);
    this.newToken = newToken;
  }

  get current(): SessionState {
    return this.state;
  }

  private dispatch(action: Parameters<typeof reduce>[1]): void {
    const next = reduce(this.state, action);
    if (next !== this.state) {
      this.state = next;
      this.onChange(next);
    }
  }

  private failFrom(err: unknown): void {
    if (err instanceof ApiError && err.status === 403) {
      this.dispatch({ type: "blocked" });
      return;
    }
    const message = err instanceof Error ? err.message : String(err);
    this.dispatch({ type: "fail", message });
  }

  /** Register the rater (once), then fetch the next question. */
  async start(): Promise<void> {
    if (this.inFlight) return;
    if (!this.registered) {
      this.inFlight = true;
      try {
        const info = await this.client.register(this.state.rater);
        this.registered = true;
        if (info.blocked) {
          this.dispatch({ type: "blocked" });
          return;
        }
      } catch (err) {
        this.failFrom(err);
        return;
      } finally {
        this.inFlight = false;
      }
    }
    await this.fetchNext();
  }

  private async fetchNext(): Promise<void> {
    if (this.inFlight || this.state.phase !== "loading") return;
    this.inFlight = true;
    try {
      const payload = await this.client.nextQuestion(this.state.rater);
      this.dispatch({ type: "question", payload });
    } catch (err) {
      this.failFrom(err);
    } finally {
      this.inFlight = false;
    }
  }

  toggle(): void {
    this.dispatch({ type: "toggle" });
  }

  select(label: "A" | "B"): void {
    this.dispatch({ type: "select", label });
  }

  setView(view: ViewState): void {
    this.dispatch({ type: "view", view });
  }

  /** Submit the current choice; a no-op until a choice is selected. */
  async submit(): Promise<void> {
    if (this.inFlight) return;
    const { comparison, phase } = this.state;
    if (phase !== "comparing" && phase !== "error") return;
    if (!comparison || comparison.choice == null) return;

    // a failed submission retries under its original token
    const token = this.state.token ?? this.newToken();
    this.dispatch({ type: "submit", token });
    this.inFlight = true;
    try {
      const ack = await this.client.submitAnswer({
        question: comparison.question.question,
        rater: this.state.rater,
        choice: comparison.choice,
        toggles: comparison.toggles,
        token,
      });
      this.dispatch({ type: "ack", blocked: ack.blocked, answers: ack.answers });
    } catch (err) {
      this.failFrom(err);
      return;
    } finally {
      this.inFlight = false;
    }
    await this.fetchNext();
  }

  /** Recover from the error phase: resubmit or refetch as appropriate. */
  async retry(): Promise<void> {
    if (this.state.phase !== "error") return;
    if (this.state.token != null) {
      await this.submit();
      return;
    }
    this.dispatch({ type: "load" });
    await this.start();
  }
}
