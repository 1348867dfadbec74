/** Session state machine.
 *
 * Pure reducer over the phases {loading, comparing, submitting, blocked,
 * error}.  All UI rules live here so they are testable without a DOM:
 * submit is refused until a choice exists, toggling swaps the shown
 * variant while preserving pan/zoom, and `blocked` is terminal.
 */

import type { QuestionPayload } from "./api.js";

export type Phase = "loading" | "comparing" | "submitting" | "blocked" | "error";

/** Pan/zoom applied identically to the original and the shown variant. */
export interface ViewState {
  zoom: number;
  panX: number;
  panY: number;
}

export const DEFAULT_VIEW: ViewState = { zoom: 1, panX: 0, panY: 0 };

export interface ComparisonView {
  question: QuestionPayload;
  shown: "A" | "B";
  toggles: number;
  choice: "A" | "B" | null;
  view: ViewState;
}

export interface SessionState {
  phase: Phase;
  rater: string;
  answered: number;
  comparison: ComparisonView | null;
  token: string | null;
  message: string;
}

export type Action =
  | { type: "load" }
  | { type: "question"; payload: QuestionPayload }
  | { type: "toggle" }
  | { type: "select"; label: "A" | "B" }
  | { type: "view"; view: ViewState }
  | { type: "submit"; token: string }
  | { type: "ack"; blocked: boolean; answers: number }
  | { type: "blocked" }
  | { type: "fail"; message: string };

export function initialState(rater: string): SessionState {
  return {
    phase: "loading",
    rater,
    answered: 0,
    comparison: null,
    token: null,
    message: "",
  };
}

/** True when the submit control should be live. */
export function canSubmit(state: SessionState): boolean {
  return state.phase === "comparing" && state.comparison?.choice != null;
}

export function shownVariantUrl(state: SessionState): string | null {
  const comparison = state.comparison;
  if (!comparison) return null;
  const variant = comparison.question.variants.find(
    (v) => v.label === comparison.shown,
  );
  return variant ? variant.url : null;
}

export function reduce(state: SessionState, action: Action): SessionState {
  if (state.phase === "blocked") return state; // terminal

  switch (action.type) {
    case "load":
      // re-enter loading after a failed fetch (retry path)
      if (state.phase !== "error" || state.token != null) return state;
      return { ...state, phase: "loading", comparison: null, message: "" };

    case "question":
      if (state.phase !== "loading") return state;
      return {
        ...state,
        phase: "comparing",
        comparison: {
          question: action.payload,
          shown: "A",
          toggles: 0,
          choice: null,
          view: { ...DEFAULT_VIEW },
        },
        token: null,
        message: "",
      };

    case "toggle": {
      if (state.phase !== "comparing" || !state.comparison) return state;
      const c = state.comparison;
      return {
        ...state,
        comparison: {
          ...c,
          shown: c.shown === "A" ? "B" : "A",
          toggles: c.toggles + 1,
          // view carried over untouched: pan/zoom survive the swap
        },
      };
    }

    case "select":
      if (state.phase !== "comparing" || !state.comparison) return state;
      return {
        ...state,
        comparison: { ...state.comparison, choice: action.label },
      };

    case "view":
      if (!state.comparison || state.phase !== "comparing") return state;
      return {
        ...state,
        comparison: { ...state.comparison, view: { ...action.view } },
      };

    case "submit":
      // forced choice: refuse to enter submitting without a selection
      if (!state.comparison || state.comparison.choice == null) return state;
      if (state.phase !== "comparing" && state.phase !== "error") return state;
      return { ...state, phase: "submitting", token: action.token, message: "" };

    case "ack":
      if (state.phase !== "submitting") return state;
      if (action.blocked) {
        return {
          ...state,
          phase: "blocked",
          answered: action.answers,
          comparison: null,
          token: null,
        };
      }
      return {
        ...state,
        phase: "loading",
        answered: action.answers,
        comparison: null,
        token: null,
      };

    case "blocked":
      return { ...state, phase: "blocked", comparison: null, token: null };

    case "fail":
      // keep the comparison and token so a retry can resubmit identically
      return { ...state, phase: "error", message: action.message };
  }
}
