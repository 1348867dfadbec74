import { describe, expect, it } from "vitest";

import type { QuestionPayload } from "../src/api.js";
import type { SessionState } from "../src/state.js";
import {
  canSubmit,
  initialState,
  reduce,
  shownVariantUrl,
} from "../src/state.js";

const QUESTION: QuestionPayload = {
  question: "q1",
  image: "img-1",
  original_url: "/images/original/img-1",
  variants: [
    { label: "A", url: "/images/variant/aaa" },
    { label: "B", url: "/images/variant/bbb" },
  ],
  lease_expires_at: 600,
};

function comparing(): SessionState {
  return reduce(initialState("u"), { type: "question", payload: QUESTION });
}

describe("question arrival", () => {
  it("moves loading to comparing with variant A shown and no choice", () => {
    const state = comparing();
    expect(state.phase).toBe("comparing");
    expect(state.comparison?.shown).toBe("A");
    expect(state.comparison?.toggles).toBe(0);
    expect(state.comparison?.choice).toBeNull();
    expect(shownVariantUrl(state)).toBe("/images/variant/aaa");
  });

  it("is ignored outside the loading phase", () => {
    const state = comparing();
    expect(reduce(state, { type: "question", payload: QUESTION })).toBe(state);
  });
});

describe("toggling", () => {
  it("is an involution that counts presses", () => {
    let state = comparing();
    state = reduce(state, { type: "toggle" });
    expect(state.comparison?.shown).toBe("B");
    expect(shownVariantUrl(state)).toBe("/images/variant/bbb");
    state = reduce(state, { type: "toggle" });
    expect(state.comparison?.shown).toBe("A");
    expect(state.comparison?.toggles).toBe(2);
  });

  it("preserves pan and zoom across the swap", () => {
    let state = comparing();
    const view = { zoom: 2.5, panX: 40, panY: -12 };
    state = reduce(state, { type: "view", view });
    state = reduce(state, { type: "toggle" });
    expect(state.comparison?.view).toEqual(view);
    state = reduce(state, { type: "toggle" });
    expect(state.comparison?.view).toEqual(view);
    expect(state.comparison?.shown).toBe("A");
  });
});

describe("forced choice", () => {
  it("refuses to submit until a choice is selected", () => {
    const state = comparing();
    expect(canSubmit(state)).toBe(false);
    expect(reduce(state, { type: "submit", token: "t1" })).toBe(state);
  });

  it("submits once a side is chosen", () => {
    let state = comparing();
    state = reduce(state, { type: "select", label: "B" });
    expect(canSubmit(state)).toBe(true);
    state = reduce(state, { type: "submit", token: "t1" });
    expect(state.phase).toBe("submitting");
    expect(state.token).toBe("t1");
  });
});

describe("acks and failures", () => {
  function submitting(): SessionState {
    let state = comparing();
    state = reduce(state, { type: "select", label: "A" });
    return reduce(state, { type: "submit", token: "t1" });
  }

  it("a clean ack returns to loading with the count updated", () => {
    const state = reduce(submitting(), {
      type: "ack",
      blocked: false,
      answers: 7,
    });
    expect(state.phase).toBe("loading");
    expect(state.answered).toBe(7);
    expect(state.comparison).toBeNull();
    expect(state.token).toBeNull();
  });

  it("a failure keeps the comparison and token for a retry", () => {
    const state = reduce(submitting(), { type: "fail", message: "down" });
    expect(state.phase).toBe("error");
    expect(state.comparison?.question.question).toBe("q1");
    expect(state.token).toBe("t1");
    const retried = reduce(state, { type: "submit", token: "t1" });
    expect(retried.phase).toBe("submitting");
  });

  it("load re-enters loading only from a fetch failure", () => {
    const fetchFailed = reduce(initialState("u"), {
      type: "fail",
      message: "down",
    });
    expect(reduce(fetchFailed, { type: "load" }).phase).toBe("loading");
    const submitFailed = reduce(submitting(), {
      type: "fail",
      message: "down",
    });
    // a failed submission retries under its token instead
    expect(reduce(submitFailed, { type: "load" })).toBe(submitFailed);
  });
});

describe("blocked is terminal", () => {
  it("swallows every later action", () => {
    const blocked = reduce(submittingWithChoice(), {
      type: "ack",
      blocked: true,
      answers: 3,
    });
    expect(blocked.phase).toBe("blocked");
    expect(blocked.comparison).toBeNull();
    for (const action of [
      { type: "question", payload: QUESTION } as const,
      { type: "toggle" } as const,
      { type: "select", label: "A" } as const,
      { type: "submit", token: "t9" } as const,
      { type: "load" } as const,
    ]) {
      expect(reduce(blocked, action)).toBe(blocked);
    }
  });

  function submittingWithChoice(): SessionState {
    let state = comparing();
    state = reduce(state, { type: "select", label: "A" });
    return reduce(state, { type: "submit", token: "t1" });
  }
});
