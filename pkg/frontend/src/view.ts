/** Render the session state into a handful of fixed elements.
 *
 * The renderer is written against a minimal structural surface instead
 * of the DOM API so the rendering rules are testable in plain node; the
 * browser entry point passes real elements (see main.ts / index.html).
 */

import type { SessionState } from "./state.js";
import { canSubmit, shownVariantUrl } from "./state.js";

export interface ImageSlot {
  src: string;
  style: { transform: string };
}

export interface TextSlot {
  textContent: string;
}

export interface ButtonSlot extends TextSlot {
  disabled: boolean;
}

export interface Surface {
  original: ImageSlot;
  variant: ImageSlot;
  status: TextSlot;
  variantLabel: TextSlot;
  selectA: ButtonSlot;
  selectB: ButtonSlot;
  toggleButton: ButtonSlot;
  submitButton: ButtonSlot;
}

function transformOf(state: SessionState): string {
  const view = state.comparison?.view;
  if (!view) return "";
  return `scale(${view.zoom}) translate(${view.panX}px, ${view.panY}px)`;
}

const STATUS_TEXT: Record<SessionState["phase"], string> = {
  loading: "Loading the next pair...",
  comparing: "Pick the image closer to the original.",
  submitting: "Sending your answer...",
  blocked: "No more tasks for this session. Thank you!",
  error: "Something went wrong. Press Enter to retry.",
};

export function render(state: SessionState, surface: Surface): void {
  const comparison = state.comparison;
  const interactive = state.phase === "comparing";

  surface.status.textContent =
    state.phase === "error" && state.message
      ? `${STATUS_TEXT.error} (${state.message})`
      : STATUS_TEXT[state.phase];

  surface.original.src = comparison ? comparison.question.original_url : "";
  surface.variant.src = comparison ? (shownVariantUrl(state) ?? "") : "";
  const transform = transformOf(state);
  surface.original.style.transform = transform;
  surface.variant.style.transform = transform;

  surface.variantLabel.textContent = comparison
    ? `Variant ${comparison.shown}`
    : "";

  surface.toggleButton.disabled = !interactive;
  surface.selectA.disabled = !interactive;
  surface.selectB.disabled = !interactive;
  surface.selectA.textContent =
    comparison?.choice === "A" ? "[A is closer]" : "A is closer";
  surface.selectB.textContent =
    comparison?.choice === "B" ? "[B is closer]" : "B is closer";

  surface.submitButton.disabled =
    !canSubmit(state) && state.phase !== "error";
  surface.submitButton.textContent =
    state.phase === "error" ? "Retry" : "Submit";
}
