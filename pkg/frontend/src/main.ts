/** Browser entry point.
 *
 * Configuration comes from the query string: ?service=<base url> and
 * ?rater=<token>.  Everything below is wiring; the behavior lives in
 * the session controller, state machine, and renderer.
 */

import { ServiceClient } from "./api.js";
import { commandForKey } from "./keyboard.js";
import { Session } from "./session.js";
import type { Surface } from "./view.js";
import { render } from "./view.js";

function slot(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function surfaceFromDocument(): Surface {
  return {
    original: slot("original") as HTMLImageElement,
    variant: slot("variant") as HTMLImageElement,
    status: slot("status"),
    variantLabel: slot("variant-label"),
    selectA: slot("select-a") as HTMLButtonElement,
    selectB: slot("select-b") as HTMLButtonElement,
    toggleButton: slot("toggle") as HTMLButtonElement,
    submitButton: slot("submit") as HTMLButtonElement,
  };
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "";
  const rater = params.get("rater") ?? "";
  if (!rater) {
    slot("status").textContent = "Add ?rater=<your token> to the URL.";
    return;
  }

  const surface = surfaceFromDocument();
  const client = new ServiceClient(base, (url, init) => fetch(url, init));
  const session = new Session(client, rater, (state) =>
    render(state, surface),
  );

  const act = (kind: "toggle" | "submit" | "select", label?: "A" | "B") => {
    if (kind === "toggle") session.toggle();
    else if (kind === "select" && label) session.select(label);
    else if (kind === "submit") {
      if (session.current.phase === "error") void session.retry();
      else void session.submit();
    }
  };

  (slot("toggle") as HTMLButtonElement).onclick = () => act("toggle");
  (slot("select-a") as HTMLButtonElement).onclick = () => act("select", "A");
  (slot("select-b") as HTMLButtonElement).onclick = () => act("select", "B");
  (slot("submit") as HTMLButtonElement).onclick = () => act("submit");

  document.addEventListener("keydown", (event) => {
    const command = commandForKey(event.key);
    if (!command) return;
    event.preventDefault();
    if (command.kind === "toggle") act("toggle");
    else if (command.kind === "select") act("select", command.label);
    else act("submit");
  });

  // wheel zoom, applied to both panes; the view survives toggles
  slot("panes").addEventListener(
    "wheel",
    (event) => {
      const view = session.current.comparison?.view;
      if (!view) return;
      event.preventDefault();
      const factor = (event as WheelEvent).deltaY < 0 ? 1.25 : 0.8;
      const zoom = Math.min(8, Math.max(1, view.zoom * factor));
      session.setView({ ...view, zoom });
    },
    { passive: false },
  );

  render(session.current, surface);
  void session.start();
}

main();
