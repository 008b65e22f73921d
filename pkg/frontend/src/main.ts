/** Browser entry point: wires the session state machine to the DOM.
 *
 * Expects a host page with `<div id="app"></div>`; the service base URL comes
 * from `window.location.origin` (the UI is served next to the API).
 */

import { AnnotationApi } from "./api.js";
import { renderDone, renderErrorBanner, renderInstructions, renderItem, renderProgress } from "./render.js";
import { AnnotatorSession, verdictForKey } from "./state.js";

const LANGUAGE_PROMPT = `
<form class="language-select">
  <label>First, select your language:
    <input name="language" placeholder="e.g. hi" required />
  </label>
  <button type="submit">Start</button>
</form>`;

export function mount(root: HTMLElement, baseUrl: string = window.location.origin): void {
  const session = new AnnotatorSession(new AnnotationApi(baseUrl));
  let focusedCandidate: string | null = null;

  function draw(): void {
    if (session.phase === "idle") {
      root.innerHTML = LANGUAGE_PROMPT;
      root.querySelector("form")!.addEventListener("submit", (event) => {
        event.preventDefault();
        const input = root.querySelector<HTMLInputElement>("input[name=language]")!;
        void session.start(input.value.trim()).then(draw);
      });
      return;
    }
    if (session.phase === "done") {
      root.innerHTML = renderInstructions(session.instructions) + renderDone(session.submitted);
      return;
    }
    if (session.phase === "error") {
      root.innerHTML = renderErrorBanner(session.lastError ?? "request failed");
      root.querySelector(".retry")!.addEventListener("click", () => {
        void session.fetchNext().then(draw);
      });
      return;
    }
    const view = session.view!;
    root.innerHTML =
      renderInstructions(session.instructions) + renderProgress(session.submitted) + renderItem(view);
    root.querySelectorAll<HTMLButtonElement>("button[data-candidate]").forEach((button) => {
      button.addEventListener("click", () => {
        session.setVerdict(button.dataset.candidate!, button.dataset.verdict as never);
        focusedCandidate = button.dataset.candidate!;
        draw();
      });
    });
    root.querySelector<HTMLButtonElement>("button.submit")!.addEventListener("click", () => {
      void session.submit().then(draw);
    });
  }

  document.addEventListener("keydown", (event) => {
    if (session.phase !== "annotating" || focusedCandidate === null) return;
    if (verdictForKey(event.key) !== null && session.keyVerdict(focusedCandidate, event.key)) {
      draw();
    }
  });

  draw();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app")!);
}
