import type { SessionState, SessionView } from "./types.js";

const LEAF_LABELS: Record<string, string> = {
  "no-observables": "Absence of Observables",
  "insufficient-budget": "Insufficient Budget",
  "no-gain": "No Gain in Utility",
};

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const fmt = (x: number) => x.toFixed(6);

function budgetHtml(state: SessionState): string {
  const b = state.budget;
  return `
  <section class="stats">
    <div class="stat"><span class="label">P(${escapeHtml(state.query)})</span>
      <span class="value" id="posterior">${fmt(state.posterior)}</span></div>
    <div class="stat"><span class="label">entropy</span>
      <span class="value" id="entropy">${fmt(state.entropy)}</span>
      <div class="bar"><div class="fill" style="width:${Math.min(100, state.entropy * 100)}%"></div></div></div>
    <div class="stat"><span class="label">utility</span>
      <span class="value" id="utility">${fmt(state.utility)}</span></div>
    <div class="stat"><span class="label">budget</span>
      <span class="value" id="budget">${b.remaining} / ${b.initial}</span></div>
  </section>`;
}

function historyHtml(state: SessionState): string {
  if (!state.history.length) {
    return `<nav class="history" id="history">no observations yet</nav>`;
  }
  const crumbs = state.history
    .map((h) => `<span class="crumb">${escapeHtml(h.observable)} = ${escapeHtml(h.realization)}</span>`)
    .join(" › ");
  return `<nav class="history" id="history">${crumbs}</nav>`;
}

function whatifHtml(state: SessionState, busy: boolean): string {
  if (!state.candidates.length) {
    return `<p class="notice" id="no-candidates">no admissible observations</p>`;
  }
  const rows = state.candidates
    .map((row) => {
      const recommended = row.observable === state.recommendation;
      const buttons = row.realizations
        .map(
          (r) =>
            `<button class="observe" data-observable="${escapeHtml(row.observable)}"
              data-realization="${escapeHtml(r.label)}"
              ${busy || !row.affordable ? "disabled" : ""}>
              ${escapeHtml(r.label)} <small>${r.probability.toFixed(3)}</small></button>`,
        )
        .join(" ");
      return `<tr class="${recommended ? "recommended" : ""}" data-row="${escapeHtml(row.observable)}">
        <td>${escapeHtml(row.observable)}${recommended ? ' <span class="badge">recommended</span>' : ""}</td>
        <td class="num">${row.cost}</td>
        <td class="num">${fmt(row.voi)}</td>
        <td class="num">${fmt(row.expected_utility)}</td>
        <td>${buttons}</td>
      </tr>`;
    })
    .join("\n");
  return `
  <table class="whatif" id="whatif">
    <thead><tr><th>observable</th><th>cost</th><th>VoI</th><th>expected utility</th><th>record outcome</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

function leafHtml(state: SessionState): string {
  if (!state.leaf_reason) {
    return "";
  }
  const label = LEAF_LABELS[state.leaf_reason] ?? state.leaf_reason;
  return `<div class="banner" id="leaf-banner">${escapeHtml(label)}</div>`;
}

function errorHtml(view: SessionView): string {
  if (!view.error) {
    return "";
  }
  return `<div class="alert" id="alert">
    <strong>${view.error.error}</strong> ${escapeHtml(view.error.detail)}
    <button id="dismiss-alert">dismiss</button>
  </div>`;
}

/** Pure view: the session state as an HTML string, no client-side math. */
export function renderStateHtml(view: SessionView): string {
  if (!view.state) {
    return errorHtml(view);
  }
  return [
    errorHtml(view),
    leafHtml(view.state),
    budgetHtml(view.state),
    historyHtml(view.state),
    whatifHtml(view.state, view.busy),
  ].join("\n");
}

export interface Handlers {
  onObserve: (observable: string, realization: string) => void;
  onDismiss: () => void;
}

export function mount(container: HTMLElement, view: SessionView, handlers: Handlers): void {
  container.innerHTML = renderStateHtml(view);
  container.querySelectorAll<HTMLButtonElement>("button.observe").forEach((button) => {
    button.addEventListener("click", () => {
      handlers.onObserve(button.dataset.observable ?? "", button.dataset.realization ?? "");
    });
  });
  const dismiss = container.querySelector<HTMLButtonElement>("#dismiss-alert");
  if (dismiss) {
    dismiss.addEventListener("click", handlers.onDismiss);
  }
}
