import { ApiError, SessionApi } from "./api.js";
import { mount } from "./render.js";
import type { SessionView } from "./types.js";

const api = new SessionApi("");
const view: SessionView = { state: null, error: null, busy: false };

function consoleRoot(): HTMLElement {
  return document.getElementById("console") as HTMLElement;
}

function redraw(): void {
  mount(consoleRoot(), view, {
    onObserve: (observable, realization) => void observe(observable, realization),
    onDismiss: () => {
      view.error = null;
      redraw();
    },
  });
}

async function refresh(id: string): Promise<void> {
  view.state = await api.state(id);
  redraw();
}

// One in-flight mutation at a time; errors surface as dismissible alerts
// without touching the displayed state.
async function observe(observable: string, realization: string): Promise<void> {
  if (!view.state || view.busy) {
    return;
  }
  view.busy = true;
  redraw();
  try {
    view.state = await api.observe(view.state.id, {
      observable,
      realization,
      idempotency_key: crypto.randomUUID(),
    });
    view.error = null;
  } catch (err) {
    if (err instanceof ApiError) {
      view.error = err.body;
    } else {
      view.error = { error: 0, detail: String(err) };
    }
  } finally {
    view.busy = false;
    redraw();
  }
}

async function start(event: Event): Promise<void> {
  event.preventDefault();
  const program = (document.getElementById("program") as HTMLTextAreaElement).value;
  const query = (document.getElementById("query") as HTMLInputElement).value;
  const budget = Number((document.getElementById("budget") as HTMLInputElement).value);
  const utility = (document.getElementById("utility") as HTMLSelectElement).value as
    | "entropy"
    | "meu";
  const actionsText = (document.getElementById("actions") as HTMLTextAreaElement).value.trim();
  try {
    view.state = await api.createSession({
      program,
      query,
      budget,
      utility,
      ...(actionsText ? { actions: JSON.parse(actionsText) } : {}),
    });
    view.error = null;
    window.location.hash = `sid=${view.state.id}`;
  } catch (err) {
    view.error = err instanceof ApiError ? err.body : { error: 0, detail: String(err) };
  }
  redraw();
}

function init(): void {
  const form = document.getElementById("setup") as HTMLFormElement;
  form.addEventListener("submit", (e) => void start(e));
  const match = window.location.hash.match(/sid=([0-9a-f]+)/);
  if (match && match[1]) {
    void refresh(match[1]).catch(() => {
      window.location.hash = "";
    });
  }
}

init();
