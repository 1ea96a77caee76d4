import { AnnotationApi } from "./api.js";
import { AnnotationSession, SessionView } from "./session.js";
import { HIGHLIGHT_LIMIT, KeywordDraft } from "./keywords.js";
import { escapeHtml, renderProgress, renderTimeline } from "./render.js";

// Served from the same origin as the API by default; ?api=http://host:port
// points the client somewhere else during development.
const params = new URLSearchParams(window.location.search);
const api = new AnnotationApi(params.get("api") ?? "");
const session = new AnnotationSession(api, params.get("annotator") ?? "ui");
const draft = new KeywordDraft();

let topic = "";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const sections = {
  loading: el("loading"),
  comparison: el("comparison"),
  retry: el("retry-banner"),
  done: el("done"),
  error: el("error"),
};

function show(name: keyof typeof sections): void {
  for (const [key, section] of Object.entries(sections)) {
    section.hidden = key !== name;
  }
}

function refreshProgress(): void {
  api.status().then(
    (status) => {
      topic = status.topic;
      el("topic").textContent = `Topic: ${status.topic}`;
      el("progress").textContent = renderProgress(status);
    },
    () => {
      el("progress").textContent = "service unreachable";
    },
  );
}

function renderView(view: SessionView): void {
  if (view.kind === "loading") {
    show("loading");
    return;
  }
  if (view.kind === "error") {
    el("error-message").textContent = view.message;
    show("error");
    return;
  }
  if (view.kind === "retry") {
    el("retry-note").textContent =
      `Could not reach the service (attempt ${view.attempts}); your choice is queued.`;
    show("retry");
    return;
  }
  if (view.kind === "done") {
    el("done-summary").textContent =
      `${view.pairs} preference pairs stored across ${view.tasksTotal} comparisons.`;
    show("done");
    refreshProgress();
    return;
  }

  topic = view.task.topic;
  el("topic").textContent = `Topic: ${view.task.topic}`;
  el("left-timeline").innerHTML = renderTimeline(view.task.left);
  el("right-timeline").innerHTML = renderTimeline(view.task.right);
  el("left-pane").classList.toggle("selected", view.selection === "left");
  el("right-pane").classList.toggle("selected", view.selection === "right");
  (el("submit") as HTMLButtonElement).disabled = !session.canSubmit();
  show("comparison");
  refreshProgress();
}

function renderKeywords(note: string = ""): void {
  const list = el("keyword-list");
  list.innerHTML = draft.words
    .map((word, i) => {
      const cls = i < HIGHLIGHT_LIMIT ? "keyword highlighted" : "keyword";
      return `<li class="${cls}">${escapeHtml(word)}`
        + ` <button type="button" class="remove" data-word="${escapeHtml(word)}">x</button></li>`;
    })
    .join("");
  for (const button of list.querySelectorAll<HTMLButtonElement>("button.remove")) {
    button.addEventListener("click", () => {
      draft.remove(button.dataset.word ?? "");
      renderKeywords();
    });
  }
  const over = draft.overflow().length;
  el("keyword-note").textContent =
    note || (over > 0 ? `first ${HIGHLIGHT_LIMIT} highlighted, ${over} more kept` : "");
  (el("keyword-submit") as HTMLButtonElement).disabled = !draft.canSubmit();
}

el("pick-left").addEventListener("click", () => {
  session.select("left");
  renderView(session.view);
});
el("pick-right").addEventListener("click", () => {
  session.select("right");
  renderView(session.view);
});
el("submit").addEventListener("click", () => void session.submit());
el("retry").addEventListener("click", () => void session.flushRetries());
window.addEventListener("online", () => void session.flushRetries());

el("keyword-form").addEventListener("submit", (event) => {
  event.preventDefault();
  const input = el<HTMLInputElement>("keyword-input");
  const outcome = draft.add(input.value);
  if (outcome === "added") {
    input.value = "";
    renderKeywords();
  } else if (outcome === "duplicate") {
    renderKeywords("already in the list");
  } else {
    renderKeywords("type a keyword first");
  }
  input.focus();
});

el("keyword-submit").addEventListener("click", () => {
  api.submitKeywords(topic, [...draft.words]).then(
    (count) => {
      el("keyword-stored").textContent = `stored ${count} keywords`;
      refreshProgress();
    },
    (e) => {
      el("keyword-stored").textContent = `not stored: ${e instanceof Error ? e.message : e}`;
    },
  );
});

session.onChange(renderView);
renderKeywords();
void session.start();
