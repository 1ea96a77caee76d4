import { ServiceStatus, TimelinePayload } from "./api.js";

const TRUNCATE_AT = 200;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/**
 * Renders a candidate timeline exactly in the order the server sent it,
 * with one date header per run of equal dates. The client never reorders
 * entries. Summaries past the truncation point get a native expander.
 */
export function renderTimeline(timeline: TimelinePayload, truncateAt: number = TRUNCATE_AT): string {
  const parts: string[] = [];
  let lastDate: string | null = null;
  for (const entry of timeline.entries) {
    if (entry.date !== lastDate) {
      parts.push(`<h3 class="entry-date">${escapeHtml(entry.date)}</h3>`);
      lastDate = entry.date;
    }
    parts.push(renderSummary(entry.summary, truncateAt));
  }
  if (parts.length === 0) {
    parts.push('<p class="empty">(empty timeline)</p>');
  }
  return `<div class="timeline" data-candidate="${escapeHtml(timeline.id)}">${parts.join("")}</div>`;
}

function renderSummary(text: string, truncateAt: number): string {
  if (text.length <= truncateAt) {
    return `<p class="entry-text">${escapeHtml(text)}</p>`;
  }
  const head = escapeHtml(text.slice(0, truncateAt));
  return `<details class="entry-text"><summary>${head}&hellip;</summary>${escapeHtml(text)}</details>`;
}

export function renderProgress(status: ServiceStatus): string {
  return `${status.tasks_answered} of ${status.tasks_total} comparisons answered, `
    + `${status.pairs} preferences and ${status.keywords} keywords stored`;
}
