export const HIGHLIGHT_LIMIT = 10;

export type AddOutcome = "added" | "blank" | "duplicate";

/**
 * Keyword list being drafted before submission. Entries are trimmed and
 * de-duplicated as they come in; any count is accepted but only the first
 * ten are highlighted.
 */
export class KeywordDraft {
  private readonly entered: string[] = [];

  get words(): readonly string[] {
    return this.entered;
  }

  add(raw: string): AddOutcome {
    const word = raw.trim();
    if (!word) return "blank";
    if (this.entered.includes(word)) return "duplicate";
    this.entered.push(word);
    return "added";
  }

  remove(word: string): boolean {
    const at = this.entered.indexOf(word);
    if (at < 0) return false;
    this.entered.splice(at, 1);
    return true;
  }

  highlighted(): string[] {
    return this.entered.slice(0, HIGHLIGHT_LIMIT);
  }

  overflow(): string[] {
    return this.entered.slice(HIGHLIGHT_LIMIT);
  }

  canSubmit(): boolean {
    return this.entered.length > 0;
  }
}
