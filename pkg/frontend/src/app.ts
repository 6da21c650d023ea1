// The annotation screen: polls the queue, renders served cards verbatim,
// captures correct/error/skip verdicts (keyboard-first), and commits them
// in a single batch per round. All durable truth lives in the service
// ledger; the only client-side state that survives is the offline commit
// queue.

import { ApiClient, type Card, type Progress, type Verdict, type VerdictSubmission } from "./api.js";
import { OfflineCommitQueue } from "./queue.js";

export type AppState = "connecting" | "waiting" | "annotating" | "submitting" | "complete" | "offline";

export interface Selection {
  verdict: Verdict;
  true_type?: string;
}

export interface AppOptions {
  annotatorId?: string;
  minPollMs?: number;
  maxBackoffMs?: number;
  setTimeoutImpl?: (fn: () => void, ms: number) => unknown;
}

const esc = (text: string): string =>
  text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

export class AnnotationApp {
  state: AppState = "connecting";
  cards: Card[] = [];
  selections = new Map<string, Selection>();
  rejectedCards = new Map<string, string>();
  cursor = 0;
  progress: Progress | null = null;
  statusMessage = "";
  private backoffMs: number;
  private running = false;
  private submitting = false;
  private readonly annotatorId: string;
  private readonly minPollMs: number;
  private readonly maxBackoffMs: number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly sessionId: string,
    private readonly offlineQueue: OfflineCommitQueue = new OfflineCommitQueue(),
    options: AppOptions = {},
  ) {
    this.annotatorId = options.annotatorId ?? "ui";
    this.minPollMs = options.minPollMs ?? 500;
    this.maxBackoffMs = options.maxBackoffMs ?? 15000;
    this.backoffMs = this.minPollMs;
    this.schedule = options.setTimeoutImpl ?? ((fn, ms) => setTimeout(fn, ms));
    this.root.addEventListener("keydown", (event) => this.handleKey(event as KeyboardEvent));
  }

  start(): void {
    this.running = true;
    void this.poll();
  }

  stop(): void {
    this.running = false;
  }

  /** One poll tick: flush anything parked offline, then refresh state. */
  async poll(): Promise<void> {
    if (!this.running) return;
    try {
      const flushed = await this.offlineQueue.flush((batch) =>
        this.client.commitVerdicts(this.sessionId, batch, this.annotatorId),
      );
      if (flushed.committed.length || flushed.deduplicated.length) {
        this.statusMessage = `flushed ${flushed.committed.length} queued verdict(s)` +
          (flushed.deduplicated.length ? ` (${flushed.deduplicated.length} already recorded)` : "");
      }
      if (flushed.offline) throw new Error("offline");

      this.progress = await this.client.fetchProgress(this.sessionId);
      const queue = await this.client.fetchQueue(this.sessionId);
      this.backoffMs = this.minPollMs;
      if (queue.complete || this.progress.complete) {
        this.state = "complete";
        this.render();
        return;
      }
      if (queue.cards.length === 0) {
        this.state = "waiting";
        this.render();
        const wait = Math.max(this.minPollMs, 1000 * (queue.retry_after ?? 1));
        this.schedule(() => void this.poll(), wait);
        return;
      }
      if (this.state !== "annotating" || !this.sameRound(queue.cards)) {
        this.cards = queue.cards;
        this.selections = new Map();
        this.rejectedCards = new Map();
        this.cursor = 0;
      }
      this.state = "annotating";
      this.render();
    } catch {
      this.state = "offline";
      this.statusMessage = `service unreachable; retrying in ${Math.round(this.backoffMs / 1000)}s`;
      this.render();
      this.schedule(() => void this.poll(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
    }
  }

  private sameRound(cards: Card[]): boolean {
    const known = new Set(this.cards.map((c) => c.card_id));
    return cards.every((c) => known.has(c.card_id)) && cards.length <= this.cards.length;
  }

  select(verdict: Verdict): void {
    const card = this.cards[this.cursor];
    if (!card || this.state !== "annotating") return;
    const existing = this.selections.get(card.card_id);
    this.selections.set(card.card_id, { verdict, true_type: existing?.true_type });
    if (this.cursor < this.cards.length - 1) this.cursor += 1;
    this.render();
  }

  setTrueType(cardId: string, text: string): void {
    const selection = this.selections.get(cardId);
    if (selection) {
      selection.true_type = text.trim() || undefined;
    }
  }

  moveCursor(delta: number): void {
    if (this.state !== "annotating") return;
    this.cursor = Math.min(Math.max(this.cursor + delta, 0), this.cards.length - 1);
    this.render();
  }

  pendingSubmissions(): VerdictSubmission[] {
    const out: VerdictSubmission[] = [];
    for (const card of this.cards) {
      const selection = this.selections.get(card.card_id);
      if (selection) {
        out.push({
          card_id: card.card_id,
          verdict: selection.verdict,
          true_type: selection.verdict === "error" ? (selection.true_type ?? null) : null,
        });
      }
    }
    return out;
  }

  /** Single POST per round; the button stays disabled until the response. */
  async submit(): Promise<void> {
    if (this.submitting || this.state !== "annotating") return;
    const batch = this.pendingSubmissions();
    if (batch.length === 0) {
      this.statusMessage = "select at least one verdict before submitting";
      this.render();
      return;
    }
    this.submitting = true;
    this.state = "submitting";
    this.render();
    try {
      const ack = await this.client.commitVerdicts(this.sessionId, batch, this.annotatorId);
      // optimistic counter; the next progress fetch reconciles
      if (this.progress) {
        this.progress = { ...this.progress, committed: this.progress.committed + ack.committed.length };
      }
      this.rejectedCards = new Map(ack.rejected.map((r) => [r.card_id, r.reason]));
      this.statusMessage = `committed ${ack.committed.length} verdict(s)` +
        (ack.rejected.length ? `; ${ack.rejected.length} rejected` : "");
      this.submitting = false;
      if (this.rejectedCards.size > 0) {
        // keep rejected cards on screen, flagged; drop the committed ones
        const rejectedIds = new Set(this.rejectedCards.keys());
        this.cards = this.cards.filter((c) => rejectedIds.has(c.card_id));
        this.cursor = 0;
        this.state = "annotating";
        this.render();
        return;
      }
      void this.poll();
    } catch {
      // park the batch; it flushes exactly-once when the service is back
      this.offlineQueue.enqueue(batch);
      this.submitting = false;
      this.state = "offline";
      this.statusMessage = `offline: ${batch.length} verdict(s) queued locally`;
      this.render();
      this.schedule(() => void this.poll(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
    }
  }

  handleKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "INPUT") {
      if (event.key === "Escape") (target as HTMLInputElement).blur();
      return;
    }
    switch (event.key) {
      case "j":
      case "ArrowDown":
        this.moveCursor(1);
        event.preventDefault();
        break;
      case "k":
      case "ArrowUp":
        this.moveCursor(-1);
        event.preventDefault();
        break;
      case "c":
      case "1":
        this.select("correct");
        break;
      case "x":
      case "2":
        this.select("error");
        break;
      case "s":
      case "3":
        this.select("skip");
        break;
      case "t": {
        const card = this.cards[this.cursor];
        if (card) {
          const input = this.root.querySelector<HTMLInputElement>(
            `input[data-card="${CSS.escape(card.card_id)}"]`,
          );
          input?.focus();
          event.preventDefault();
        }
        break;
      }
      case "Enter":
        void this.submit();
        break;
    }
  }

  // ---------------------------------------------------------------- render

  render(): void {
    const progress = this.progress;
    const bar = progress
      ? `<div class="progress" data-testid="progress">
           <span>${progress.committed} / ${progress.budget} annotated</span>
           <span>budget remaining: ${progress.budget_remaining}</span>
         </div>`
      : "";
    const status = this.statusMessage
      ? `<div class="status" data-testid="status">${esc(this.statusMessage)}</div>`
      : "";
    const queued = this.offlineQueue.size
      ? `<div class="queued" data-testid="queued">${this.offlineQueue.size} verdict(s) queued offline</div>`
      : "";

    let body = "";
    if (this.state === "connecting") {
      body = `<div class="banner">connecting…</div>`;
    } else if (this.state === "waiting") {
      body = `<div class="banner" data-testid="waiting">waiting for the trainer to publish the next round…</div>`;
    } else if (this.state === "offline") {
      body = `<div class="banner offline" data-testid="offline">${esc(this.statusMessage)}</div>`;
    } else if (this.state === "complete") {
      body = `<div class="banner" data-testid="complete">annotation budget exhausted — session complete</div>`;
    } else {
      const rows = this.cards
        .map((card, index) => this.renderCard(card, index))
        .join("\n");
      const submitDisabled = this.state === "submitting" || this.pendingSubmissions().length === 0;
      body = `
        <ol class="cards" data-testid="cards">${rows}</ol>
        <button data-testid="submit" ${submitDisabled ? "disabled" : ""}>
          ${this.state === "submitting" ? "submitting…" : "submit verdicts (Enter)"}
        </button>`;
    }

    this.root.innerHTML = `
      <header>
        <h1>typing-error annotation</h1>
        ${bar}${status}${queued}
      </header>
      <main>${body}</main>
      <footer class="legend">j/k move · c correct · x error · s skip · t true type · Enter submit</footer>`;

    const button = this.root.querySelector<HTMLButtonElement>("button[data-testid=submit]");
    button?.addEventListener("click", () => void this.submit());
    for (const input of this.root.querySelectorAll<HTMLInputElement>("input[data-card]")) {
      input.addEventListener("input", () => this.setTrueType(input.dataset.card ?? "", input.value));
    }
  }

  private renderCard(card: Card, index: number): string {
    const selection = this.selections.get(card.card_id);
    const rejection = this.rejectedCards.get(card.card_id);
    const classes = [
      "card",
      index === this.cursor ? "focused" : "",
      selection ? `picked-${selection.verdict}` : "",
      rejection ? "rejected" : "",
    ]
      .filter(Boolean)
      .join(" ");
    const chips = card.relations.map((r) => `<span class="chip">${esc(r)}</span>`).join(" ");
    const verdictLabel = selection ? selection.verdict : "—";
    const trueTypeField =
      selection?.verdict === "error"
        ? `<label>true type: <input data-card="${esc(card.card_id)}" value="${esc(selection.true_type ?? "")}" placeholder="optional"></label>`
        : "";
    return `
      <li class="${classes}" data-card-id="${esc(card.card_id)}" data-testid="card">
        <div class="head">
          <strong data-field="name">${esc(card.name)}</strong>
          <code data-field="queried_type">${esc(card.queried_type)}</code>
          <span class="score" data-field="model_score">belief ${card.model_score.toFixed(3)}</span>
          <span class="verdict" data-field="verdict">${esc(verdictLabel)}</span>
        </div>
        <p data-field="description">${esc(card.description)}</p>
        <div class="chips" data-field="relations">${chips}</div>
        ${trueTypeField}
        ${rejection ? `<div class="rejection" data-field="rejection">rejected: ${esc(rejection)}</div>` : ""}
      </li>`;
  }
}
