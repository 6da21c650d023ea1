// Rendering and interaction: cards appear exactly as served, the keyboard
// drives the whole loop, and commits update the visible progress.

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, type QueueResponse } from "../src/api.js";
import { AnnotationApp } from "../src/app.js";
import { MemoryStorage, OfflineCommitQueue } from "../src/queue.js";
import { fixture, fixtureText, scriptedFetch } from "./helpers.js";

const noSchedule = () => 0; // poll loops are driven manually in tests

function makeApp(script: { status: number; body: string }[]) {
  const root = document.createElement("div");
  document.body.replaceChildren(root);
  const { fetchImpl, calls } = scriptedFetch(script);
  const app = new AnnotationApp(
    root,
    new ApiClient("http://svc", fetchImpl),
    "fixture",
    new OfflineCommitQueue(new MemoryStorage()),
    { setTimeoutImpl: noSchedule, minPollMs: 1 },
  );
  app.start();
  return { app, root, calls };
}

const progressBody = fixtureText("progress.json");
const queueBody = fixtureText("queue_cards.json");

async function settle() {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

describe("queue rendering", () => {
  it("renders all 20 served cards in order, fields verbatim", async () => {
    const { root } = makeApp([
      { status: 200, body: progressBody },
      { status: 200, body: queueBody },
    ]);
    await settle();
    const recorded = fixture<QueueResponse>("queue_cards.json");
    const nodes = [...root.querySelectorAll("[data-testid=card]")];
    expect(nodes.length).toBe(20);
    nodes.forEach((node, i) => {
      const card = recorded.cards[i]!;
      expect(node.getAttribute("data-card-id")).toBe(card.card_id);
      expect(node.querySelector("[data-field=name]")?.textContent).toBe(card.name);
      expect(node.querySelector("[data-field=description]")?.textContent).toBe(card.description);
      expect(node.querySelector("[data-field=queried_type]")?.textContent).toBe(card.queried_type);
      const chips = [...node.querySelectorAll(".chip")].map((c) => c.textContent);
      expect(chips).toStrictEqual(card.relations);
    });
  });

  it("shows the waiting state with no submit button on an empty batch", async () => {
    const { root } = makeApp([
      { status: 200, body: progressBody },
      { status: 200, body: fixtureText("queue_empty.json") },
    ]);
    await settle();
    expect(root.querySelector("[data-testid=waiting]")).toBeTruthy();
    expect(root.querySelector("[data-testid=submit]")).toBeNull();
  });

  it("shows a visible status and keeps retrying when the service is down", async () => {
    const { app, root } = makeApp([{ status: -1, body: "" }]);
    await settle();
    expect(app.state).toBe("offline");
    expect(root.querySelector("[data-testid=offline]")?.textContent).toContain("retrying");
  });

  it("declares the session complete when the budget is exhausted", async () => {
    const done = JSON.parse(progressBody) as Record<string, unknown>;
    done.complete = true;
    done.budget_remaining = 0;
    const { app, root } = makeApp([
      { status: 200, body: JSON.stringify(done) },
      { status: 200, body: fixtureText("queue_empty.json").replace("false", "true") },
    ]);
    await settle();
    expect(app.state).toBe("complete");
    expect(root.querySelector("[data-testid=complete]")).toBeTruthy();
  });
});

describe("keyboard flow", () => {
  async function annotatingApp() {
    const made = makeApp([
      { status: 200, body: progressBody },
      { status: 200, body: queueBody },
    ]);
    await settle();
    return made;
  }

  function key(root: HTMLElement, keyName: string) {
    root.dispatchEvent(new KeyboardEvent("keydown", { key: keyName, bubbles: true }));
  }

  it("covers the full loop: move, pick verdicts, submit", async () => {
    const { app, root } = await annotatingApp();
    key(root, "c"); // card 0 correct, cursor advances
    key(root, "x"); // card 1 error
    key(root, "j"); // skip ahead
    key(root, "3"); // card 3 skip
    const batch = app.pendingSubmissions();
    expect(batch.map((v) => v.verdict)).toStrictEqual(["correct", "error", "skip"]);
    expect(app.cursor).toBe(4);
    key(root, "k");
    expect(app.cursor).toBe(3);
  });

  it("selection markers and cursor are visible in the DOM", async () => {
    const { root } = await annotatingApp();
    key(root, "c");
    const cards = root.querySelectorAll("[data-testid=card]");
    expect(cards[0]?.className).toContain("picked-correct");
    expect(cards[1]?.className).toContain("focused");
  });

  it("error verdicts expose the optional true-type input", async () => {
    const { app, root } = await annotatingApp();
    key(root, "x");
    const firstCard = app.cards[0]!;
    const input = root.querySelector<HTMLInputElement>(`input[data-card="${firstCard.card_id}"]`);
    expect(input).toBeTruthy();
    input!.value = "type1";
    input!.dispatchEvent(new Event("input", { bubbles: true }));
    expect(app.pendingSubmissions()[0]?.true_type).toBe("type1");
  });
});

describe("submission", () => {
  it("refuses to submit without a selection", async () => {
    const { app, root } = makeApp([
      { status: 200, body: progressBody },
      { status: 200, body: queueBody },
    ]);
    await settle();
    await app.submit();
    expect(app.state).toBe("annotating");
    expect(root.querySelector("[data-testid=status]")?.textContent).toContain("at least one");
  });

  it("disables the button while a commit is in flight and advances progress", async () => {
    const ack = { committed: [{ card_id: "x", seq: 1 }], rejected: [] };
    const { app, root, calls } = makeApp([
      { status: 200, body: progressBody },
      { status: 200, body: queueBody },
      { status: 200, body: JSON.stringify(ack) }, // commit
      { status: 200, body: progressBody }, // reconcile progress
      { status: 200, body: fixtureText("queue_empty.json") },
    ]);
    await settle();
    root.dispatchEvent(new KeyboardEvent("keydown", { key: "c", bubbles: true }));
    const before = app.progress!.committed;
    const submitting = app.submit();
    expect(app.state).toBe("submitting");
    expect(root.querySelector<HTMLButtonElement>("[data-testid=submit]")?.disabled).toBe(true);
    await submitting;
    await settle();
    // optimistic bump happened, then the fixture progress reconciled it
    expect(app.progress!.committed).toBeGreaterThanOrEqual(before);
    const commitCalls = calls.filter((c) => c.url.endsWith("/labels"));
    expect(commitCalls.length).toBe(1);
  });

  it("re-renders rejected cards flagged with the reason", async () => {
    const partial = fixture<{ committed: unknown[]; rejected: { card_id: string }[] }>("commit_partial.json");
    const rejectedId = partial.rejected[0]!.card_id;
    const queue = fixture<QueueResponse>("queue_cards.json");
    // make the round contain the card the recorded ack rejects
    queue.cards = queue.cards.filter((c) => c.card_id === rejectedId);
    const { app, root } = makeApp([
      { status: 200, body: progressBody },
      { status: 200, body: JSON.stringify(queue) },
      { status: 200, body: fixtureText("commit_partial.json") },
    ]);
    await settle();
    root.dispatchEvent(new KeyboardEvent("keydown", { key: "c", bubbles: true }));
    await app.submit();
    const flagged = root.querySelector("[data-field=rejection]");
    expect(flagged?.textContent).toContain("duplicate");
    expect(root.querySelector("[data-testid=card]")?.getAttribute("data-card-id")).toBe(rejectedId);
  });

  it("queues the batch locally when the commit fails and flushes later", async () => {
    const storage = new MemoryStorage();
    const root = document.createElement("div");
    document.body.replaceChildren(root);
    const firstCardId = fixture<QueueResponse>("queue_cards.json").cards[0]!.card_id;
    const script = [
      { status: 200, body: progressBody },
      { status: 200, body: queueBody },
      { status: -1, body: "" }, // commit attempt: network down
      // next poll: flush succeeds, then progress + queue
      { status: 200, body: JSON.stringify({ committed: [{ card_id: firstCardId, seq: 9 }], rejected: [] }) },
      { status: 200, body: progressBody },
      { status: 200, body: fixtureText("queue_empty.json") },
    ];
    const { fetchImpl, calls } = scriptedFetch(script);
    const queue = new OfflineCommitQueue(storage);
    const app = new AnnotationApp(root, new ApiClient("http://svc", fetchImpl), "fixture", queue, {
      setTimeoutImpl: noSchedule,
      minPollMs: 1,
    });
    app.start();
    await settle();
    root.dispatchEvent(new KeyboardEvent("keydown", { key: "c", bubbles: true }));
    await app.submit();
    expect(app.state).toBe("offline");
    expect(queue.size).toBe(1);
    expect(root.querySelector("[data-testid=queued]")?.textContent).toContain("1 verdict");
    await app.poll(); // reconnected
    expect(queue.size).toBe(0);
    const flushCall = calls.filter((c) => c.url.endsWith("/labels"));
    expect(flushCall.length).toBe(2); // one failed, one successful flush
  });
});
