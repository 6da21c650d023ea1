// Contract tests: the client must faithfully parse responses recorded
// from the real service, byte for byte.

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, type CommitAck, type Progress, type QueueResponse } from "../src/api.js";
import { fixture, fixtureText, scriptedFetch } from "./helpers.js";

describe("queue parsing", () => {
  it("returns the served cards in order with every recorded field", async () => {
    const raw = fixtureText("queue_cards.json");
    const { fetchImpl, calls } = scriptedFetch([{ status: 200, body: raw }]);
    const client = new ApiClient("http://svc", fetchImpl);
    const queue = await client.fetchQueue("fixture");
    const recorded = JSON.parse(raw) as QueueResponse;
    expect(queue).toStrictEqual(recorded);
    expect(queue.cards.length).toBe(20);
    expect(calls[0]?.url).toBe("http://svc/session/fixture/queue");
    const first = queue.cards[0]!;
    for (const field of ["card_id", "entity", "name", "description", "relations", "queried_type", "model_score"]) {
      expect(first).toHaveProperty(field);
    }
  });

  it("handles the empty queue with its retry hint", async () => {
    const { fetchImpl } = scriptedFetch([{ status: 200, body: fixtureText("queue_empty.json") }]);
    const queue = await new ApiClient("http://svc", fetchImpl).fetchQueue("fixture");
    expect(queue.cards).toStrictEqual([]);
    expect(queue.complete).toBe(false);
    expect(queue.retry_after).toBeGreaterThan(0);
  });
});

describe("commit parsing", () => {
  it("parses a full acknowledgment", async () => {
    const { fetchImpl, calls } = scriptedFetch([{ status: 200, body: fixtureText("commit_ack.json") }]);
    const ack = await new ApiClient("http://svc", fetchImpl).commitVerdicts("fixture", [
      { card_id: "a::t", verdict: "correct", true_type: null },
    ]);
    const recorded = fixture<CommitAck>("commit_ack.json");
    expect(ack).toStrictEqual(recorded);
    expect(ack.committed.length).toBe(20);
    const sent = JSON.parse(String(calls[0]?.init?.body)) as { verdicts: unknown[]; annotator_id: string };
    expect(sent.verdicts.length).toBe(1);
    expect(sent.annotator_id).toBe("ui");
  });

  it("parses partial rejection with per-card reasons", async () => {
    const { fetchImpl } = scriptedFetch([{ status: 200, body: fixtureText("commit_partial.json") }]);
    const ack = await new ApiClient("http://svc", fetchImpl).commitVerdicts("fixture", []);
    expect(ack.committed.length).toBe(1);
    expect(ack.rejected[0]?.reason).toBe("duplicate");
  });

  it("surfaces unknown-card rejections as ApiError with the detail", async () => {
    const { fetchImpl } = scriptedFetch([{ status: 400, body: fixtureText("commit_unknown.json") }]);
    const client = new ApiClient("http://svc", fetchImpl);
    await expect(client.commitVerdicts("fixture", [])).rejects.toMatchObject({
      status: 400,
      detail: expect.stringContaining("ghost::type9"),
    });
    await expect(client.commitVerdicts("fixture", [])).rejects.toBeInstanceOf(ApiError);
  });
});

describe("progress parsing", () => {
  it("round-trips the recorded progress document", async () => {
    const { fetchImpl } = scriptedFetch([{ status: 200, body: fixtureText("progress.json") }]);
    const progress = await new ApiClient("http://svc", fetchImpl).fetchProgress("fixture");
    expect(progress).toStrictEqual(fixture<Progress>("progress.json"));
    expect(progress.committed).toBe(21);
    expect(progress.budget_remaining).toBe(progress.budget - progress.committed);
  });
});
