import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";

const fixturesDir = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function fixtureText(name: string): string {
  return readFileSync(join(fixturesDir, name), "utf-8");
}

export function fixture<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

/** A fetch stub that replays canned (status, body) pairs in order. */
export function scriptedFetch(script: { status: number; body: string }[]): {
  fetchImpl: FetchLike;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  let index = 0;
  const fetchImpl: FetchLike = async (url, init) => {
    calls.push({ url, init });
    const step = script[Math.min(index, script.length - 1)];
    index += 1;
    if (!step) throw new Error("script exhausted");
    if (step.status < 0) throw new TypeError("fetch failed");
    return new Response(step.body, {
      status: step.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchImpl, calls };
}
