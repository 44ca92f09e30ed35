import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";
import type { StorageLike } from "../src/state.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "fixtures");

export function fixture<T = unknown>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8")) as T;
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

/** fetch stub that replays queued (status, body) pairs and records calls. */
export function fakeFetch(
  responses: Array<{ status: number; body: unknown }>,
): { fetchFn: FetchLike; calls: RecordedCall[] } {
  const queue = [...responses];
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = (url, init) => {
    calls.push({ url, init });
    const next = queue.shift();
    if (!next) return Promise.reject(new Error("fetch queue exhausted"));
    return Promise.resolve(
      new Response(JSON.stringify(next.body), {
        status: next.status,
        headers: { "Content-Type": "application/json" },
      }),
    );
  };
  return { fetchFn, calls };
}

export function memoryStorage(initial: Record<string, string> = {}): StorageLike & {
  data: Record<string, string>;
} {
  const data = { ...initial };
  return {
    data,
    getItem: (key) => (key in data ? data[key]! : null),
    setItem: (key, value) => {
      data[key] = value;
    },
  };
}
