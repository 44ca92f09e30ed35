import { describe, expect, it } from "vitest";

import { ApiClient, type EngineEvent } from "../src/api.js";
import { EventPoller } from "../src/events.js";
import { ViewState } from "../src/state.js";
import { fakeFetch, fixture, memoryStorage } from "./helpers.js";

const page1 = fixture<{ events: EngineEvent[] }>("events_page1.json");
const page2 = fixture<{ events: EngineEvent[] }>("events_page2.json");
const stale = fixture<{ events: EngineEvent[] }>("events_stale.json");

describe("event cursor", () => {
  it("advances across successive pages", () => {
    const state = new ViewState();
    expect(state.acceptEvents(page1.events)).toHaveLength(page1.events.length);
    expect(state.eventCursor).toBe(page1.events.at(-1)!.seq);
    expect(state.acceptEvents(page2.events)).toHaveLength(page2.events.length);
    expect(state.eventCursor).toBe(page2.events.at(-1)!.seq);
  });

  it("rejects out-of-order batches and keeps the cursor", () => {
    const state = new ViewState();
    state.acceptEvents(page1.events);
    const cursor = state.eventCursor;
    expect(state.acceptEvents(stale.events)).toHaveLength(0); // seqs already seen
    expect(state.eventCursor).toBe(cursor);
    const shuffled = [...page2.events].reverse();
    expect(state.acceptEvents(shuffled)).toHaveLength(0); // non-increasing inside batch
    expect(state.eventCursor).toBe(cursor);
  });

  it("persists across reloads via storage", () => {
    const storage = memoryStorage();
    const first = new ViewState(storage);
    first.acceptEvents(page1.events);
    const reloaded = new ViewState(storage);
    expect(reloaded.eventCursor).toBe(page1.events.at(-1)!.seq);
  });

  it("ignores corrupt stored cursors", () => {
    const state = new ViewState(memoryStorage({ "recollect.eventCursor": "garbage" }));
    expect(state.eventCursor).toBe(0);
  });
});

describe("poller", () => {
  it("polls since the cursor and hands accepted events to the renderer", async () => {
    const { fetchFn, calls } = fakeFetch([
      { status: 200, body: page1 },
      { status: 200, body: page2 },
    ]);
    const state = new ViewState();
    const seen: EngineEvent[][] = [];
    const poller = new EventPoller(new ApiClient("http://api.test", fetchFn), state, (e) => seen.push(e));

    await poller.pollOnce();
    await poller.pollOnce();
    expect(calls[0]!.url).toContain("since_seq=0");
    expect(calls[1]!.url).toContain(`since_seq=${page1.events.at(-1)!.seq}`);
    expect(seen.flat().map((e) => e.seq)).toEqual(
      [...page1.events, ...page2.events].map((e) => e.seq),
    );
  });

  it("swallows failures and recovers on the next success", async () => {
    const { fetchFn } = fakeFetch([
      { status: 500, body: { error: "boom" } },
      { status: 200, body: page1 },
    ]);
    const state = new ViewState();
    const seen: EngineEvent[][] = [];
    const poller = new EventPoller(new ApiClient("http://api.test", fetchFn), state, (e) => seen.push(e));

    expect(await poller.pollOnce()).toHaveLength(0); // silent failure
    expect(await poller.pollOnce()).toHaveLength(page1.events.length);
    expect(state.eventCursor).toBe(page1.events.at(-1)!.seq);
  });
});
