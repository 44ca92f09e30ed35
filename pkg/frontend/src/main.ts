/**
 * App assembly: chat pane, memory-graph inspector, live event feed.
 * State changes re-render their pane; the server is the single source of
 * truth for structure and scores.
 */

import { ApiClient, type EngineEvent, type GraphNode } from "./api.js";
import { canSend, cardMetaLine, sendMessage } from "./chat.js";
import { EventPoller } from "./events.js";
import { buildGraphViewModel, runLayout, toPixels } from "./graph.js";
import { clear, el, svgEl } from "./render.js";
import { ViewState, type MessageCard } from "./state.js";

const API_BASE = (window as unknown as { RECOLLECT_API?: string }).RECOLLECT_API ?? "http://127.0.0.1:8040";

const api = new ApiClient(API_BASE);
const state = new ViewState(window.localStorage);

const messagesPane = document.getElementById("messages") as HTMLDivElement;
const draftInput = document.getElementById("draft") as HTMLInputElement;
const sendButton = document.getElementById("send") as HTMLButtonElement;
const graphSvg = document.getElementById("graph") as unknown as SVGSVGElement;
const graphEmpty = document.getElementById("graph-empty") as HTMLDivElement;
const graphQuery = document.getElementById("graph-query") as HTMLInputElement;
const graphRefresh = document.getElementById("graph-refresh") as HTMLButtonElement;
const windowSlider = document.getElementById("window-days") as HTMLInputElement;
const windowLabel = document.getElementById("window-label") as HTMLSpanElement;
const feedList = document.getElementById("feed") as HTMLUListElement;

function renderCard(card: MessageCard): HTMLElement {
  const wrapper = el("div", `card card-${card.role}`);
  wrapper.appendChild(el("div", "card-text", card.text));
  const meta = cardMetaLine(card);
  if (meta) wrapper.appendChild(el("div", "card-meta", meta));
  return wrapper;
}

function renderMessages(): void {
  clear(messagesPane);
  for (const card of state.messages) messagesPane.appendChild(renderCard(card));
  messagesPane.scrollTop = messagesPane.scrollHeight;
}

function syncSendButton(): void {
  sendButton.disabled = !canSend(draftInput.value);
}

async function onSend(): Promise<void> {
  const text = draftInput.value;
  if (!canSend(text)) return;
  sendButton.disabled = true;
  const outcome = await sendMessage(api, state, text);
  if (!outcome.preserveDraft) draftInput.value = "";
  renderMessages();
  syncSendButton();
  void refreshGraph();
}

const KIND_COLORS: Record<string, string> = {
  Entity: "#4c9aff",
  Topic: "#9a6fce",
  Preference: "#46b58a",
  Turn: "#98a2b3",
};

function renderGraph(nodes: GraphNode[]): void {
  const vm = toPixels(
    runLayout(buildGraphViewModel(nodes, state.graphEdges)),
    graphSvg.clientWidth || 640,
    graphSvg.clientHeight || 420,
  );
  clear(graphSvg);
  graphEmpty.style.display = vm.empty ? "block" : "none";
  const positions = new Map(vm.nodes.map((n) => [n.id, n]));
  for (const link of vm.links) {
    const a = positions.get(link.source);
    const b = positions.get(link.target);
    if (!a || !b) continue;
    graphSvg.appendChild(
      svgEl("line", { x1: a.x, y1: a.y, x2: b.x, y2: b.y, class: "edge" }),
    );
  }
  for (const node of vm.nodes) {
    const group = svgEl("g", { transform: `translate(${node.x},${node.y})`, class: "node" });
    const circle = svgEl("circle", { r: 7, fill: KIND_COLORS[node.kind] ?? "#ccc" });
    circle.addEventListener("click", () => void selectNode(node.id));
    group.appendChild(circle);
    group.appendChild(svgEl("title", {})).textContent = `${node.label} (${node.kind})`;
    const label = svgEl("text", { x: 10, y: 4 });
    label.textContent = node.label.length > 24 ? `${node.label.slice(0, 24)}…` : node.label;
    group.appendChild(label);
    graphSvg.appendChild(group);
  }
}

async function refreshGraph(): Promise<void> {
  try {
    const days = Number(windowSlider.value);
    const now = Date.now();
    const windowFrom = days >= 365 ? undefined : now - days * 86_400_000;
    windowLabel.textContent = days >= 365 ? "all time" : `last ${days}d`;
    const nodes = await api.graphNodes(graphQuery.value, windowFrom, undefined, 40);
    state.setGraph(nodes, []);
    renderGraph(nodes);
  } catch {
    graphEmpty.style.display = "block";
    graphEmpty.textContent = "graph unavailable (network error)";
  }
}

async function selectNode(nodeId: number): Promise<void> {
  try {
    const neighborhood = await api.neighborhood(nodeId, 1);
    state.setGraph(neighborhood.nodes, neighborhood.edges);
    renderGraph(neighborhood.nodes);
  } catch {
    // selection is best-effort; keep the current render
  }
}

function renderEvents(events: EngineEvent[]): void {
  for (const event of events) {
    const item = el("li", `feed-${event.kind}`, `#${event.seq} ${event.kind}`);
    feedList.prepend(item);
  }
  while (feedList.childElementCount > 200) feedList.removeChild(feedList.lastChild!);
}

sendButton.addEventListener("click", () => void onSend());
draftInput.addEventListener("input", syncSendButton);
draftInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void onSend();
});
graphRefresh.addEventListener("click", () => void refreshGraph());
windowSlider.addEventListener("change", () => void refreshGraph());

syncSendButton();
void refreshGraph();
new EventPoller(api, state, renderEvents).start();
