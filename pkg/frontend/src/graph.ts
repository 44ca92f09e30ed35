/**
 * Memory-graph view model and a small deterministic force layout.
 *
 * The view model mirrors the fetched subgraph one to one (counts included);
 * layout only assigns presentation coordinates, starting from a fixed circle
 * so renders are reproducible.
 */

import type { GraphEdge, GraphNode } from "./api.js";

export interface LayoutNode {
  id: number;
  label: string;
  kind: string;
  lastSeen: number;
  x: number;
  y: number;
  vx: number;
  vy: number;
}

export interface LayoutLink {
  source: number;
  target: number;
  kind: string;
}

export interface GraphViewModel {
  nodes: LayoutNode[];
  links: LayoutLink[];
  empty: boolean;
}

export function buildGraphViewModel(nodes: GraphNode[], edges: GraphEdge[]): GraphViewModel {
  const layoutNodes = nodes.map((node, i) => {
    const angle = (2 * Math.PI * i) / Math.max(1, nodes.length);
    return {
      id: node.id,
      label: node.label,
      kind: node.kind,
      lastSeen: node.last_seen,
      x: Math.cos(angle),
      y: Math.sin(angle),
      vx: 0,
      vy: 0,
    };
  });
  const known = new Set(layoutNodes.map((n) => n.id));
  const links = edges
    .filter((e) => known.has(e.src) && known.has(e.dst))
    .map((e) => ({ source: e.src, target: e.dst, kind: e.kind }));
  return { nodes: layoutNodes, links, empty: layoutNodes.length === 0 };
}

/** One tick of springs + pairwise repulsion + centering. */
export function layoutTick(vm: GraphViewModel, width: number, height: number): void {
  const nodes = vm.nodes;
  const byId = new Map(nodes.map((n) => [n.id, n]));
  const repulsion = 0.02;
  const spring = 0.05;
  const centering = 0.01;
  const damping = 0.85;

  for (let i = 0; i < nodes.length; i++) {
    for (let j = i + 1; j < nodes.length; j++) {
      const a = nodes[i]!;
      const b = nodes[j]!;
      const dx = a.x - b.x;
      const dy = a.y - b.y;
      const distSq = Math.max(1e-4, dx * dx + dy * dy);
      const force = repulsion / distSq;
      a.vx += dx * force;
      a.vy += dy * force;
      b.vx -= dx * force;
      b.vy -= dy * force;
    }
  }
  for (const link of vm.links) {
    const a = byId.get(link.source);
    const b = byId.get(link.target);
    if (!a || !b) continue;
    const dx = b.x - a.x;
    const dy = b.y - a.y;
    a.vx += dx * spring;
    a.vy += dy * spring;
    b.vx -= dx * spring;
    b.vy -= dy * spring;
  }
  for (const node of nodes) {
    node.vx -= node.x * centering;
    node.vy -= node.y * centering;
    node.vx *= damping;
    node.vy *= damping;
    node.x += node.vx;
    node.y += node.vy;
  }
  void width;
  void height;
}

export function runLayout(vm: GraphViewModel, ticks = 120): GraphViewModel {
  for (let i = 0; i < ticks; i++) layoutTick(vm, 1, 1);
  return vm;
}

/** Map unit-space coordinates onto pixels with a margin. */
export function toPixels(vm: GraphViewModel, width: number, height: number): GraphViewModel {
  if (vm.nodes.length === 0) return vm;
  const xs = vm.nodes.map((n) => n.x);
  const ys = vm.nodes.map((n) => n.y);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = Math.max(1e-9, maxX - minX);
  const spanY = Math.max(1e-9, maxY - minY);
  const margin = 40;
  for (const node of vm.nodes) {
    node.x = margin + ((node.x - minX) / spanX) * (width - 2 * margin);
    node.y = margin + ((node.y - minY) / spanY) * (height - 2 * margin);
  }
  return vm;
}
