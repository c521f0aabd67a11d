/** Node-link scene construction and canvas drawing.
 *
 * Scene building is pure (testable without a canvas); drawScene replays the
 * scene onto a CanvasRenderingContext2D-compatible surface.
 */

import type { GraphInfo } from "./api.js";
import { senPalette } from "./state.js";

export interface NodeMark {
  node: number;
  x: number;
  y: number;
  color: string;
  selected: boolean;
  label: string | null;
}

export interface EdgeMark {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface Scene {
  edges: EdgeMark[];
  nodes: NodeMark[];
}

export interface Viewport {
  width: number;
  height: number;
  padding: number;
}

/** Map normalized [0,1]^2 positions (y up) into a pixel viewport (y down). */
export function toPixels(
  positions: [number, number][],
  view: Viewport,
): [number, number][] {
  const w = view.width - 2 * view.padding;
  const h = view.height - 2 * view.padding;
  return positions.map(([x, y]) => [
    view.padding + x * w,
    view.padding + (1 - y) * h,
  ]);
}

export function buildScene(
  graph: GraphInfo,
  positions: [number, number][],
  selected: Set<number>,
  view: Viewport,
): Scene {
  if (positions.length !== graph.n) {
    throw new Error(`expected ${graph.n} positions, got ${positions.length}`);
  }
  const palette = senPalette(graph);
  const px = toPixels(positions, view);
  const edges = graph.edges.map(([u, v]) => ({
    x1: px[u][0],
    y1: px[u][1],
    x2: px[v][0],
    y2: px[v][1],
  }));
  const nodes = px.map(([x, y], node) => ({
    node,
    x,
    y,
    color: palette[graph.sen_class_of[node]],
    selected: selected.has(node),
    label: graph.labels ? graph.labels[node] : null,
  }));
  return { edges, nodes };
}

export interface Canvas2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export function drawScene(ctx: Canvas2D, scene: Scene, view: Viewport): void {
  ctx.clearRect(0, 0, view.width, view.height);
  ctx.strokeStyle = "#cccccc";
  ctx.lineWidth = 1;
  for (const edge of scene.edges) {
    ctx.beginPath();
    ctx.moveTo(edge.x1, edge.y1);
    ctx.lineTo(edge.x2, edge.y2);
    ctx.stroke();
  }
  for (const mark of scene.nodes) {
    ctx.beginPath();
    ctx.arc(mark.x, mark.y, mark.selected ? 7 : 4, 0, 2 * Math.PI);
    ctx.fillStyle = mark.color;
    ctx.fill();
    if (mark.selected) {
      ctx.strokeStyle = "#000000";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }
}

/** Node under a pixel, or null; prefers the last-drawn (topmost) node. */
export function hitTest(scene: Scene, x: number, y: number, radius = 8): number | null {
  for (let i = scene.nodes.length - 1; i >= 0; i--) {
    const mark = scene.nodes[i];
    const dx = mark.x - x;
    const dy = mark.y - y;
    if (dx * dx + dy * dy <= radius * radius) {
      return mark.node;
    }
  }
  return null;
}
