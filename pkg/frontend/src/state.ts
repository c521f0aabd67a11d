/** Explorer session state and its transitions. */

import type { DecodeResponse, GraphInfo } from "./api.js";
import { clampZ, type Z } from "./coords.js";

export type Overlay = "none" | "grid" | "heatmap";

export interface ExplorerState {
  z: Z;
  /** Append-only history of visited latent points within the session. */
  trail: Z[];
  selected: Set<number>;
  overlay: Overlay;
  /** Live layout, normalized positions from the last accepted decode. */
  layout: [number, number][] | null;
  /** Frozen comparison layout; null when unpinned. */
  pinned: [number, number][] | null;
  pinnedZ: Z | null;
}

export function initialState(): ExplorerState {
  return {
    z: [0, 0],
    trail: [],
    selected: new Set(),
    overlay: "none",
    layout: null,
    pinned: null,
    pinnedZ: null,
  };
}

export function setZ(state: ExplorerState, z: Z): ExplorerState {
  const clamped = clampZ(z);
  return { ...state, z: clamped, trail: [...state.trail, clamped] };
}

export function applyDecode(
  state: ExplorerState,
  response: DecodeResponse,
): ExplorerState {
  return { ...state, layout: response.positions };
}

export function toggleSelect(state: ExplorerState, node: number): ExplorerState {
  const selected = new Set(state.selected);
  if (selected.has(node)) {
    selected.delete(node);
  } else {
    selected.add(node);
  }
  return { ...state, selected };
}

export function setOverlay(state: ExplorerState, overlay: Overlay): ExplorerState {
  return { ...state, overlay };
}

export function pin(state: ExplorerState): ExplorerState {
  if (state.layout === null) {
    return state;
  }
  return { ...state, pinned: state.layout.map((p) => [...p] as [number, number]), pinnedZ: state.z };
}

export function unpin(state: ExplorerState): ExplorerState {
  return { ...state, pinned: null, pinnedZ: null };
}

/** Stable SEN palette: classes ordered by size descending (ties by id),
 * singleton classes all rendered gray. */
export function senPalette(graph: GraphInfo): string[] {
  const COLORS = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628",
    "#f781bf", "#17becf", "#bcbd22", "#8c564b", "#2ca02c", "#d62728",
  ];
  const GRAY = "#999999";
  const order = graph.sen_classes
    .map((members, id) => ({ id, size: members.length }))
    .sort((a, b) => b.size - a.size || a.id - b.id);
  const colorOf = new Map<number, string>();
  let next = 0;
  for (const { id, size } of order) {
    colorOf.set(id, size >= 2 ? COLORS[next++ % COLORS.length] : GRAY);
  }
  return graph.sen_classes.map((_, id) => colorOf.get(id) ?? GRAY);
}
