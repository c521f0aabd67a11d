/** Browser wiring: latent pad, layout canvas, overlays, compare mode. */

import { ApiClient, type GraphInfo, type GridResponse } from "./api.js";
import { cellAt, cellCenterByIndex, latentToPad, padToLatent, type Z } from "./coords.js";
import { DecodeScheduler } from "./decoder.js";
import {
  applyDecode,
  initialState,
  pin,
  setOverlay,
  setZ,
  toggleSelect,
  unpin,
  type ExplorerState,
} from "./state.js";
import { buildScene, drawScene, hitTest, type Scene, type Viewport } from "./render.js";

const GRID_RES = 8;

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

export async function start(base = ""): Promise<void> {
  const api = new ApiClient(base);
  const pad = el<HTMLCanvasElement>("pad");
  const live = el<HTMLCanvasElement>("live");
  const pinnedCanvas = el<HTMLCanvasElement>("pinned");
  const banner = el<HTMLDivElement>("banner");
  const metricsBox = el<HTMLDivElement>("metrics");

  let graph: GraphInfo;
  try {
    graph = await api.getGraph();
  } catch {
    banner.textContent = "layout service unreachable";
    banner.hidden = false;
    pad.style.pointerEvents = "none";
    return;
  }

  let state: ExplorerState = initialState();
  let liveScene: Scene | null = null;
  let grid: GridResponse | null = null;
  let heatmap: number[][] | null = null;
  const view: Viewport = { width: live.width, height: live.height, padding: 12 };
  const padSize = { width: pad.width, height: pad.height };

  const liveCtx = live.getContext("2d")!;
  const pinnedCtx = pinnedCanvas.getContext("2d")!;
  const padCtx = pad.getContext("2d")!;

  function renderLive(): void {
    if (state.layout) {
      liveScene = buildScene(graph, state.layout, state.selected, view);
      drawScene(liveCtx, liveScene, view);
    }
    if (state.pinned) {
      drawScene(pinnedCtx, buildScene(graph, state.pinned, state.selected, view), view);
    } else {
      pinnedCtx.clearRect(0, 0, view.width, view.height);
    }
    renderPad();
  }

  function renderPad(): void {
    padCtx.clearRect(0, 0, padSize.width, padSize.height);
    if (state.overlay === "heatmap" && heatmap) {
      const res = heatmap.length;
      const flat = heatmap.flat();
      const lo = Math.min(...flat);
      const hi = Math.max(...flat);
      for (let row = 0; row < res; row++) {
        for (let col = 0; col < res; col++) {
          const t = hi > lo ? (heatmap[row][col] - lo) / (hi - lo) : 0.5;
          padCtx.fillStyle = `rgba(30, 90, 200, ${0.15 + 0.7 * t})`;
          padCtx.fillRect(
            (col / res) * padSize.width,
            (row / res) * padSize.height,
            padSize.width / res,
            padSize.height / res,
          );
        }
      }
      el<HTMLSpanElement>("legend").textContent = `${lo.toFixed(3)} … ${hi.toFixed(3)}`;
    }
    if (state.overlay === "grid" && grid) {
      padCtx.strokeStyle = "#dddddd";
      const res = grid.resolution;
      grid.cells.forEach((cell, index) => {
        const col = index % res;
        const row = Math.floor(index / res);
        const x0 = (col / res) * padSize.width;
        const y0 = (row / res) * padSize.height;
        const w = padSize.width / res;
        padCtx.strokeRect(x0, y0, w, padSize.height / res);
        padCtx.fillStyle = "#555555";
        for (const [nx, ny] of cell.positions) {
          padCtx.fillRect(x0 + nx * (w - 4) + 2, y0 + (1 - ny) * (w - 4) + 2, 1.5, 1.5);
        }
      });
    }
    const [cx, cy] = latentToPad(state.z, padSize);
    padCtx.beginPath();
    padCtx.arc(cx, cy, 5, 0, 2 * Math.PI);
    padCtx.fillStyle = "#e41a1c";
    padCtx.fill();
  }

  const scheduler = new DecodeScheduler(api, (response) => {
    state = applyDecode(state, response);
    renderLive();
  });

  function goTo(z: Z): void {
    state = setZ(state, z);
    scheduler.request(state.z);
    void api.getMetrics(state.z).then((m) => {
      metricsBox.textContent =
        `crossings ${m.crossings} · crosslessness ${m.crosslessness.toFixed(3)}` +
        ` · shape ${m.shape.toFixed(3)}`;
    }).catch(() => undefined);
    renderPad();
  }

  let dragging = false;
  pad.addEventListener("pointerdown", (ev) => {
    dragging = true;
    const rect = pad.getBoundingClientRect();
    const px = ev.clientX - rect.left;
    const py = ev.clientY - rect.top;
    if (state.overlay === "grid" && grid) {
      const index = cellAt(px, py, grid.resolution, padSize);
      goTo(cellCenterByIndex(index, grid.resolution));
    } else {
      goTo(padToLatent(px, py, padSize));
    }
  });
  pad.addEventListener("pointermove", (ev) => {
    if (!dragging || state.overlay === "grid") {
      return;
    }
    const rect = pad.getBoundingClientRect();
    goTo(padToLatent(ev.clientX - rect.left, ev.clientY - rect.top, padSize));
  });
  window.addEventListener("pointerup", () => {
    dragging = false;
  });

  live.addEventListener("click", (ev) => {
    if (!liveScene) {
      return;
    }
    const rect = live.getBoundingClientRect();
    const node = hitTest(liveScene, ev.clientX - rect.left, ev.clientY - rect.top);
    if (node !== null) {
      state = toggleSelect(state, node);
      renderLive();
    }
  });

  el<HTMLButtonElement>("pin").addEventListener("click", () => {
    state = state.pinned ? unpin(state) : pin(state);
    el<HTMLButtonElement>("pin").textContent = state.pinned ? "unpin" : "pin";
    renderLive();
  });

  el<HTMLSelectElement>("overlay").addEventListener("change", (ev) => {
    const mode = (ev.target as HTMLSelectElement).value as "none" | "grid" | "heatmap";
    state = setOverlay(state, mode);
    if (mode === "grid" && !grid) {
      void api.getGrid(GRID_RES).then((g) => {
        grid = g;
        renderPad();
      });
    }
    if (mode === "heatmap" && !heatmap) {
      const poll = (): void => {
        void api.getHeatmap("crosslessness", 16).then((h) => {
          if (h.status === "done") {
            heatmap = h.grid;
            renderPad();
          } else {
            banner.textContent = `heatmap ${(h.progress * 100).toFixed(0)}%`;
            banner.hidden = false;
            setTimeout(poll, 500);
          }
        });
      };
      poll();
    }
    renderPad();
  });

  goTo([0, 0]);
}

if (typeof document !== "undefined" && document.getElementById("pad")) {
  void start();
}
