import { describe, expect, it } from "vitest";

import type { DecodeResponse, GraphInfo } from "../src/api.js";
import {
  cellAt,
  cellCenterByIndex,
  latentToPad,
  padToLatent,
  type Z,
} from "../src/coords.js";
import { DecodeScheduler } from "../src/decoder.js";
import { buildScene, hitTest, toPixels } from "../src/render.js";
import {
  applyDecode,
  initialState,
  pin,
  senPalette,
  setZ,
  toggleSelect,
  unpin,
} from "../src/state.js";

const PAD = { width: 320, height: 320 };

const GRAPH: GraphInfo = {
  n: 6,
  edges: [[0, 1], [0, 2], [1, 2], [2, 3], [3, 4], [3, 5]],
  labels: ["a", "b", "c", "d", "e", "f"],
  sen_classes: [[0, 1], [2], [3], [4, 5]],
  sen_class_of: [0, 0, 1, 2, 3, 3],
};

function layoutOf(seed: number): [number, number][] {
  return Array.from({ length: GRAPH.n }, (_, i) => [
    ((seed * 13 + i * 7) % 100) / 100,
    ((seed * 29 + i * 11) % 100) / 100,
  ]);
}

function decodeResponse(z: Z, seed: number): DecodeResponse {
  return { z, positions: layoutOf(seed), raw_positions: layoutOf(seed) };
}

describe("pad coordinate mapping", () => {
  it("maps a click at the pad center to z = (0, 0)", () => {
    expect(padToLatent(PAD.width / 2, PAD.height / 2, PAD)).toEqual([0, 0]);
  });

  it("issues a decode with z = (0, 0) for a center click", async () => {
    const calls: Z[] = [];
    const api = {
      decode: (z: Z) => {
        calls.push(z);
        return Promise.resolve(decodeResponse(z, 1));
      },
    };
    const scheduler = new DecodeScheduler(api, () => undefined);
    scheduler.request(padToLatent(160, 160, PAD));
    await Promise.resolve();
    expect(calls).toEqual([[0, 0]]);
  });

  it("is the exact inverse of latentToPad", () => {
    for (const z of [[-1, -1], [0.25, -0.75], [1, 1], [0, 0]] as Z[]) {
      const [px, py] = latentToPad(z, PAD);
      const back = padToLatent(px, py, PAD);
      expect(back[0]).toBeCloseTo(z[0], 12);
      expect(back[1]).toBeCloseTo(z[1], 12);
    }
  });

  it("clamps clicks outside the square", () => {
    expect(padToLatent(-10, 9999, PAD)).toEqual([-1, -1]);
  });
});

describe("thumbnail grid", () => {
  it("maps a thumbnail click to the cell center within one pixel", () => {
    const res = 8;
    const onePixel = 2 / PAD.width; // one pad pixel in latent units
    for (let index = 0; index < res * res; index++) {
      const center = cellCenterByIndex(index, res);
      // click anywhere in the cell; the explorer jumps to its exact center
      const [px, py] = latentToPad(center, PAD);
      const clicked = cellAt(px + 0.4, py - 0.4, res, PAD);
      expect(clicked).toBe(index);
      const z = cellCenterByIndex(clicked, res);
      expect(Math.abs(z[0] - center[0])).toBeLessThan(onePixel);
      expect(Math.abs(z[1] - center[1])).toBeLessThan(onePixel);
    }
  });

  it("places the first cell at the top-left of the latent square", () => {
    expect(cellCenterByIndex(0, 2)).toEqual([-0.5, 0.5]);
    expect(cellCenterByIndex(3, 2)).toEqual([0.5, -0.5]);
  });
});

describe("compare mode", () => {
  it("keeps the pinned pane immutable while z changes", () => {
    let state = initialState();
    state = applyDecode(setZ(state, [0.1, 0.2]), decodeResponse([0.1, 0.2], 1));
    state = pin(state);
    const frozen = JSON.parse(JSON.stringify(state.pinned));
    for (let step = 0; step < 10; step++) {
      const z: Z = [step / 10 - 0.5, 0.3];
      state = applyDecode(setZ(state, z), decodeResponse(z, step + 2));
    }
    expect(state.pinned).toEqual(frozen);
    expect(state.layout).not.toEqual(frozen);
    expect(state.pinnedZ).toEqual([0.1, 0.2]);
  });

  it("restores single-pane mode on unpin", () => {
    let state = applyDecode(initialState(), decodeResponse([0, 0], 1));
    state = unpin(pin(state));
    expect(state.pinned).toBeNull();
    expect(state.pinnedZ).toBeNull();
  });
});

describe("selection persistence", () => {
  it("keeps a selected node highlighted across 20 consecutive decodes", () => {
    let state = initialState();
    state = toggleSelect(state, 5);
    const view = { width: 420, height: 420, padding: 12 };
    for (let step = 0; step < 20; step++) {
      const z: Z = [Math.sin(step), Math.cos(step)];
      state = applyDecode(setZ(state, z), decodeResponse(z, step));
      const scene = buildScene(GRAPH, state.layout!, state.selected, view);
      expect(scene.nodes[5].selected).toBe(true);
      expect(scene.nodes.filter((m) => m.selected)).toHaveLength(1);
    }
    expect(state.selected.has(5)).toBe(true);
  });

  it("toggles selection off on a second click", () => {
    let state = toggleSelect(initialState(), 3);
    state = toggleSelect(state, 3);
    expect(state.selected.size).toBe(0);
  });
});

describe("stale decode responses", () => {
  it("never renders an older response that arrives after a newer one", async () => {
    const resolvers: Array<(r: DecodeResponse) => void> = [];
    const api = {
      decode: (z: Z) =>
        new Promise<DecodeResponse>((resolve) => {
          resolvers.push((r) => resolve({ ...r, z }));
        }),
    };
    const rendered: number[] = [];
    let now = 0;
    const scheduler = new DecodeScheduler(
      api,
      (_response, seq) => rendered.push(seq),
      { now: () => now, setTimer: (fn) => fn() },
    );
    for (let i = 0; i < 4; i++) {
      scheduler.request([i / 4, 0]);
      now += 100; // past the throttle window: all four are sent
    }
    expect(scheduler.sent).toBe(4);
    // responses arrive out of order: 2, 0, 3, 1
    resolvers[2](decodeResponse([0, 0], 2));
    await Promise.resolve();
    resolvers[0](decodeResponse([0, 0], 0));
    await Promise.resolve();
    resolvers[3](decodeResponse([0, 0], 3));
    await Promise.resolve();
    resolvers[1](decodeResponse([0, 0], 1));
    await Promise.resolve();
    expect(rendered).toEqual([2, 3]);
    expect(scheduler.discarded).toBe(2);
  });

  it("throttles a burst of requests to the rate limit", async () => {
    let now = 0;
    const pendingTimers: Array<() => void> = [];
    const sentAt: number[] = [];
    const api = {
      decode: (z: Z) => {
        sentAt.push(now);
        return Promise.resolve(decodeResponse(z, 0));
      },
    };
    const scheduler = new DecodeScheduler(api, () => undefined, {
      maxPerSecond: 30,
      now: () => now,
      setTimer: (fn) => pendingTimers.push(fn),
    });
    for (let i = 0; i < 100; i++) {
      scheduler.request([i / 100, 0]);
      now += 1; // 100 requests within 100 ms
    }
    // a 100 ms burst may carry at most three sends at 30 req/s
    expect(scheduler.sent).toBe(3);
    // the rest coalesce into a single armed timer holding the newest z
    expect(pendingTimers).toHaveLength(1);
    now += 40;
    pendingTimers.shift()!();
    expect(scheduler.sent).toBe(4);
    for (let i = 1; i < sentAt.length; i++) {
      expect(sentAt[i] - sentAt[i - 1]).toBeGreaterThanOrEqual(1000 / 30 - 1e-9);
    }
  });
});

describe("rendering", () => {
  it("colors twin classes by size descending and singletons gray", () => {
    const palette = senPalette(GRAPH);
    expect(palette[0]).toBe(palette[0]); // class {0,1}
    expect(palette[1]).toBe("#999999"); // singleton {2}
    expect(palette[2]).toBe("#999999"); // singleton {3}
    expect(palette[0]).not.toBe(palette[3]);
    // both 2-classes get the first two palette slots, ordered by class id
    expect(palette[0]).toBe("#e41a1c");
    expect(palette[3]).toBe("#377eb8");
  });

  it("builds one mark per node and per edge with y flipped", () => {
    const view = { width: 100, height: 100, padding: 0 };
    const scene = buildScene(GRAPH, layoutOf(1), new Set(), view);
    expect(scene.nodes).toHaveLength(6);
    expect(scene.edges).toHaveLength(6);
    const [[, py]] = toPixels([[0, 1]], view);
    expect(py).toBe(0); // top of the layout is the top of the canvas
  });

  it("rejects a layout with the wrong node count", () => {
    const view = { width: 100, height: 100, padding: 0 };
    expect(() => buildScene(GRAPH, [[0, 0]], new Set(), view)).toThrow(/6/);
  });

  it("hit-tests the topmost node under the pointer", () => {
    const view = { width: 100, height: 100, padding: 0 };
    const positions: [number, number][] = [
      [0.5, 0.5], [0.5, 0.5], [0.1, 0.1], [0.9, 0.9], [0.1, 0.9], [0.9, 0.1],
    ];
    const scene = buildScene(GRAPH, positions, new Set(), view);
    expect(hitTest(scene, 50, 50)).toBe(1);
    expect(hitTest(scene, 5, 95)).toBe(2);
    expect(hitTest(scene, 50, 5)).toBeNull();
  });
});
