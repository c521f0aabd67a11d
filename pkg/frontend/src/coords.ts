/** Mappings between pad pixels, latent coordinates, and grid cells.
 *
 * The latent square is [-1, 1]^2 with +y up; pixel space has +y down.
 * padToLatent and latentToPad are exact inverses; cellCenter matches the
 * server's grid layout (row-major from the top-left, top row has z_y closest
 * to +1).
 */

export type Z = [number, number];

export interface PadSize {
  width: number;
  height: number;
}

export function clampZ(z: Z): Z {
  return [Math.max(-1, Math.min(1, z[0])), Math.max(-1, Math.min(1, z[1]))];
}

export function padToLatent(px: number, py: number, pad: PadSize): Z {
  return clampZ([(px / pad.width) * 2 - 1, 1 - (py / pad.height) * 2]);
}

export function latentToPad(z: Z, pad: PadSize): [number, number] {
  return [((z[0] + 1) / 2) * pad.width, ((1 - z[1]) / 2) * pad.height];
}

/** Latent center of cell (row, col) in a res x res grid over [-1, 1]^2. */
export function cellCenter(row: number, col: number, res: number): Z {
  const step = 2 / res;
  return [-1 + (col + 0.5) * step, 1 - (row + 0.5) * step];
}

/** Row-major cell index -> latent center, matching the /grid cell order. */
export function cellCenterByIndex(index: number, res: number): Z {
  return cellCenter(Math.floor(index / res), index % res, res);
}

/** Pixel rectangle of a grid cell drawn over the pad. */
export function cellRect(
  row: number,
  col: number,
  res: number,
  pad: PadSize,
): { x: number; y: number; width: number; height: number } {
  return {
    x: (col / res) * pad.width,
    y: (row / res) * pad.height,
    width: pad.width / res,
    height: pad.height / res,
  };
}

/** Cell under a pad pixel, row-major index. */
export function cellAt(px: number, py: number, res: number, pad: PadSize): number {
  const col = Math.min(res - 1, Math.max(0, Math.floor((px / pad.width) * res)));
  const row = Math.min(res - 1, Math.max(0, Math.floor((py / pad.height) * res)));
  return row * res + col;
}
