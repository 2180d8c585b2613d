/** Ranked-segment overlay: decoded masks, tint colors, labels, hit-testing. */

import type { RankPreview } from "./api.js";
import { decodeMask } from "./mask.js";

export class OverlayMismatchError extends Error {
  override name = "OverlayMismatchError";
}

export interface OverlayRegion {
  segmentId: string;
  rank: number;
  normScore: number;
  area: number;
  grid: Uint8Array;
  bbox: [number, number, number, number];
  color: [number, number, number];
  label: string;
}

export interface OverlayModel {
  width: number;
  height: number;
  outcome: "matched" | "no_match";
  regions: OverlayRegion[];
}

// Rank 1 gets the hot color; later ranks fall back to a muted cycle.
const PALETTE: [number, number, number][] = [
  [255, 64, 64],
  [64, 128, 255],
  [64, 200, 120],
  [230, 180, 40],
  [180, 90, 220],
  [90, 200, 220],
];

export function buildOverlayModel(
  preview: RankPreview,
  imageWidth: number,
  imageHeight: number,
): OverlayModel {
  const regions: OverlayRegion[] = [];
  for (const seg of preview.segments) {
    if (seg.mask.w !== imageWidth || seg.mask.h !== imageHeight) {
      throw new OverlayMismatchError(
        `mask ${seg.mask.w}x${seg.mask.h} does not match image ` +
          `${imageWidth}x${imageHeight} for segment ${seg.segment_id}`,
      );
    }
    regions.push({
      segmentId: seg.segment_id,
      rank: seg.rank,
      normScore: seg.norm_score,
      area: seg.area,
      grid: decodeMask(seg.mask),
      bbox: seg.bbox,
      color: PALETTE[(seg.rank - 1) % PALETTE.length] ?? [128, 128, 128],
      label: `#${seg.rank} ${seg.segment_id} ${(seg.norm_score * 100).toFixed(1)}%`,
    });
  }
  regions.sort((a, b) => a.rank - b.rank);
  return { width: imageWidth, height: imageHeight, outcome: preview.outcome, regions };
}

/**
 * Segment at image-pixel (x, y), or null. Smallest containing region
 * wins so nested or overlapping masks stay clickable.
 */
export function hitTest(model: OverlayModel, x: number, y: number): string | null {
  const px = Math.floor(x);
  const py = Math.floor(y);
  if (px < 0 || py < 0 || px >= model.width || py >= model.height) return null;
  const idx = py * model.width + px;
  let best: OverlayRegion | null = null;
  for (const region of model.regions) {
    if (region.grid[idx] === 1 && (best === null || region.area < best.area)) {
      best = region;
    }
  }
  return best ? best.segmentId : null;
}

/**
 * Paint the overlay onto a 2D canvas context sized to the image. Rank 1
 * is strongest; a selected override gets an outlined bounding box.
 */
export function paintOverlay(
  ctx: CanvasRenderingContext2D,
  model: OverlayModel,
  selectedId: string | null,
): void {
  ctx.clearRect(0, 0, model.width, model.height);
  const image = ctx.createImageData(model.width, model.height);
  const data = image.data;
  for (const region of [...model.regions].reverse()) {
    const [r, g, b] = region.color;
    const alpha = region.rank === 1 ? 115 : 64;
    for (let i = 0; i < region.grid.length; i++) {
      if (region.grid[i] !== 1) continue;
      const o = i * 4;
      data[o] = r;
      data[o + 1] = g;
      data[o + 2] = b;
      data[o + 3] = alpha;
    }
  }
  ctx.putImageData(image, 0, 0);

  ctx.font = "12px system-ui, sans-serif";
  ctx.textBaseline = "top";
  for (const region of model.regions) {
    const [x0, y0, x1, y1] = region.bbox;
    if (region.segmentId === selectedId) {
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 2;
      ctx.strokeRect(x0 + 0.5, y0 + 0.5, x1 - x0 - 1, y1 - y0 - 1);
    }
    ctx.fillStyle = region.rank === 1 ? "#ffffff" : "rgba(255,255,255,0.75)";
    ctx.fillText(region.label, x0 + 2, Math.max(0, y0 + 2));
  }
}
