/** Run-length mask decoding for the wire format {w, h, runs}. */

export interface MaskJson {
  w: number;
  h: number;
  runs: [number, number][];
}

export class MaskFormatError extends Error {
  override name = "MaskFormatError";
}

function checkDim(value: number, label: string): void {
  if (!Number.isInteger(value) || value < 1) {
    throw new MaskFormatError(`${label} must be a positive integer, got ${value}`);
  }
}

/**
 * Decode a wire mask into a flat Uint8Array of 0/1 over the row-major
 * grid. Runs may arrive in any order but must be in-bounds, non-empty,
 * and non-overlapping.
 */
export function decodeMask(mask: MaskJson): Uint8Array {
  checkDim(mask.w, "w");
  checkDim(mask.h, "h");
  if (!Array.isArray(mask.runs)) {
    throw new MaskFormatError("runs must be an array");
  }
  const total = mask.w * mask.h;
  const grid = new Uint8Array(total);
  const runs = [...mask.runs].sort((a, b) => a[0] - b[0]);
  let prevEnd = -1;
  for (const run of runs) {
    if (!Array.isArray(run) || run.length !== 2) {
      throw new MaskFormatError(`run must be [start, length], got ${JSON.stringify(run)}`);
    }
    const [start, length] = run;
    if (!Number.isInteger(start) || !Number.isInteger(length)) {
      throw new MaskFormatError(`run values must be integers, got [${start}, ${length}]`);
    }
    if (start < 0 || length < 1 || start + length > total) {
      throw new MaskFormatError(`run [${start}, ${length}] outside grid of ${total} cells`);
    }
    if (start < prevEnd) {
      throw new MaskFormatError(`run [${start}, ${length}] overlaps a previous run`);
    }
    grid.fill(1, start, start + length);
    prevEnd = start + length;
  }
  return grid;
}

/** Number of set cells, straight off the run lengths. */
export function maskArea(mask: MaskJson): number {
  decodeMask(mask);
  return mask.runs.reduce((sum, [, length]) => sum + length, 0);
}
