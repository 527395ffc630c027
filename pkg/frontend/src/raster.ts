/** Pointer-path rasterization into the server's voxel coordinates. */

import type { Transform, Voxel } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

export function screenToImage(p: Point, t: Transform): Point {
  return { x: (p.x - t.offsetX) / t.scale, y: (p.y - t.offsetY) / t.scale };
}

export function imageToScreen(p: Point, t: Transform): Point {
  return { x: p.x * t.scale + t.offsetX, y: p.y * t.scale + t.offsetY };
}

/**
 * Resample a polyline so consecutive points are at most one voxel apart.
 * Segment i-1..i contributes ceil(len) interior steps; the shared endpoint
 * is emitted once.
 */
export function interpolatePath(points: Point[]): Point[] {
  if (points.length === 0) return [];
  const out: Point[] = [points[0]];
  for (let i = 1; i < points.length; i++) {
    const a = points[i - 1];
    const b = points[i];
    const len = Math.hypot(b.x - a.x, b.y - a.y);
    const steps = Math.max(1, Math.ceil(len));
    for (let s = 1; s <= steps; s++) {
      out.push({
        x: a.x + ((b.x - a.x) * s) / steps,
        y: a.y + ((b.y - a.y) * s) / steps,
      });
    }
  }
  return out;
}

/**
 * Voxels covered by one brush stamp at image point p.
 *
 * The voxel under the point is always painted; with radius above one
 * voxel, every voxel whose center lies within (radius - 0.5) joins, so a
 * radius-1 brush at zoom 1 paints exactly the voxel under the cursor.
 */
export function stampDisk(p: Point, radiusVox: number, width: number, height: number): Voxel[] {
  const out: Voxel[] = [];
  const reach = Math.max(0, radiusVox - 0.5);
  const x0 = Math.max(0, Math.floor(p.x - reach - 1));
  const x1 = Math.min(width - 1, Math.ceil(p.x + reach));
  const y0 = Math.max(0, Math.floor(p.y - reach - 1));
  const y1 = Math.min(height - 1, Math.ceil(p.y + reach));
  const cx = Math.floor(p.x);
  const cy = Math.floor(p.y);
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x + 0.5 - p.x;
      const dy = y + 0.5 - p.y;
      if ((x === cx && y === cy) || dx * dx + dy * dy <= reach * reach) {
        out.push([x, y]);
      }
    }
  }
  return out;
}

/**
 * Rasterize a pointer path into a deduplicated, in-bounds voxel list.
 *
 * Screen points map through the inverse zoom/pan transform; the brush
 * radius is given in screen px and scales accordingly.  Voxels outside the
 * image are clipped here (the server still validates).  For volumes the
 * current slice index is appended as z.
 */
export function strokeToVoxels(
  path: Point[],
  brushRadiusPx: number,
  transform: Transform,
  dims: number[], // [dx, dy] or [dx, dy, dz]
  slice = 0,
): Voxel[] {
  if (path.length === 0) return [];
  const [width, height] = dims;
  const imagePts = path.map((p) => screenToImage(p, transform));
  const radiusVox = brushRadiusPx / transform.scale;
  const seen = new Set<number>();
  const out: Voxel[] = [];
  for (const p of interpolatePath(imagePts)) {
    for (const [x, y] of stampDisk(p, radiusVox, width, height)) {
      const key = y * width + x;
      if (seen.has(key)) continue;
      seen.add(key);
      out.push(dims.length === 3 ? [x, y, slice] : [x, y]);
    }
  }
  return out;
}
