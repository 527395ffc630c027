/** Pure RGBA compositing of the base image and its overlays.
 *
 * Deterministic order: base grayscale, strength heatmap, seed colors,
 * label contour.  All functions work on flat buffers so they run both on
 * the canvas and under test without a DOM.
 */

import { MASK_BG, MASK_FG } from "./types.js";

export interface OverlayInputs {
  width: number;
  height: number;
  /** Base intensities in [0, 1], row-major. */
  base: Float32Array;
  /** Optional mask bytes ({0,128,255}) and weight fields, row-major. */
  seeds?: Uint8Array;
  strength?: Float32Array;
  labels?: Uint8Array;
  saliency?: Float32Array;
  toggles: { seeds: boolean; strength: boolean; contour: boolean; saliency: boolean };
  /** Display window: intensity = (v - (level - width/2)) / width. */
  level?: number;
  window?: number;
}

const SEED_FG_COLOR = [46, 204, 64];
const SEED_BG_COLOR = [0, 116, 217];
const CONTOUR_COLOR = [255, 220, 0];
const HEAT_COLOR = [255, 65, 54];
const SALIENCY_COLOR = [177, 13, 201];

export function windowed(v: number, level = 0.5, window = 1.0): number {
  const lo = level - window / 2;
  const t = (v - lo) / window;
  return t < 0 ? 0 : t > 1 ? 1 : t;
}

/** FG voxels on the region boundary: any face neighbor missing or non-FG. */
export function contourOf(labels: Uint8Array, width: number, height: number): Uint8Array {
  const out = new Uint8Array(labels.length);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      if (labels[i] !== MASK_FG) continue;
      const edge =
        x === 0 || x === width - 1 || y === 0 || y === height - 1 ||
        labels[i - 1] !== MASK_FG ||
        labels[i + 1] !== MASK_FG ||
        labels[i - width] !== MASK_FG ||
        labels[i + width] !== MASK_FG;
      if (edge) out[i] = 1;
    }
  }
  return out;
}

export function composite(inputs: OverlayInputs): Uint8ClampedArray {
  const { width, height, base, toggles } = inputs;
  const n = width * height;
  const rgba = new Uint8ClampedArray(4 * n);

  for (let i = 0; i < n; i++) {
    const g = Math.round(windowed(base[i], inputs.level, inputs.window) * 255);
    rgba[4 * i] = g;
    rgba[4 * i + 1] = g;
    rgba[4 * i + 2] = g;
    rgba[4 * i + 3] = 255;
  }

  if (toggles.saliency && inputs.saliency) {
    blendField(rgba, inputs.saliency, SALIENCY_COLOR, 0.5);
  }
  if (toggles.strength && inputs.strength) {
    blendField(rgba, inputs.strength, HEAT_COLOR, 0.6);
  }
  if (toggles.seeds && inputs.seeds) {
    for (let i = 0; i < n; i++) {
      const s = inputs.seeds[i];
      if (s === MASK_FG) paint(rgba, i, SEED_FG_COLOR);
      else if (s === MASK_BG) paint(rgba, i, SEED_BG_COLOR);
    }
  }
  if (toggles.contour && inputs.labels) {
    const contour = contourOf(inputs.labels, width, height);
    for (let i = 0; i < n; i++) {
      if (contour[i]) paint(rgba, i, CONTOUR_COLOR);
    }
  }
  return rgba;
}

function paint(rgba: Uint8ClampedArray, i: number, color: number[]): void {
  rgba[4 * i] = color[0];
  rgba[4 * i + 1] = color[1];
  rgba[4 * i + 2] = color[2];
  rgba[4 * i + 3] = 255;
}

function blendField(
  rgba: Uint8ClampedArray,
  field: Float32Array,
  color: number[],
  opacity: number,
): void {
  for (let i = 0; i < field.length; i++) {
    const a = field[i] * opacity;
    if (a <= 0) continue;
    rgba[4 * i] = Math.round(rgba[4 * i] * (1 - a) + color[0] * a);
    rgba[4 * i + 1] = Math.round(rgba[4 * i + 1] * (1 - a) + color[1] * a);
    rgba[4 * i + 2] = Math.round(rgba[4 * i + 2] * (1 - a) + color[2] * a);
  }
}
