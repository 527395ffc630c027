/** Browser entry point: upload, review auto seeds, refine with scribbles. */

import { ApiRequestError, SessionClient } from "./api.js";
import { composite } from "./overlay.js";
import { decodeBase64Mask, decodeImagePayload, sliceOf, DecodedImage } from "./pgm.js";
import { Point, imageToScreen, strokeToVoxels } from "./raster.js";
import { SessionStore } from "./store.js";
import type { Label, SessionState, Tool, Transform } from "./types.js";

const client = new SessionClient("");
const store = new SessionStore();

interface ArtifactCache {
  revision: number;
  image: DecodedImage | null;
  strength: DecodedImage | null;
  saliency: DecodedImage | null;
}

const cache: ArtifactCache = { revision: 0, image: null, strength: null, saliency: null };

const view = {
  tool: "fg" as Tool,
  brushRadius: 3,
  transform: { scale: 6, offsetX: 0, offsetY: 0 } as Transform,
  toggles: { seeds: true, strength: false, contour: true, saliency: false },
  slice: 0,
  level: 0.5,
  window: 1.0,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("viewport");
const ctx = canvas.getContext("2d")!;
const status = el<HTMLElement>("status");
const warnings = el<HTMLElement>("warnings");
const sliceRow = el<HTMLElement>("slice-row");
const sliceInput = el<HTMLInputElement>("slice");

function dims(): number[] {
  return store.state ? store.state.dims : [0, 0];
}

function is3d(): boolean {
  return dims().length === 3;
}

function setStatus(text: string): void {
  status.textContent = text;
}

function showError(err: unknown): void {
  const message = err instanceof ApiRequestError ? err.message : String(err);
  setStatus(`error: ${message}`);
}

async function refreshArtifacts(state: SessionState): Promise<void> {
  if (cache.revision === state.revision && cache.image) return;
  const image = decodeImagePayload(await client.fetchArtifact(state.id, "image"));
  const strength = decodeImagePayload(await client.fetchArtifact(state.id, "strength"));
  let saliency: DecodedImage | null = null;
  if (state.has_saliency) {
    saliency = decodeImagePayload(await client.fetchArtifact(state.id, "saliency"));
  }
  // A newer revision may have landed while we were fetching; never let an
  // older artifact set replace it.
  if (store.state && state.revision < store.state.revision) return;
  cache.revision = state.revision;
  cache.image = image;
  cache.strength = strength;
  cache.saliency = saliency;
}

function floatSlice(image: DecodedImage, z: number): Float32Array {
  const plane = sliceOf(image, z);
  const out = new Float32Array(plane.length);
  const scale = 1.0 / image.maxval;
  for (let i = 0; i < plane.length; i++) out[i] = plane[i] * scale;
  return out;
}

function maskSlice(mask: Uint8Array, width: number, height: number, z: number): Uint8Array {
  const plane = width * height;
  return mask.subarray(z * plane, (z + 1) * plane);
}

function render(): void {
  const state = store.state;
  if (!state || !cache.image) return;
  const [width, height] = state.dims;
  const z = Math.min(view.slice, (is3d() ? state.dims[2] : 1) - 1);

  const seeds = decodeBase64Mask(state.seed_mask, state.dims);
  const labels = decodeBase64Mask(state.label_map, state.dims);
  const rgba = composite({
    width,
    height,
    base: floatSlice(cache.image, z),
    seeds: maskSlice(seeds, width, height, z),
    strength: cache.strength ? floatSlice(cache.strength, z) : undefined,
    labels: maskSlice(labels, width, height, z),
    saliency: cache.saliency ? floatSlice(cache.saliency, z) : undefined,
    toggles: view.toggles,
    level: view.level,
    window: view.window,
  });

  const frame = new ImageData(rgba as Uint8ClampedArray<ArrayBuffer>, width, height);
  const buffer = document.createElement("canvas");
  buffer.width = width;
  buffer.height = height;
  buffer.getContext("2d")!.putImageData(frame, 0, 0);

  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(
    buffer,
    view.transform.offsetX,
    view.transform.offsetY,
    width * view.transform.scale,
    height * view.transform.scale,
  );
  drawPendingStrokes(z);

  const metrics = state.metrics ? `  dice ${(state.metrics.dice * 100).toFixed(1)}%` : "";
  setStatus(
    `rev ${state.revision}  config ${state.config}  seeds FG ${state.fg_seeds} / BG ${state.bg_seeds}${metrics}`,
  );
  warnings.textContent = state.warnings.join("; ");
}

/** Optimistic echo: pending strokes draw immediately in the tool color. */
function drawPendingStrokes(z: number): void {
  for (const stroke of store.pending) {
    ctx.fillStyle = stroke.label === "FG" ? "rgba(46,204,64,0.8)" : "rgba(0,116,217,0.8)";
    for (const voxel of stroke.voxels) {
      if (voxel.length === 3 && voxel[2] !== z) continue;
      const p = imageToScreen({ x: voxel[0], y: voxel[1] }, view.transform);
      ctx.fillRect(p.x, p.y, view.transform.scale, view.transform.scale);
    }
  }
}

async function applyState(state: SessionState, force = false): Promise<void> {
  const advanced = force ? (store.state = state, true) : store.applyServerState(state);
  if (!advanced) return;
  try {
    await refreshArtifacts(state);
  } catch (err) {
    showError(err);
  }
  render();
}

// --- Session creation -------------------------------------------------------

el<HTMLFormElement>("upload-form").addEventListener("submit", async (event) => {
  event.preventDefault();
  const files = el<HTMLInputElement>("image-file").files;
  if (!files || files.length === 0) {
    setStatus("choose an image first");
    return;
  }
  const config = el<HTMLInputElement>("config").value.trim() || "P,Sm,W,Me,gc";
  setStatus("running automated seeding…");
  try {
    const state = await client.createSession(files[0], config);
    store.reset(state);
    cache.revision = 0;
    cache.image = null;
    view.slice = 0;
    if (state.dims.length === 3) {
      sliceRow.style.display = "";
      sliceInput.max = String(state.dims[2] - 1);
      sliceInput.value = "0";
    } else {
      sliceRow.style.display = "none";
    }
    fitToCanvas(state.dims);
    await applyState(state, true);
  } catch (err) {
    showError(err);
  }
});

function fitToCanvas(d: number[]): void {
  const scale = Math.max(
    1,
    Math.floor(Math.min(canvas.width / d[0], canvas.height / d[1])),
  );
  view.transform = {
    scale,
    offsetX: Math.floor((canvas.width - d[0] * scale) / 2),
    offsetY: Math.floor((canvas.height - d[1] * scale) / 2),
  };
}

// --- Scribbling --------------------------------------------------------------

let activePath: Point[] | null = null;
let panStart: { x: number; y: number; offsetX: number; offsetY: number } | null = null;

function canvasPoint(event: PointerEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return { x: event.clientX - rect.left, y: event.clientY - rect.top };
}

canvas.addEventListener("pointerdown", (event) => {
  if (!store.state) return;
  canvas.setPointerCapture(event.pointerId);
  const p = canvasPoint(event);
  if (view.tool === "pan") {
    panStart = { x: p.x, y: p.y, ...{ offsetX: view.transform.offsetX, offsetY: view.transform.offsetY } };
  } else {
    activePath = [p];
    render();
  }
});

canvas.addEventListener("pointermove", (event) => {
  const p = canvasPoint(event);
  if (panStart) {
    view.transform.offsetX = panStart.offsetX + (p.x - panStart.x);
    view.transform.offsetY = panStart.offsetY + (p.y - panStart.y);
    render();
  } else if (activePath) {
    activePath.push(p);
    previewPath();
  }
});

function previewPath(): void {
  if (!activePath || !store.state) return;
  render();
  const color = view.tool === "fg" ? "rgba(46,204,64,0.5)" : "rgba(0,116,217,0.5)";
  ctx.strokeStyle = color;
  ctx.lineWidth = view.brushRadius * 2;
  ctx.lineCap = "round";
  ctx.beginPath();
  activePath.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.stroke();
}

canvas.addEventListener("pointerup", async () => {
  if (panStart) {
    panStart = null;
    return;
  }
  if (!activePath || !store.state) return;
  const path = activePath;
  activePath = null;
  const voxels = strokeToVoxels(
    path,
    view.brushRadius,
    view.transform,
    store.state.dims,
    view.slice,
  );
  if (voxels.length === 0) {
    render();
    return; // empty path: nothing to send
  }
  const label: Label = view.tool === "fg" ? "FG" : "BG";
  const sessionId = store.state.id;
  await store.submitStroke({ label, voxels }, async (stroke) => {
    const state = await client.addScribble(sessionId, stroke.label, stroke.voxels);
    await refreshArtifacts(state);
    return state;
  });
  render();
});

// --- Toolbar -----------------------------------------------------------------

for (const tool of ["fg", "bg", "pan"] as Tool[]) {
  el<HTMLButtonElement>(`tool-${tool}`).addEventListener("click", () => {
    view.tool = tool;
    for (const other of ["fg", "bg", "pan"]) {
      el(`tool-${other}`).classList.toggle("active", other === tool);
    }
  });
}

el<HTMLInputElement>("brush-radius").addEventListener("input", (event) => {
  view.brushRadius = Number((event.target as HTMLInputElement).value);
});

for (const name of ["seeds", "strength", "contour", "saliency"] as const) {
  el<HTMLInputElement>(`toggle-${name}`).addEventListener("change", (event) => {
    view.toggles[name] = (event.target as HTMLInputElement).checked;
    render();
  });
}

el<HTMLInputElement>("level").addEventListener("input", (event) => {
  view.level = Number((event.target as HTMLInputElement).value);
  render();
});
el<HTMLInputElement>("window").addEventListener("input", (event) => {
  view.window = Math.max(0.01, Number((event.target as HTMLInputElement).value));
  render();
});

sliceInput.addEventListener("input", (event) => {
  view.slice = Number((event.target as HTMLInputElement).value);
  render();
});

el<HTMLButtonElement>("zoom-in").addEventListener("click", () => {
  view.transform.scale = Math.min(32, view.transform.scale + 1);
  render();
});
el<HTMLButtonElement>("zoom-out").addEventListener("click", () => {
  view.transform.scale = Math.max(1, view.transform.scale - 1);
  render();
});

el<HTMLButtonElement>("undo").addEventListener("click", async () => {
  if (!store.state) return;
  try {
    const state = await client.undo(store.state.id);
    await applyState(state);
  } catch (err) {
    showError(err);
  }
});

store.onChange(() => render());
setStatus("upload a PGM (P5) or grid3d volume to begin");
