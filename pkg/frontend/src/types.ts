export type Label = "FG" | "BG";

/** Wire voxel coordinate: [x, y] or [x, y, z], x fastest, origin top-left. */
export type Voxel = number[];

export interface SessionState {
  id: string;
  revision: number;
  dims: number[]; // [dx, dy] or [dx, dy, dz]
  config: string;
  fg_seeds: number;
  bg_seeds: number;
  seed_conflicts: number;
  history_length: number;
  has_saliency: boolean;
  seed_mask: string; // base64 row-major bytes, FG=255 BG=128 unlabeled=0
  label_map: string; // base64 row-major bytes, FG=255 BG=128
  seeding_report: Record<string, unknown>;
  warnings: string[];
  metrics?: { dice: number; fg_seed_error_rate: number | null };
}

export interface ApiError {
  code: number;
  stage: string;
  message: string;
}

/** Screen = image * scale + offset, uniform in x/y. */
export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export type Tool = "fg" | "bg" | "pan";

export interface OverlayToggles {
  seeds: boolean;
  strength: boolean;
  contour: boolean;
  saliency: boolean;
}

export interface ViewState {
  sessionId: string | null;
  revision: number;
  tool: Tool;
  brushRadius: number; // px
  transform: Transform;
  toggles: OverlayToggles;
  slice: number; // axial index, 3-D only
}

export const MASK_FG = 255;
export const MASK_BG = 128;
export const MASK_UNLABELED = 0;
