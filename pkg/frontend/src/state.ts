import { BdtJson, ReconstructResult, postReconstruct } from "./api.js";

// selectedPoint lives in layout coordinates, so dividing by the axis
// lengths must always land back inside the unit square.
export interface ViewState {
  selectedPoint: [number, number] | null;
  hoveredMember: number | null;
  lastReconstruction: BdtJson | null;
}

export function initialState(): ViewState {
  return { selectedPoint: null, hoveredMember: null, lastReconstruction: null };
}

function clamp01(x: number): number {
  return x < 0 ? 0 : x > 1 ? 1 : x;
}

/** Clamp a layout point into the valid rectangle [0, L1] x [0, L2]. */
export function clampToRect(
  pt: [number, number],
  axisLengths: number[],
): [number, number] {
  const out: [number, number] = [pt[0], pt[1]];
  for (let k = 0; k < 2; k++) {
    const len = axisLengths[k];
    if (!(len > 0)) {
      out[k] = 0;
    } else if (out[k] < 0) {
      out[k] = 0;
    } else if (out[k] > len) {
      out[k] = len;
    }
  }
  return out;
}

/** Layout point to normalized coordinates, clamped into [0, 1]^2. */
export function alphaFromLayoutPoint(
  pt: [number, number],
  axisLengths: number[],
): [number, number] {
  const a1 = axisLengths[0] > 0 ? pt[0] / axisLengths[0] : 0;
  const a2 = axisLengths[1] > 0 ? pt[1] / axisLengths[1] : 0;
  return [clamp01(a1), clamp01(a2)];
}

type PostFn = (alpha: number[], signal?: AbortSignal) => Promise<ReconstructResult>;

/**
 * Keeps at most one reconstruct request in flight. Submitting while an
 * earlier request is pending aborts it; the superseded call resolves to
 * null so callers can drop the stale result silently.
 */
export class ReconstructQueue {
  private inflight: AbortController | null = null;
  private readonly post: PostFn;

  constructor(post: PostFn = postReconstruct) {
    this.post = post;
  }

  async submit(alpha: number[]): Promise<ReconstructResult | null> {
    if (this.inflight) {
      this.inflight.abort();
    }
    const ctl = new AbortController();
    this.inflight = ctl;
    try {
      const result = await this.post(alpha, ctl.signal);
      if (ctl.signal.aborted) {
        return null;
      }
      return result;
    } catch (err) {
      if (ctl.signal.aborted) {
        return null;
      }
      throw err;
    } finally {
      if (this.inflight === ctl) {
        this.inflight = null;
      }
    }
  }
}
