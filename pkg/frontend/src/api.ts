/** Typed client for the calibration service endpoints.
 *
 * The UI never computes geometry itself: the homography and every error
 * number rendered come from these responses.
 */

export type Pt = [number, number];

export interface CorrespondencePair {
  camera: Pt;
  ortho: Pt;
}

export interface PerPointErrors {
  camera: number[];
  ortho: number[];
}

export interface MeanErrors {
  camera_px: number;
  ortho_px: number;
}

export interface HomographyResponse {
  correspondences: CorrespondencePair[];
  /** 9 row-major values, camera pixels -> orthophoto pixels; null below 4 pairs. */
  homography: number[] | null;
  per_point_errors: PerPointErrors | null;
  mean_errors: MeanErrors | null;
}

export interface RoiState {
  corners: Pt[] | null;
  lane_counts: Record<string, number>;
}

export interface SaveResult {
  calibration: string;
  roi: string;
}

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class CalibrationApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  imageUrl(which: "camera" | "ortho"): string {
    return `${this.base}/images/${which}`;
  }

  getCorrespondences(): Promise<HomographyResponse> {
    return this.request("/correspondences");
  }

  /** Replaces the server-side pair list and returns the recomputed
   * homography with per-point reprojection errors. */
  postCorrespondences(pairs: CorrespondencePair[]): Promise<HomographyResponse> {
    return this.request("/correspondences", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ correspondences: pairs }),
    });
  }

  getRoi(): Promise<RoiState> {
    return this.request("/roi");
  }

  postRoi(payload: { corners?: Pt[]; lane_counts?: Record<string, number> }): Promise<RoiState> {
    return this.request("/roi", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  save(): Promise<SaveResult> {
    return this.request("/save", { method: "POST" });
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      let detail = `${resp.status} ${resp.statusText}`;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body: keep the status line */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }
}
