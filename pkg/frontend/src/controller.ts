/** Glue between the local session state and the calibration service:
 * optimistic local edits, reconciled with the server after each change.
 */

import { ApiError, CalibrationApi, type Pt } from "./api.js";
import { SessionState } from "./state.js";

export interface ControllerEvents {
  /** State or numbers changed: re-render. */
  onChange: () => void;
  /** Transient problem (service unreachable, rejected payload). */
  onBanner: (message: string | null) => void;
}

export class SessionController {
  readonly state = new SessionState();

  constructor(
    private readonly api: CalibrationApi,
    private readonly events: ControllerEvents,
  ) {}

  /** Adopt any pairs/ROI a previous session left on the server. */
  async load(): Promise<void> {
    try {
      const corr = await this.api.getCorrespondences();
      for (const pair of corr.correspondences) this.state.addPair(pair);
      this.state.applyServerResponse(corr);
      const roi = await this.api.getRoi();
      if (roi.corners) this.state.setRoiCorners(roi.corners);
      for (const [cls, n] of Object.entries(roi.lane_counts)) {
        this.state.setLaneCount(Number(cls), n);
      }
      this.events.onBanner(null);
    } catch (err) {
      this.events.onBanner(describe(err));
    }
    this.events.onChange();
  }

  clickCamera(pt: Pt): void {
    this.state.clickCamera(pt);
    this.events.onChange();
  }

  async clickOrtho(pt: Pt): Promise<void> {
    this.state.clickOrtho(pt);
    await this.syncCorrespondences();
  }

  async undo(): Promise<void> {
    this.state.undo();
    await this.syncCorrespondences();
  }

  async redo(): Promise<void> {
    this.state.redo();
    await this.syncCorrespondences();
  }

  async setRoi(corners: Pt[]): Promise<void> {
    try {
      this.state.setRoiCorners(corners);
      await this.api.postRoi({ corners });
      this.events.onBanner(null);
    } catch (err) {
      this.events.onBanner(describe(err));
    }
    this.events.onChange();
  }

  async setLaneCount(classIndex: number, count: number): Promise<void> {
    try {
      this.state.setLaneCount(classIndex, count);
      await this.api.postRoi({ lane_counts: { [String(classIndex)]: count } });
      this.events.onBanner(null);
    } catch (err) {
      this.events.onBanner(describe(err));
    }
    this.events.onChange();
  }

  async save(): Promise<void> {
    const problems = this.state.saveProblems();
    if (problems.length > 0) {
      this.events.onBanner(problems.join("; "));
      this.events.onChange();
      return;
    }
    try {
      await this.api.postCorrespondences(this.state.correspondencePayload());
      await this.api.postRoi(this.state.roiPayload());
      const out = await this.api.save();
      this.state.markSaved();
      this.events.onBanner(`saved ${out.calibration} and ${out.roi}`);
    } catch (err) {
      this.events.onBanner(describe(err));
    }
    this.events.onChange();
  }

  /** Push the local pair list; keep local state even when the service is
   * unreachable or rejects (below 4 pairs the server answers 422 but still
   * retains them — treat that as success without numbers). */
  private async syncCorrespondences(): Promise<void> {
    try {
      if (this.state.readyForHomography) {
        const resp = await this.api.postCorrespondences(
          this.state.correspondencePayload(),
        );
        this.state.applyServerResponse(resp);
        this.events.onBanner(null);
      } else {
        await this.api
          .postCorrespondences(this.state.correspondencePayload())
          .catch((err) => {
            if (!(err instanceof ApiError && err.status === 422)) throw err;
          });
        this.events.onBanner(null);
      }
    } catch (err) {
      this.events.onBanner(describe(err));
    }
    this.events.onChange();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return `service unreachable: ${err.message}`;
  return String(err);
}
