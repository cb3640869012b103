/** Local annotation session state.
 *
 * Holds the operator's clicks (correspondence pairs, ROI corners, lane
 * counts) plus the last numbers returned by the service. All geometry
 * displayed to the operator (homography, per-point errors) is stored
 * verbatim from service responses — this module never derives any of it.
 */
export const N_CLASSES = 12;
const EMPTY_NUMBERS = {
    homography: null,
    perPointErrors: null,
    meanErrors: null,
};
function segmentsProperlyIntersect(a, b, c, d) {
    const cross = (o, p, q) => (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    const d1 = cross(c, d, a);
    const d2 = cross(c, d, b);
    const d3 = cross(a, b, c);
    const d4 = cross(a, b, d);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}
/** A quadrilateral is a "bowtie" when its two opposite-edge pairs cross. */
export function isSelfIntersecting(corners) {
    const [p0, p1, p2, p3] = corners;
    return segmentsProperlyIntersect(p0, p1, p2, p3) ||
        segmentsProperlyIntersect(p1, p2, p3, p0);
}
export class SessionState {
    constructor() {
        this.pairList = [];
        this.redoStack = [];
        /** A camera click waiting for its ortho partner; never persisted alone. */
        this.pendingCamera = null;
        this.numbers = EMPTY_NUMBERS;
        this.roi = null;
        this.laneCountMap = new Map();
        this.dirtyFlag = false;
    }
    get pairs() {
        return this.pairList;
    }
    get pendingCameraClick() {
        return this.pendingCamera;
    }
    get homography() {
        return this.numbers.homography;
    }
    get perPointErrors() {
        return this.numbers.perPointErrors;
    }
    get meanErrors() {
        return this.numbers.meanErrors;
    }
    get roiCorners() {
        return this.roi;
    }
    get laneCounts() {
        return this.laneCountMap;
    }
    get dirty() {
        return this.dirtyFlag;
    }
    /** First half of a correspondence: a click on the camera image. */
    clickCamera(pt) {
        this.pendingCamera = pt;
    }
    /** Second half: a click on the orthophoto completes the pair. */
    clickOrtho(pt) {
        if (this.pendingCamera === null)
            return;
        this.addPair({ camera: this.pendingCamera, ortho: pt });
        this.pendingCamera = null;
    }
    addPair(pair) {
        this.pairList = [...this.pairList, pair];
        this.redoStack = [];
        this.dirtyFlag = true;
        this.invalidateNumbers();
    }
    get canUndo() {
        return this.pairList.length > 0 || this.pendingCamera !== null;
    }
    get canRedo() {
        return this.redoStack.length > 0;
    }
    /** Removes exactly the last completed pair (or an unfinished camera
     * click). After N adds and N undos the pair list is back to where it
     * started. */
    undo() {
        if (this.pendingCamera !== null) {
            this.pendingCamera = null;
            return;
        }
        const last = this.pairList[this.pairList.length - 1];
        if (last === undefined)
            return;
        this.pairList = this.pairList.slice(0, -1);
        this.redoStack = [...this.redoStack, last];
        this.dirtyFlag = true;
        this.invalidateNumbers();
    }
    redo() {
        const pair = this.redoStack[this.redoStack.length - 1];
        if (pair === undefined)
            return;
        this.redoStack = this.redoStack.slice(0, -1);
        this.pairList = [...this.pairList, pair];
        this.dirtyFlag = true;
        this.invalidateNumbers();
    }
    get readyForHomography() {
        return this.pairList.length >= 4;
    }
    /** Stores the service's numbers verbatim; the only way any geometry
     * enters this state. */
    applyServerResponse(resp) {
        this.numbers = {
            homography: resp.homography,
            perPointErrors: resp.per_point_errors,
            meanErrors: resp.mean_errors,
        };
    }
    /** Index of the pair with the worst ortho reprojection error, so the
     * operator can find and redo it. Null until the service has answered. */
    worstPairIndex() {
        const errs = this.numbers.perPointErrors?.ortho;
        if (!errs || errs.length === 0)
            return null;
        let worst = 0;
        for (let i = 1; i < errs.length; i++) {
            if (errs[i] > errs[worst])
                worst = i;
        }
        return worst;
    }
    setRoiCorners(corners) {
        if (corners.length !== 4) {
            throw new Error("ROI needs exactly 4 corners");
        }
        if (isSelfIntersecting(corners)) {
            throw new Error("ROI quadrilateral must not self-intersect");
        }
        this.roi = corners.map((c) => [c[0], c[1]]);
        this.dirtyFlag = true;
    }
    clearRoi() {
        this.roi = null;
        this.dirtyFlag = true;
    }
    setLaneCount(classIndex, count) {
        if (!Number.isInteger(classIndex) || classIndex < 1 || classIndex > N_CLASSES) {
            throw new Error(`movement class must be 1..${N_CLASSES}`);
        }
        if (!Number.isInteger(count) || count < 0) {
            throw new Error("lane count must be a non-negative integer");
        }
        this.laneCountMap.set(classIndex, count);
        this.dirtyFlag = true;
    }
    /** Empty when the session can be saved; otherwise the reasons it can't. */
    saveProblems() {
        const problems = [];
        if (this.pairList.length < 4)
            problems.push("need at least 4 correspondences");
        if (this.roi === null)
            problems.push("ROI corners not set");
        const missing = [];
        for (let c = 1; c <= N_CLASSES; c++) {
            if (!this.laneCountMap.has(c))
                missing.push(c);
        }
        if (missing.length > 0)
            problems.push(`missing lane counts for classes ${missing.join(", ")}`);
        return problems;
    }
    correspondencePayload() {
        return this.pairList.map((p) => ({ camera: [...p.camera], ortho: [...p.ortho] }));
    }
    roiPayload() {
        if (this.roi === null)
            throw new Error("ROI corners not set");
        const lane_counts = {};
        for (const [cls, n] of this.laneCountMap)
            lane_counts[String(cls)] = n;
        return { corners: this.roi.map((c) => [c[0], c[1]]), lane_counts };
    }
    markSaved() {
        this.dirtyFlag = false;
    }
    invalidateNumbers() {
        // Pairs changed: previously fetched numbers no longer describe them.
        this.numbers = EMPTY_NUMBERS;
    }
}
//# sourceMappingURL=state.js.map