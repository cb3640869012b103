/** Typed client for the calibration service endpoints.
 *
 * The UI never computes geometry itself: the homography and every error
 * number rendered come from these responses.
 */
export class ApiError extends Error {
    constructor(status, detail) {
        super(detail);
        this.status = status;
        this.name = "ApiError";
    }
}
export class CalibrationApi {
    constructor(base = "", fetchFn = (...args) => fetch(...args)) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    imageUrl(which) {
        return `${this.base}/images/${which}`;
    }
    getCorrespondences() {
        return this.request("/correspondences");
    }
    /** Replaces the server-side pair list and returns the recomputed
     * homography with per-point reprojection errors. */
    postCorrespondences(pairs) {
        return this.request("/correspondences", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ correspondences: pairs }),
        });
    }
    getRoi() {
        return this.request("/roi");
    }
    postRoi(payload) {
        return this.request("/roi", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(payload),
        });
    }
    save() {
        return this.request("/save", { method: "POST" });
    }
    async request(path, init) {
        const resp = await this.fetchFn(this.base + path, init);
        if (!resp.ok) {
            let detail = `${resp.status} ${resp.statusText}`;
            try {
                const body = await resp.json();
                if (body && typeof body.detail === "string")
                    detail = body.detail;
            }
            catch {
                /* non-JSON error body: keep the status line */
            }
            throw new ApiError(resp.status, detail);
        }
        return (await resp.json());
    }
}
//# sourceMappingURL=api.js.map