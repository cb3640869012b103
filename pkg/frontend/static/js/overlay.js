/** Rendering-only projective helpers.
 *
 * These apply the service-supplied homography to place overlay graphics
 * (blue reprojected keypoints, the ROI mirrored onto the camera view).
 * No displayed error number is derived here — those come from the service.
 */
/** Apply a row-major 3x3 homography to a point. */
export function applyH(h, p) {
    const w = h[6] * p[0] + h[7] * p[1] + h[8];
    return [
        (h[0] * p[0] + h[1] * p[1] + h[2]) / w,
        (h[3] * p[0] + h[4] * p[1] + h[5]) / w,
    ];
}
/** Adjugate-based inverse of a row-major 3x3 matrix (scale-free, which is
 * all a homography needs). */
export function invertH(h) {
    const [a, b, c, d, e, f, g, k, i] = h;
    const inv = [
        e * i - f * k, c * k - b * i, b * f - c * e,
        f * g - d * i, a * i - c * g, c * d - a * f,
        d * k - e * g, b * g - a * k, a * e - b * d,
    ];
    const det = a * inv[0] + b * inv[3] + c * inv[6];
    if (!isFinite(det) || det === 0) {
        throw new Error("homography is not invertible");
    }
    return inv.map((v) => v / det);
}
//# sourceMappingURL=overlay.js.map