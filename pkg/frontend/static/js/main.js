/** Calibration UI entry point: two synchronized image views (camera frame
 * and orthophoto), a sortable per-point error table, ROI editing and lane
 * counts, all backed by the local calibration service.
 */
import { CalibrationApi } from "./api.js";
import { SessionController } from "./controller.js";
import { applyH, invertH } from "./overlay.js";
import { N_CLASSES } from "./state.js";
import { ImageView } from "./viewer.js";
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
const api = new CalibrationApi("");
const cameraView = new ImageView(el("camera-canvas"));
const orthoView = new ImageView(el("ortho-canvas"));
const banner = el("banner");
const errorTable = el("error-rows");
const meanErrors = el("mean-errors");
const laneGrid = el("lane-grid");
let mode = "correspond";
let roiDraft = [];
let sortErrorsDescending = true;
const controller = new SessionController(api, {
    onChange: render,
    onBanner(message) {
        banner.textContent = message ?? "";
        banner.style.display = message ? "block" : "none";
    },
});
function render() {
    const s = controller.state;
    const cameraMarkers = [];
    const orthoMarkers = [];
    s.pairs.forEach((pair, i) => {
        cameraMarkers.push({ pt: pair.camera, color: "#e33", label: String(i + 1) });
        orthoMarkers.push({ pt: pair.ortho, color: "#e33", label: String(i + 1) });
    });
    if (s.pendingCameraClick) {
        cameraMarkers.push({ pt: s.pendingCameraClick, color: "#fa0", label: "?" });
    }
    // Blue reprojected keypoints: camera clicks pushed through the service's
    // homography onto the orthophoto.
    const h = s.homography;
    if (h) {
        s.pairs.forEach((pair) => {
            orthoMarkers.push({ pt: applyH(h, pair.camera), color: "#36f" });
        });
    }
    cameraView.setMarkers(cameraMarkers);
    orthoView.setMarkers(orthoMarkers);
    const corners = s.roiCorners ? [...s.roiCorners] : roiDraft;
    orthoView.setPolygon(corners.length > 0 ? corners : null);
    cameraView.setPolygon(h && corners.length === 4
        ? corners.map((c) => applyH(invertH(h), c))
        : null);
    renderErrorTable();
    renderLaneGrid();
    el("undo").disabled = !s.canUndo;
    el("redo").disabled = !s.canRedo;
    el("save").disabled = s.saveProblems().length > 0;
    el("dirty").style.display = s.dirty ? "inline" : "none";
}
function renderErrorTable() {
    const s = controller.state;
    errorTable.innerHTML = "";
    const errs = s.perPointErrors;
    if (!errs || !s.meanErrors) {
        meanErrors.textContent = s.readyForHomography
            ? "waiting for service…"
            : `${s.pairs.length}/4 correspondences`;
        return;
    }
    meanErrors.textContent =
        `mean error: ${s.meanErrors.camera_px.toFixed(2)} px (camera), ` +
            `${s.meanErrors.ortho_px.toFixed(2)} px (ortho)`;
    const rows = errs.ortho.map((e, i) => ({ i, ortho: e, camera: errs.camera[i] }));
    rows.sort((a, b) => (sortErrorsDescending ? b.ortho - a.ortho : a.ortho - b.ortho));
    const worst = s.worstPairIndex();
    for (const row of rows) {
        const tr = document.createElement("tr");
        if (row.i === worst)
            tr.className = "worst";
        tr.innerHTML =
            `<td>${row.i + 1}</td>` +
                `<td>${row.camera.toFixed(2)}</td>` +
                `<td>${row.ortho.toFixed(2)}</td>`;
        errorTable.appendChild(tr);
    }
}
function renderLaneGrid() {
    if (laneGrid.childElementCount === 0) {
        for (let cls = 1; cls <= N_CLASSES; cls++) {
            const label = document.createElement("label");
            label.textContent = `class ${cls}`;
            const input = document.createElement("input");
            input.type = "number";
            input.min = "0";
            input.step = "1";
            input.dataset.cls = String(cls);
            input.addEventListener("change", () => {
                void controller.setLaneCount(cls, Number(input.value));
            });
            label.appendChild(input);
            laneGrid.appendChild(label);
        }
    }
    for (const input of laneGrid.querySelectorAll("input")) {
        const cls = Number(input.dataset.cls);
        const value = controller.state.laneCounts.get(cls);
        if (value !== undefined && document.activeElement !== input) {
            input.value = String(value);
        }
    }
}
cameraView.onClick = (pt) => {
    if (mode === "correspond")
        controller.clickCamera(pt);
};
orthoView.onClick = (pt) => {
    if (mode === "correspond") {
        void controller.clickOrtho(pt);
        return;
    }
    roiDraft.push(pt);
    if (roiDraft.length === 4) {
        void controller.setRoi(roiDraft);
        roiDraft = [];
    }
    render();
};
el("undo").addEventListener("click", () => void controller.undo());
el("redo").addEventListener("click", () => void controller.redo());
el("save").addEventListener("click", () => void controller.save());
el("mode").addEventListener("change", (e) => {
    mode = e.target.value;
    roiDraft = [];
    render();
});
el("ortho-err-header").addEventListener("click", () => {
    sortErrorsDescending = !sortErrorsDescending;
    renderErrorTable();
});
async function start() {
    await Promise.all([
        cameraView.load(api.imageUrl("camera")),
        orthoView.load(api.imageUrl("ortho")),
    ]);
    await controller.load();
}
void start();
//# sourceMappingURL=main.js.map