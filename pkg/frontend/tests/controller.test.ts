import { describe, expect, it } from "vitest";

import { CalibrationApi, type HomographyResponse, type Pt } from "../src/api.js";
import { SessionController, type ControllerEvents } from "../src/controller.js";

interface Call {
  path: string;
  init?: RequestInit;
}

/** Fake service: answers /correspondences like the real one (422 below 4
 * pairs but retains them) and records every request. */
function fakeService(overrides: Partial<Record<string, () => Response>> = {}) {
  const calls: Call[] = [];
  const fetchFn = async (path: string, init?: RequestInit): Promise<Response> => {
    calls.push({ path, init });
    const override = overrides[path];
    if (override) return override();
    if (path === "/correspondences" && init?.method === "POST") {
      const pairs = JSON.parse(String(init.body)).correspondences;
      if (pairs.length < 4) {
        return json(422, { detail: "insufficient correspondences" });
      }
      const body: HomographyResponse = {
        correspondences: pairs,
        homography: [1, 2, 3, 4, 5, 6, 7, 8, 9],
        per_point_errors: {
          camera: pairs.map((_: unknown, i: number) => 0.25 * i),
          ortho: pairs.map((_: unknown, i: number) => 0.5 * i),
        },
        mean_errors: { camera_px: 0.125, ortho_px: 0.25 },
      };
      return json(200, body);
    }
    if (path === "/roi") return json(200, { corners: null, lane_counts: {} });
    if (path === "/save") return json(200, { calibration: "c.json", roi: "r.json" });
    return json(404, { detail: "not found" });
  };
  return { calls, fetchFn };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function makeController(fetchFn: (p: string, i?: RequestInit) => Promise<Response>) {
  const banners: (string | null)[] = [];
  const events: ControllerEvents = {
    onChange: () => {},
    onBanner: (m) => banners.push(m),
  };
  const controller = new SessionController(new CalibrationApi("", fetchFn), events);
  return { controller, banners };
}

async function addPairs(controller: SessionController, n: number) {
  for (let i = 0; i < n; i++) {
    controller.clickCamera([i, i]);
    await controller.clickOrtho([2 * i, 2 * i]);
  }
}

describe("SessionController", () => {
  it("renders exactly the error numbers the service returned", async () => {
    const { fetchFn } = fakeService();
    const { controller } = makeController(fetchFn);
    await addPairs(controller, 4);
    expect(controller.state.homography).toEqual([1, 2, 3, 4, 5, 6, 7, 8, 9]);
    expect(controller.state.perPointErrors).toEqual({
      camera: [0, 0.25, 0.5, 0.75],
      ortho: [0, 0.5, 1.0, 1.5],
    });
    expect(controller.state.meanErrors).toEqual({ camera_px: 0.125, ortho_px: 0.25 });
  });

  it("has no homography below 4 pairs despite posting them", async () => {
    const { calls, fetchFn } = fakeService();
    const { controller } = makeController(fetchFn);
    await addPairs(controller, 3);
    expect(controller.state.homography).toBeNull();
    expect(calls.filter((c) => c.path === "/correspondences")).toHaveLength(3);
  });

  it("keeps local state and shows a banner when the service is down", async () => {
    const fetchFn = async () => {
      throw new Error("connection refused");
    };
    const { controller, banners } = makeController(fetchFn);
    controller.clickCamera([1, 1]);
    await controller.clickOrtho([2, 2]);
    expect(controller.state.pairs).toHaveLength(1);
    expect(banners.at(-1)).toMatch(/service unreachable/);
  });

  it("re-posts after undo so the numbers track the shorter list", async () => {
    const { calls, fetchFn } = fakeService();
    const { controller } = makeController(fetchFn);
    await addPairs(controller, 5);
    await controller.undo();
    const posted = calls.filter((c) => c.path === "/correspondences");
    const lastBody = JSON.parse(String(posted.at(-1)!.init!.body));
    expect(lastBody.correspondences).toHaveLength(4);
    expect(controller.state.perPointErrors!.ortho).toHaveLength(4);
  });

  it("blocks save with the list of problems and never hits the service", async () => {
    const { calls, fetchFn } = fakeService();
    const { controller, banners } = makeController(fetchFn);
    await controller.save();
    expect(banners.at(-1)).toMatch(/correspondences.*ROI.*lane counts/s);
    expect(calls.find((c) => c.path === "/save")).toBeUndefined();
  });

  it("saves a complete session and clears the dirty flag", async () => {
    const { calls, fetchFn } = fakeService();
    const { controller } = makeController(fetchFn);
    await addPairs(controller, 4);
    await controller.setRoi([[0, 0], [10, 0], [10, 10], [0, 10]]);
    for (let c = 1; c <= 12; c++) await controller.setLaneCount(c, 1);
    expect(controller.state.dirty).toBe(true);
    await controller.save();
    expect(controller.state.dirty).toBe(false);
    expect(calls.find((c) => c.path === "/save")).toBeDefined();
  });

  it("surfaces a service rejection of the ROI as a banner", async () => {
    const { fetchFn } = fakeService({
      "/roi": () => json(422, { detail: "ROI quadrilateral must be simple" }),
    });
    const { controller, banners } = makeController(fetchFn);
    await controller.setRoi([[0, 0], [10, 0], [10, 10], [0, 10]]);
    expect(banners.at(-1)).toMatch(/must be simple/);
  });
});
