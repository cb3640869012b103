import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tmc.geometry import apply_homography, read_calibration
from tmc.roi import read_roi
from tmc.service import create_app


@pytest.fixture
def paths(tmp_path):
    cam_img = tmp_path / "camera.png"
    ortho_img = tmp_path / "ortho.png"
    cam_img.write_bytes(b"\x89PNG\r\n\x1a\nstub")
    ortho_img.write_bytes(b"\x89PNG\r\n\x1a\nstub2")
    return {
        "images": {"camera": str(cam_img), "ortho": str(ortho_img)},
        "calibration": str(tmp_path / "calibration.json"),
        "roi": str(tmp_path / "roi.json"),
        "scale_m_per_px": 0.05,
    }


@pytest.fixture
def client(paths):
    return TestClient(create_app(paths))


def pairs_payload(pts, fn=lambda p: p):
    return {"correspondences": [{"camera": list(p), "ortho": list(fn(p))}
                                for p in pts]}


SQUARE = [(0.0, 0.0), (100.0, 0.0), (100.0, 80.0), (0.0, 80.0), (50.0, 40.0)]


class TestImages:
    def test_serves_configured_files(self, client, paths):
        r = client.get("/images/camera")
        assert r.status_code == 200
        assert r.content == open(paths["images"]["camera"], "rb").read()
        assert client.get("/images/ortho").status_code == 200

    def test_unknown_image_404(self, client):
        assert client.get("/images/what").status_code == 404

    def test_unconfigured_image_404(self, tmp_path):
        app = create_app({"images": {}})
        assert TestClient(app).get("/images/camera").status_code == 404


class TestCorrespondences:
    def test_initially_empty(self, client):
        body = client.get("/correspondences").json()
        assert body["correspondences"] == []
        assert body["homography"] is None
        assert body["per_point_errors"] is None

    def test_identity_pairs_give_identity_homography(self, client):
        r = client.post("/correspondences", json=pairs_payload(SQUARE))
        assert r.status_code == 200
        body = r.json()
        h = np.array(body["homography"]).reshape(3, 3)
        np.testing.assert_allclose(h, np.eye(3) / np.sqrt(3), atol=1e-9)
        assert body["mean_errors"]["camera_px"] == pytest.approx(0.0, abs=1e-9)
        assert body["mean_errors"]["ortho_px"] == pytest.approx(0.0, abs=1e-9)
        assert len(body["per_point_errors"]["ortho"]) == len(SQUARE)

    def test_per_point_errors_reflect_outlier(self, client):
        pts = SQUARE + [(20.0, 60.0)]
        payload = pairs_payload(pts)
        payload["correspondences"][-1]["ortho"] = [40.0, 60.0]  # 20 px off
        body = client.post("/correspondences", json=payload).json()
        errs = body["per_point_errors"]["ortho"]
        assert np.argmax(errs) == len(pts) - 1
        assert max(errs) > 5.0

    def test_fewer_than_four_rejected(self, client):
        r = client.post("/correspondences", json=pairs_payload(SQUARE[:3]))
        assert r.status_code == 422
        assert "insufficient" in r.json()["detail"]
        # but the pairs are kept so the client can keep adding
        assert len(client.get("/correspondences").json()["correspondences"]) == 3

    def test_malformed_rejected(self, client):
        r = client.post("/correspondences",
                        json={"correspondences": [{"camera": [1]}]})
        assert r.status_code == 422
        assert client.post("/correspondences", json={}).status_code == 422

    def test_collinear_rejected(self, client):
        pts = [(float(i), 0.0) for i in range(5)]
        r = client.post("/correspondences", json=pairs_payload(pts))
        assert r.status_code == 422
        assert "degenerate" in r.json()["detail"]


class TestRoi:
    CORNERS = [[10.0, 10.0], [200.0, 12.0], [198.0, 150.0], [8.0, 148.0]]

    def test_roundtrip(self, client):
        r = client.post("/roi", json={"corners": self.CORNERS,
                                      "lane_counts": {"1": 2}})
        assert r.status_code == 200
        body = client.get("/roi").json()
        assert body["corners"] == self.CORNERS
        assert body["lane_counts"] == {"1": 2}

    def test_bowtie_rejected(self, client):
        bow = [[0, 0], [10, 10], [10, 0], [0, 10]]
        assert client.post("/roi", json={"corners": bow}).status_code == 422

    def test_wrong_corner_count_rejected(self, client):
        assert client.post("/roi",
                           json={"corners": self.CORNERS[:3]}).status_code == 422

    def test_bad_lane_counts_rejected(self, client):
        assert client.post("/roi",
                           json={"lane_counts": {"1": -2}}).status_code == 422
        assert client.post("/roi",
                           json={"lane_counts": {"1": "x"}}).status_code == 422

    def test_lane_counts_merge(self, client):
        client.post("/roi", json={"corners": self.CORNERS,
                                  "lane_counts": {"1": 1}})
        client.post("/roi", json={"lane_counts": {"2": 3}})
        body = client.get("/roi").json()
        assert body["lane_counts"] == {"1": 1, "2": 3}
        assert body["corners"] == self.CORNERS


class TestSave:
    def full_session(self, client):
        client.post("/correspondences", json=pairs_payload(
            SQUARE, fn=lambda p: (2 * p[0], 2 * p[1])))
        client.post("/roi", json={
            "corners": TestRoi.CORNERS,
            "lane_counts": {str(i): 1 for i in range(1, 13)},
        })

    def test_incomplete_rejected_with_reasons(self, client):
        r = client.post("/save")
        assert r.status_code == 422
        detail = r.json()["detail"]
        assert "insufficient correspondences" in detail
        assert "ROI corners not set" in detail
        assert "missing lane counts" in detail

    def test_save_writes_consumable_files(self, client, paths):
        self.full_session(client)
        r = client.post("/save")
        assert r.status_code == 200, r.text
        intr, hom, pairs = read_calibration(paths["calibration"])
        assert hom.scale_m_per_px == 0.05
        assert len(pairs) == len(SQUARE)
        np.testing.assert_allclose(apply_homography(hom, (50.0, 40.0)),
                                   (100.0, 80.0), atol=1e-9)
        roi = read_roi(paths["roi"])
        assert roi.frame == "ortho-px"
        np.testing.assert_allclose(roi.corners, TestRoi.CORNERS)
        assert roi.lane_counts == {i: 1 for i in range(1, 13)}

    def test_saved_roi_json_stable(self, client, paths):
        self.full_session(client)
        client.post("/save")
        first = open(paths["roi"]).read()
        client.post("/save")
        assert open(paths["roi"]).read() == first
        assert json.loads(first)["edge_labels"] == ["N", "E", "S", "W"]
