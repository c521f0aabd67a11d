"""HTTP/JSON inference service endpoints."""

import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from layoutgen.bundle import ModelBundle
from layoutgen.graphs import build_graph
from layoutgen.model import ModelConfig, ModelParams
from layoutgen.service import create_app, normalize_positions


@pytest.fixture(scope="module")
def bundle():
    g = build_graph(6, [(0, 2), (1, 2), (0, 3), (1, 3), (1, 4), (1, 5), (4, 5), (0, 1)],
                    labels=list("abcdef"))
    params = ModelParams.init(ModelConfig(seed=3), g.n)
    params.quantize()
    return ModelBundle.build(g, params, grid_resolution=4)


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle))


class TestNormalizePositions:
    def test_fits_unit_square(self, rng):
        pos = rng.normal(size=(10, 2)) * 7 + 3
        out = normalize_positions(pos)
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert np.isclose(out.max() - out.min(), 1.0)

    def test_preserves_aspect(self):
        pos = np.array([[0.0, 0.0], [4.0, 2.0]])
        out = normalize_positions(pos)
        # wide span maps to [0,1] in x; y span scales by the same factor, centered
        assert np.allclose(out[:, 0], [0.0, 1.0])
        assert np.allclose(out[:, 1], [0.25, 0.75])

    def test_degenerate_centered(self):
        out = normalize_positions(np.zeros((3, 2)))
        assert np.all(out == 0.5)


class TestGraphEndpoint:
    def test_structure(self, client, bundle):
        body = client.get("/graph").json()
        assert body["n"] == 6
        assert [tuple(e) for e in body["edges"]] == list(bundle.graph.edges)
        assert body["labels"] == list("abcdef")
        assert len(body["sen_class_of"]) == 6
        assert any(len(c) >= 2 for c in body["sen_classes"])


class TestDecodeEndpoint:
    def test_decode_ok(self, client):
        body = client.post("/decode", json={"z": [0.2, -0.3]}).json()
        assert len(body["positions"]) == 6
        assert all(0.0 <= x <= 1.0 for row in body["positions"] for x in row)
        assert len(body["raw_positions"]) == 6

    def test_bitwise_deterministic(self, client):
        a = client.post("/decode", json={"z": [0.1, 0.9]}).json()
        b = client.post("/decode", json={"z": [0.1, 0.9]}).json()
        assert a["raw_positions"] == b["raw_positions"]

    def test_out_of_range_suggests_clamp(self, client):
        resp = client.post("/decode", json={"z": [1.5, -2.0]})
        assert resp.status_code == 400
        assert resp.json()["detail"]["clamped"] == [1.0, -1.0]

    def test_wrong_arity(self, client):
        assert client.post("/decode", json={"z": [0.1]}).status_code == 400


class TestEncodeEndpoint:
    def test_round_trip_shape(self, client, rng):
        pos = rng.normal(size=(6, 2)).tolist()
        body = client.post("/encode", json={"positions": pos}).json()
        assert len(body["z"]) == 2
        assert all(abs(v) <= 1.0 for v in body["z"])

    def test_wrong_node_count(self, client, rng):
        resp = client.post("/encode", json={"positions": rng.normal(size=(5, 2)).tolist()})
        assert resp.status_code == 400

    def test_degenerate_rejected(self, client):
        resp = client.post("/encode", json={"positions": [[1.0, 1.0]] * 6})
        assert resp.status_code == 400
        assert "degenerate" in resp.json()["detail"]


class TestGridEndpoint:
    def test_default_uses_precomputed(self, client, bundle):
        body = client.get("/grid").json()
        assert body["resolution"] == 4
        assert len(body["cells"]) == 16
        raw = np.array(body["cells"][0]["raw_positions"])
        assert np.allclose(raw, bundle.grid[0])

    def test_res8_has_64_cells(self, client):
        body = client.get("/grid", params={"res": 8}).json()
        assert len(body["cells"]) == 64
        for cell in body["cells"]:
            assert len(cell["z"]) == 2
            assert len(cell["positions"]) == 6

    def test_res_validation(self, client):
        assert client.get("/grid", params={"res": 1}).status_code == 400


class TestMetricsEndpoint:
    def test_metric_values(self, client):
        body = client.get("/metrics", params={"z": "0.0,0.0"}).json()
        assert set(body) >= {"z", "crossings", "crosslessness", "shape"}
        assert 0.0 <= body["crosslessness"] <= 1.0

    def test_bad_query(self, client):
        assert client.get("/metrics", params={"z": "zero"}).status_code == 400
        assert client.get("/metrics", params={"z": "2.0,0.0"}).status_code == 400


class TestHeatmapEndpoint:
    def test_small_heatmap_completes(self, client):
        resp = client.get("/heatmap", params={"metric": "crosslessness", "res": 4})
        body = resp.json()
        deadline = time.time() + 30
        while body.get("status") == "pending" and time.time() < deadline:
            assert 0.0 <= body["progress"] <= 1.0
            time.sleep(0.2)
            body = client.get("/heatmap", params={"metric": "crosslessness", "res": 4}).json()
        assert body["status"] == "done"
        grid = np.array(body["grid"])
        assert grid.shape == (4, 4)

    def test_cached_after_completion(self, client, bundle):
        client.get("/heatmap", params={"metric": "crosslessness", "res": 4})
        assert ("crosslessness", 4) in bundle.heatmaps

    def test_unknown_metric(self, client):
        assert client.get("/heatmap", params={"metric": "beauty"}).status_code == 400

    def test_cancel_idle(self, client):
        body = client.request("DELETE", "/heatmap",
                              params={"metric": "shape", "res": 3}).json()
        assert body["status"] == "idle"

    def test_cancel_running(self, bundle):
        # fresh app so no cache interferes; large res to keep the job busy
        local = TestClient(create_app(ModelBundle.build(bundle.graph, bundle.params,
                                                        grid_resolution=2)))
        first = local.get("/heatmap", params={"metric": "shape", "res": 64}).json()
        if first["status"] == "pending":
            body = local.request("DELETE", "/heatmap",
                                 params={"metric": "shape", "res": 64}).json()
            assert body["status"] == "cancelling"
