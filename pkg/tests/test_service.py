"""Service endpoints: contracts, determinism, error mapping."""

import pytest
from fastapi.testclient import TestClient

from metarelay import __version__
from metarelay.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestHealth:
    def test_health(self, client):
        response = client.get("/v1/health")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["tool_version"] == __version__


class TestPattern:
    def test_small_sweep_columns_align(self, client):
        payload = {"overrides": ["lut.voltage_step=1.0"]}
        response = client.post("/v1/pattern", json=payload)
        assert response.status_code == 200
        body = response.json()
        n = len(body["u_m_grid"]) * len(body["u_e_grid"])
        for column in ("freq_hz", "u_m", "u_e", "t_mag", "t_phase_deg", "g_mag", "g_phase_deg"):
            assert len(body[column]) == n
        assert all(0.0 <= m <= 1.0 + 1e-9 for m in body["t_mag"])
        assert body["meta"]["tool_version"] == __version__
        assert len(body["meta"]["config_hash"]) == 16


class TestLut:
    def test_build_and_determinism(self, client):
        payload = {"mode": "lens"}
        first = client.post("/v1/lut", json=payload)
        second = client.post("/v1/lut", json=payload)
        assert first.status_code == 200
        assert first.json() == second.json()
        doc = first.json()["document"]
        assert len(doc["entries"]) == 24
        assert doc["units"] == {"voltage": "V", "frequency": "Hz", "phase": "deg"}
        assert first.json()["flagged_bins"] == 0

    def test_config_hash_tracks_overrides(self, client):
        base = client.post("/v1/lut", json={"mode": "lens"}).json()
        tweaked = client.post(
            "/v1/lut", json={"mode": "lens", "overrides": ["cell.loss_factor=0.9"]}
        ).json()
        assert base["meta"]["config_hash"] != tweaked["meta"]["config_hash"]

    def test_invalid_config_is_400(self, client):
        response = client.post("/v1/lut", json={"config": {"surface": {"n_cols": "many"}}})
        assert response.status_code == 400

    def test_uncoverable_config_is_422(self, client):
        # a dead cell cannot fill any phase bin
        response = client.post(
            "/v1/lut", json={"mode": "mirror", "overrides": ["cell.loss_factor=0.0"]}
        )
        assert response.status_code == 422


class TestBeam:
    def test_single_beam_peak(self, client):
        response = client.post("/v1/beam", json={"mode": "lens", "arms": [[40.0, 1.0]]})
        assert response.status_code == 200
        body = response.json()
        assert len(body["angles_deg"]) == len(body["power_db"])
        top_angle = body["peaks"][0][0]
        assert abs(top_angle - 40.0) <= 3.0
        assert len(body["u_m"]) == 76

    def test_split_beam_two_peaks(self, client):
        response = client.post(
            "/v1/beam", json={"mode": "mirror", "arms": [[-30.0, 1.0], [30.0, 1.0]]}
        )
        body = response.json()
        angles = sorted(a for a, _ in body["peaks"][:2])
        assert abs(angles[0] + 30.0) <= 3.0
        assert abs(angles[1] - 30.0) <= 3.0

    def test_reuses_supplied_lut_document(self, client):
        doc = client.post("/v1/lut", json={"mode": "lens"}).json()["document"]
        response = client.post(
            "/v1/beam", json={"mode": "lens", "arms": [[10.0, 1.0]], "lut_document": doc}
        )
        assert response.status_code == 200

    def test_mode_mismatch_rejected(self, client):
        doc = client.post("/v1/lut", json={"mode": "lens"}).json()["document"]
        response = client.post(
            "/v1/beam", json={"mode": "mirror", "arms": [[10.0, 1.0]], "lut_document": doc}
        )
        assert response.status_code == 422


class TestBudget:
    def test_broadside_report(self, client):
        response = client.post("/v1/budget", json={
            "geometry": {"tx": [0.0, 3.0, 0.0], "rx": [0.0, -3.0, 0.0]},
        })
        assert response.status_code == 200
        body = response.json()
        assert body["d_i_m"] == pytest.approx(3.0)
        assert body["theta_i_deg"] == pytest.approx(0.0, abs=1e-9)
        assert body["exact_matched_dbm"] == pytest.approx(body["farfield_matched_dbm"], abs=0.2)
        assert body["synthesized_gain_dbi"] <= body["aperture_capacity_dbi"] + 1e-6
        assert body["path_loss_db"] == pytest.approx(74.0, abs=0.2)

    def test_coincident_geometry_rejected(self, client):
        response = client.post("/v1/budget", json={
            "geometry": {"tx": [0.0, 0.0, 0.0], "rx": [0.0, -3.0, 0.0]},
        })
        assert response.status_code == 422


class TestScenario:
    def test_coverage_defaults(self, client):
        response = client.post("/v1/scenario", json={"operation": "coverage"})
        assert response.status_code == 200
        body = response.json()
        assert body["operation"] == "coverage"
        assert len(body["coverage"]) == 23
        tiers = {record["tier"] for record in body["coverage"]}
        assert tiers <= {"128-QAM", "64-QAM", "outage"}

    def test_blockage_small(self, client):
        response = client.post("/v1/scenario", json={
            "operation": "blockage", "betas": [0.0, 0.5, 1.0], "trials": 200,
        })
        body = response.json()
        configs = body["blockage"]["configs"]
        assert set(configs) == {"0", "1", "2"}
        assert configs["2"]["failure_rate"][2] == 1.0

    def test_bad_tx_index(self, client):
        response = client.post("/v1/scenario", json={"tx_index": 99})
        assert response.status_code == 422


class TestProtocol:
    def test_cold_start_counts(self, client):
        response = client.post("/v1/protocol", json={
            "variant": "cold_start", "n_enodeb": 4, "n_surface": 4, "n_ue": 4,
            "ground_truth": [-10.0, 15.0, 20.0], "refine": False,
        })
        assert response.status_code == 200
        body = response.json()
        assert body["coarse"]["probes_used"] == 64
        assert body["trace"][0]["event"] == "set_mode"

    def test_seeded_random_truth_reproducible(self, client):
        payload = {"variant": "steady_state", "n_surface": 25, "n_ue": 25,
                   "span_deg": 120.0, "seed": 11}
        first = client.post("/v1/protocol", json=payload).json()
        second = client.post("/v1/protocol", json=payload).json()
        assert first == second

    def test_multiarm_succeeds(self, client):
        response = client.post("/v1/protocol", json={
            "variant": "multiarm", "n_surface": 64,
            "ground_truth": [0.0, -22.0, 0.0],
        })
        body = response.json()
        final = body["refined"] or body["coarse"]
        assert final["success"]
        assert abs(final["surface_angle_deg"] + 22.0) <= 3.0


class TestSelftest:
    def test_subset_runs(self, client):
        response = client.post("/v1/selftest", json={
            "only": ["energy_conservation", "golden_values"],
        })
        assert response.status_code == 200
        body = response.json()
        names = [r["name"] for r in body["results"]]
        assert names == ["energy_conservation", "golden_values"]
        assert body["all_passed"]

    def test_unknown_check_rejected(self, client):
        response = client.post("/v1/selftest", json={"only": ["nonsense"]})
        assert response.status_code == 400
