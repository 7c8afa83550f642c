import warnings

import pytest

warnings.filterwarnings("ignore", message="Using `httpx` with `starlette")

from fastapi.testclient import TestClient  # noqa: E402

from glidepath import api_core  # noqa: E402
from glidepath.cqp import MeanVarFrontier  # noqa: E402
from glidepath.hjb import save_surface, surface_cache_key  # noqa: E402
from glidepath.presets import baseline_market, baseline_schedule, grid_for  # noqa: E402
from glidepath.service import create_app  # noqa: E402


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    cache = tmp_path_factory.mktemp("surface-cache")
    app = create_app(cache_dir=cache)
    with TestClient(app, raise_server_exceptions=False) as c:
        c.cache_dir = cache
        yield c


class TestHealth:
    def test_ok(self, client):
        response = client.get("/api/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}


class TestAllocate:
    def test_pi1_gamma8(self, client):
        response = client.post("/api/allocate",
                               json={"gamma": 8, "strategy": "pi1", "alpha": 1.0})
        assert response.status_code == 200
        body = response.json()
        assert body["weights"][0] == pytest.approx(0.546, abs=0.001)
        assert body["weights"][1] == pytest.approx(0.186, abs=0.001)

    def test_pi3_at_time_wealth(self, client):
        response = client.post("/api/allocate",
                               json={"gamma": 8, "strategy": "pi3",
                                     "time": 0.0, "wealth": 0.2})
        body = response.json()
        assert body["alpha"] == pytest.approx(0.1953, abs=1e-4)
        assert body["weights"][0] == pytest.approx(0.180, abs=0.001)
        assert body["effective_risk_aversion"] == pytest.approx(1.562, abs=0.002)

    def test_validation_is_400(self, client):
        assert client.post("/api/allocate", json={"gamma": -1}).status_code == 400
        response = client.post("/api/allocate", json={"gamma": 2, "strategy": "pi3"})
        assert response.status_code == 400  # missing alpha and (time, wealth)

    def test_unknown_preset_404(self, client):
        response = client.post("/api/allocate",
                               json={"gamma": 2, "strategy": "pi1", "preset": "x"})
        assert response.status_code == 404

    def test_optimal_needs_cache_409(self, client):
        response = client.post("/api/allocate",
                               json={"gamma": 3.0, "strategy": "optimal",
                                     "time": 0.0, "wealth": 2.0})
        assert response.status_code == 409
        assert "solve-hjb" in response.json()["detail"]

    def test_optimal_served_from_cache(self, client, rho_desk):
        params, schedule = baseline_market(), baseline_schedule()
        key = surface_cache_key(params, schedule, 8.0, grid_for("desk", 40.0))
        save_surface(rho_desk(8.0), client.cache_dir / f"rho-{key[:16]}.npz")
        response = client.post("/api/allocate",
                               json={"gamma": 8.0, "strategy": "optimal",
                                     "time": 0.0, "wealth": 2.0})
        assert response.status_code == 200
        assert response.json()["weights"][0] == pytest.approx(0.740, abs=0.02)


class TestGlidepath:
    def test_thresholds_and_points(self, client):
        response = client.post("/api/glidepath", json={"gamma": 8})
        assert response.status_code == 200
        body = response.json()
        assert body["thresholds"]["budget_binding_alpha"] == pytest.approx(0.731, abs=0.002)
        assert body["thresholds"]["full_stock_alpha"] == pytest.approx(0.157, abs=0.002)
        assert len(body["points"]) == 101
        full_stock = [p for p in body["points"]
                      if p["alpha"] is not None
                      and p["alpha"] <= body["thresholds"]["full_stock_alpha"] - 0.01]
        assert all(p["weights"][0] == 0.0 for p in full_stock)

    def test_low_gamma_single_region(self, client):
        response = client.post("/api/glidepath", json={"gamma": 1.2})
        body = response.json()
        assert body["thresholds"]["full_stock_alpha"] == 1.0
        assert all(p["weights"][0] == 0.0 for p in body["points"])

    def test_matches_cli_core(self, client):
        body = client.post("/api/glidepath", json={"gamma": 8}).json()
        expected = api_core.glidepath_response(baseline_market(), baseline_schedule(),
                                               gamma=8.0)
        assert body == expected

    def test_bad_grid_rejected(self, client):
        response = client.post("/api/glidepath",
                               json={"gamma": 8, "alpha_grid": [0.5, 0.2]})
        assert response.status_code == 400


class TestCompare:
    def test_mc_rows(self, client):
        response = client.post("/api/compare",
                               json={"gammas": [8.0], "strategies": ["pi1", "pi3"],
                                     "method": "mc", "mc_paths": 4000, "mc_dt": 0.2})
        assert response.status_code == 200
        rows = response.json()["rows"]
        assert [r["strategy"] for r in rows] == ["pi1", "pi3"]
        assert all(r["stderr"] > 0 for r in rows)

    def test_optimal_without_cache_409(self, client):
        response = client.post("/api/compare",
                               json={"gammas": [4.0], "strategies": ["optimal"],
                                     "method": "mc"})
        assert response.status_code == 409

    def test_identical_requests_identical_bodies(self, client):
        payload = {"gammas": [5.0], "strategies": ["pi3"], "method": "mc",
                   "mc_paths": 3000, "mc_dt": 0.2, "seed": 17}
        a = client.post("/api/compare", json=payload).json()
        b = client.post("/api/compare", json=payload).json()
        a["rows"][0].pop("runtime_s", None), b["rows"][0].pop("runtime_s", None)
        assert a == b

    def test_pde_rows_match_tables(self, client):
        response = client.post("/api/compare",
                               json={"gammas": [8.0], "strategies": ["pi1"],
                                     "method": "pde", "fidelity": "desk"})
        assert response.status_code == 200
        row = response.json()["rows"][0]
        assert row["stderr"] is None
        assert abs(row["ce"] - 1.6872) < 0.01
        assert abs(row["irr"] - 0.0242) < 5e-4
