import json

import pytest
from fastapi.testclient import TestClient

from chemnmf import (
    BarrierParams,
    LabelVector,
    LayerSpec,
    NonNegMatrix,
    SolverConfig,
    evaluate_clustering,
    layer_barriers,
    solve_chem_nmf,
)
from chemnmf.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


class TestFactorize:
    def test_matches_library_bitwise(self, client, rng):
        y = rng.uniform(0.05, 1.0, (6, 8))
        request = {
            "matrix": y.tolist(),
            "ranks": [3, 2],
            "alpha": 0.5,
            "bf": 0.5,
            "seed": 4,
            "max_iter": 20,
            "tol": 1e-6,
        }
        body = client.post("/factorize", json=request).json()
        spec = LayerSpec((3, 2), 0.5, SolverConfig(alpha=0.5, max_iter=20, seed=4))
        result = solve_chem_nmf(NonNegMatrix(y), spec)
        assert body["basis_total"] == result.basis_total.to_lists()
        assert body["activation"] == result.activation.to_lists()
        assert body["final_divergence"] == result.final_divergence
        assert [l["divergences"] for l in body["layers"]] == [
            list(l.trace.divergences) for l in result.layers
        ]

    def test_config_error_mapped(self, client, rng):
        request = {
            "matrix": rng.uniform(0.1, 1.0, (4, 4)).tolist(),
            "ranks": [2],
            "alpha": 1.0,
        }
        response = client.post("/factorize", json=request)
        assert response.status_code == 422
        assert response.json()["error"] == "config"

    def test_data_error_mapped(self, client):
        request = {"matrix": [[-1.0]], "ranks": [1]}
        response = client.post("/factorize", json=request)
        assert response.status_code == 400
        assert response.json()["error"] == "data"


class TestBarriers:
    def test_matches_library(self, client, rng):
        y = NonNegMatrix(rng.uniform(0.05, 1.0, (8, 9)))
        spec = LayerSpec((3, 2), 0.5, SolverConfig(alpha=0.5, max_iter=15, seed=1))
        result = solve_chem_nmf(y, spec)
        request = {
            "traces": [
                {
                    "initial_divergence": l.trace.initial_divergence,
                    "divergences": list(l.trace.divergences),
                }
                for l in result.layers
            ]
        }
        body = client.post("/barriers", json=request).json()
        report = layer_barriers(result, BarrierParams())
        assert [l["barrier"] for l in body["layers"]] == list(report.barriers)
        assert body["cumulative_barrier"] == report.cumulative_barrier
        assert body["monotone_non_increasing"] is not None


class TestKmeansEndpoint:
    def test_separated_groups(self, client):
        body = client.post(
            "/kmeans",
            json={"points": [[0.0, 0.1, 5.0, 5.1]], "k": 2, "seed": 0},
        ).json()
        labels = body["labels"]
        assert labels[0] == labels[1] and labels[2] == labels[3]
        assert labels[0] != labels[2]


class TestEvaluateEndpoint:
    def test_matches_library(self, client, rng):
        pred = rng.integers(0, 3, 15).tolist()
        truth = rng.integers(0, 3, 15).tolist()
        body = client.post(
            "/evaluate", json={"predicted": pred, "truth": truth}
        ).json()
        report = evaluate_clustering(
            LabelVector.from_sequence(pred, 3), LabelVector.from_sequence(truth, 3)
        )
        assert body["acc"] == report.acc
        assert body["nmi"] == pytest.approx(report.nmi, abs=1e-15)

    def test_length_mismatch_is_config_error(self, client):
        response = client.post(
            "/evaluate", json={"predicted": [0, 1], "truth": [0, 1, 1]}
        )
        assert response.status_code == 422


class TestStftEndpoint:
    def test_row_count_and_resample(self, client, rng):
        samples = rng.uniform(-0.5, 0.5, 8000).tolist()
        body = client.post(
            "/stft",
            json={"samples": samples, "source_rate": 8000, "sample_rate": 4000},
        ).json()
        assert body["rows"] == 257
        assert body["frames"] == 4000 // 128 + 1


class TestExperimentsEndpoint:
    def test_tiny_run(self, client, tmp_path):
        from test_experiment import make_dataset

        manifest = make_dataset(tmp_path)
        config = {
            "manifest": str(manifest),
            "methods": ["alpha"],
            "ranks": [2],
            "alphas": [0.5],
            "bfs": [0.0],
            "noise_levels": ["clean"],
            "seeds": {"count": 1, "base": 0},
            "output_dir": str(tmp_path / "out"),
            "solver": {"max_iter": 20, "tol": 1e-5},
            "kmeans": {"restarts": 3, "max_iter": 40},
        }
        body = client.post(
            "/experiments/run", json={"config": config, "workers": 1}
        ).json()
        assert len(body["rows"]) == 1
        results = json.loads(json.dumps(body["rows"][0]))
        assert results["method"] == "alpha"
        assert (tmp_path / "out" / "results.csv").exists()

    def test_missing_manifest_is_data_error(self, client, tmp_path):
        config = {
            "manifest": str(tmp_path / "absent.json"),
            "methods": ["alpha"],
            "ranks": [2],
            "alphas": [0.5],
            "bfs": [0.0],
            "noise_levels": ["clean"],
            "seeds": {"count": 1},
            "output_dir": str(tmp_path / "out"),
        }
        response = client.post("/experiments/run", json={"config": config})
        assert response.status_code == 400
        assert response.json()["error"] == "data"
