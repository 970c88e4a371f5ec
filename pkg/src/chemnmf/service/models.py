"""Request/response schemas for the compute service.

Matrices travel as row-major nested lists of floats; Python's JSON float
encoding round-trips exactly, so a factorization fetched over the wire is
bit-identical to one computed in process.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Matrix = list[list[float]]


class HealthResponse(BaseModel):
    status: str
    version: str


class FactorizeRequest(BaseModel):
    matrix: Matrix
    ranks: list[int] = Field(min_length=1)
    alpha: float = 0.5
    bf: float = 0.0
    seed: int = 0
    max_iter: int = 500
    tol: float = 1e-6
    eps_floor: float = 1e-12


class LayerPayload(BaseModel):
    basis: Matrix
    activation: Matrix
    initial_divergence: float
    divergences: list[float]
    iterations: int
    converged: bool


class FactorizeResponse(BaseModel):
    basis_total: Matrix
    activation: Matrix
    layers: list[LayerPayload]
    final_divergence: float


class TracePayload(BaseModel):
    initial_divergence: float
    divergences: list[float] = Field(min_length=1)


class BarriersRequest(BaseModel):
    traces: list[TracePayload] = Field(min_length=1)
    d0: float | None = None
    beta: float = 1.0
    z: float | None = None


class LayerBarrierPayload(BaseModel):
    max_divergence: float
    final_divergence: float
    barrier: float
    escape_probability: float


class BarriersResponse(BaseModel):
    beta: float
    z: float
    layers: list[LayerBarrierPayload]
    cumulative_barrier: float
    monotone_non_increasing: list[bool] | None
    monotone_suffix_start: int | None


class KmeansRequest(BaseModel):
    points: Matrix
    k: int
    seed: int = 0
    restarts: int = 10
    max_iter: int = 300


class KmeansResponse(BaseModel):
    labels: list[int]
    k: int


class EvaluateRequest(BaseModel):
    predicted: list[int] = Field(min_length=1)
    truth: list[int] = Field(min_length=1)


class EvaluateResponse(BaseModel):
    acc: float
    nmi: float
    mapping: dict[int, int]
    confusion: list[list[int]]


class StftRequest(BaseModel):
    samples: list[float] = Field(min_length=1)
    source_rate: int
    sample_rate: int = 4000
    n_fft: int = 512
    hop: int = 128


class StftResponse(BaseModel):
    magnitudes: Matrix
    rows: int
    frames: int


class SeedGridModel(BaseModel):
    count: int
    base: int = 0


class KmeansParamsModel(BaseModel):
    restarts: int = 10
    max_iter: int = 300


class BarrierParamsModel(BaseModel):
    beta: float = 1.0
    z: float | None = None


class SolverParamsModel(BaseModel):
    max_iter: int = 200
    tol: float = 1e-5
    eps_floor: float = 1e-12


class ExperimentConfigModel(BaseModel):
    """Mirror of the experiment config file schema."""

    manifest: str
    methods: list[Literal["regular", "alpha", "chem"]]
    ranks: list[int]
    alphas: list[float]
    bfs: list[float]
    noise_levels: list[float | Literal["clean"]]
    seeds: SeedGridModel
    output_dir: str
    kmeans: KmeansParamsModel = KmeansParamsModel()
    barriers: BarrierParamsModel = BarrierParamsModel()
    solver: SolverParamsModel = SolverParamsModel()


class ExperimentRunRequest(BaseModel):
    config: ExperimentConfigModel
    workers: int = 1


class ResultRowModel(BaseModel):
    method: str
    bf: float | None
    alpha: float | None
    noise_db: float | None
    seed: int
    acc: float
    nmi: float
    final_divergence: float
    iterations: int
    ms: int


class ExperimentRunResponse(BaseModel):
    rows: list[ResultRowModel]
    results_csv: str


class ErrorBody(BaseModel):
    error: Literal["config", "data", "numeric"]
    message: str
