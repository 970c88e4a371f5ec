"""FastAPI service exposing the factorization and evaluation surface.

The service is pure compute except for /experiments/run, which reads the
dataset manifest and writes result files on the host it runs on (the CLI
embeds the app in-process by default, so those paths are local).
"""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..clustering import LabelVector, evaluate_clustering, kmeans
from ..data import StftConfig, lowpass_moving_average, resample_linear, stft_magnitude
from ..diagnostics import BarrierParams, layer_barriers
from ..errors import ConfigurationError, DataError, NumericError
from ..experiment import barrier_payload, config_from_dict, run_experiment
from ..matrix import NonNegMatrix
from ..multilayer import LayerResult, LayerSpec, MultiLayerResult, solve_chem_nmf
from ..nmf import EpsilonPolicy, FactorPair, SolveTrace, SolverConfig
from . import models


def _error_response(kind: str, status: int, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": kind, "message": str(exc)})


def create_app() -> FastAPI:
    app = FastAPI(title="chemnmf", version=__version__)

    @app.exception_handler(ConfigurationError)
    async def _config_error(request: Request, exc: ConfigurationError):
        return _error_response("config", 422, exc)

    @app.exception_handler(DataError)
    async def _data_error(request: Request, exc: DataError):
        return _error_response("data", 400, exc)

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request: Request, exc: FileNotFoundError):
        return _error_response("data", 400, exc)

    @app.exception_handler(NumericError)
    async def _numeric_error(request: Request, exc: NumericError):
        return _error_response("numeric", 500, exc)

    @app.get("/health", response_model=models.HealthResponse)
    def health():
        return models.HealthResponse(status="ok", version=__version__)

    @app.post("/factorize", response_model=models.FactorizeResponse)
    def factorize(req: models.FactorizeRequest):
        spec = LayerSpec(
            ranks=tuple(req.ranks),
            bounding_factor=req.bf,
            solver=SolverConfig(
                alpha=req.alpha,
                max_iter=req.max_iter,
                tol=req.tol,
                eps=EpsilonPolicy(req.eps_floor),
                seed=req.seed,
            ),
        )
        result = solve_chem_nmf(NonNegMatrix(req.matrix), spec)
        return models.FactorizeResponse(
            basis_total=result.basis_total.to_lists(),
            activation=result.activation.to_lists(),
            layers=[
                models.LayerPayload(
                    basis=layer.factors.basis.to_lists(),
                    activation=layer.factors.activation.to_lists(),
                    initial_divergence=layer.trace.initial_divergence,
                    divergences=list(layer.trace.divergences),
                    iterations=layer.trace.iterations_run,
                    converged=layer.trace.converged,
                )
                for layer in result.layers
            ],
            final_divergence=result.final_divergence,
        )

    @app.post("/barriers", response_model=models.BarriersResponse)
    def barriers(req: models.BarriersRequest):
        # Rebuild a result skeleton: barrier math only needs the traces.
        placeholder = NonNegMatrix([[1.0]])
        layers = tuple(
            LayerResult(
                FactorPair(placeholder, placeholder),
                SolveTrace(
                    initial_divergence=t.initial_divergence,
                    divergences=tuple(t.divergences),
                    iterations_run=len(t.divergences),
                    converged=True,
                ),
            )
            for t in req.traces
        )
        result = MultiLayerResult(placeholder, placeholder, layers)
        report = layer_barriers(result, BarrierParams(beta=req.beta, z=req.z), d0=req.d0)
        return models.BarriersResponse(**barrier_payload(report))

    @app.post("/kmeans", response_model=models.KmeansResponse)
    def run_kmeans(req: models.KmeansRequest):
        labels = kmeans(
            NonNegMatrix(req.points),
            req.k,
            seed=req.seed,
            restarts=req.restarts,
            max_iter=req.max_iter,
        )
        return models.KmeansResponse(labels=list(labels.labels), k=labels.k)

    @app.post("/evaluate", response_model=models.EvaluateResponse)
    def evaluate(req: models.EvaluateRequest):
        pred = LabelVector.from_sequence(req.predicted)
        truth = LabelVector.from_sequence(req.truth)
        k = max(pred.k, truth.k)
        report = evaluate_clustering(
            LabelVector(pred.labels, k), LabelVector(truth.labels, k)
        )
        return models.EvaluateResponse(
            acc=report.acc,
            nmi=report.nmi,
            mapping=report.mapping,
            confusion=report.confusion.tolist(),
        )

    @app.post("/stft", response_model=models.StftResponse)
    def stft(req: models.StftRequest):
        cfg = StftConfig(sample_rate=req.sample_rate, n_fft=req.n_fft, hop=req.hop)
        samples = req.samples
        if req.source_rate != cfg.sample_rate:
            if req.source_rate > cfg.sample_rate:
                samples = lowpass_moving_average(
                    samples, math.ceil(req.source_rate / cfg.sample_rate)
                )
            samples = resample_linear(samples, req.source_rate, cfg.sample_rate)
        magnitudes = stft_magnitude(samples, cfg)
        return models.StftResponse(
            magnitudes=magnitudes.to_lists(),
            rows=magnitudes.rows,
            frames=magnitudes.cols,
        )

    @app.post("/experiments/run", response_model=models.ExperimentRunResponse)
    def experiments_run(req: models.ExperimentRunRequest):
        cfg = config_from_dict(req.config.model_dump())
        rows = run_experiment(cfg, workers=req.workers)
        return models.ExperimentRunResponse(
            rows=[models.ResultRowModel(**row.__dict__) for row in rows],
            results_csv=str(f"{cfg.output_dir}/results.csv"),
        )

    return app
