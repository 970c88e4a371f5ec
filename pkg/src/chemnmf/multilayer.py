"""Multi-layer cascade with bounded re-initialization (chem-NMF).

Layer 1 factorizes the data from a fully random start. Every later layer
factorizes the previous layer's activation map, drawing its activation at
random while blending its basis initialization between a random matrix and
the mean level of the previous basis. The blend weight is the bounding
factor: 0 reproduces plain alpha-NMF restarts, 1 pins the start to the
previous layer's scale.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .matrix import EpsilonPolicy, NonNegMatrix, matmul, mean_all
from .nmf import (
    FactorPair,
    SolveTrace,
    SolverConfig,
    random_init,
    solve_single_layer,
)


@dataclass(frozen=True)
class LayerSpec:
    """Cascade description: per-layer ranks, bounding factor, solver knobs.

    Ranks must be non-increasing; layer l works on a matrix with
    ``ranks[l-1]`` rows, so a larger next rank would not be a reduction.
    """

    ranks: tuple[int, ...]
    bounding_factor: float
    solver: SolverConfig

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if len(self.ranks) < 1:
            raise ConfigurationError("at least one layer rank is required")
        if any(r < 1 for r in self.ranks):
            raise ConfigurationError(f"ranks must be positive, got {self.ranks}")
        if any(b > a for a, b in zip(self.ranks, self.ranks[1:])):
            raise ConfigurationError(
                f"ranks must be non-increasing across layers, got {self.ranks}"
            )
        if not 0.0 <= self.bounding_factor <= 1.0:
            raise ConfigurationError(
                f"bounding factor must lie in [0, 1], got {self.bounding_factor}"
            )

    @property
    def depth(self) -> int:
        return len(self.ranks)


@dataclass(frozen=True)
class LayerResult:
    factors: FactorPair
    trace: SolveTrace


@dataclass(frozen=True)
class MultiLayerResult:
    """Outputs of a cascade run.

    ``basis_total`` is the ordered product of the per-layer bases and maps
    the final activation back to data space.
    """

    basis_total: NonNegMatrix
    activation: NonNegMatrix
    layers: tuple[LayerResult, ...]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def final_divergence(self) -> float:
        return self.layers[-1].trace.final_divergence


def bounded_init(
    prev_basis: NonNegMatrix,
    next_rank: int,
    bounding_factor: float,
    seed,
    eps: EpsilonPolicy = EpsilonPolicy(),
) -> NonNegMatrix:
    """Blend a random basis start toward the previous basis mean level.

    Returns ``(1 - bf) * random + bf * mean(prev_basis) * ones`` with shape
    (prev_basis.cols, next_rank). ``seed`` may be an int or a Generator.
    """
    if not 0.0 <= bounding_factor <= 1.0:
        raise ConfigurationError(
            f"bounding factor must lie in [0, 1], got {bounding_factor}"
        )
    if next_rank < 1:
        raise ConfigurationError(f"next rank must be positive, got {next_rank}")
    rand = random_init(prev_basis.cols, next_rank, seed, eps)
    base = mean_all(prev_basis)
    return NonNegMatrix((1.0 - bounding_factor) * rand.a + bounding_factor * base)


def _validate_cascade(y: NonNegMatrix, spec: LayerSpec) -> None:
    input_rows = y.rows
    for depth, rank in enumerate(spec.ranks, start=1):
        limit = min(input_rows, y.cols)
        if rank > limit:
            raise ConfigurationError(
                f"layer {depth} rank {rank} exceeds its input bound {limit} "
                f"(input is {input_rows}x{y.cols})"
            )
        input_rows = rank


def solve_chem_nmf(y: NonNegMatrix, spec: LayerSpec) -> MultiLayerResult:
    """Run the full cascade on ``y``.

    Layer l uses solver seed ``spec.solver.seed + (l - 1)``, so a depth-1
    cascade is bit-identical to ``solve_single_layer`` under the same
    config. Each layer's input is exactly the previous layer's activation.
    """
    _validate_cascade(y, spec)
    current = y
    layers: list[LayerResult] = []
    basis_total: NonNegMatrix | None = None
    for idx, rank in enumerate(spec.ranks):
        cfg = replace(spec.solver, seed=spec.solver.seed + idx)
        if idx == 0:
            pair, trace = solve_single_layer(current, rank, cfg)
        else:
            stream = np.random.default_rng(cfg.seed)
            activation0 = random_init(rank, current.cols, stream, cfg.eps)
            basis0 = bounded_init(
                layers[-1].factors.basis, rank, spec.bounding_factor, stream, cfg.eps
            )
            pair, trace = solve_single_layer(
                current, rank, cfg, init=FactorPair(basis0, activation0)
            )
        layers.append(LayerResult(pair, trace))
        basis_total = pair.basis if idx == 0 else matmul(basis_total, pair.basis)
        current = pair.activation
    return MultiLayerResult(basis_total, current, tuple(layers))


def reconstruct(result: MultiLayerResult) -> NonNegMatrix:
    """Data-space reconstruction: total basis times final activation."""
    return matmul(result.basis_total, result.activation)
