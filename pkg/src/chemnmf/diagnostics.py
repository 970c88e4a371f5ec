"""Energy-barrier and escape-probability diagnostics over solver traces.

The optimization path of each layer is read as an energy landscape walk:
the barrier of layer l is the highest cost seen along its path minus the
final cost of the previous layer (the run's starting cost for layer 1).
A Boltzmann weight exp(-beta * barrier) / Z turns barriers into escape
probabilities, and products of their complements give the probability of
staying trapped across attempts. Beta and Z are free parameters; ordering
statements are invariant to Z, so the default Z normalizes the largest
reported probability to exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

from .errors import ConfigurationError, InvalidValueError
from .matrix import NonNegMatrix
from .multilayer import LayerSpec, MultiLayerResult, solve_chem_nmf
from .nmf import SolveTrace, solve_single_layer


@dataclass(frozen=True)
class BarrierParams:
    """Boltzmann weighting for barrier-to-probability conversion.

    ``z=None`` means: normalize per report so the smallest barrier maps to
    probability 1. Pass an explicit ``z`` to compare across reports.
    """

    beta: float = 1.0
    z: float | None = None

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.z is not None and not self.z > 0.0:
            raise ConfigurationError(f"z must be positive, got {self.z}")


@dataclass(frozen=True)
class LayerBarrier:
    max_divergence: float
    final_divergence: float
    barrier: float
    escape_probability: float


@dataclass(frozen=True)
class LayerBarrierReport:
    layers: tuple[LayerBarrier, ...]
    cumulative_barrier: float
    beta: float
    z: float

    @property
    def barriers(self) -> tuple[float, ...]:
        return tuple(layer.barrier for layer in self.layers)


class EscapeMonotonicity(NamedTuple):
    """Adjacent-pair barrier comparisons and the suffix where they all hold."""

    non_increasing: tuple[bool, ...]
    suffix_start: int | None


class SurvivalComparison(NamedTuple):
    multilayer: float
    single_layer: float


def escape_probability(barrier: float, beta: float, z: float) -> float:
    """Boltzmann escape probability (1/z) * exp(-beta * barrier)."""
    if not z > 0.0:
        raise ConfigurationError(f"z must be positive, got {z}")
    return math.exp(-beta * barrier) / z


def path_maximum(trace: SolveTrace) -> float:
    """Highest divergence along a layer's recorded path, start included."""
    if not trace.divergences:
        raise InvalidValueError("trace has no recorded iterations")
    return max(trace.path)


def _layer_barrier_values(result: MultiLayerResult, d0: float) -> list[float]:
    previous = d0
    barriers = []
    for layer in result.layers:
        barriers.append(path_maximum(layer.trace) - previous)
        previous = layer.trace.final_divergence
    return barriers


def layer_barriers(
    result: MultiLayerResult,
    params: BarrierParams = BarrierParams(),
    d0: float | None = None,
) -> LayerBarrierReport:
    """Per-layer barrier bookkeeping for a cascade run.

    ``d0`` is the reference cost that plays the previous-layer final for
    layer 1; it defaults to the run's own initialization divergence.
    """
    if not result.layers:
        raise InvalidValueError("result has no layers")
    if d0 is None:
        d0 = result.layers[0].trace.initial_divergence
    barriers = _layer_barrier_values(result, d0)
    z = params.z if params.z is not None else math.exp(-params.beta * min(barriers))
    layers = []
    for layer, barrier in zip(result.layers, barriers):
        layers.append(
            LayerBarrier(
                max_divergence=path_maximum(layer.trace),
                final_divergence=layer.trace.final_divergence,
                barrier=barrier,
                escape_probability=escape_probability(barrier, params.beta, z),
            )
        )
    return LayerBarrierReport(
        layers=tuple(layers),
        cumulative_barrier=sum(barriers),
        beta=params.beta,
        z=z,
    )


def survival_probability(escape_probs: Sequence[float]) -> float:
    """Probability of remaining trapped after every attempt: prod(1 - p)."""
    for p in escape_probs:
        if not 0.0 <= p <= 1.0:
            raise InvalidValueError(f"escape probability {p} outside [0, 1]")
    return math.prod(1.0 - p for p in escape_probs)


def monotone_escape_check(report: LayerBarrierReport) -> EscapeMonotonicity:
    """Flag each adjacent layer pair where the barrier did not grow.

    ``suffix_start`` is the first (1-based) layer from which barriers stay
    non-increasing through the last layer, or None when even the final pair
    grows. A fully non-increasing sequence yields 2.
    """
    barriers = report.barriers
    if len(barriers) < 2:
        raise ConfigurationError("monotonicity needs at least 2 layers")
    flags = tuple(b <= a for a, b in zip(barriers, barriers[1:]))
    last_false = -1
    for i, ok in enumerate(flags):
        if not ok:
            last_false = i
    start = last_false + 3  # pair i compares layers i+1 and i+2 (1-based)
    return EscapeMonotonicity(flags, start if start <= len(barriers) else None)


def multilayer_vs_single_survival(
    y: NonNegMatrix,
    spec: LayerSpec,
    attempts: int,
    params: BarrierParams = BarrierParams(),
    seeds: Sequence[int] | None = None,
) -> SurvivalComparison:
    """Monte-Carlo survival comparison between cascading and restarting.

    Runs ``attempts`` seeded cascades plus matching single-layer solves at
    the first layer's rank (same per-attempt seed, so attempt k's single
    run coincides with its cascade's first layer). Escape probabilities are
    averaged per layer over attempts with one shared normalization ``z``
    pooled across both regimes, then multiplied into survival products.
    The single-layer regime gets the same number of attempts as the
    cascade has layers.
    """
    if attempts < 1:
        raise ConfigurationError(f"attempts must be >= 1, got {attempts}")
    if seeds is None:
        seeds = [spec.solver.seed + 10_007 * k for k in range(attempts)]
    if len(seeds) < attempts:
        raise ConfigurationError(
            f"need at least {attempts} seeds, got {len(seeds)}"
        )
    seeds = list(seeds)[:attempts]

    depth = spec.depth
    ml_barriers: list[list[float]] = []
    sl_barriers: list[float] = []
    for seed in seeds:
        cascade = solve_chem_nmf(y, replace(spec, solver=replace(spec.solver, seed=seed)))
        d0 = cascade.layers[0].trace.initial_divergence
        ml_barriers.append(_layer_barrier_values(cascade, d0))
        _, trace = solve_single_layer(
            y, spec.ranks[0], replace(spec.solver, seed=seed)
        )
        sl_barriers.append(path_maximum(trace) - trace.initial_divergence)

    pooled = [b for row in ml_barriers for b in row] + sl_barriers
    z = params.z if params.z is not None else math.exp(-params.beta * min(pooled))

    def mean_probability(values: list[float]) -> float:
        probs = [min(escape_probability(v, params.beta, z), 1.0) for v in values]
        return sum(probs) / len(probs)

    per_layer = [
        mean_probability([row[layer] for row in ml_barriers]) for layer in range(depth)
    ]
    p_single = mean_probability(sl_barriers)
    return SurvivalComparison(
        multilayer=survival_probability(per_layer),
        single_layer=survival_probability([p_single] * depth),
    )
