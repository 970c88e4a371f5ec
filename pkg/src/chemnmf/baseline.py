"""Plain Euclidean-cost NMF, the "regular" baseline in experiment sweeps.

Classic multiplicative updates for the halved squared Frobenius error,
recorded with the same trace structure as the alpha-divergence solver so
downstream diagnostics and emitters work unchanged. ``cfg.alpha`` is
ignored here.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .matrix import NonNegMatrix
from .nmf import FactorPair, SolveTrace, SolverConfig, normalize_pair, random_init


def solve_euclidean(
    y: NonNegMatrix, rank: int, cfg: SolverConfig
) -> tuple[FactorPair, SolveTrace]:
    """Factorize ``y`` under the cost 0.5 * ||y - basis @ activation||_F**2."""
    if not 1 <= rank <= min(y.rows, y.cols):
        raise ConfigurationError(
            f"rank {rank} must lie in [1, min{y.shape}] for data of shape {y.shape}"
        )
    stream = np.random.default_rng(cfg.seed)
    basis = random_init(y.rows, rank, stream, cfg.eps).a.copy()
    activation = random_init(rank, y.cols, stream, cfg.eps).a.copy()
    ya = y.a
    floor = cfg.eps.floor

    def cost(a, x):
        return 0.5 * float(((ya - a @ x) ** 2).sum())

    d0 = cost(basis, activation)
    reference = max(d0, floor)
    divergences: list[float] = []
    previous = d0
    converged = False
    for _ in range(cfg.max_iter):
        activation *= (basis.T @ ya) / np.maximum(basis.T @ basis @ activation, floor)
        activation = np.maximum(activation, floor)
        basis *= (ya @ activation.T) / np.maximum(
            basis @ activation @ activation.T, floor
        )
        basis = np.maximum(basis, floor)
        pair = normalize_pair(
            FactorPair(NonNegMatrix(basis), NonNegMatrix(activation)), cfg.eps
        )
        basis = pair.basis.a.copy()
        activation = pair.activation.a.copy()
        current = cost(basis, activation)
        divergences.append(current)
        if abs(current - previous) / reference < cfg.tol:
            converged = True
            break
        previous = current

    trace = SolveTrace(
        initial_divergence=d0,
        divergences=tuple(divergences),
        iterations_run=len(divergences),
        converged=converged,
    )
    return FactorPair(NonNegMatrix(basis), NonNegMatrix(activation)), trace
