"""Single-layer NMF under the alpha-divergence cost.

The solver alternates multiplicative updates of the activation map and the
basis, then rescales the pair so basis columns have unit 1-norm. Each full
update round is non-increasing in the cost; the test suite checks this
empirically together with the majorizer bound that justifies it.

``alpha`` may be any real except 0 and 1 (where the cost degenerates).
The KL limits are deliberately unsupported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeMismatchError
from .matrix import EpsilonPolicy, NonNegMatrix, matmul


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _require_alpha(alpha: float) -> None:
    if alpha == 0.0 or alpha == 1.0:
        raise ConfigurationError(
            f"alpha must differ from 0 and 1, got {alpha}; the cost is undefined there"
        )


@dataclass(frozen=True)
class SolverConfig:
    """Knobs governing one factorization run.

    Stops when the divergence change relative to the starting divergence
    drops below ``tol``, or after ``max_iter`` rounds.
    """

    alpha: float
    max_iter: int = 500
    tol: float = 1e-6
    eps: EpsilonPolicy = field(default_factory=EpsilonPolicy)
    seed: int = 0

    def __post_init__(self):
        _require_alpha(self.alpha)
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0.0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class FactorPair:
    """A basis/activation pair with chaining inner dimension."""

    basis: NonNegMatrix
    activation: NonNegMatrix

    def __post_init__(self):
        if self.basis.cols != self.activation.rows:
            raise ShapeMismatchError(
                f"basis {self.basis.shape} does not chain with "
                f"activation {self.activation.shape}",
                self.basis.shape,
                self.activation.shape,
            )


@dataclass(frozen=True)
class SolveTrace:
    """Cost trajectory of one run.

    ``divergences`` holds one value per completed iteration;
    ``initial_divergence`` is the cost at the starting factors and is the
    reference point for barrier diagnostics.
    """

    initial_divergence: float
    divergences: tuple[float, ...]
    iterations_run: int
    converged: bool

    def __post_init__(self):
        if self.iterations_run != len(self.divergences):
            raise ConfigurationError("iterations_run must match the trace length")
        values = (self.initial_divergence, *self.divergences)
        if not all(np.isfinite(v) and v >= 0.0 for v in values):
            raise ConfigurationError("trace divergences must be finite and >= 0")

    @property
    def path(self) -> tuple[float, ...]:
        """Initialization cost followed by the per-iteration costs."""
        return (self.initial_divergence, *self.divergences)

    @property
    def final_divergence(self) -> float:
        return self.divergences[-1] if self.divergences else self.initial_divergence


def _powered_ratio(y: np.ndarray, product: np.ndarray, alpha: float, floor: float):
    """(y / product)**alpha with a floored denominator.

    For negative alpha the ratio itself is floored too, so zero data
    entries cannot blow up under the negative power.
    """
    ratio = y / np.maximum(product, floor)
    if alpha < 0.0:
        ratio = np.maximum(ratio, floor)
    return ratio**alpha


def alpha_divergence(
    y: NonNegMatrix,
    y_hat: NonNegMatrix,
    alpha: float,
    eps: EpsilonPolicy = EpsilonPolicy(),
) -> float:
    """Alpha-divergence between ``y`` and a reconstruction ``y_hat``.

    ``y_hat`` is floored entrywise before use. The value is mathematically
    non-negative; round-off within -1e-12 of zero is reported as 0.
    """
    _require_alpha(alpha)
    if y.shape != y_hat.shape:
        raise ShapeMismatchError(
            f"shapes {y.shape} and {y_hat.shape} must match", y.shape, y_hat.shape
        )
    ya = y.a
    yh = np.maximum(y_hat.a, eps.floor)
    base = np.maximum(ya, eps.floor) if alpha < 0.0 else ya
    total = float(
        np.sum(base**alpha * yh ** (1.0 - alpha) - alpha * ya + (alpha - 1.0) * yh)
    )
    value = total / (alpha * (alpha - 1.0))
    if -1e-12 <= value < 0.0:
        return 0.0
    return value


def activation_gradient(
    y: NonNegMatrix,
    basis: NonNegMatrix,
    activation: NonNegMatrix,
    alpha: float,
    eps: EpsilonPolicy = EpsilonPolicy(),
) -> np.ndarray:
    """Gradient of the cost with respect to each activation entry (signed).

    Entry (j, t) is ``(1/alpha) * sum_i basis[i, j] * (1 - ratio[i, t]**alpha)``
    where ``ratio`` is the data over the current reconstruction.
    """
    _require_alpha(alpha)
    _check_system(y, basis, activation)
    product = basis.a @ activation.a
    powered = _powered_ratio(y.a, product, alpha, eps.floor)
    return (basis.a.T @ (1.0 - powered)) / alpha


def _check_system(y: NonNegMatrix, basis: NonNegMatrix, activation: NonNegMatrix):
    if basis.rows != y.rows or activation.cols != y.cols:
        raise ShapeMismatchError(
            f"factors {basis.shape} x {activation.shape} do not reconstruct "
            f"data of shape {y.shape}",
            basis.shape,
            activation.shape,
        )
    if basis.cols != activation.rows:
        raise ShapeMismatchError(
            f"basis {basis.shape} does not chain with activation {activation.shape}",
            basis.shape,
            activation.shape,
        )


def update_activation(
    y: NonNegMatrix,
    basis: NonNegMatrix,
    activation: NonNegMatrix,
    alpha: float,
    eps: EpsilonPolicy = EpsilonPolicy(),
) -> NonNegMatrix:
    """One multiplicative update of the activation map.

    x_jt <- x_jt * ( sum_i a_ij (y_it / yhat_it)^alpha / sum_i a_ij )^(1/alpha),
    floored at the epsilon policy so multiplicative zeros cannot absorb.
    """
    _require_alpha(alpha)
    _check_system(y, basis, activation)
    product = basis.a @ activation.a
    powered = _powered_ratio(y.a, product, alpha, eps.floor)
    numer = basis.a.T @ powered
    denom = np.maximum(basis.a.sum(axis=0), eps.floor)[:, None]
    updated = activation.a * (numer / denom) ** (1.0 / alpha)
    return NonNegMatrix(np.maximum(updated, eps.floor))


def update_basis(
    y: NonNegMatrix,
    basis: NonNegMatrix,
    activation: NonNegMatrix,
    alpha: float,
    eps: EpsilonPolicy = EpsilonPolicy(),
) -> NonNegMatrix:
    """One multiplicative update of the basis; mirror of the activation rule
    with the sum running over samples instead of features."""
    _require_alpha(alpha)
    _check_system(y, basis, activation)
    product = basis.a @ activation.a
    powered = _powered_ratio(y.a, product, alpha, eps.floor)
    numer = powered @ activation.a.T
    denom = np.maximum(activation.a.sum(axis=1), eps.floor)[None, :]
    updated = basis.a * (numer / denom) ** (1.0 / alpha)
    return NonNegMatrix(np.maximum(updated, eps.floor))


def normalize_pair(
    pair: FactorPair, eps: EpsilonPolicy = EpsilonPolicy()
) -> FactorPair:
    """Rescale so each basis column has unit 1-norm, moving the scale into
    the matching activation row. The product is preserved entrywise.

    An exactly-zero basis column is replaced by a uniform column and its
    activation row floored, since no scale can be recovered for it.
    """
    a = pair.basis.a.copy()
    x = pair.activation.a.copy()
    scale = a.sum(axis=0)
    dead = scale == 0.0
    live = ~dead
    a[:, live] /= scale[live]
    x[live, :] *= scale[live][:, None]
    if dead.any():
        a[:, dead] = 1.0 / a.shape[0]
        x[dead, :] = np.maximum(x[dead, :], eps.floor)
    return FactorPair(NonNegMatrix(a), NonNegMatrix(x))


def random_init(
    rows: int, cols: int, seed, eps: EpsilonPolicy = EpsilonPolicy()
) -> NonNegMatrix:
    """Uniform random matrix on [floor, 1], deterministic for a given seed.

    ``seed`` may be an integer or an existing ``numpy.random.Generator``
    (the latter draws from the shared stream).
    """
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"dimensions must be positive, got {rows}x{cols}")
    return NonNegMatrix(_rng(seed).uniform(eps.floor, 1.0, size=(rows, cols)))


def solve_single_layer(
    y: NonNegMatrix,
    rank: int,
    cfg: SolverConfig,
    init: FactorPair | None = None,
) -> tuple[FactorPair, SolveTrace]:
    """Factorize ``y`` into a rank-``rank`` basis/activation pair.

    Each iteration updates the activation, then the basis, then normalizes;
    the divergence is recorded once per iteration. Identical inputs and
    config produce bit-identical results.
    """
    if not 1 <= rank <= min(y.rows, y.cols):
        raise ConfigurationError(
            f"rank {rank} must lie in [1, min{y.shape}] for data of shape {y.shape}"
        )
    if init is None:
        stream = _rng(cfg.seed)
        basis = random_init(y.rows, rank, stream, cfg.eps)
        activation = random_init(rank, y.cols, stream, cfg.eps)
    else:
        if init.basis.shape != (y.rows, rank) or init.activation.shape != (rank, y.cols):
            raise ShapeMismatchError(
                f"init factors {init.basis.shape} x {init.activation.shape} do not "
                f"fit data {y.shape} at rank {rank}",
                init.basis.shape,
                init.activation.shape,
            )
        basis, activation = init.basis, init.activation

    d0 = alpha_divergence(y, matmul(basis, activation), cfg.alpha, cfg.eps)
    reference = max(d0, cfg.eps.floor)
    divergences: list[float] = []
    previous = d0
    converged = False
    for _ in range(cfg.max_iter):
        activation = update_activation(y, basis, activation, cfg.alpha, cfg.eps)
        basis = update_basis(y, basis, activation, cfg.alpha, cfg.eps)
        pair = normalize_pair(FactorPair(basis, activation), cfg.eps)
        basis, activation = pair.basis, pair.activation
        current = alpha_divergence(y, matmul(basis, activation), cfg.alpha, cfg.eps)
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
    return FactorPair(basis, activation), trace


def auxiliary_value(
    activation: NonNegMatrix,
    reference: NonNegMatrix,
    y: NonNegMatrix,
    basis: NonNegMatrix,
    alpha: float,
    eps: EpsilonPolicy = EpsilonPolicy(),
) -> float:
    """Majorizer G(activation, reference) of the cost at ``activation``.

    Used only as a test oracle: G(x, x) recovers the cost exactly and
    G(x, x') bounds it from above for any reference, which sandwiches the
    multiplicative update between two non-increasing quantities.

    The weights are zeta_itj = a_ij x'_jt / sum_j a_ij x'_jt. Builds a
    dense (features x components x samples) tensor, so keep instances small.
    """
    _require_alpha(alpha)
    _check_system(y, basis, activation)
    _check_system(y, basis, reference)
    a = basis.a
    x = activation.a
    xr = reference.a
    ya = y.a
    mix = np.maximum(a @ xr, eps.floor)  # (I, T)
    zeta = a[:, :, None] * xr[None, :, :] / mix[:, None, :]  # (I, J, T)
    weight = ya[:, None, :] * zeta  # y_it * zeta_itj
    z = (a[:, :, None] * x[None, :, :]) / np.maximum(weight, eps.floor)
    inner = z ** (1.0 - alpha) + (alpha - 1.0) * z - alpha
    return float(np.sum(weight * inner) / (alpha * (alpha - 1.0)))
