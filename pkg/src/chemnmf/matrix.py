"""Dense non-negative matrix type and the elementwise primitives built on it.

Every matrix that flows between solver stages is a :class:`NonNegMatrix`:
a small immutable wrapper around a validated, read-only float64 array.
Validation happens once at construction, so the numeric code can assume
entries are finite and non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidValueError, ShapeMismatchError


@dataclass(frozen=True)
class EpsilonPolicy:
    """Floor applied to denominators and power bases to keep them positive.

    The floor never leaks into stored factors; solvers floor their factors
    separately after each update.
    """

    floor: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.floor < 1e-6):
            raise ConfigurationError(
                f"epsilon floor must lie in (0, 1e-6), got {self.floor}"
            )


class NonNegMatrix:
    """Immutable dense matrix of finite, non-negative float64 entries.

    Instances are safe to share between threads: the wrapped array is
    marked read-only and all operations below are pure.
    """

    __slots__ = ("_a",)

    def __init__(self, values):
        a = np.array(values, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ShapeMismatchError(
                f"expected a non-empty 2-D matrix, got shape {a.shape}", a.shape
            )
        if not np.isfinite(a).all():
            raise InvalidValueError("matrix entries must be finite")
        if (a < 0.0).any():
            raise InvalidValueError("matrix entries must be non-negative")
        a.setflags(write=False)
        self._a = a

    @property
    def a(self) -> np.ndarray:
        """The wrapped read-only array."""
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    def to_lists(self) -> list[list[float]]:
        """Row-major nested lists, the wire format used by the service."""
        return self._a.tolist()

    def __matmul__(self, other: "NonNegMatrix") -> "NonNegMatrix":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"NonNegMatrix({self.rows}x{self.cols})"


def _require_same_shape(a: NonNegMatrix, b: NonNegMatrix) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(
            f"shapes {a.shape} and {b.shape} must match", a.shape, b.shape
        )


def matmul(a: NonNegMatrix, b: NonNegMatrix) -> NonNegMatrix:
    """Matrix product ``a @ b``; dimensions must chain."""
    if a.cols != b.rows:
        raise ShapeMismatchError(
            f"cannot multiply {a.shape} by {b.shape}", a.shape, b.shape
        )
    return NonNegMatrix(a.a @ b.a)


def safe_ratio(
    num: NonNegMatrix, den: NonNegMatrix, eps: EpsilonPolicy = EpsilonPolicy()
) -> NonNegMatrix:
    """Elementwise ``num / max(den, floor)``; always finite."""
    _require_same_shape(num, den)
    return NonNegMatrix(num.a / np.maximum(den.a, eps.floor))


def elementwise_pow(m: NonNegMatrix, p: float) -> NonNegMatrix:
    """Entrywise power. Negative exponents require strictly positive entries."""
    if p < 0.0 and (m.a == 0.0).any():
        raise InvalidValueError(
            "negative exponent on a matrix with zero entries; floor it first"
        )
    return NonNegMatrix(m.a**p)


def column_sums(m: NonNegMatrix) -> np.ndarray:
    """Per-column totals, length ``cols``."""
    return m.a.sum(axis=0)


def row_sums(m: NonNegMatrix) -> np.ndarray:
    """Per-row totals, length ``rows``."""
    return m.a.sum(axis=1)


def mean_all(m: NonNegMatrix) -> float:
    """Arithmetic mean over every entry."""
    return float(m.a.mean())
