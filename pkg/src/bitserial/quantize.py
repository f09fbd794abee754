"""Affine uniform quantizers: apply, invert, and fit to data.

A quantizer with ``bits`` levels maps reals onto the lattice
``offset + scale * L`` for ``L = 0 .. 2**bits - 1``.  Activations coming out
of ReLU(BatchNorm(x)) are roughly half-Gaussian, so ``offset`` is usually
nonnegative and small.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorruptInputError, DegenerateInputError, InputDomainError, ParamsError

MAX_BITS = 8


@dataclass(frozen=True)
class QuantParams:
    bits: int
    offset: float
    scale: float

    def __post_init__(self):
        if not isinstance(self.bits, (int, np.integer)) or not 1 <= self.bits <= MAX_BITS:
            raise ParamsError(f"bits must be an integer in 1..{MAX_BITS}, got {self.bits!r}")
        if not np.isfinite(self.offset):
            raise ParamsError(f"offset must be finite, got {self.offset!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ParamsError(f"scale must be finite and > 0, got {self.scale!r}")

    @property
    def n_levels(self) -> int:
        return 1 << self.bits

    @property
    def max_level(self) -> int:
        return (1 << self.bits) - 1

    @property
    def range(self) -> tuple[float, float]:
        """Closed interval covered by the dequantized lattice."""
        return self.offset, self.offset + self.max_level * self.scale

    def thresholds(self) -> np.ndarray:
        """Decision boundaries between adjacent levels.

        ``thresholds()[L - 1]`` is the smallest value that quantizes to level
        ``L`` or above.  A value sitting exactly on a boundary goes up, which
        is round-half-away-from-zero on the nonnegative side; everything
        below ``offset`` clamps to level 0 regardless.
        """
        steps = np.arange(1, self.n_levels, dtype=np.float64) - 0.5
        return self.offset + steps * self.scale


# bit b encodes 2b - 1, i.e. level 0 -> -1 and level 1 -> +1
BIPOLAR = QuantParams(bits=1, offset=-1.0, scale=2.0)


@dataclass(frozen=True)
class LevelMatrix:
    """Dense 2-D matrix of quantization levels, all ``< 2**bits``."""

    levels: np.ndarray
    bits: int

    def __post_init__(self):
        levels = np.asarray(self.levels)
        if levels.ndim != 2:
            raise ParamsError(f"levels must be 2-D, got shape {levels.shape}")
        if not 1 <= self.bits <= MAX_BITS:
            raise ParamsError(f"bits must be in 1..{MAX_BITS}, got {self.bits}")
        if levels.size and (levels.min() < 0 or levels.max() >= (1 << self.bits)):
            raise CorruptInputError(f"levels out of range for a {self.bits}-bit matrix")
        object.__setattr__(self, "levels", levels.astype(np.uint8, copy=False))

    @property
    def rows(self) -> int:
        return self.levels.shape[0]

    @property
    def cols(self) -> int:
        return self.levels.shape[1]


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise InputDomainError("quantizer input contains NaN or infinite values")


def quantize_levels(values, params: QuantParams) -> np.ndarray:
    """Quantize an array of any shape, returning uint8 levels of the same shape."""
    values = np.asarray(values, dtype=np.float64)
    _check_finite(values)
    # counting crossed thresholds is monotone by construction and avoids the
    # cancellation in (v - offset) / scale right at a boundary
    return np.searchsorted(params.thresholds(), values, side="right").astype(np.uint8)


def quantize_uniform(values, params: QuantParams) -> LevelMatrix:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ParamsError(f"expected a 2-D matrix, got shape {values.shape}")
    return LevelMatrix(quantize_levels(values, params), params.bits)


def dequantize(levels, params: QuantParams) -> np.ndarray:
    """Map levels back to reals: ``offset + scale * L``.

    Accepts a :class:`LevelMatrix` (whose bit width must match ``params``) or
    a raw integer array of any shape.
    """
    if isinstance(levels, LevelMatrix):
        if levels.bits != params.bits:
            raise ParamsError(
                f"level matrix has {levels.bits} bits but params have {params.bits}"
            )
        levels = levels.levels
    return params.offset + params.scale * np.asarray(levels, dtype=np.float64)


def quantization_mse(samples, params: QuantParams) -> float:
    x = np.asarray(samples, dtype=np.float64)
    err = dequantize(quantize_levels(x, params), params) - x
    return float(np.mean(err * err))


def _initial_params(x: np.ndarray, bits: int) -> QuantParams:
    top = (1 << bits) - 1
    offset = max(float(x.min()), 0.0)
    scale = (float(np.percentile(x, 99)) - offset) / top
    if not scale > 0:
        # mostly-negative data: the nonnegative clamp leaves no room
        offset = float(x.min())
        scale = (float(x.max()) - offset) / top
    return QuantParams(bits, offset, scale)


def fit_uniform_quantizer(samples, bits: int, max_iters: int = 100, *, return_history: bool = False):
    """Fit ``(offset, scale)`` to ``samples`` by Lloyd-style alternation.

    Each iteration assigns every sample to its nearest level, then solves
    the least-squares line ``x ~ offset + scale * L`` over those assignments.
    Both half-steps can only lower the empirical MSE, so the sequence of
    MSEs is non-increasing; iteration stops after ``max_iters`` rounds, when
    the assignments stop changing, or if a round fails to improve.

    Starts from ``offset = max(min(x), 0)`` and a scale that puts the top
    level at the 99th percentile, clipping the heavy tail.

    With ``return_history=True`` returns ``(params, mses)`` where ``mses[0]``
    is the MSE of the initial guess and ``mses[-1]`` that of the result.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise DegenerateInputError("cannot fit a quantizer to an empty sample")
    _check_finite(x)
    if x.min() == x.max():
        raise DegenerateInputError("all samples are equal; scale would be 0")
    if not isinstance(bits, (int, np.integer)) or not 1 <= bits <= MAX_BITS:
        raise ParamsError(f"bits must be an integer in 1..{MAX_BITS}, got {bits!r}")

    params = _initial_params(x, bits)
    levels = quantize_levels(x, params)
    mse = float(np.mean((dequantize(levels, params) - x) ** 2))
    history = [mse]

    for _ in range(max_iters):
        lv = levels.astype(np.float64)
        lv_mean = lv.mean()
        lv_var = np.mean((lv - lv_mean) ** 2)
        if lv_var == 0:
            break
        scale = float(np.mean((lv - lv_mean) * (x - x.mean())) / lv_var)
        if not scale > 0:
            break
        candidate = QuantParams(bits, float(x.mean() - scale * lv_mean), scale)
        new_levels = quantize_levels(x, candidate)
        new_mse = float(np.mean((dequantize(new_levels, candidate) - x) ** 2))
        if new_mse > mse:
            # only rounding noise can get here; keep the better fit
            break
        params, mse = candidate, new_mse
        history.append(mse)
        if np.array_equal(new_levels, levels):
            break
        levels = new_levels

    if return_history:
        return params, history
    return params
