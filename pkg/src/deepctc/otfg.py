"""OFDM time-frequency grid geometry and the cross-grid resampling operator.

A grid is ``symbols`` OFDM symbols (time) by ``subcarriers`` (frequency);
signals are indexed ``[time][frequency]`` and flattened row-major. Reception
through a mismatched FFT is modeled as mean-pooling along the axis where the
receiver is coarser and verbatim repetition along the axis where it is finer,
restricted to a single integer factor r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """Incompatible grid pair or malformed grid description."""


@dataclass(frozen=True)
class OTFGSpec:
    """One technology's grid geometry: symbols (time) x subcarriers (frequency)."""

    symbols: int
    subcarriers: int
    label: str | None = None

    def __post_init__(self):
        if self.symbols < 1 or self.subcarriers < 1:
            raise GridError(f"grid dimensions must be >= 1, got {self.symbols}x{self.subcarriers}")

    @property
    def uses(self) -> int:
        """Total channel uses (cells) on this grid."""
        return self.symbols * self.subcarriers

    def as_string(self) -> str:
        return f"{self.symbols}x{self.subcarriers}"

    @classmethod
    def from_string(cls, text: str, label: str | None = None) -> "OTFGSpec":
        """Parse a "SYMxSUB" grid string, e.g. "4x4" or "1x16"."""
        parts = text.lower().replace(" ", "").split("x")
        if len(parts) != 2:
            raise GridError(f"grid string must look like 'SYMxSUB', got {text!r}")
        try:
            sym, sub = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GridError(f"grid string must hold integers, got {text!r}") from exc
        return cls(sym, sub, label)


@dataclass
class GridSignal:
    """Real-valued samples on a grid; values indexed [time][frequency]."""

    grid: OTFGSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (self.grid.symbols, self.grid.subcarriers)
        if self.values.shape != expected:
            raise GridError(f"values shape {self.values.shape} != grid {expected}")


@dataclass(frozen=True)
class ResamplePlan:
    """How to map one grid onto another: pool one axis by r, repeat the other."""

    src: OTFGSpec
    dst: OTFGSpec
    factor: int
    pool_axis: str  # "time": pool symbols, repeat subcarriers; "freq": the mirror


def resample_plan(src: OTFGSpec, dst: OTFGSpec) -> ResamplePlan:
    """Find the single integer factor linking two grids, or fail.

    Requires equal total channel uses and src.symbols/dst.symbols ==
    dst.subcarriers/src.subcarriers == r for some integer r (or the mirror).
    """
    if src.uses != dst.uses:
        raise GridError(
            f"grids use different channel-use counts: {src.as_string()} vs {dst.as_string()}"
        )
    if src.symbols == dst.symbols and src.subcarriers == dst.subcarriers:
        return ResamplePlan(src, dst, 1, "time")
    if src.symbols % dst.symbols == 0 and dst.subcarriers % src.subcarriers == 0:
        r = src.symbols // dst.symbols
        if r == dst.subcarriers // src.subcarriers:
            return ResamplePlan(src, dst, r, "time")
    if dst.symbols % src.symbols == 0 and src.subcarriers % dst.subcarriers == 0:
        r = dst.symbols // src.symbols
        if r == src.subcarriers // dst.subcarriers:
            return ResamplePlan(src, dst, r, "freq")
    raise GridError(
        f"no integer resampling factor between {src.as_string()} and {dst.as_string()}"
    )


def resample_batch(x: np.ndarray, plan: ResamplePlan) -> np.ndarray:
    """Apply a plan to a batch of grids, shape (..., symbols, subcarriers)."""
    r = plan.factor
    if x.shape[-2:] != (plan.src.symbols, plan.src.subcarriers):
        raise GridError(f"signal shape {x.shape[-2:]} does not match plan source grid")
    if r == 1:
        return x.copy()
    lead = x.shape[:-2]
    if plan.pool_axis == "time":
        pooled = x.reshape(lead + (plan.dst.symbols, r, plan.src.subcarriers)).mean(axis=-2)
        return np.repeat(pooled, r, axis=-1)
    pooled = x.reshape(lead + (plan.src.symbols, plan.dst.subcarriers, r)).mean(axis=-1)
    return np.repeat(pooled, r, axis=-2)


def resample_batch_backward(grad_out: np.ndarray, plan: ResamplePlan) -> np.ndarray:
    """Adjoint of resample_batch: 1/r to each pooled input, summed over repeats."""
    r = plan.factor
    if grad_out.shape[-2:] != (plan.dst.symbols, plan.dst.subcarriers):
        raise GridError(f"gradient shape {grad_out.shape[-2:]} does not match plan target grid")
    if r == 1:
        return grad_out.copy()
    lead = grad_out.shape[:-2]
    if plan.pool_axis == "time":
        summed = grad_out.reshape(lead + (plan.dst.symbols, plan.src.subcarriers, r)).sum(axis=-1)
        return np.repeat(summed / r, r, axis=-2)
    summed = grad_out.reshape(lead + (plan.src.symbols, r, plan.dst.subcarriers)).sum(axis=-2)
    return np.repeat(summed / r, r, axis=-1)


def grid_resample(x: GridSignal, dst: OTFGSpec) -> GridSignal:
    """Resample one grid signal onto a compatible destination grid."""
    plan = resample_plan(x.grid, dst)
    return GridSignal(dst, resample_batch(x.values, plan))


def flatten(x: GridSignal) -> np.ndarray:
    """Row-major serialization of a grid signal (time-major)."""
    return x.values.reshape(-1).copy()


def unflatten(v: np.ndarray, grid: OTFGSpec) -> GridSignal:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != grid.uses:
        raise GridError(f"cannot reshape {v.shape} into grid {grid.as_string()}")
    return GridSignal(grid, v.reshape(grid.symbols, grid.subcarriers))


@dataclass(frozen=True)
class GridPreset:
    """Reference OFDM parameters of a deployed technology (informational only)."""

    name: str
    bandwidth_mhz: float
    sampling_rate_mhz: float
    fft_size: int
    subcarrier_spacing_khz: float
    symbol_duration_us: float


TECHNOLOGY_PRESETS = {
    "802.11n/ac": GridPreset("802.11n/ac", 17.5, 20.0, 64, 312.5, 3.2),
    "802.11ax": GridPreset("802.11ax", 17.5, 20.0, 256, 78.125, 12.8),
    "LTE-LAA/U": GridPreset("LTE-LAA/U", 18.0, 30.72, 2048, 15.0, 66.6),
    "WiMAX": GridPreset("WiMAX", 18.4, 22.4, 2048, 10.94, 91.4),
}


def technology_preset(name: str) -> GridPreset:
    try:
        return TECHNOLOGY_PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown technology {name!r}; known: {sorted(TECHNOLOGY_PRESETS)}"
        ) from None
