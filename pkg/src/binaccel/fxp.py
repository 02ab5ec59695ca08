"""Fixed-point Q-format arithmetic for the accelerator datapath.

Every on-chip number is a signed two's-complement integer with an explicit
(integer bits, fractional bits) split.  All datapath operations here are
exact integer arithmetic on the raw values; floats only appear when
converting to/from real numbers at the boundaries.

Conventions:
  * truncation is an arithmetic right shift (rounds toward -inf), which is
    what a shift-based hardware datapath implements;
  * saturation clamps silently to the format range and is reported through
    an optional :class:`SaturationCounter`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QFormat:
    """Signed fixed-point format: 1 sign bit + int_bits + frac_bits."""

    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 0 or self.frac_bits < 0:
            raise ValueError("bit counts must be non-negative")

    @property
    def width(self) -> int:
        return 1 + self.int_bits + self.frac_bits

    @property
    def max_raw(self) -> int:
        return (1 << (self.width - 1)) - 1

    @property
    def min_raw(self) -> int:
        return -(1 << (self.width - 1))

    @property
    def max_value(self) -> float:
        return self.max_raw * 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return self.min_raw * 2.0 ** -self.frac_bits

    @property
    def lsb(self) -> float:
        return 2.0 ** -self.frac_bits

    def contains(self, raw: int) -> bool:
        return self.min_raw <= raw <= self.max_raw

    def __str__(self) -> str:
        return f"Q{self.int_bits}.{self.frac_bits}"


# The three formats of the modeled datapath.
Q2_9 = QFormat(2, 9)      # activations, per-channel scale and bias
Q7_9 = QFormat(7, 9)      # channel-summer output
Q10_18 = QFormat(10, 18)  # scale/bias intermediate


@dataclass
class SaturationCounter:
    """Counts silent clamping events so golden/simulator mismatches can be debugged."""

    events: int = 0

    def add(self, n: int) -> None:
        self.events += int(n)


@dataclass(frozen=True)
class FxSample:
    """One fixed-point value: raw two's-complement integer plus its format."""

    raw: int
    fmt: QFormat

    def __post_init__(self):
        if not self.fmt.contains(self.raw):
            raise ValueError(f"raw {self.raw} outside {self.fmt} range")

    def to_real(self) -> float:
        # exact for every width used here (raw fits in a float64 mantissa)
        return self.raw * 2.0 ** -self.fmt.frac_bits

    def __repr__(self) -> str:
        return f"FxSample({self.to_real()}, {self.fmt})"


def quantize(value: float, fmt: QFormat, mode: str = "truncate",
             counter: SaturationCounter | None = None) -> FxSample:
    """Convert a real number to the nearest representable sample.

    mode "truncate" floors toward -inf, "round" adds half an LSB before
    flooring (ties toward +inf).  Out-of-range values clamp silently.
    """
    if not math.isfinite(value):
        raise ValueError("value must be finite")
    scaled = value * (1 << fmt.frac_bits)
    if mode == "truncate":
        raw = math.floor(scaled)
    elif mode == "round":
        raw = math.floor(scaled + 0.5)
    else:
        raise ValueError(f"unknown quantization mode {mode!r}")
    clamped = min(max(raw, fmt.min_raw), fmt.max_raw)
    if counter is not None and clamped != raw:
        counter.add(1)
    return FxSample(clamped, fmt)


def mul_qq(a: FxSample, b: FxSample) -> FxSample:
    """Exact product; the result format is wide enough to never overflow.

    int bits add plus one (the two extreme negatives multiply to a positive
    needing the extra bit), frac bits add.  Q7.9 x Q2.9 -> Q10.18.
    """
    out_fmt = QFormat(a.fmt.int_bits + b.fmt.int_bits + 1,
                      a.fmt.frac_bits + b.fmt.frac_bits)
    return FxSample(a.raw * b.raw, out_fmt)


def saturate_truncate(a: FxSample, target: QFormat,
                      counter: SaturationCounter | None = None) -> FxSample:
    """Drop LSBs by arithmetic shift, then clamp to the target range."""
    if target.frac_bits > a.fmt.frac_bits:
        raise ValueError("target must not have more fractional bits")
    shifted = a.raw >> (a.fmt.frac_bits - target.frac_bits)
    clamped = min(max(shifted, target.min_raw), target.max_raw)
    if counter is not None and clamped != shifted:
        counter.add(1)
    return FxSample(clamped, target)


# ---------------------------------------------------------------------------
# vectorized raw-integer helpers (used by the golden model and the simulator)
# ---------------------------------------------------------------------------

def quantize_array(values: np.ndarray, fmt: QFormat, mode: str = "truncate") -> tuple[np.ndarray, int]:
    """Vectorized quantize.  Returns (raw int64 array, saturation count)."""
    scaled = np.asarray(values, dtype=np.float64) * (1 << fmt.frac_bits)
    if mode == "truncate":
        raw = np.floor(scaled)
    elif mode == "round":
        raw = np.floor(scaled + 0.5)
    else:
        raise ValueError(f"unknown quantization mode {mode!r}")
    raw = raw.astype(np.int64)
    clamped = np.clip(raw, fmt.min_raw, fmt.max_raw)
    return clamped, int(np.count_nonzero(clamped != raw))


def clamp_raw(raw: np.ndarray, fmt: QFormat) -> tuple[np.ndarray, int]:
    """Saturate raw integers to a format's range; returns (array, clamp count)."""
    raw = np.asarray(raw, dtype=np.int64)
    clamped = np.clip(raw, fmt.min_raw, fmt.max_raw)
    return clamped, int(np.count_nonzero(clamped != raw))


def shift_truncate_raw(raw: np.ndarray, drop_bits: int) -> np.ndarray:
    """Arithmetic right shift on raw integers (truncation toward -inf)."""
    if drop_bits < 0:
        raise ValueError("drop_bits must be >= 0")
    return np.asarray(raw, dtype=np.int64) >> drop_bits


def to_real_array(raw: np.ndarray, fmt: QFormat) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) * 2.0 ** -fmt.frac_bits
