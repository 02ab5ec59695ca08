"""Bit-true software reference for binary-weight convolution layers.

This is the oracle the hardware simulator is checked against.  It computes
the layer directly (plain window indexing, no sliding-window/weight-shift
mechanics) and narrows through the same fixed-point pipeline the chip uses:

    exact integer channel sum  ->  saturate to Q7.9  ->  * alpha (Q2.9)
    ->  + beta (aligned to Q10.18)  ->  saturate/truncate to Q2.9

Also hosts the weight binarization functions used to produce +/-1 filters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fxp
from .errors import ConfigError
from .fxp import Q2_9, Q7_9, Q10_18, FxSample, QFormat

ZERO_PAD = "zero_pad"
VALID = "valid"
PADDINGS = (ZERO_PAD, VALID)


# ---------------------------------------------------------------------------
# binarization (training-side weight mapping)
# ---------------------------------------------------------------------------

def binarize_det(w: float) -> int:
    """Deterministic sign binarization; ties at 0 map to +1."""
    return 1 if w >= 0 else -1


def hard_sigmoid(x: float) -> float:
    """clip((x+1)/2, 0, 1)"""
    return max(0.0, min(1.0, (x + 1.0) / 2.0))


def binarize_sto(w: float, u: float) -> int:
    """Stochastic binarization: +1 with probability hard_sigmoid(w).

    `u` is a uniform sample in [0, 1) supplied by the caller so results
    stay reproducible.
    """
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    return 1 if u < hard_sigmoid(w) else -1


def binarize_det_array(w: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(w) >= 0, 1, -1).astype(np.int8)


def binarize_sto_array(w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    p = np.clip((w + 1.0) / 2.0, 0.0, 1.0)
    return np.where(rng.random(w.shape) < p, 1, -1).astype(np.int8)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinaryFilter:
    """A square +/-1 kernel with its {0,1} storage encoding (0 -> -1, 1 -> +1)."""

    weights: np.ndarray  # (h, w) of +/-1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.int8)
        if w.ndim != 2:
            raise ConfigError("filter must be 2-D")
        if not (1 <= w.shape[0] <= 7 and 1 <= w.shape[1] <= 7):
            raise ConfigError("filter sides must be within 1..7")
        if w.shape[0] != w.shape[1]:
            raise ConfigError("only square kernels are supported")
        if not np.all(np.abs(w) == 1):
            raise ConfigError("filter weights must be +/-1")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def to_bits(self) -> np.ndarray:
        """Storage encoding: -1 -> 0, +1 -> 1."""
        return ((self.weights + 1) // 2).astype(np.uint8)

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "BinaryFilter":
        bits = np.asarray(bits)
        if not np.all((bits == 0) | (bits == 1)):
            raise ConfigError("storage bits must be 0/1")
        return cls(bits.astype(np.int8) * 2 - 1)


@dataclass
class FeatureMap:
    """Channel-major stack of fixed-point images sharing one format."""

    raw: np.ndarray  # (channels, height, width) raw integers
    fmt: QFormat = Q2_9

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.int64)
        if self.raw.ndim != 3:
            raise ConfigError("feature map must be (channels, height, width)")
        if self.raw.shape[1] < 1 or self.raw.shape[2] < 1:
            raise ConfigError("feature map must have positive spatial size")
        if self.raw.min(initial=0) < self.fmt.min_raw or self.raw.max(initial=0) > self.fmt.max_raw:
            raise ConfigError(f"samples outside {self.fmt} range")

    @property
    def channels(self) -> int:
        return self.raw.shape[0]

    @property
    def height(self) -> int:
        return self.raw.shape[1]

    @property
    def width(self) -> int:
        return self.raw.shape[2]

    def to_real(self) -> np.ndarray:
        return fxp.to_real_array(self.raw, self.fmt)

    @classmethod
    def from_real(cls, values: np.ndarray, fmt: QFormat = Q2_9,
                  mode: str = "truncate") -> "FeatureMap":
        raw, _ = fxp.quantize_array(values, fmt, mode)
        return cls(raw, fmt)


@dataclass(frozen=True)
class ChannelAffine:
    """Per-output-channel scale/bias pair, both Q2.9."""

    scale: FxSample
    bias: FxSample

    def __post_init__(self):
        if self.scale.fmt != Q2_9 or self.bias.fmt != Q2_9:
            raise ConfigError("scale and bias must be Q2.9")

    @classmethod
    def from_real(cls, scale: float, bias: float) -> "ChannelAffine":
        return cls(fxp.quantize(scale, Q2_9), fxp.quantize(bias, Q2_9))

    @classmethod
    def identity(cls) -> "ChannelAffine":
        return cls.from_real(1.0, 0.0)


@dataclass
class SaturationStats:
    """Per-layer clamp counters for the two narrowing points of the pipeline."""

    q79: fxp.SaturationCounter = field(default_factory=fxp.SaturationCounter)
    q29: fxp.SaturationCounter = field(default_factory=fxp.SaturationCounter)

    @property
    def q79_events(self) -> int:
        return self.q79.events

    @property
    def q29_events(self) -> int:
        return self.q29.events

    @property
    def total(self) -> int:
        return self.q79.events + self.q29.events


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _normalize_filters(filters) -> np.ndarray:
    """Accept (n_out, n_in, k, k) +/-1 arrays or nested BinaryFilter lists."""
    if isinstance(filters, np.ndarray):
        w = filters.astype(np.int64)
    else:
        w = np.asarray([[f.weights for f in row] for row in filters], dtype=np.int64)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ConfigError("filters must be (n_out, n_in, k, k)")
    if not np.all(np.abs(w) == 1):
        raise ConfigError("filter weights must be +/-1")
    return w


def output_shape(height: int, width: int, k: int, padding: str) -> tuple[int, int]:
    if padding == ZERO_PAD:
        if k % 2 == 0:
            raise ConfigError("zero padding is only defined for odd kernels")
        return height, width
    if padding == VALID:
        if height < k or width < k:
            raise ConfigError("image smaller than kernel in valid mode")
        return height - k + 1, width - k + 1
    raise ConfigError(f"unknown padding mode {padding!r}")


def conv_accumulate(input_raw: np.ndarray, weights: np.ndarray, padding: str) -> np.ndarray:
    """Exact integer correlation: sums[o, y, x] = sum_n,a,b in[n, y+a, x+b] * w[o, n, a, b].

    Zero-padded mode centers odd kernels and keeps the spatial size.
    This path is deliberately simple and shift-free; it is the reference
    the hardware-mechanics simulator is compared against.
    """
    input_raw = np.asarray(input_raw, dtype=np.int64)
    n_out, n_in, k, _ = weights.shape
    if input_raw.shape[0] != n_in:
        raise ConfigError("input channel count does not match filters")
    h, w = input_raw.shape[1:]
    out_h, out_w = output_shape(h, w, k, padding)
    if padding == ZERO_PAD:
        m = (k - 1) // 2
        padded = np.pad(input_raw, ((0, 0), (m, m), (m, m)))
    else:
        padded = input_raw
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(1, 2))
    # windows: (n_in, out_h, out_w, k, k)
    return np.einsum("nyxab,onab->oyx", windows, weights, dtype=np.int64)


def affine_narrow_golden(sums: np.ndarray, alpha_raw: int, beta_raw: int,
                         stats: SaturationStats | None = None) -> np.ndarray:
    """Narrow exact channel sums through the scale-bias pipeline (one channel)."""
    s79, n79 = fxp.clamp_raw(sums, Q7_9)
    acc = s79 * int(alpha_raw) + (int(beta_raw) << 9)        # exact Q10.18
    out = fxp.shift_truncate_raw(acc, Q10_18.frac_bits - Q2_9.frac_bits)
    out, n29 = fxp.clamp_raw(out, Q2_9)
    if stats is not None:
        stats.q79.add(n79)
        stats.q29.add(n29)
    return out


def conv_layer_golden(input_map: FeatureMap, filters, affine,
                      padding: str = ZERO_PAD,
                      stats: SaturationStats | None = None,
                      strict_q79: bool = False) -> FeatureMap:
    """Full layer: binary-weight convolution plus per-channel scale and bias.

    `affine` is a sequence of ChannelAffine, one per output channel.  With
    strict_q79=True the channel sum is re-saturated to Q7.9 after every
    input channel instead of once at readout (sensitivity mode).
    """
    weights = _normalize_filters(filters)
    n_out = weights.shape[0]
    if len(affine) != n_out:
        raise ConfigError("need one (scale, bias) pair per output channel")
    if input_map.fmt != Q2_9:
        raise ConfigError("golden layer expects Q2.9 activations")

    if strict_q79:
        sums = None
        for n in range(weights.shape[1]):
            part = conv_accumulate(input_map.raw[n:n + 1], weights[:, n:n + 1], padding)
            sums = part if sums is None else sums + part
            sums, nsat = fxp.clamp_raw(sums, Q7_9)
            if stats is not None:
                stats.q79.add(nsat)
    else:
        sums = conv_accumulate(input_map.raw, weights, padding)

    out = np.empty_like(sums)
    for ch in range(n_out):
        out[ch] = affine_narrow_golden(sums[ch], affine[ch].scale.raw,
                                       affine[ch].bias.raw, stats)
    return FeatureMap(out, Q2_9)


def count_saturations(input_map: FeatureMap, filters, affine,
                      padding: str = ZERO_PAD) -> SaturationStats:
    """Run the layer and report how often each narrowing point clamped."""
    stats = SaturationStats()
    conv_layer_golden(input_map, filters, affine, padding, stats=stats)
    return stats
