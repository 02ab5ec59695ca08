"""Analytic operation counts, throughput and efficiency formulas.

An Op is a single addition or multiplication, so one MAC counts as 2 Op.
Real throughput is the peak rate de-rated by the utilization factors:
vertical tiling overlap, input-channel idling, and border handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .accel import AccelConfig, SopMode
from .errors import ConfigError
from .golden import PADDINGS, ZERO_PAD


@dataclass(frozen=True)
class LayerSpec:
    """One convolution layer as the planner sees it."""

    name: str
    n_in: int
    n_out: int
    h_im: int
    w_im: int
    h_k: int
    padding: str = ZERO_PAD
    stride: int = 1   # accounting only: strided layers run on the decimated grid

    def __post_init__(self):
        if min(self.n_in, self.n_out, self.h_im, self.w_im, self.h_k, self.stride) < 1:
            raise ConfigError("layer dimensions must be positive")
        if self.padding not in PADDINGS:
            raise ConfigError(f"unknown padding mode {self.padding!r}")

    @property
    def out_height(self) -> int:
        pad = self.h_k - 1 if self.padding == ZERO_PAD else 0
        return (self.h_im + pad - self.h_k) // self.stride + 1

    @property
    def out_width(self) -> int:
        pad = self.h_k - 1 if self.padding == ZERO_PAD else 0
        return (self.w_im + pad - self.h_k) // self.stride + 1


@dataclass
class EfficiencyReport:
    """Throughput/efficiency summary for one layer at one operating point."""

    ops: int
    theta_peak: float            # Op/s
    theta_real: float            # Op/s
    eta_tile: float
    eta_ch_idle: float
    eta_border: float
    h_e: float = 0.0             # Op/s/W
    h_a: float = 0.0             # Op/s per MGE


def count_ops(layer: LayerSpec, use_output_size: bool = False) -> int:
    """Additions + multiplications for one frame of this layer.

    The default applies the literal complexity formula with the border
    reduction (h-k+1)(w-k+1).  With use_output_size=True the layer's actual
    output grid is used instead, which is the right accounting for
    zero-padded and strided layers.
    """
    k = layer.h_k
    if use_output_size:
        oh, ow = layer.out_height, layer.out_width
    else:
        oh, ow = layer.h_im - k + 1, layer.w_im - k + 1
        if oh < 1 or ow < 1:
            raise ConfigError("image smaller than kernel")
    return 2 * layer.n_out * layer.n_in * k * k * oh * ow


def peak_throughput(cfg: AccelConfig, mode: SopMode, f_hz: float) -> float:
    """Theoretical Op/s: 2 * (filters_per_sop * k^2) * n_ch * f.

    For a kernel embedded in a larger native window this is the useful
    peak (the engine still cycles at the native rate; the masked slots do
    no useful work).
    """
    if f_hz <= 0:
        raise ConfigError("frequency must be positive")
    return 2.0 * mode.filters_per_sop * mode.kernel_size ** 2 * cfg.n_ch * f_hz


def eta_tile(h_im: int, h_max: int, h_k: int) -> float:
    """Throughput share left after re-loading the vertical tile overlaps."""
    if h_max < h_k:
        raise ConfigError("cached stripe shorter than the kernel")
    tiles = math.ceil(h_im / h_max)
    return h_im / (h_im + (tiles - 1) * (h_k - 1))


def eta_ch_idle(n_in_block: int, n_out_slots: int) -> float:
    """Utilization when output streaming limits input consumption.

    `n_out_slots` is the number of output-stream cycles the block needs per
    pixel (output channels divided by the per-cycle stream rate of the
    mode); below n_in_block the block never idles.
    """
    if n_in_block < 1 or n_out_slots < 1:
        raise ConfigError("channel counts must be positive")
    return min(1.0, n_in_block / n_out_slots)


def eta_border(layer: LayerSpec) -> float:
    """Border-handling efficiency: 1 when zero-padded, reduced otherwise."""
    if layer.padding == ZERO_PAD:
        return 1.0
    k = layer.h_k
    reduction = ((k - 1) / layer.w_im) * ((k - 1) / layer.h_im)
    return 1.0 - reduction


def real_throughput(theta_peak: float, etas) -> float:
    """theta_peak times the product of the efficiency factors."""
    theta = theta_peak
    for eta in etas:
        if not 0.0 < eta <= 1.0:
            raise ConfigError("efficiency factors must lie in (0, 1]")
        theta *= eta
    return theta


def efficiencies(theta: float, power_w: float, area_mge: float) -> tuple[float, float]:
    """(energy efficiency Op/s/W, area efficiency Op/s/MGE)."""
    if power_w <= 0 or area_mge <= 0:
        raise ConfigError("power and area must be positive")
    return theta / power_w, theta / area_mge


def layer_efficiency(cfg: AccelConfig, layer: LayerSpec, f_hz: float,
                     power_w: float = 0.0, area_mge: float = 0.0) -> EfficiencyReport:
    """Assemble the full efficiency picture for one layer at clock f_hz.

    The channel-idling factor is evaluated per hardware block (n_in capped
    at n_ch, output channels normalized to stream slots).  Power and area
    are optional; when given they fill in H_E / H_A.
    """
    mode = cfg.mode_for_kernel(layer.h_k)
    n_in_block = min(layer.n_in, cfg.n_ch)
    n_out_block = min(layer.n_out, cfg.out_block_channels(mode))
    e_tile = eta_tile(layer.h_im, cfg.h_max(cfg.n_ch), layer.h_k)
    e_ch = eta_ch_idle(n_in_block, cfg.stream_slots(n_out_block, mode))
    e_border = eta_border(layer)
    peak = peak_throughput(cfg, mode, f_hz)
    real = real_throughput(peak, (e_tile, e_ch, e_border))
    h_e, h_a = 0.0, 0.0
    if power_w > 0:
        h_e = real / power_w
    if area_mge > 0:
        h_a = real / area_mge
    return EfficiencyReport(
        ops=count_ops(layer, use_output_size=True),
        theta_peak=peak, theta_real=real,
        eta_tile=e_tile, eta_ch_idle=e_ch, eta_border=e_border,
        h_e=h_e, h_a=h_a)
