"""Network-level planning and evaluation.

Splits layers into hardware-sized channel blocks and vertical tiles,
accumulates input-channel blocks off-chip on exact pre-affine sums, splits
oversized 11x11 kernels into 2x(6x6) + 2x(5x5) sub-kernels with an identity
correction, and produces per-network performance reports.

Two evaluation paths:
  * bit-true: every block runs through the datapath simulator and the
    results are composed off-chip (intended for reduced-size layers);
  * analytic: per-layer cycle/power accounting from the calibrated
    operating points (the default for full-size networks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import fxp, metrics
from .accel import AccelConfig
from .errors import ConfigError
from .fxp import Q2_9, Q7_9, Q10_18
from .golden import VALID, ZERO_PAD, FeatureMap, SaturationStats
from .metrics import LayerSpec
from .power import OperatingPoint
from .simulator import CycleReport, simulate_layer_block

SPLIT_KERNEL_SIZE = 11
_SPLIT_CENTER = (5, 5)


# ---------------------------------------------------------------------------
# network fixtures
# ---------------------------------------------------------------------------

@dataclass
class NetworkSpec:
    name: str
    layers: list

    def __post_init__(self):
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.n_in != prev.n_out:
                raise ConfigError(
                    f"{self.name}: {cur.name} expects {cur.n_in} channels, "
                    f"{prev.name} produces {prev.n_out}")

    @property
    def total_ops(self) -> int:
        return sum(metrics.count_ops(l, use_output_size=True) for l in self.layers)


def packaged_networks() -> list[str]:
    base = resources.files("binaccel") / "data" / "networks"
    return sorted(p.name[:-len(".net")] for p in base.iterdir() if p.name.endswith(".net"))


def load_network(name_or_path: str | Path) -> NetworkSpec:
    """Load a network fixture; bare names resolve to the packaged fixtures."""
    path = Path(name_or_path)
    if not path.suffix and not path.exists():
        candidate = resources.files("binaccel") / "data" / "networks" / f"{name_or_path}.net"
        if not candidate.is_file():
            raise ConfigError(f"unknown network {name_or_path!r} "
                              f"(packaged: {', '.join(packaged_networks())})")
        text = candidate.read_text()
    else:
        if not path.exists():
            raise ConfigError(f"network fixture {path} not found")
        text = path.read_text()
    return parse_network(text, default_name=str(name_or_path))


def parse_network(text: str, default_name: str = "network") -> NetworkSpec:
    name = default_name
    layers = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "name":
            name = parts[1]
            continue
        if len(parts) != 8:
            raise ConfigError(f"line {lineno}: expected "
                              "'name n_in n_out h w k stride padding'")
        layers.append(LayerSpec(
            name=parts[0], n_in=int(parts[1]), n_out=int(parts[2]),
            h_im=int(parts[3]), w_im=int(parts[4]), h_k=int(parts[5]),
            stride=int(parts[6]), padding=parts[7]))
    return NetworkSpec(name, layers)


# ---------------------------------------------------------------------------
# block planning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TilePlan:
    out_row_start: int
    out_rows: int
    in_row_start: int
    in_rows: int
    pad_top: bool
    pad_bottom: bool


@dataclass(frozen=True)
class BlockEntry:
    in_start: int
    in_count: int
    out_start: int
    out_count: int
    tile: TilePlan


@dataclass
class BlockPlan:
    layer: LayerSpec
    in_blocks: list
    out_blocks: list
    tiles: list
    entries: list

    @property
    def offchip_ops(self) -> int:
        """Off-chip accumulation additions: ceil(n_in/n_ch)-1 per output sample."""
        extra = len(self.in_blocks) - 1
        return extra * self.layer.n_out * self.layer.out_height * self.layer.out_width


def _chunks(total: int, size: int) -> list[tuple[int, int]]:
    return [(s, min(size, total - s)) for s in range(0, total, size)]


def plan_blocks(layer: LayerSpec, cfg: AccelConfig) -> BlockPlan:
    """Partition a layer into accelerator-sized (in, out, tile) blocks."""
    if layer.stride != 1:
        raise ConfigError("bit-true planning supports stride 1 only")
    mode = cfg.mode_for_kernel(layer.h_k)
    k = layer.h_k
    in_blocks = _chunks(layer.n_in, cfg.n_ch)
    out_blocks = _chunks(layer.n_out, cfg.out_block_channels(mode))

    n_in_block = min(layer.n_in, cfg.n_ch)
    h_max = cfg.h_max(n_in_block)
    if h_max < k:
        raise ConfigError("cached stripe shorter than the kernel")
    n_tiles = math.ceil(layer.h_im / h_max)
    out_h = layer.out_height
    base, rem = divmod(out_h, n_tiles)

    tiles = []
    r0 = 0
    m = (k - 1) // 2
    for t in range(n_tiles):
        rows = base + (1 if t < rem else 0)
        if rows == 0:
            continue
        r1 = r0 + rows
        if layer.padding == ZERO_PAD:
            in_start = max(0, r0 - m)
            in_end = min(layer.h_im, r1 + m)
            tiles.append(TilePlan(r0, rows, in_start, in_end - in_start,
                                  pad_top=(r0 == 0), pad_bottom=(r1 == out_h)))
        else:
            tiles.append(TilePlan(r0, rows, r0, rows + k - 1,
                                  pad_top=True, pad_bottom=True))
        r0 = r1

    entries = [BlockEntry(i0, ic, o0, oc, tile)
               for (o0, oc) in out_blocks
               for (i0, ic) in in_blocks
               for tile in tiles]
    return BlockPlan(layer, in_blocks, out_blocks, tiles, entries)


# ---------------------------------------------------------------------------
# off-chip composition (bit-true path)
# ---------------------------------------------------------------------------

def offchip_accumulate(partials) -> np.ndarray:
    """Exact integer sum of pre-affine block results."""
    partials = list(partials)
    if not partials:
        raise ConfigError("nothing to accumulate")
    total = np.zeros_like(np.asarray(partials[0], dtype=np.int64))
    for p in partials:
        if p.shape != total.shape:
            raise ConfigError("partial sums must share one shape")
        total += np.asarray(p, dtype=np.int64)
    return total


def _affine_finalize(presums: np.ndarray, affine, stats: SaturationStats) -> np.ndarray:
    out = np.empty_like(presums)
    for ch in range(presums.shape[0]):
        s79, n79 = fxp.clamp_raw(presums[ch], Q7_9)
        acc = s79 * int(affine[ch].scale.raw) + (int(affine[ch].bias.raw) << 9)
        res = fxp.shift_truncate_raw(acc, Q10_18.frac_bits - Q2_9.frac_bits)
        res, n29 = fxp.clamp_raw(res, Q2_9)
        stats.q79.add(n79)
        stats.q29.add(n29)
        out[ch] = res
    return out


def evaluate_layer_bit_true(cfg: AccelConfig, layer: LayerSpec, weights: np.ndarray,
                            affine, input_map: FeatureMap
                            ) -> tuple[FeatureMap, CycleReport, SaturationStats]:
    """Run a full layer through the simulator, block by block.

    Input-channel blocks are combined off-chip on the exact pre-affine sums;
    scale/bias narrows once per output sample at the very end, so the result
    is bit-identical to the golden layer regardless of the blocking.
    """
    if (input_map.channels, input_map.height, input_map.width) != (
            layer.n_in, layer.h_im, layer.w_im):
        raise ConfigError("input does not match the layer geometry")
    plan = plan_blocks(layer, cfg)
    out = np.zeros((layer.n_out, layer.out_height, layer.out_width), dtype=np.int64)
    report = CycleReport()
    stats = SaturationStats()

    for (o0, oc) in plan.out_blocks:
        for tile in plan.tiles:
            tile_rows = input_map.raw[:, tile.in_row_start:tile.in_row_start + tile.in_rows]
            partials = []
            for (i0, ic) in plan.in_blocks:
                sub = FeatureMap(tile_rows[i0:i0 + ic], input_map.fmt)
                res = simulate_layer_block(
                    cfg, weights[o0:o0 + oc, i0:i0 + ic], None, sub,
                    layer.padding, apply_affine=False,
                    pad_top=tile.pad_top, pad_bottom=tile.pad_bottom)
                partials.append(res.presums)
                report.merge(res.report)
            presums = offchip_accumulate(partials)
            rows = slice(tile.out_row_start, tile.out_row_start + tile.out_rows)
            out[o0:o0 + oc, rows] = _affine_finalize(presums, affine[o0:o0 + oc], stats)
    return FeatureMap(out, Q2_9), report, stats


# ---------------------------------------------------------------------------
# 11x11 kernel splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubKernel:
    offset: tuple    # (row, col) of the sub-kernel inside the 11x11 support
    weights: np.ndarray


@dataclass(frozen=True)
class SplitKernel:
    """2x(6x6) + 2x(5x5) tiling of an 11x11 kernel.

    The center tap sits in both 6x6 parts; the copies are chosen so the
    duplicate contribution is cancelled by subtracting the summed input
    identities once per output sample (subtract_identity).
    """

    parts: tuple
    subtract_identity: bool = True
    center: tuple = _SPLIT_CENTER


def split_kernel_11(kernel: np.ndarray) -> SplitKernel:
    kernel = np.asarray(kernel, dtype=np.int8)
    if kernel.shape != (11, 11) or not np.all(np.abs(kernel) == 1):
        raise ConfigError("expected an 11x11 kernel of +/-1 weights")
    cy, cx = _SPLIT_CENTER
    top_left = kernel[0:6, 0:6].copy()
    bottom_right = kernel[5:11, 5:11].copy()
    # duplicated center tap: both +1 when the weight is +1, else one of each
    top_left[5, 5] = 1
    bottom_right[0, 0] = kernel[cy, cx]
    bottom_left = kernel[6:11, 0:5].copy()
    top_right = kernel[0:5, 6:11].copy()
    return SplitKernel(parts=(
        SubKernel((0, 0), top_left),
        SubKernel((5, 5), bottom_right),
        SubKernel((6, 0), bottom_left),
        SubKernel((0, 6), top_right),
    ))


def evaluate_split11_presums(cfg: AccelConfig, weights: np.ndarray,
                             input_map: FeatureMap) -> np.ndarray:
    """Exact pre-affine sums of an 11x11 layer via split sub-kernel passes.

    Each sub-kernel pass runs on the datapath simulator; partial sums and
    the identity correction combine off-chip.  Valid-mode output grid
    (h-10, w-10).
    """
    weights = np.asarray(weights, dtype=np.int64)
    n_out, n_in, k, _ = weights.shape
    if k != SPLIT_KERNEL_SIZE:
        raise ConfigError("splitting applies to 11x11 kernels")
    h, w = input_map.height, input_map.width
    out_h, out_w = h - k + 1, w - k + 1
    if out_h < 1 or out_w < 1:
        raise ConfigError("image smaller than kernel")

    splits = [split_kernel_11(weights[o, i]) for o in range(n_out) for i in range(n_in)]
    partials = []
    for p in range(4):
        (r0, c0) = splits[0].parts[p].offset
        s = splits[0].parts[p].weights.shape[0]
        sub_w = np.stack([
            np.stack([splits[o * n_in + i].parts[p].weights for i in range(n_in)])
            for o in range(n_out)]).astype(np.int64)
        sub_view = FeatureMap(
            input_map.raw[:, r0:r0 + out_h + s - 1, c0:c0 + out_w + s - 1],
            input_map.fmt)
        res = simulate_layer_block(cfg, sub_w, None, sub_view, VALID,
                                   apply_affine=False)
        partials.append(res.presums)
    total = offchip_accumulate(partials)
    cy, cx = _SPLIT_CENTER
    identity = input_map.raw[:, cy:cy + out_h, cx:cx + out_w].sum(axis=0)
    return total - identity[None, :, :]


# ---------------------------------------------------------------------------
# analytic network evaluation
# ---------------------------------------------------------------------------

@dataclass
class LayerPerf:
    name: str
    kernel: int
    ops: int
    offchip_ops: int
    seconds: float
    power_w: float
    energy_j: float
    utilization: float
    eta_tile: float
    eta_ch_idle: float
    eta_border: float

    @property
    def theta(self) -> float:
        return self.ops / self.seconds if self.seconds else 0.0


@dataclass
class PerfReport:
    network: str
    arch: str
    v_core: float
    f_hz: float
    p_core_max_w: float
    layers: list = field(default_factory=list)

    @property
    def ops(self) -> int:
        return sum(l.ops for l in self.layers)

    @property
    def seconds(self) -> float:
        return sum(l.seconds for l in self.layers)

    @property
    def energy_j(self) -> float:
        return sum(l.energy_j for l in self.layers)

    @property
    def theta_avg(self) -> float:
        return self.ops / self.seconds if self.seconds else 0.0

    @property
    def fps(self) -> float:
        return 1.0 / self.seconds if self.seconds else 0.0

    @property
    def energy_efficiency(self) -> float:
        """Op/s/W over the whole frame (ops per joule)."""
        return self.ops / self.energy_j if self.energy_j else 0.0

    @property
    def p_avg_w(self) -> float:
        return self.energy_j / self.seconds if self.seconds else 0.0

    @property
    def p_real_norm(self) -> float:
        """Average power over the full-utilization 7x7-mode power."""
        return self.p_avg_w / self.p_core_max_w if self.p_core_max_w else 0.0

    def to_table(self) -> str:
        head = (f"{'layer':<12}{'k':>3}{'GOp':>9}{'ms':>10}{'GOp/s':>9}"
                f"{'mW':>9}{'uJ':>10}{'util':>7}")
        lines = [head, "-" * len(head)]
        for l in self.layers:
            lines.append(
                f"{l.name:<12}{l.kernel:>3}{l.ops / 1e9:>9.3f}"
                f"{l.seconds * 1e3:>10.3f}{l.theta / 1e9:>9.1f}"
                f"{l.power_w * 1e3:>9.3f}{l.energy_j * 1e6:>10.2f}"
                f"{l.utilization:>7.3f}")
        lines.append("-" * len(head))
        lines.append(
            f"{self.network:<12}{'':>3}{self.ops / 1e9:>9.3f}"
            f"{self.seconds * 1e3:>10.3f}{self.theta_avg / 1e9:>9.1f}"
            f"{self.p_avg_w * 1e3:>9.3f}{self.energy_j * 1e6:>10.2f}"
            f"{self.p_real_norm:>7.3f}")
        lines.append("")
        lines.append(self.summary())
        return "\n".join(lines)

    def summary(self) -> str:
        return (f"{self.network} @ {self.v_core:.1f} V: "
                f"EnEff {self.energy_efficiency / 1e12:.1f} TOp/s/W, "
                f"throughput {self.theta_avg / 1e9:.1f} GOp/s, "
                f"{self.fps:.1f} FPS, "
                f"energy {self.energy_j * 1e6:.0f} uJ/frame")

    def to_csv(self) -> str:
        lines = ["layer,kernel,ops,offchip_ops,seconds,throughput_ops,power_w,"
                 "energy_j,utilization,eta_tile,eta_ch_idle,eta_border"]
        for l in self.layers:
            lines.append(
                f"{l.name},{l.kernel},{l.ops},{l.offchip_ops},{l.seconds:.9g},"
                f"{l.theta:.9g},{l.power_w:.9g},{l.energy_j:.9g},"
                f"{l.utilization:.6g},{l.eta_tile:.6g},{l.eta_ch_idle:.6g},"
                f"{l.eta_border:.6g}")
        lines.append(
            f"TOTAL,,{self.ops},,{self.seconds:.9g},{self.theta_avg:.9g},"
            f"{self.p_avg_w:.9g},{self.energy_j:.9g},{self.p_real_norm:.6g},,,")
        return "\n".join(lines)


def _slot_cycles(cfg: AccelConfig, mode, n_in: int, n_out: int) -> tuple[int, int]:
    """(service slots, compute slots) per output pixel over all channel blocks."""
    total = 0
    compute = 0
    for (_, oc) in _chunks(n_out, cfg.out_block_channels(mode)):
        slots = cfg.stream_slots(oc, mode)
        for (_, ic) in _chunks(n_in, cfg.n_ch):
            total += max(ic, slots)
            compute += ic
    return total, compute


def _eval_pass(cfg: AccelConfig, pt: OperatingPoint, layer: LayerSpec,
               kernel: int, px: int) -> tuple[float, float, float, dict]:
    """Cycles/power for one datapath pass of `kernel`-sized filters."""
    mode = cfg.mode_for_kernel(kernel)
    total, compute = _slot_cycles(cfg, mode, layer.n_in, layer.n_out)
    # the stripe is provisioned per block slot (n_ch channels), so partially
    # filled input blocks still tile at the full-block row budget
    e_tile = metrics.eta_tile(layer.h_im, cfg.h_max(cfg.n_ch), kernel)
    e_border = metrics.eta_border(layer)
    cycles = px * total / (e_tile * e_border)
    seconds = cycles / pt.f_hz
    util = compute / total
    power = pt.mode_power(mode.native_size) * (
        pt.idle_fraction + (1.0 - pt.idle_fraction) * util)
    detail = {"eta_tile": e_tile, "eta_border": e_border,
              "eta_ch_idle": util, "utilization": util}
    return seconds, power, seconds * power, detail


def evaluate_layer(cfg: AccelConfig, pt: OperatingPoint, layer: LayerSpec) -> LayerPerf:
    """Analytic time/power/energy for one layer at one operating point."""
    px = layer.out_height * layer.out_width
    ops = metrics.count_ops(layer, use_output_size=True)
    in_blocks = math.ceil(layer.n_in / cfg.n_ch)
    offchip = (in_blocks - 1) * layer.n_out * px

    if layer.h_k <= 7:
        seconds, power, energy, detail = _eval_pass(cfg, pt, layer, layer.h_k, px)
    elif layer.h_k == SPLIT_KERNEL_SIZE:
        # 2x(6x6) + 2x(5x5) sub-kernel passes plus the identity correction
        seconds = energy = 0.0
        details = []
        for sub in (6, 6, 5, 5):
            s, p, e, detail = _eval_pass(cfg, pt, layer, sub, px)
            seconds += s
            energy += e
            details.append(detail)
        power = energy / seconds
        detail = details[0]
        detail["utilization"] = sum(d["utilization"] for d in details) / 4
        detail["eta_ch_idle"] = detail["utilization"]
        offchip += 4 * layer.n_out * px   # partial-sum adds + identity subtract
    else:
        raise ConfigError(f"kernel size {layer.h_k} cannot be planned")

    return LayerPerf(
        name=layer.name, kernel=layer.h_k, ops=ops, offchip_ops=offchip,
        seconds=seconds, power_w=power, energy_j=energy,
        utilization=detail["utilization"], eta_tile=detail["eta_tile"],
        eta_ch_idle=detail["eta_ch_idle"], eta_border=detail["eta_border"])


def evaluate_network(net: NetworkSpec, cfg: AccelConfig,
                     pt: OperatingPoint) -> PerfReport:
    """Per-layer and aggregate performance of a network at an operating point."""
    report = PerfReport(network=net.name, arch=pt.arch, v_core=pt.v_core,
                        f_hz=pt.f_hz, p_core_max_w=pt.p_core_active_w)
    for layer in net.layers:
        report.layers.append(evaluate_layer(cfg, pt, layer))
    return report
