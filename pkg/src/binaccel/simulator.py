"""Functional + cycle-counting model of the accelerator datapath.

The simulator processes one channel block column-major, the way the chip
does: the image stripe memory holds the trailing window columns, the image
bank slides a native-size window down each column, and on a column switch
the incoming column overwrites the obsolete one while the filter-bank
columns circularly shift to stay aligned.  Output values are therefore
computed from physically permuted operands; agreement with the shift-free
golden model is what the equivalence tests check.

Cycle model (one cycle = one input-channel contribution for one output
pixel across all SoP units):

  * preload: m columns of the tile plus m pixels of column m+1, one pixel
    write per cycle (m = (k-1)/2 zero-padded, k-1 valid);
  * steady state: n_in cycles per output pixel, output streaming overlapped;
  * idle: when the output streams need more slots than n_in provides,
    the difference is spent idling (channel idling);
  * stall: input rows that exceed the output rows (tile overlap rows,
    valid-mode border rows) cost extra load cycles unless idle slack
    absorbs them.

Per compute cycle at most native-1 stripe columns are read from the SCM
banks plus one write for the arriving pixel, so bank activity never
exceeds 7.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fxp
from .accel import DUAL_SLOT_OFFSET, MULTIPLIER_SLOTS, AccelConfig, SopMode
from .errors import ConfigError
from .fxp import Q2_9, Q7_9, Q10_18
from .golden import VALID, ZERO_PAD, FeatureMap, SaturationStats


# ---------------------------------------------------------------------------
# cycle report
# ---------------------------------------------------------------------------

@dataclass
class CycleReport:
    """Cycle and memory-activity counters for one simulated block (or a merge)."""

    preload_cycles: int = 0
    compute_cycles: int = 0
    idle_cycles: int = 0
    tile_overlap_cycles: int = 0
    scm_reads: int = 0
    scm_writes: int = 0
    active_bank_histogram: dict = field(default_factory=dict)
    max_active_banks: int = 0
    pixels_in: int = 0
    pixels_out: int = 0
    ops_done: int = 0   # useful ops: 2 * k^2 * n_out * n_in per output pixel

    @property
    def total_cycles(self) -> int:
        return (self.preload_cycles + self.compute_cycles
                + self.idle_cycles + self.tile_overlap_cycles)

    def ops_per_cycle(self) -> float:
        return self.ops_done / self.total_cycles if self.total_cycles else 0.0

    def throughput(self, f_hz: float) -> float:
        """Measured useful throughput in Op/s at clock f_hz."""
        return self.ops_per_cycle() * f_hz

    def _bump_hist(self, active: int, cycles: int) -> None:
        if cycles <= 0:
            return
        self.active_bank_histogram[active] = (
            self.active_bank_histogram.get(active, 0) + cycles)
        if active > self.max_active_banks:
            self.max_active_banks = active

    def merge(self, other: "CycleReport") -> "CycleReport":
        self.preload_cycles += other.preload_cycles
        self.compute_cycles += other.compute_cycles
        self.idle_cycles += other.idle_cycles
        self.tile_overlap_cycles += other.tile_overlap_cycles
        self.scm_reads += other.scm_reads
        self.scm_writes += other.scm_writes
        self.pixels_in += other.pixels_in
        self.pixels_out += other.pixels_out
        self.ops_done += other.ops_done
        for k, v in other.active_bank_histogram.items():
            self._bump_hist(k, v)
        return self


def scm_activity(reports) -> CycleReport:
    """Aggregate SCM bank statistics over any number of block reports."""
    total = CycleReport()
    for r in reports:
        total.merge(r)
    return total


# ---------------------------------------------------------------------------
# filter bank
# ---------------------------------------------------------------------------

class FilterBank:
    """On-chip binary weight storage with column-wise circular shift.

    Kernels are stored as {0,1} bits in a native-size square; a layer kernel
    smaller than the native window occupies the top-left corner, and the
    remaining slots never meet non-zero image data.
    """

    def __init__(self, cfg: AccelConfig, mode: SopMode, bits: np.ndarray):
        self.cfg = cfg
        self.mode = mode
        self._bits = bits            # (n_out, n_in, native, native) uint8
        self.shift_offset = 0

    @property
    def n_out(self) -> int:
        return self._bits.shape[0]

    @property
    def n_in(self) -> int:
        return self._bits.shape[1]

    @property
    def stored_bits(self) -> int:
        k = self.mode.kernel_size
        return self.n_out * self.n_in * k * k

    def shift_columns(self) -> "FilterBank":
        """Circular right shift of every kernel's columns by one position."""
        self.shift_offset = (self.shift_offset + 1) % self.mode.native_size
        return self

    def weights_pm(self) -> np.ndarray:
        """Current +/-1 view in physical column order (after the shifts so far)."""
        dec = self._bits.astype(np.int64) * 2 - 1
        return np.roll(dec, self.shift_offset, axis=3)

    def slot_tensor(self) -> np.ndarray:
        """Weights mapped onto the 50 SoP multiplier slots.

        Returns (n_in, 50, n_out); silenced slots carry weight 0 so they
        contribute exactly nothing to the adder tree.
        """
        n = self.mode.native_size
        w = self.weights_pm()                       # (n_out, n_in, n, n)
        flat = w.reshape(self.n_out, self.n_in, n * n)
        slots = np.zeros((self.n_in, MULTIPLIER_SLOTS, self.n_out), dtype=np.int64)
        for ch in range(self.n_out):
            base = 0 if (ch % self.mode.filters_per_sop) == 0 else DUAL_SLOT_OFFSET
            slots[:, base:base + n * n, ch] = flat[ch]
        return slots


def load_filters(cfg: AccelConfig, weights: np.ndarray) -> FilterBank:
    """Load a block of +/-1 kernels into a fresh filter bank (shift offset 0)."""
    weights = np.asarray(weights, dtype=np.int64)
    if weights.ndim != 4 or weights.shape[2] != weights.shape[3]:
        raise ConfigError("weights must be (n_out, n_in, k, k)")
    if not np.all(np.abs(weights) == 1):
        raise ConfigError("weights must be +/-1")
    n_out, n_in, k, _ = weights.shape
    mode = cfg.mode_for_kernel(k)
    if n_in > cfg.n_ch:
        raise ConfigError(f"block has {n_in} input channels, capacity {cfg.n_ch}")
    if n_out > cfg.out_block_channels(mode):
        raise ConfigError(
            f"block has {n_out} output channels, capacity {cfg.out_block_channels(mode)}")
    n = mode.native_size
    bits = np.zeros((n_out, n_in, n, n), dtype=np.uint8)
    bits[:, :, :k, :k] = ((weights + 1) // 2).astype(np.uint8)
    return FilterBank(cfg, mode, bits)


def shift_weights(bank: FilterBank) -> FilterBank:
    """One column-switch worth of weight permutation (see FilterBank)."""
    return bank.shift_columns()


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

def sop_compute(window: np.ndarray, kernels, mode: SopMode) -> np.ndarray:
    """One SoP unit for one cycle: window against one or two kernels.

    `window` is the native-size pixel square (already zero-masked), and
    `kernels` at most filters_per_sop +/-1 squares in the same physical
    column order.  Returns the exact integer contribution per kernel.
    """
    n = mode.native_size
    window = np.asarray(window, dtype=np.int64)
    if window.shape != (n, n):
        raise ConfigError(f"window must be {n}x{n}")
    if len(kernels) > mode.filters_per_sop:
        raise ConfigError("too many kernels for this mode")
    slot_vec = np.zeros(MULTIPLIER_SLOTS, dtype=np.int64)
    flat = window.reshape(n * n)
    slot_vec[0:n * n] = flat
    if mode.is_dual:
        slot_vec[DUAL_SLOT_OFFSET:DUAL_SLOT_OFFSET + n * n] = flat
    out = np.zeros(len(kernels), dtype=np.int64)
    for i, kern in enumerate(kernels):
        kern = np.asarray(kern, dtype=np.int64)
        base = 0 if i == 0 else DUAL_SLOT_OFFSET
        wslot = np.zeros(MULTIPLIER_SLOTS, dtype=np.int64)
        wslot[base:base + n * n] = kern.reshape(n * n)
        out[i] = int(slot_vec @ wslot)
    return out


def _geometry(k: int, mode: SopMode, h_in: int, w_in: int, padding: str,
              pad_top: bool, pad_bottom: bool):
    """Padded plane geometry and output size for one block/tile."""
    if padding == ZERO_PAD:
        if k % 2 == 0:
            raise ConfigError("zero padding is only defined for odd kernels")
        m = (k - 1) // 2
        pad_t = m if pad_top else 0
        pad_b = m if pad_bottom else 0
        pad_l = pad_r = m
    elif padding == VALID:
        m = k - 1
        pad_t = pad_b = pad_l = pad_r = 0
    else:
        raise ConfigError(f"unknown padding mode {padding!r}")
    out_rows = h_in + pad_t + pad_b - k + 1
    out_cols = w_in + pad_l + pad_r - k + 1
    if out_rows < 1 or out_cols < 1:
        raise ConfigError("image smaller than kernel")
    return m, pad_t, pad_b, pad_l, out_rows, out_cols


def padded_window(image: np.ndarray, y: int, x: int, k: int, mode: SopMode,
                  padding: str = ZERO_PAD, pad_top: bool = True,
                  pad_bottom: bool = True) -> np.ndarray:
    """The native-size window the image bank presents for output pixel (y, x).

    Out-of-image positions and the rows/columns beyond the layer kernel are
    zero, exactly as the zero-padding hardware delivers them.  Columns are
    returned in logical order (no ring permutation) for inspection.
    """
    image = np.asarray(image, dtype=np.int64)
    h_in, w_in = image.shape
    n = mode.native_size
    m, pad_t, _, pad_l, out_rows, out_cols = _geometry(
        k, mode, h_in, w_in, padding, pad_top, pad_bottom)
    if not (0 <= y < out_rows and 0 <= x < out_cols):
        raise ConfigError("output position out of range")
    win = np.zeros((n, n), dtype=np.int64)
    for a in range(k):
        rr = y + a - pad_t
        if not 0 <= rr < h_in:
            continue
        for b in range(k):
            cc = x + b - pad_l
            if 0 <= cc < w_in:
                win[a, b] = image[rr, cc]
    return win


# ---------------------------------------------------------------------------
# block simulation
# ---------------------------------------------------------------------------

@dataclass
class BlockResult:
    output: FeatureMap | None      # Q2.9 stream, None when affine is deferred
    presums: np.ndarray            # exact integer channel sums (n_out, h, w)
    report: CycleReport
    stats: SaturationStats


def simulate_layer_block(cfg: AccelConfig, weights: np.ndarray, affine,
                         input_map: FeatureMap, padding: str = ZERO_PAD, *,
                         apply_affine: bool = True,
                         pad_top: bool = True, pad_bottom: bool = True,
                         trace=None) -> BlockResult:
    """Run one channel block (one tile) through the datapath.

    `pad_top`/`pad_bottom` mark whether the tile's horizontal edges are true
    image borders (zero-padded) or tile cuts (the input then already carries
    the overlap rows).  Output rows must fit the cached stripe
    (image_mem_rows / n_in rows); the network planner tiles accordingly.

    With apply_affine=False the block returns only the exact pre-affine sums
    (the off-chip accumulation path for non-final input-channel blocks).
    """
    weights = np.asarray(weights, dtype=np.int64)
    bank = load_filters(cfg, weights)            # validates shapes/capacity
    mode = bank.mode
    k = mode.kernel_size
    n = mode.native_size
    n_out, n_in = bank.n_out, bank.n_in

    if input_map.fmt != Q2_9:
        raise ConfigError("simulator expects Q2.9 activations")
    if input_map.channels != n_in:
        raise ConfigError("input channel count does not match filters")
    if apply_affine and (affine is None or len(affine) != n_out):
        raise ConfigError("need one (scale, bias) pair per output channel")

    h_in, w_in = input_map.height, input_map.width
    m, pad_t, pad_b, pad_l, out_rows, out_cols = _geometry(
        k, mode, h_in, w_in, padding, pad_top, pad_bottom)
    if out_rows > cfg.h_max(n_in):
        raise ConfigError(
            f"{out_rows} output rows exceed the cached stripe "
            f"({cfg.h_max(n_in)} rows for {n_in} input channels); tile the layer")

    # padded plane plus slack rows for the masked window tail (k < native);
    # right-border padding is implicit (missing slab columns stay zero)
    raw = input_map.raw
    plane = np.pad(raw, ((0, 0), (pad_t, pad_b + (n - k)), (pad_l, 0)))

    presums = np.zeros((n_out, out_rows, out_cols), dtype=np.int64)
    slab = np.zeros((n_in, plane.shape[1], n), dtype=np.int64)

    reads_per_col = np.zeros(out_cols, dtype=np.int64)
    live_per_col = np.zeros(out_cols, dtype=np.int64)

    for x in range(out_cols):
        # stripe memory view: logical window column j holds padded column
        # x+j and sits at ring position (x + j) mod native
        slab[:] = 0
        for j in range(k):
            col = x + j
            if col < plane.shape[2]:
                slab[:, :, (x + j) % n] = plane[:, :, col]
        wins = np.lib.stride_tricks.sliding_window_view(slab, n, axis=1)
        wins = wins[:, :out_rows].transpose(0, 1, 3, 2).copy()  # (n_in, y, row, phys col)
        wins[:, :, k:, :] = 0                                   # masked window rows
        flat = wins.reshape(n_in, out_rows, n * n)

        slot_mat = np.zeros((n_in, out_rows, MULTIPLIER_SLOTS), dtype=np.int64)
        slot_mat[:, :, 0:n * n] = flat
        if mode.is_dual:
            slot_mat[:, :, DUAL_SLOT_OFFSET:DUAL_SLOT_OFFSET + n * n] = flat

        slots = bank.slot_tensor()                              # (n_in, 50, n_out)
        presums[:, :, x] = np.einsum("cys,cso->yo", slot_mat, slots).T

        # SCM accounting: stored real columns in this window, minus the one
        # arriving on the stream (read-through, not from the banks)
        real_cols = sum(1 for j in range(k) if 0 <= x + j - pad_l < w_in)
        live = 1 if 0 <= x + k - 1 - pad_l < w_in else 0
        reads_per_col[x] = max(0, real_cols - live)
        live_per_col[x] = live

        bank.shift_columns()

    # ---- fixed-point output stream -------------------------------------
    stats = SaturationStats()
    output = None
    if apply_affine:
        out_raw = np.empty_like(presums)
        for ch in range(n_out):
            s79, n79 = fxp.clamp_raw(presums[ch], Q7_9)
            acc = s79 * int(affine[ch].scale.raw) + (int(affine[ch].bias.raw) << 9)
            res = fxp.shift_truncate_raw(acc, Q10_18.frac_bits - Q2_9.frac_bits)
            res, n29 = fxp.clamp_raw(res, Q2_9)
            stats.q79.add(n79)
            stats.q29.add(n29)
            out_raw[ch] = res
        output = FeatureMap(out_raw, Q2_9)

    # ---- cycle accounting ----------------------------------------------
    report = _cycle_report(cfg, mode, n_in, n_out, h_in, out_rows, out_cols,
                           w_in, m, padding, reads_per_col, live_per_col)
    report.ops_done = 2 * k * k * n_out * n_in * out_rows * out_cols

    if trace is not None:
        _write_trace(trace, n_in, n_out, out_rows, out_cols, report)

    return BlockResult(output, presums, report, stats)


def _cycle_report(cfg, mode, n_in, n_out, h_in, out_rows, out_cols, w_in,
                  preload_m, padding, reads_per_col, live_per_col) -> CycleReport:
    rep = CycleReport()
    slots = cfg.stream_slots(n_out, mode)
    idle_pp = max(0, slots - n_in)

    pixels_in = n_in * h_in * w_in
    preload = n_in * (preload_m * h_in + preload_m) if preload_m > 0 else 0
    preload = min(preload, pixels_in)           # degenerate tiny images
    compute = n_in * out_rows * out_cols
    idle = idle_pp * out_rows * out_cols

    # loads that neither preload nor the per-pixel service slots can absorb
    loads_during_compute = pixels_in - preload
    stall = max(0, loads_during_compute - (compute + idle))

    # attribute stalled loads: valid-mode border rows first, rest is tile halo
    extra_rows = max(0, h_in - out_rows)
    border_rows = min(extra_rows, mode.kernel_size - 1) if padding == VALID else 0
    if extra_rows > 0 and stall > 0:
        border_stall = stall * border_rows // extra_rows
    else:
        border_stall = stall if padding == VALID else 0
    halo_stall = stall - border_stall

    rep.preload_cycles = preload + border_stall
    rep.compute_cycles = compute
    rep.idle_cycles = idle
    rep.tile_overlap_cycles = halo_stall
    rep.pixels_in = pixels_in
    rep.pixels_out = n_out * out_rows * out_cols

    # SCM: every streamed pixel is written once; reads happen on compute cycles
    rep.scm_writes = pixels_in
    rep.scm_reads = int(np.sum(reads_per_col) * n_in * out_rows)

    rep._bump_hist(1, preload + stall)
    write_budget = pixels_in - preload
    for x in range(out_cols):
        col_cycles = n_in * out_rows
        with_write = min(col_cycles, n_in * h_in) if live_per_col[x] else 0
        with_write = min(with_write, max(0, write_budget))
        write_budget -= with_write
        r = int(reads_per_col[x])
        rep._bump_hist(r + 1, with_write)
        rep._bump_hist(r, col_cycles - with_write)
    rep._bump_hist(0, idle)
    return rep


def _write_trace(trace, n_in, n_out, out_rows, out_cols, report: CycleReport):
    """Line-oriented debug trace: cycle, unit, action."""
    close = False
    if isinstance(trace, (str, bytes)):
        trace = open(trace, "w")
        close = True
    try:
        cycle = 0
        for _ in range(report.preload_cycles):
            trace.write(f"{cycle} image_mem write preload\n")
            cycle += 1
        for x in range(out_cols):
            for y in range(out_rows):
                for c in range(n_in):
                    trace.write(f"{cycle} sop accumulate col={x} row={y} ch={c}\n")
                    cycle += 1
                trace.write(f"{cycle - 1} scale_bias stream col={x} row={y}\n")
            trace.write(f"{cycle - 1} filter_bank shift col={x}\n")
        for _ in range(report.idle_cycles + report.tile_overlap_cycles):
            trace.write(f"{cycle} core idle\n")
            cycle += 1
    finally:
        if close:
            trace.close()
