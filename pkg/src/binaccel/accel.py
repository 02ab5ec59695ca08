"""Accelerator configuration: datapath geometry and kernel-size modes.

The datapath natively computes 3x3 (dual), 5x5 (dual) and 7x7 (single)
kernels; 1x1, 2x2, 4x4 and 6x6 run inside the next larger native mode with
the unused window rows/columns zeroed.  Dual modes pack two output channels
per SoP unit and stream two results per cycle.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

MULTIPLIER_SLOTS = 50       # per SoP unit; 7x7 uses 49, the dual modes 2*k^2
DUAL_SLOT_OFFSET = 25       # second filter of a dual pair starts here


@dataclass(frozen=True)
class SopMode:
    """How a layer kernel maps onto a SoP unit."""

    kernel_size: int        # the layer's kernel (1..7)
    native_size: int        # executed window size: 3, 5 or 7
    filters_per_sop: int    # 2 for the dual modes, 1 for 7x7

    def __post_init__(self):
        if self.filters_per_sop * self.native_size ** 2 > MULTIPLIER_SLOTS:
            raise ConfigError("mode exceeds the multiplier slots of a SoP unit")

    @property
    def active_multipliers(self) -> int:
        """Slots that switch: 49 in 7x7 mode, 2*k_native^2 in the dual modes."""
        if self.native_size == 7:
            return 49
        return self.filters_per_sop * self.native_size ** 2

    @property
    def useful_multipliers(self) -> int:
        """Slots contributing non-zero products for this layer kernel."""
        return self.filters_per_sop * self.kernel_size ** 2

    @property
    def is_dual(self) -> bool:
        return self.filters_per_sop == 2


# native window size and filters-per-SoP, keyed by layer kernel size
_DEFAULT_MODE_TABLE = {
    1: (3, 2), 2: (3, 2), 3: (3, 2),
    4: (5, 2), 5: (5, 2),
    6: (7, 1), 7: (7, 1),
}


@dataclass(frozen=True)
class AccelConfig:
    """Hardware parameters of one accelerator variant."""

    n_ch: int = 32                  # channels processed in parallel
    image_mem_rows: int = 1024      # cached rows, shared across input channels
    image_mem_width: int = 7        # stripe width incl. the live streaming column
    scm_col_banks: int = 6
    scm_row_banks: int = 8
    scm_bank_rows: int = 128
    output_streams: int = 2
    mode_table: dict = field(default_factory=lambda: dict(_DEFAULT_MODE_TABLE))

    def __post_init__(self):
        if self.n_ch not in (8, 16, 32):
            raise ConfigError("n_ch must be 8, 16 or 32")
        if self.image_mem_rows < 1:
            raise ConfigError("image memory must hold at least one row")

    def mode_for_kernel(self, k: int) -> SopMode:
        if k not in self.mode_table:
            raise ConfigError(f"kernel size {k} not supported (needs splitting)")
        native, fps = self.mode_table[k]
        return SopMode(k, native, fps)

    def h_max(self, n_in_block: int) -> int:
        """Rows cached per input channel when n_in_block channels share the stripe."""
        if n_in_block < 1:
            raise ConfigError("need at least one input channel")
        return self.image_mem_rows // n_in_block

    def out_block_channels(self, mode: SopMode) -> int:
        """Output channels one block can produce: n_ch SoPs x filters per SoP."""
        return self.n_ch * mode.filters_per_sop

    def stream_slots(self, n_out_block: int, mode: SopMode) -> int:
        """Output-stream cycles needed per pixel for a block of output channels."""
        return -(-n_out_block // mode.filters_per_sop)

    @property
    def filter_bank_bits(self) -> int:
        """Storage for one full block of 7x7 binary kernels."""
        return self.n_ch * self.n_ch * 49

    @property
    def scm_banks(self) -> int:
        return self.scm_col_banks * self.scm_row_banks

    @property
    def image_mem_bits(self) -> int:
        return self.scm_banks * self.scm_bank_rows * 12


def load_accel_config(path: str | Path) -> AccelConfig:
    """Read an accelerator description file (INI syntax, documented keys)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read accelerator config {path}")
    sec = parser["accelerator"]
    mode_table = dict(_DEFAULT_MODE_TABLE)
    if parser.has_section("modes"):
        mode_table = {}
        for key, value in parser["modes"].items():
            native, fps = (int(v) for v in value.split(","))
            mode_table[int(key)] = (native, fps)
    return AccelConfig(
        n_ch=sec.getint("n_ch", 32),
        image_mem_rows=sec.getint("image_mem_rows", 1024),
        image_mem_width=sec.getint("image_mem_width", 7),
        scm_col_banks=sec.getint("scm_col_banks", 6),
        scm_row_banks=sec.getint("scm_row_banks", 8),
        scm_bank_rows=sec.getint("scm_bank_rows", 128),
        output_streams=sec.getint("output_streams", 2),
        mode_table=mode_table,
    )
