"""Operating points, power decomposition and energy accounting.

Everything here is table-driven: the shipped calibration file carries the
characterized (voltage, frequency, power, area) corners of the modeled
accelerator variants, and this module only combines them.  Core power
splits into a SoP-array share that silences when a unit idles and a
residual share (memory, image bank, control) that keeps running; I/O pad
power scales linearly with the clock.
"""

from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError

DEFAULT_ARCH = "bin-32x32-flex"


@dataclass(frozen=True)
class IoModel:
    """Pad power, linear in the core clock."""

    p_io_ref_w: float = 0.328
    f_ref_hz: float = 400e6

    def p_io(self, f_hz: float) -> float:
        if f_hz < 0:
            raise ConfigError("frequency must be non-negative")
        return self.p_io_ref_w * f_hz / self.f_ref_hz


@dataclass(frozen=True)
class OperatingPoint:
    """One calibrated (architecture, core voltage) corner."""

    arch: str
    v_core: float
    f_hz: float
    p_core_active_w: float          # full-utilization 7x7-mode core power
    p_leak_w: float = 0.0
    area_mge: float = 0.0
    idle_fraction: float = 0.30     # core share still burning during idle slots
    mode_powers: dict = field(default_factory=dict)   # native kernel -> W
    f_max_hz: float = 0.0           # nominal clock limit, if distinct
    label: str = ""

    def mode_power(self, native_k: int) -> float:
        """Full-utilization core power when running the given native mode."""
        if native_k in self.mode_powers:
            return self.mode_powers[native_k]
        if native_k == 7:
            return self.p_core_active_w
        # default: scale with the switching multiplier slots
        active = {3: 18, 5: 50, 7: 49}[native_k]
        return self.p_core_active_w * active / 49.0


def core_power(pt: OperatingPoint, utilization: float) -> float:
    """Leakage plus the utilization-proportional dynamic share."""
    if not 0.0 <= utilization <= 1.0:
        raise ConfigError("utilization must lie in [0, 1]")
    return pt.p_leak_w + utilization * (pt.p_core_active_w - pt.p_leak_w)


def device_power(pt: OperatingPoint, io: IoModel, utilization: float) -> float:
    """Core power plus the frequency-scaled pad power."""
    return core_power(pt, utilization) + io.p_io(pt.f_hz)


def energy_per_frame(ops: float, theta_sustained: float, power_w: float) -> float:
    """Energy to process `ops` at sustained throughput theta and power P."""
    if ops == 0:
        return 0.0
    if theta_sustained <= 0:
        raise ConfigError("sustained throughput must be positive")
    return (ops / theta_sustained) * power_w


@dataclass
class ArchInfo:
    name: str
    description: str = ""
    n_ch: int = 0
    area_mge: float = 0.0
    idle_fraction: float = 0.30


class PowerTable:
    """Calibrated operating points, loaded from the shipped file or a custom one."""

    def __init__(self, archs: dict, points: dict, io: IoModel):
        self._archs = archs                    # name -> ArchInfo
        self._points = points                  # name -> {v_core: OperatingPoint}
        self.io = io

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PowerTable":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        if path is None:
            text = (resources.files("binaccel") / "data" / "calibration.cfg").read_text()
            parser.read_string(text)
        else:
            if not parser.read(path):
                raise ConfigError(f"cannot read calibration file {path}")

        io = IoModel()
        if parser.has_section("io"):
            io = IoModel(parser["io"].getfloat("p_io_w", 0.328),
                         parser["io"].getfloat("f_ref_hz", 400e6))

        archs: dict[str, ArchInfo] = {}
        points: dict[str, dict[float, OperatingPoint]] = {}
        for section in parser.sections():
            if section.startswith("arch."):
                name = section[len("arch."):]
                sec = parser[section]
                archs[name] = ArchInfo(
                    name=name,
                    description=sec.get("description", ""),
                    n_ch=sec.getint("n_ch", 0),
                    area_mge=sec.getfloat("area_mge", 0.0),
                    idle_fraction=sec.getfloat("idle_power_fraction", 0.30),
                )
        for section in parser.sections():
            if not section.startswith("point."):
                continue
            _, arch, volt = section.split(".", 2)
            sec = parser[section]
            v = float(volt)
            info = archs.get(arch, ArchInfo(arch))
            mode_powers = {}
            for native, key in ((3, "p_dual3_w"), (5, "p_dual5_w")):
                if key in sec:
                    mode_powers[native] = sec.getfloat(key)
            pt = OperatingPoint(
                arch=arch,
                v_core=v,
                f_hz=sec.getfloat("f_hz"),
                p_core_active_w=sec.getfloat("p_core_w"),
                p_leak_w=sec.getfloat("p_leak_w", 0.0),
                area_mge=info.area_mge,
                idle_fraction=info.idle_fraction,
                mode_powers=mode_powers,
                f_max_hz=sec.getfloat("f_max_hz", 0.0),
                label=sec.get("label", ""),
            )
            points.setdefault(arch, {})[v] = pt
        return cls(archs, points, io)

    def archs(self) -> list[str]:
        return sorted(self._points)

    def arch_info(self, arch: str) -> ArchInfo:
        if arch not in self._archs:
            raise ConfigError(f"unknown architecture {arch!r}")
        return self._archs[arch]

    def voltages(self, arch: str) -> list[float]:
        if arch not in self._points:
            raise ConfigError(f"unknown architecture {arch!r}")
        return sorted(self._points[arch])

    def point(self, arch: str, v_core: float) -> OperatingPoint:
        """Exact calibrated point, or a log-linear interpolation with a warning."""
        if arch not in self._points:
            raise ConfigError(f"unknown architecture {arch!r}")
        table = self._points[arch]
        if v_core in table:
            return table[v_core]
        volts = sorted(table)
        if not (volts[0] <= v_core <= volts[-1]):
            raise ConfigError(
                f"{v_core} V outside the calibrated range {volts[0]}-{volts[-1]} V")
        lo = max(v for v in volts if v < v_core)
        hi = min(v for v in volts if v > v_core)
        t = (v_core - lo) / (hi - lo)
        a, b = table[lo], table[hi]
        warnings.warn(
            f"{arch}: {v_core} V is not calibrated; interpolating between "
            f"{lo} V and {hi} V", stacklevel=2)

        def loglin(x, y):
            return math.exp((1 - t) * math.log(x) + t * math.log(y))

        mode_powers = {}
        for native in set(a.mode_powers) & set(b.mode_powers):
            mode_powers[native] = loglin(a.mode_powers[native], b.mode_powers[native])
        return OperatingPoint(
            arch=arch, v_core=v_core,
            f_hz=loglin(a.f_hz, b.f_hz),
            p_core_active_w=loglin(a.p_core_active_w, b.p_core_active_w),
            p_leak_w=0.0 if not (a.p_leak_w and b.p_leak_w) else loglin(a.p_leak_w, b.p_leak_w),
            area_mge=a.area_mge,
            idle_fraction=a.idle_fraction,
            mode_powers=mode_powers,
            label="interpolated",
        )
