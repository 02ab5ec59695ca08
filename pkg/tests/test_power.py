import pytest

from binaccel.errors import ConfigError
from binaccel.power import (IoModel, OperatingPoint, PowerTable, core_power,
                            device_power, energy_per_frame)


@pytest.fixture(scope="module")
def table():
    return PowerTable.load()


def test_io_model_scaling():
    io = IoModel()
    assert io.p_io(400e6) == pytest.approx(0.328)
    assert io.p_io(480e6) == pytest.approx(0.3936)
    assert io.p_io(0.0) == 0.0


def test_core_power_endpoints(table):
    pt = table.point("bin-8x8", 1.2)
    assert core_power(pt, 1.0) == pytest.approx(39e-3)
    assert core_power(pt, 0.0) == pytest.approx(pt.p_leak_w)
    with pytest.raises(ConfigError):
        core_power(pt, 1.5)


def test_core_power_linear_in_utilization():
    pt = OperatingPoint("x", 1.0, 1e8, 10e-3, p_leak_w=2e-3)
    assert core_power(pt, 0.5) == pytest.approx(6e-3)
    assert core_power(pt, 3 / 32) == pytest.approx(2e-3 + (3 / 32) * 8e-3)


def test_device_power_flagship_point(table):
    pt = table.point("bin-8x8", 1.2)
    p = device_power(pt, table.io, 1.0)
    assert p == pytest.approx(39e-3 + 0.3936)        # ~433 mW
    assert abs(p / 0.434 - 1) < 0.01                 # published 434 mW


def test_device_power_monotone_and_above_core(table):
    for arch in table.archs():
        for v in table.voltages(arch):
            pt = table.point(arch, v)
            lo = device_power(pt, table.io, 0.1)
            hi = device_power(pt, table.io, 0.9)
            assert lo <= hi
            assert hi >= core_power(pt, 0.9)


def test_energy_per_frame():
    assert energy_per_frame(0, 1e9, 1.0) == 0.0
    assert energy_per_frame(1e9, 1e9, 2.0) == pytest.approx(2.0)
    # published network row consistency: 38.2 GOp at 55.9 TOp/s/W is ~684 uJ
    e = energy_per_frame(38.2e9, 18.9e9, 330e-6)
    assert e == pytest.approx(684e-6, rel=0.03)
    with pytest.raises(ConfigError):
        energy_per_frame(1.0, 0.0, 1.0)


def test_calibration_contents(table):
    assert "bin-8x8" in table.archs()
    assert "bin-32x32-flex" in table.archs()
    assert table.voltages("bin-8x8") == [0.6, 0.8, 1.2]
    info = table.arch_info("bin-32x32-flex")
    assert info.area_mge == pytest.approx(1.33)
    assert info.n_ch == 32


def test_flagship_point_values(table):
    pt = table.point("bin-32x32-flex", 0.6)
    assert pt.p_core_active_w == pytest.approx(895e-6)
    assert pt.mode_power(3) == pytest.approx(340e-6)
    assert pt.mode_power(5) == pytest.approx(913.3e-6)
    assert pt.f_max_hz == pytest.approx(27.5e6)
    # default mode scaling when no explicit value is shipped
    pt8 = table.point("bin-8x8", 1.2)
    assert pt8.mode_power(3) == pytest.approx(39e-3 * 18 / 49)
    assert pt8.mode_power(7) == pytest.approx(39e-3)


def test_energy_efficiency_monotone_in_voltage(table):
    for arch in ("bin-8x8", "bin-32x32-flex"):
        effs = []
        for v in table.voltages(arch):
            pt = table.point(arch, v)
            n_ch = table.arch_info(arch).n_ch
            peak = 2 * 49 * n_ch * pt.f_hz
            effs.append((v, peak / pt.p_core_active_w))
        ordered = sorted(effs)
        values = [e for _, e in ordered]
        assert values == sorted(values, reverse=True)


def test_interpolation_warns(table):
    with pytest.warns(UserWarning):
        pt = table.point("bin-32x32-flex", 0.9)
    lo = table.point("bin-32x32-flex", 0.6)
    hi = table.point("bin-32x32-flex", 1.2)
    assert lo.p_core_active_w < pt.p_core_active_w < hi.p_core_active_w
    assert lo.f_hz < pt.f_hz < hi.f_hz
    assert 3 in pt.mode_powers


def test_out_of_range_voltage_rejected(table):
    with pytest.raises(ConfigError):
        table.point("bin-32x32-flex", 0.4)
    with pytest.raises(ConfigError):
        table.point("no-such-arch", 1.2)
