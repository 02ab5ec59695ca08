import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binaccel import AccelConfig
from binaccel.errors import ConfigError
from binaccel.golden import VALID, ZERO_PAD
from binaccel.metrics import (LayerSpec, count_ops, efficiencies, eta_border,
                              eta_ch_idle, eta_tile, peak_throughput,
                              real_throughput)


def _layer(n_in, n_out, h, w, k, padding=VALID, stride=1, name="l"):
    return LayerSpec(name, n_in, n_out, h, w, k, padding, stride)


# ---------------------------------------------------------------------------
# operation counts
# ---------------------------------------------------------------------------

def test_count_ops_hand_example():
    assert count_ops(_layer(1, 1, 4, 4, 3)) == 72     # 2*9*2*2


def test_count_ops_1x1_degenerate():
    layer = _layer(5, 7, 10, 12, 1)
    assert count_ops(layer) == 2 * 5 * 7 * 10 * 12


def test_count_ops_large_layer():
    layer = _layer(64, 64, 224, 224, 3)
    assert count_ops(layer) == 3_633_610_752          # 2*64*64*9*222*222


def test_count_ops_output_size_switch():
    padded = _layer(64, 64, 224, 224, 3, ZERO_PAD)
    assert count_ops(padded, use_output_size=True) == 2 * 64 * 64 * 9 * 224 * 224
    # default stays the literal border-reduced formula
    assert count_ops(padded) == 3_633_610_752


def test_count_ops_strided_output():
    layer = _layer(3, 64, 224, 224, 7, ZERO_PAD, stride=2)
    assert layer.out_height == 112
    assert count_ops(layer, use_output_size=True) == 2 * 3 * 64 * 49 * 112 * 112


def test_count_ops_rejects_small_image():
    with pytest.raises(ConfigError):
        count_ops(_layer(1, 1, 2, 2, 3))


@given(st.integers(1, 64), st.integers(1, 64))
@settings(max_examples=30, deadline=None)
def test_count_ops_symmetric_in_channels(a, b):
    assert count_ops(_layer(a, b, 16, 16, 3)) == count_ops(_layer(b, a, 16, 16, 3))


def test_count_ops_monotone():
    base = count_ops(_layer(4, 4, 16, 16, 3))
    assert count_ops(_layer(5, 4, 16, 16, 3)) > base
    assert count_ops(_layer(4, 5, 16, 16, 3)) > base
    assert count_ops(_layer(4, 4, 17, 16, 3)) > base
    assert count_ops(_layer(4, 4, 16, 16, 5)) > base


# ---------------------------------------------------------------------------
# throughput
# ---------------------------------------------------------------------------

def test_peak_throughput_flagship():
    cfg = AccelConfig(n_ch=32)
    assert peak_throughput(cfg, cfg.mode_for_kernel(7), 480e6) == 1.50528e12


def test_peak_throughput_small_variant():
    cfg = AccelConfig(n_ch=8)
    theta = peak_throughput(cfg, cfg.mode_for_kernel(7), 480e6)
    assert theta == 376.32e9
    assert abs(theta / 377e9 - 1) < 0.002


def test_peak_throughput_dual_5x5():
    cfg = AccelConfig(n_ch=32)
    assert peak_throughput(cfg, cfg.mode_for_kernel(5), 480e6) == 1.536e12


def test_peak_throughput_embedded_kernels_derated():
    cfg = AccelConfig(n_ch=32)
    # a 6x6 kernel cycles at the 7x7 rate but only 36 slots do useful work
    full = peak_throughput(cfg, cfg.mode_for_kernel(7), 1.0)
    emb = peak_throughput(cfg, cfg.mode_for_kernel(6), 1.0)
    assert emb / full == 36 / 49

    with pytest.raises(ConfigError):
        peak_throughput(cfg, cfg.mode_for_kernel(7), 0.0)


# ---------------------------------------------------------------------------
# efficiency factors
# ---------------------------------------------------------------------------

def test_eta_tile_single_tile():
    assert eta_tile(32, 32, 7) == 1.0


def test_eta_tile_values():
    assert eta_tile(224, 32, 7) == pytest.approx(224 / 260)    # 0.8615
    assert eta_tile(224, 32, 3) == pytest.approx(224 / 236)    # 0.9492


def test_eta_tile_requires_capacity():
    with pytest.raises(ConfigError):
        eta_tile(224, 4, 7)


def test_eta_ch_idle():
    assert eta_ch_idle(32, 32) == 1.0
    assert eta_ch_idle(3, 32) == pytest.approx(0.09375)
    assert eta_ch_idle(64, 32) == 1.0      # clamped
    with pytest.raises(ConfigError):
        eta_ch_idle(0, 32)


def test_eta_border():
    assert eta_border(_layer(1, 1, 32, 32, 7, ZERO_PAD)) == 1.0
    assert eta_border(_layer(1, 1, 32, 32, 7, VALID)) == pytest.approx(1 - (6 / 32) ** 2)
    assert eta_border(_layer(1, 1, 32, 32, 1, VALID)) == 1.0


def test_real_throughput():
    assert real_throughput(100.0, [1.0, 1.0]) == 100.0
    assert real_throughput(1505e9, [0.86, 1.0, 1.0]) == pytest.approx(1294.3e9)
    assert real_throughput(1505e9, [3 / 32]) == pytest.approx(141.1e9, rel=1e-3)
    with pytest.raises(ConfigError):
        real_throughput(1.0, [1.2])
    with pytest.raises(ConfigError):
        real_throughput(1.0, [0.0])


def test_efficiencies():
    he, ha = efficiencies(1.50528e12, 1.0, 1.33)
    assert ha == pytest.approx(1131.8e9, rel=1e-3)
    he, _ = efficiencies(54.8e9, 895e-6, 1.0)
    assert he == pytest.approx(61.23e12, rel=1e-3)
    he, _ = efficiencies(377e9, 39.3e-3, 1.0)
    assert he == pytest.approx(9.59e12, rel=1e-3)
    with pytest.raises(ConfigError):
        efficiencies(1.0, 0.0, 1.0)


def test_eta_factors_stay_in_unit_interval():
    for h in (7, 32, 224, 1000):
        for hmax in (32, 64, 1024):
            for k in (1, 3, 5, 7):
                assert 0 < eta_tile(h, hmax, k) <= 1
    for a in (1, 3, 32, 64):
        for b in (1, 16, 32, 64):
            assert 0 < eta_ch_idle(a, b) <= 1


def test_layer_efficiency_report():
    from binaccel.metrics import layer_efficiency

    cfg = AccelConfig(n_ch=32)
    # balanced zero-padded layer that fits the stripe runs at peak
    ideal = layer_efficiency(cfg, _layer(32, 32, 32, 32, 7, ZERO_PAD), 480e6,
                             power_w=152.58e-3, area_mge=1.33)
    assert ideal.theta_real == ideal.theta_peak == 1.50528e12
    assert ideal.eta_tile == ideal.eta_ch_idle == ideal.eta_border == 1.0
    assert ideal.h_a == pytest.approx(1.13179e12, rel=1e-4)

    # first-layer shape: channel idling dominates
    first = layer_efficiency(cfg, _layer(3, 64, 224, 224, 7, ZERO_PAD), 480e6)
    assert first.eta_ch_idle == pytest.approx(3 / 32)
    assert first.eta_tile == pytest.approx(224 / 260)
    assert first.theta_real == pytest.approx(
        first.theta_peak * first.eta_tile * first.eta_ch_idle)
    assert first.theta_real <= first.theta_peak
    assert first.h_e == 0.0 and first.h_a == 0.0
