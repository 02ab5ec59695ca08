import numpy as np
import pytest

from binaccel import AccelConfig
from binaccel.errors import ConfigError
from binaccel.golden import (VALID, ZERO_PAD, ChannelAffine, FeatureMap,
                             conv_accumulate, conv_layer_golden)
from binaccel.metrics import LayerSpec, count_ops, peak_throughput
from binaccel.netmodel import (NetworkSpec, evaluate_layer_bit_true,
                               evaluate_network, evaluate_split11_presums,
                               load_network, offchip_accumulate,
                               packaged_networks, parse_network, plan_blocks,
                               split_kernel_11)
from binaccel.power import PowerTable


@pytest.fixture(scope="module")
def table():
    return PowerTable.load()


def _pm(rng, shape):
    return rng.choice(np.array([-1, 1], dtype=np.int8), shape)


def _identity_affine(n):
    return [ChannelAffine.identity() for _ in range(n)]


# ---------------------------------------------------------------------------
# block planning
# ---------------------------------------------------------------------------

def test_plan_64_to_64_k3(accel32):
    plan = plan_blocks(LayerSpec("l", 64, 64, 32, 32, 3), accel32)
    assert len(plan.in_blocks) == 2
    assert len(plan.out_blocks) == 1          # 64 fits one dual-mode block
    assert len(plan.tiles) == 1
    assert len(plan.entries) == 2
    assert plan.offchip_ops == 1 * 64 * 32 * 32


def test_plan_3_to_96_k7(accel32):
    layer = LayerSpec("l", 3, 96, 32, 32, 7)
    plan = plan_blocks(layer, accel32)
    assert len(plan.in_blocks) == 1
    assert len(plan.out_blocks) == 3
    mode = accel32.mode_for_kernel(7)
    for (_, oc) in plan.out_blocks:
        assert accel32.stream_slots(oc, mode) == 32   # eta_chIdle 3/32 per block
    assert plan.offchip_ops == 0


def test_plan_single_block(accel32):
    plan = plan_blocks(LayerSpec("l", 32, 32, 32, 32, 7), accel32)
    assert len(plan.entries) == 1


def test_plan_tiles_cover_exactly_once(accel32):
    cfg = AccelConfig(n_ch=8, image_mem_rows=64)      # h_max(8) = 8
    layer = LayerSpec("l", 8, 8, 37, 9, 3)
    plan = plan_blocks(layer, cfg)
    rows = np.zeros(layer.out_height, dtype=int)
    for t in plan.tiles:
        rows[t.out_row_start:t.out_row_start + t.out_rows] += 1
    assert np.all(rows == 1)
    covered = np.zeros(layer.n_in, dtype=int)
    for (i0, ic) in plan.in_blocks:
        covered[i0:i0 + ic] += 1
    assert np.all(covered == 1)


def test_plan_rejects_stride(accel32):
    with pytest.raises(ConfigError):
        plan_blocks(LayerSpec("l", 8, 8, 16, 16, 3, stride=2), accel32)


# ---------------------------------------------------------------------------
# off-chip accumulation
# ---------------------------------------------------------------------------

def test_offchip_single_passthrough():
    x = np.arange(12).reshape(1, 3, 4)
    assert np.array_equal(offchip_accumulate([x]), x)


def test_offchip_two_blocks_match_golden(accel32):
    rng = np.random.default_rng(0)
    raw = rng.integers(-2048, 2048, (64, 10, 10))
    weights = _pm(rng, (4, 64, 3, 3)).astype(np.int64)
    lo = conv_accumulate(raw[:32], weights[:, :32], ZERO_PAD)
    hi = conv_accumulate(raw[32:], weights[:, 32:], ZERO_PAD)
    assert np.array_equal(offchip_accumulate([lo, hi]),
                          conv_accumulate(raw, weights, ZERO_PAD))


def test_offchip_shape_mismatch():
    with pytest.raises(ConfigError):
        offchip_accumulate([np.zeros((1, 2, 2)), np.zeros((1, 3, 2))])
    with pytest.raises(ConfigError):
        offchip_accumulate([])


# ---------------------------------------------------------------------------
# bit-true layer evaluation (blocking + tiling + off-chip composition)
# ---------------------------------------------------------------------------

def test_bit_true_blocked_matches_golden():
    rng = np.random.default_rng(1)
    cfg = AccelConfig(n_ch=8, image_mem_rows=64)
    for padding in (ZERO_PAD, VALID):
        layer = LayerSpec("l", 20, 20, 40, 12, 3, padding)
        raw = rng.integers(-2048, 2048, (20, 40, 12))
        weights = _pm(rng, (20, 20, 3, 3))
        affine = [ChannelAffine.from_real(float(rng.uniform(-2, 2)),
                                          float(rng.uniform(-2, 2)))
                  for _ in range(20)]
        fmap = FeatureMap(raw)
        out, rep, _ = evaluate_layer_bit_true(cfg, layer, weights, affine, fmap)
        ref = conv_layer_golden(fmap, weights, affine, padding)
        assert np.array_equal(out.raw, ref.raw)
        assert rep.max_active_banks <= 7
        assert rep.ops_done == count_ops(layer, use_output_size=True)


def test_bit_true_geometry_guard(accel32):
    layer = LayerSpec("l", 2, 2, 8, 8, 3)
    fmap = FeatureMap(np.zeros((2, 9, 8), dtype=np.int64))
    with pytest.raises(ConfigError):
        evaluate_layer_bit_true(accel32, layer, np.ones((2, 2, 3, 3), dtype=np.int8),
                                _identity_affine(2), fmap)


# ---------------------------------------------------------------------------
# 11x11 kernel splitting
# ---------------------------------------------------------------------------

def test_split_covers_support_once_except_center():
    rng = np.random.default_rng(2)
    split = split_kernel_11(_pm(rng, (11, 11)))
    cover = np.zeros((11, 11), dtype=int)
    for part in split.parts:
        r, c = part.offset
        s = part.weights.shape[0]
        cover[r:r + s, c:c + s] += 1
    assert cover[5, 5] == 2
    cover[5, 5] = 1
    assert np.all(cover == 1)
    assert split.subtract_identity
    assert sorted(p.weights.shape[0] for p in split.parts) == [5, 5, 6, 6]


def test_split_center_weight_rule():
    base = np.ones((11, 11), dtype=np.int8)
    split = split_kernel_11(base)
    copies = [split.parts[0].weights[5, 5], split.parts[1].weights[0, 0]]
    assert copies == [1, 1]                      # +1 center: both copies +1

    base[5, 5] = -1
    split = split_kernel_11(base)
    copies = sorted([int(split.parts[0].weights[5, 5]),
                     int(split.parts[1].weights[0, 0])])
    assert copies == [-1, 1]                     # -1 center: one of each

    with pytest.raises(ConfigError):
        split_kernel_11(np.ones((7, 7), dtype=np.int8))


def test_split_non_center_weights_preserved():
    rng = np.random.default_rng(3)
    k = _pm(rng, (11, 11))
    split = split_kernel_11(k)
    tl = split.parts[0].weights
    assert np.array_equal(tl[:5, :], k[0:6, 0:6][:5, :])
    br = split.parts[1].weights
    assert np.array_equal(br[1:, :], k[5:11, 5:11][1:, :])


def test_split_evaluation_matches_direct_conv(accel32):
    rng = np.random.default_rng(4)
    for _ in range(5):
        n_in = int(rng.integers(1, 3))
        n_out = int(rng.integers(1, 3))
        h = int(rng.integers(11, 16))
        w = int(rng.integers(11, 16))
        raw = rng.integers(-2048, 2048, (n_in, h, w))
        weights = _pm(rng, (n_out, n_in, 11, 11)).astype(np.int64)
        got = evaluate_split11_presums(accel32, weights, FeatureMap(raw))
        assert np.array_equal(got, conv_accumulate(raw, weights, VALID))


def test_split_matches_nested_loop_oracle(accel32):
    rng = np.random.default_rng(5)
    raw = rng.integers(-2048, 2048, (1, 12, 12))
    weights = _pm(rng, (1, 1, 11, 11)).astype(np.int64)
    got = evaluate_split11_presums(accel32, weights, FeatureMap(raw))
    for y in range(2):
        for x in range(2):
            acc = 0
            for a in range(11):
                for b in range(11):
                    acc += int(raw[0, y + a, x + b]) * int(weights[0, 0, a, b])
            assert got[0, y, x] == acc


# ---------------------------------------------------------------------------
# network fixtures
# ---------------------------------------------------------------------------

def test_packaged_networks_load():
    names = packaged_networks()
    assert {"vgg19", "vgg13", "resnet18", "resnet34", "alexnet",
            "bc-cifar10", "bc-svhn"} <= set(names)
    for name in names:
        net = load_network(name)
        assert net.layers, name


def test_network_chain_validation():
    with pytest.raises(ConfigError):
        parse_network("a 3 64 8 8 3 1 zero_pad\nb 32 64 8 8 3 1 zero_pad\n")


def test_unknown_network_rejected():
    with pytest.raises(ConfigError):
        load_network("no-such-net")


def test_vgg19_total_ops():
    net = load_network("vgg19")
    assert net.total_ops == pytest.approx(39.017e9, rel=1e-3)
    assert len(net.layers) == 16


def test_resnet18_total_ops():
    net = load_network("resnet18")
    assert net.total_ops == pytest.approx(3.5886e9, rel=1e-3)


# ---------------------------------------------------------------------------
# analytic evaluation
# ---------------------------------------------------------------------------

def test_ideal_layer_runs_at_peak(accel32, table):
    pt = table.point("bin-32x32-flex", 1.2)
    net = NetworkSpec("ideal", [LayerSpec("l", 32, 32, 32, 32, 7, ZERO_PAD)])
    rep = evaluate_network(net, accel32, pt)
    peak = peak_throughput(accel32, accel32.mode_for_kernel(7), pt.f_hz)
    assert rep.theta_avg == pytest.approx(peak)
    assert rep.layers[0].utilization == 1.0
    assert rep.p_avg_w == pytest.approx(pt.p_core_active_w)


def test_fps_ops_theta_identity(accel32, table):
    pt = table.point("bin-32x32-flex", 0.6)
    for name in ("vgg19", "bc-cifar10"):
        rep = evaluate_network(load_network(name), accel32, pt)
        assert rep.fps * rep.ops == pytest.approx(rep.theta_avg)


def test_energy_identity(accel32, table):
    pt = table.point("bin-32x32-flex", 0.6)
    rep = evaluate_network(load_network("resnet34"), accel32, pt)
    assert rep.energy_j * rep.energy_efficiency == pytest.approx(rep.ops)


def test_alexnet_has_lowest_efficiency(accel32, table):
    pt = table.point("bin-32x32-flex", 0.6)
    effs = {}
    for name in packaged_networks():
        rep = evaluate_network(load_network(name), accel32, pt)
        effs[name] = rep.energy_efficiency
    others = min(v for k, v in effs.items() if k != "alexnet")
    assert effs["alexnet"] < others


def test_utilization_and_p_real_in_range(accel32, table):
    pt = table.point("bin-32x32-flex", 0.6)
    for name in packaged_networks():
        rep = evaluate_network(load_network(name), accel32, pt)
        assert 0 < rep.p_real_norm <= 1.0 + 1e-9
        for layer in rep.layers:
            assert 0 < layer.utilization <= 1.0


def test_oversize_kernel_rejected(accel32, table):
    # 9x9 has no native mode and no splitting rule
    pt = table.point("bin-32x32-flex", 0.6)
    net = parse_network("name bad\nl1 3 8 32 32 9 1 valid\n")
    with pytest.raises(ConfigError):
        evaluate_network(net, accel32, pt)


def test_empty_network(accel32, table):
    pt = table.point("bin-32x32-flex", 0.6)
    rep = evaluate_network(NetworkSpec("empty", []), accel32, pt)
    assert rep.ops == 0 and rep.fps == 0.0 and rep.energy_j == 0.0
    assert "empty" in rep.to_table()


def test_report_formats(accel32, table):
    pt = table.point("bin-32x32-flex", 0.6)
    rep = evaluate_network(load_network("bc-svhn"), accel32, pt)
    table_text = rep.to_table()
    csv_text = rep.to_csv()
    assert "conv1_1" in table_text and "TOTAL" in csv_text
    assert len(csv_text.splitlines()) == len(rep.layers) + 2
