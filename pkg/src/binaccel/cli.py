"""Command-line front end.

    binaccel simulate --layer fixture.cfg --seed 7 --out runs/x --verify
    binaccel network --network vgg19 --vdd 0.6
    binaccel sweep --arch bin-8x8 --format csv

Exit codes: 0 success, 1 validation/configuration failure, 2 verification
mismatch.  Identical arguments and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import golden, metrics, tensorio
from .accel import AccelConfig, load_accel_config
from .errors import ConfigError
from .fxp import Q2_9, QFormat
from .golden import ChannelAffine, FeatureMap, conv_layer_golden
from .metrics import LayerSpec
from .netmodel import (SPLIT_KERNEL_SIZE, evaluate_layer_bit_true,
                       evaluate_network, evaluate_split11_presums,
                       load_network)
from .power import DEFAULT_ARCH, PowerTable, device_power

PRESUM_FMT = QFormat(22, 9)   # wide enough for any pre-affine sum


def _default_accel_config() -> AccelConfig:
    return AccelConfig()


def _load_accel(path: str | None) -> AccelConfig:
    if path is None:
        return _default_accel_config()
    return load_accel_config(path)


# ---------------------------------------------------------------------------
# layer fixtures
# ---------------------------------------------------------------------------

def _parse_affine_values(text: str, n_out: int):
    vals = [float(v) for v in text.split(",")]
    if len(vals) == 1:
        vals = vals * n_out
    if len(vals) != n_out:
        raise ConfigError("affine value count must be 1 or n_out")
    return vals


def load_layer_fixture(path: Path, seed: int):
    """Read a layer fixture; missing tensors are generated from the seed."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if not parser.read(path):
        raise ConfigError(f"cannot read layer fixture {path}")
    sec = parser["layer"]
    layer = LayerSpec(
        name=sec.get("name", path.stem),
        n_in=sec.getint("n_in"), n_out=sec.getint("n_out"),
        h_im=sec.getint("h_im"), w_im=sec.getint("w_im"),
        h_k=sec.getint("k"), padding=sec.get("padding", "zero_pad"))
    alphas = _parse_affine_values(sec.get("alpha", "1.0"), layer.n_out)
    betas = _parse_affine_values(sec.get("beta", "0.0"), layer.n_out)
    affine = [ChannelAffine.from_real(a, b) for a, b in zip(alphas, betas)]

    rng = np.random.default_rng(seed)
    input_map = None
    weights = None
    if parser.has_section("tensors"):
        tsec = parser["tensors"]
        if "input" in tsec:
            input_map = tensorio.load_feature_map(path.parent / tsec["input"])
        if "weights" in tsec:
            weights = tensorio.load_filters_file(path.parent / tsec["weights"])
    if input_map is None:
        raw = rng.integers(Q2_9.min_raw, Q2_9.max_raw + 1,
                           (layer.n_in, layer.h_im, layer.w_im))
        input_map = FeatureMap(raw, Q2_9)
    if weights is None:
        weights = rng.choice(np.array([-1, 1], dtype=np.int8),
                             (layer.n_out, layer.n_in, layer.h_k, layer.h_k))
    return layer, weights, affine, input_map


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _write_manifest(out_dir: Path, command: str, args: dict, artifacts: list):
    manifest = {"command": command, "arguments": args, "artifacts": sorted(artifacts)}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    cfg = _load_accel(args.config)
    fixture = Path(args.layer)
    layer, weights, affine, input_map = load_layer_fixture(fixture, args.seed)

    if layer.h_k > 7 and layer.h_k != SPLIT_KERNEL_SIZE:
        raise ConfigError(f"kernel size {layer.h_k} is not supported")
    if layer.h_k == SPLIT_KERNEL_SIZE and not args.split:
        raise ConfigError("11x11 kernels need --split")

    if layer.h_k == SPLIT_KERNEL_SIZE:
        presums = evaluate_split11_presums(cfg, weights, input_map)
        output = FeatureMap(presums, PRESUM_FMT)
        report = None
        golden_ok = bool(np.array_equal(
            presums, golden.conv_accumulate(input_map.raw, weights.astype(np.int64),
                                            golden.VALID)))
    else:
        output, report, _ = evaluate_layer_bit_true(cfg, layer, weights, affine, input_map)
        ref = conv_layer_golden(input_map, weights, affine, layer.padding)
        golden_ok = bool(np.array_equal(output.raw, ref.raw))

    artifacts = []
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        tensorio.save_feature_map(out_dir / "output.fxt", output)
        tensorio.save_feature_map(out_dir / "input.fxt", input_map)
        tensorio.save_filters(out_dir / "weights.bwf", weights)
        artifacts += ["output.fxt", "input.fxt", "weights.bwf"]
        if report is not None:
            lines = [f"preload_cycles {report.preload_cycles}",
                     f"compute_cycles {report.compute_cycles}",
                     f"idle_cycles {report.idle_cycles}",
                     f"tile_overlap_cycles {report.tile_overlap_cycles}",
                     f"total_cycles {report.total_cycles}",
                     f"scm_reads {report.scm_reads}",
                     f"scm_writes {report.scm_writes}",
                     f"max_active_banks {report.max_active_banks}",
                     f"pixels_in {report.pixels_in}",
                     f"pixels_out {report.pixels_out}",
                     f"ops_done {report.ops_done}"]
            hist = " ".join(f"{k}:{v}" for k, v in
                            sorted(report.active_bank_histogram.items()))
            lines.append(f"active_bank_histogram {hist}")
            (out_dir / "cycles.txt").write_text("\n".join(lines) + "\n")
            artifacts.append("cycles.txt")
        _write_manifest(out_dir, "simulate",
                        {"layer": str(fixture), "seed": args.seed,
                         "config": args.config, "split": bool(args.split),
                         "verify": bool(args.verify)},
                        artifacts + ["manifest.json"])

    if report is not None:
        print(f"simulated {layer.name}: {report.total_cycles} cycles, "
              f"{report.pixels_out} output samples")
    else:
        print(f"simulated {layer.name} via kernel splitting: "
              f"{output.raw.size} output samples")

    if args.verify:
        if not golden_ok:
            print("error: simulator output differs from the reference model",
                  file=sys.stderr)
            return 2
        print("verify: simulator output matches the reference model")
    if args.expect:
        expected = tensorio.load_feature_map(args.expect)
        if not np.array_equal(expected.raw, output.raw) or expected.fmt != output.fmt:
            print("error: output differs from the expected tensor", file=sys.stderr)
            return 2
        print("verify: output matches the expected tensor")
    return 0


def cmd_network(args) -> int:
    table = PowerTable.load(args.calibration)
    pt = table.point(args.arch, args.vdd)
    info = table.arch_info(args.arch)
    # an explicit config file wins; otherwise geometry follows the arch
    if args.config:
        cfg = load_accel_config(args.config)
    else:
        cfg = AccelConfig(n_ch=info.n_ch or 32)
    net = load_network(args.network)
    report = evaluate_network(net, cfg, pt)
    text = report.to_csv() if args.format == "csv" else report.to_table()
    print(text)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = f"{net.name}_{args.vdd:g}V.{args.format}"
        (out_dir / name).write_text(text + "\n")
        _write_manifest(out_dir, "network",
                        {"network": str(args.network), "vdd": args.vdd,
                         "arch": args.arch, "format": args.format},
                        [name, "manifest.json"])
    return 0


def cmd_sweep(args) -> int:
    table = PowerTable.load(args.calibration)
    info = table.arch_info(args.arch)
    n_ch = info.n_ch or 32
    cfg = AccelConfig(n_ch=n_ch)
    mode = cfg.mode_for_kernel(7)
    volts = ([float(v) for v in args.vdd.split(",")] if args.vdd
             else table.voltages(args.arch))
    rows = []
    for v in sorted(volts, reverse=True):
        pt = table.point(args.arch, v)
        peak = metrics.peak_throughput(cfg, mode, pt.f_hz)
        he_core = peak / pt.p_core_active_w
        he_dev = peak / device_power(pt, table.io, 1.0)
        rows.append((v, pt.f_hz, peak, he_core, he_dev))

    header = "v_core,f_mhz,theta_peak_gops,he_core_tops_w,he_device_tops_w"
    lines = [header]
    for v, f, peak, hc, hd in rows:
        lines.append(f"{v:g},{f / 1e6:.2f},{peak / 1e9:.2f},{hc / 1e12:.2f},{hd / 1e12:.2f}")
    text = "\n".join(lines)
    if args.format == "table":
        text = "\n".join(line.replace(",", "\t") for line in lines)
    print(text)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = f"sweep_{args.arch}.{args.format}"
        (out_dir / name).write_text(text + "\n")
        _write_manifest(out_dir, "sweep",
                        {"arch": args.arch, "vdd": args.vdd, "format": args.format},
                        [name, "manifest.json"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="binaccel",
                                description="binary-weight CNN accelerator model")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="bit-true layer simulation")
    sim.add_argument("--layer", required=True, help="layer fixture file")
    sim.add_argument("--config", help="accelerator config file")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--verify", action="store_true",
                     help="check the simulator against the reference model")
    sim.add_argument("--expect", help="expected output tensor to compare against")
    sim.add_argument("--split", action="store_true",
                     help="allow 11x11 kernels via sub-kernel splitting")
    sim.set_defaults(func=cmd_simulate)

    net = sub.add_parser("network", help="analytic network evaluation")
    net.add_argument("--network", required=True,
                     help="packaged network name or fixture path")
    net.add_argument("--vdd", type=float, default=0.6)
    net.add_argument("--arch", default=DEFAULT_ARCH)
    net.add_argument("--calibration", help="calibration file override")
    net.add_argument("--config", help="accelerator config file")
    net.add_argument("--format", choices=("table", "csv"), default="table")
    net.add_argument("--out", help="output directory")
    net.set_defaults(func=cmd_network)

    sw = sub.add_parser("sweep", help="voltage sweep of peak throughput/efficiency")
    sw.add_argument("--arch", default=DEFAULT_ARCH)
    sw.add_argument("--vdd", help="comma-separated voltages (default: all calibrated)")
    sw.add_argument("--calibration", help="calibration file override")
    sw.add_argument("--format", choices=("csv", "table"), default="csv")
    sw.add_argument("--out", help="output directory")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
