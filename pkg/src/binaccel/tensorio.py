"""Text fixture format for fixed-point tensors and binary filter blocks.

Both formats are line-oriented, bit-exact on round trip, and human
inspectable:

    fxtensor v1
    fmt Q2.9
    shape 3 16 16
    <raw integers, whitespace separated, row-major>

    binfilters v1
    shape 4 3 3 3
    <storage bits 0/1, whitespace separated, row-major; 0 -> -1, 1 -> +1>
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fxp import QFormat
from .golden import FeatureMap

_TENSOR_MAGIC = "fxtensor v1"
_FILTER_MAGIC = "binfilters v1"


def _parse_fmt(token: str) -> QFormat:
    if not token.startswith("Q") or "." not in token:
        raise ConfigError(f"bad format tag {token!r}")
    i, f = token[1:].split(".", 1)
    return QFormat(int(i), int(f))


def save_feature_map(path: str | Path, fmap: FeatureMap) -> None:
    with open(path, "w") as fh:
        fh.write(f"{_TENSOR_MAGIC}\n")
        fh.write(f"fmt {fmap.fmt}\n")
        fh.write("shape " + " ".join(str(s) for s in fmap.raw.shape) + "\n")
        flat = fmap.raw.reshape(-1)
        for start in range(0, flat.size, 16):
            fh.write(" ".join(str(int(v)) for v in flat[start:start + 16]) + "\n")


def load_feature_map(path: str | Path) -> FeatureMap:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _TENSOR_MAGIC:
            raise ConfigError(f"{path}: not a tensor fixture")
        fmt = None
        shape = None
        for _ in range(2):
            key, _, rest = fh.readline().strip().partition(" ")
            if key == "fmt":
                fmt = _parse_fmt(rest.strip())
            elif key == "shape":
                shape = tuple(int(t) for t in rest.split())
            else:
                raise ConfigError(f"{path}: unexpected header line {key!r}")
        if fmt is None or shape is None:
            raise ConfigError(f"{path}: missing fmt/shape header")
        data = np.array(fh.read().split(), dtype=np.int64).reshape(shape)
    return FeatureMap(data, fmt)


def save_filters(path: str | Path, weights: np.ndarray) -> None:
    """Store a (n_out, n_in, k, k) +/-1 block in its {0,1} encoding."""
    weights = np.asarray(weights, dtype=np.int64)
    if not np.all(np.abs(weights) == 1):
        raise ConfigError("filter weights must be +/-1")
    bits = (weights + 1) // 2
    with open(path, "w") as fh:
        fh.write(f"{_FILTER_MAGIC}\n")
        fh.write("shape " + " ".join(str(s) for s in weights.shape) + "\n")
        flat = bits.reshape(-1)
        for start in range(0, flat.size, 49):
            fh.write(" ".join(str(int(v)) for v in flat[start:start + 49]) + "\n")


def load_filters_file(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _FILTER_MAGIC:
            raise ConfigError(f"{path}: not a filter fixture")
        key, _, rest = fh.readline().strip().partition(" ")
        if key != "shape":
            raise ConfigError(f"{path}: missing shape header")
        shape = tuple(int(t) for t in rest.split())
        bits = np.array(fh.read().split(), dtype=np.int64).reshape(shape)
    if not np.all((bits == 0) | (bits == 1)):
        raise ConfigError(f"{path}: storage bits must be 0/1")
    return (bits * 2 - 1).astype(np.int8)
