import numpy as np
import pytest

from binaccel import AccelConfig, ChannelAffine, FeatureMap
from binaccel.golden import VALID, ZERO_PAD


def random_layer_case(rng, max_ch=8, max_img=16):
    """One randomized small layer: geometry, tensors and affine parameters."""
    k = int(rng.integers(1, 8))
    if k % 2 == 1:
        padding = ZERO_PAD if rng.random() < 0.5 else VALID
    else:
        padding = VALID          # asymmetric padding is rejected for even kernels
    n_in = int(rng.integers(1, max_ch + 1))
    n_out = int(rng.integers(1, max_ch + 1))
    h = int(rng.integers(k, max_img + 1))
    w = int(rng.integers(k, max_img + 1))
    raw = rng.integers(-2048, 2048, (n_in, h, w))
    weights = rng.choice(np.array([-1, 1], dtype=np.int8), (n_out, n_in, k, k))
    affine = [ChannelAffine.from_real(float(rng.uniform(-2.0, 2.0)),
                                      float(rng.uniform(-2.0, 2.0)))
              for _ in range(n_out)]
    return k, padding, FeatureMap(raw), weights, affine


@pytest.fixture(scope="session")
def accel32():
    return AccelConfig()
