"""Bit-true simulator and performance/energy model of a binary-weight CNN
convolution accelerator."""

from .accel import AccelConfig, SopMode, load_accel_config
from .errors import ConfigError, VerificationError
from .fxp import Q2_9, Q7_9, Q10_18, FxSample, QFormat
from .golden import (BinaryFilter, ChannelAffine, FeatureMap, binarize_det,
                     binarize_sto, conv_layer_golden, hard_sigmoid)
from .metrics import LayerSpec
from .netmodel import NetworkSpec, evaluate_network, load_network
from .power import IoModel, OperatingPoint, PowerTable
from .simulator import CycleReport, simulate_layer_block

__version__ = "0.1.0"

__all__ = [
    "AccelConfig", "SopMode", "load_accel_config",
    "ConfigError", "VerificationError",
    "Q2_9", "Q7_9", "Q10_18", "FxSample", "QFormat",
    "BinaryFilter", "ChannelAffine", "FeatureMap",
    "binarize_det", "binarize_sto", "conv_layer_golden", "hard_sigmoid",
    "LayerSpec", "NetworkSpec", "evaluate_network", "load_network",
    "IoModel", "OperatingPoint", "PowerTable",
    "CycleReport", "simulate_layer_block",
    "__version__",
]
