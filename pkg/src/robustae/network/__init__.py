"""Minimal feedforward network engine with exact backpropagation."""

from .layers import (LayerSpec, activation, batchnorm, conv2d, dense, elu, maxpool2d, relu, sigmoid,
                     upsample2d)
from .model import Network, build_network, mse_loss
from .optim import Adam
from .persist import load_network, network_from_bytes, network_to_bytes, save_network

__all__ = [
    "Adam", "LayerSpec", "Network", "activation", "batchnorm", "build_network", "conv2d", "dense",
    "elu", "load_network", "maxpool2d", "mse_loss", "network_from_bytes", "network_to_bytes", "relu",
    "save_network", "sigmoid", "upsample2d",
]
