"""Network layouts used by the experiment runner.

``dense``    d - width - hidden - width - d with ELU hidden units and a linear
             output, for flat feature vectors.
``conv``     the digit-image encoder: two (conv 3x3, 32 filters, stride 1,
             ReLU, 2x2 max-pool) blocks, mirrored by upsample + conv in the
             decoder; the last conv projects back to the input channels.
``conv-bn``  the colour-image encoder: conv-batchnorm-ELU layers with
             (16, 16, 32, 32) filters, pooling after the second and fourth,
             mirrored in the decoder.

Decoders end in a linear layer so that squared loss on mostly-dark images
does not saturate the output units.
"""

from __future__ import annotations

from .errors import ConfigError
from .network import activation, batchnorm, conv2d, dense, maxpool2d, upsample2d

ARCHITECTURES = ("auto", "dense", "conv", "conv-bn")


def dense_specs(input_dim: int, hidden: int, width: int | None = None):
    if hidden < 1:
        raise ConfigError(f"hidden size must be >= 1, got {hidden}")
    width = width or max(2 * hidden, input_dim)
    return [dense(input_dim, width), activation("elu"),
            dense(width, hidden), activation("elu"),
            dense(hidden, width), activation("elu"),
            dense(width, input_dim)]


def conv_specs(channels: int, filters: int = 32):
    return [conv2d(channels, filters, 3), activation("relu"), maxpool2d(2),
            conv2d(filters, filters, 3), activation("relu"), maxpool2d(2),
            upsample2d(2), conv2d(filters, filters, 3), activation("relu"),
            upsample2d(2), conv2d(filters, channels, 3)]


def conv_bn_specs(channels: int, widths=(16, 16, 32, 32)):
    def block(cin, cout):
        return [conv2d(cin, cout, 3), batchnorm(), activation("elu")]

    a, b, c, d = widths
    enc = block(channels, a) + block(a, b) + [maxpool2d(2)] + block(b, c) + block(c, d) + [maxpool2d(2)]
    dec = ([upsample2d(2)] + block(d, d) + block(d, c) + [upsample2d(2)]
           + block(c, b) + block(b, a) + [conv2d(a, channels, 3)])
    return enc + dec


def specs_for(arch: str, input_dim: int, image_shape=None, hidden: int = 64, filters: int = 32):
    """Pick a layout; ``auto`` means conv for image datasets and dense otherwise."""
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {arch!r}; choose from {', '.join(ARCHITECTURES)}")
    if arch == "auto":
        arch = "conv" if image_shape is not None else "dense"
    if arch == "dense":
        return dense_specs(input_dim, hidden), None
    if image_shape is None:
        raise ConfigError(f"architecture {arch!r} needs a dataset with image_shape")
    c, h, w = image_shape
    if h % 4 or w % 4:
        raise ConfigError(f"conv layouts pool twice by 2; image {h}x{w} must be divisible by 4")
    specs = conv_specs(c, filters) if arch == "conv" else conv_bn_specs(c)
    return specs, tuple(image_shape)
