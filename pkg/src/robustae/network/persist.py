"""Binary model files.  Layout (all integers little-endian):

    b"RADM"            magic
    u16                format version (1)
    u8                 number of input dims, then u32 per dim
    u32                layer count
    per layer:
      u8 kind code, u8 activation code, u8 flags (bit0 bias, bit1 'same' padding)
      8 x u32          in_dim, out_dim, in_channels, out_channels,
                       filter_size, stride, padding, window
      u8               block count
      per block:
        u8 role (0 parameter, 1 state), u8 name length, name (ascii)
        u8 ndim, u32 per dim, then float64 LE values in row-major order

See docs/formats.md for the same description with an example.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from ..errors import DataError
from .layers import ACTIVATIONS, KINDS, LayerSpec, conv_padding
from .model import Network, build_network

MAGIC = b"RADM"
FORMAT_VERSION = 1


def _spec_record(spec: LayerSpec) -> bytes:
    flags = int(spec.bias) | (2 if spec.padding == "same" else 0)
    act = ACTIVATIONS.index(spec.activation) if spec.activation else 255
    pad = conv_padding(spec) if spec.kind == "conv2d" else 0
    return struct.pack("<BBB8I", KINDS.index(spec.kind), act, flags, spec.in_dim, spec.out_dim,
                       spec.in_channels, spec.out_channels, spec.filter_size, spec.stride, pad, spec.window)


def _block(role: int, name: str, arr: np.ndarray) -> bytes:
    raw = name.encode("ascii")
    head = struct.pack("<BB", role, len(raw)) + raw + struct.pack("<B", arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def network_to_bytes(net: Network) -> bytes:
    out = [MAGIC, struct.pack("<HB", FORMAT_VERSION, len(net.input_shape)),
           struct.pack(f"<{len(net.input_shape)}I", *net.input_shape),
           struct.pack("<I", len(net.layers))]
    for layer in net.layers:
        out.append(_spec_record(layer.spec))
        blocks = [(0, n, a) for n, a in layer.params.items()] + [(1, n, a) for n, a in layer.state.items()]
        out.append(struct.pack("<B", len(blocks)))
        out.extend(_block(*b) for b in blocks)
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise DataError(f"model file truncated at offset {self.pos}")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DataError(f"model file truncated at offset {self.pos}")
        data = self.buf[self.pos:self.pos + n]
        self.pos += n
        return data


def network_from_bytes(buf: bytes) -> Network:
    r = _Reader(buf)
    if r.raw(4) != MAGIC:
        raise DataError("not a model file: magic mismatch (expected b'RADM')")
    version, ndim = r.take("<HB")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version}")
    input_shape = r.take(f"<{ndim}I")
    (n_layers,) = r.take("<I")
    specs, blocks = [], []
    for _ in range(n_layers):
        kind, act, flags, in_dim, out_dim, ci, co, f, stride, pad, window = r.take("<BBB8I")
        if kind >= len(KINDS):
            raise DataError(f"unknown layer kind code {kind} at offset {r.pos}")
        specs.append(LayerSpec(KINDS[kind], in_dim=in_dim, out_dim=out_dim, in_channels=ci,
                               out_channels=co, filter_size=f, stride=stride,
                               padding="same" if flags & 2 else pad,
                               activation=ACTIVATIONS[act] if act != 255 else "",
                               window=window, bias=bool(flags & 1)))
        (count,) = r.take("<B")
        layer_blocks = []
        for _ in range(count):
            role, nlen = r.take("<BB")
            name = r.raw(nlen).decode("ascii")
            (bdim,) = r.take("<B")
            shape = r.take(f"<{bdim}I")
            n = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(r.raw(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
            layer_blocks.append((role, name, arr))
        blocks.append(layer_blocks)
    if r.pos != len(buf):
        raise DataError(f"trailing bytes after offset {r.pos} in model file")
    net = build_network(specs, input_shape=input_shape)
    for layer, layer_blocks in zip(net.layers, blocks):
        for role, name, arr in layer_blocks:
            target = layer.state if role else layer.params
            if name not in target or target[name].shape != arr.shape:
                raise DataError(f"block {name!r} does not fit layer {layer.spec.describe()}")
            target[name] = arr.copy()
    return net


def atomic_write_bytes(path, data: bytes):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_network(net: Network, path):
    atomic_write_bytes(path, network_to_bytes(net))


def load_network(path) -> Network:
    with open(path, "rb") as fh:
        return network_from_bytes(fh.read())
