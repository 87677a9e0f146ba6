"""Matrix I/O, normalisation, and anomaly-task construction.

File formats
------------
CSV   one matrix row per line, comma-separated decimal floats.  Written with
      17 significant digits, so a write/read cycle is exact.
BIN   b"RADM", u32 rows, u32 cols, then rows*cols little-endian float64 in
      row-major order.
Manifest  plain-text ``key=value`` lines: ``x_path``, ``labels_path``
      (optional), ``image_shape`` (optional, ``c,h,w``), ``source``
      (optional).  Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import io
import os
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .network.persist import atomic_write_bytes

BIN_MAGIC = b"RADM"
_BIN_HEADER = struct.Struct("<4sII")
MANIFEST_KEYS = ("x_path", "labels_path", "image_shape", "source")


@dataclass
class LabeledDataset:
    x: np.ndarray
    labels: np.ndarray
    image_shape: tuple | None = None
    source: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.x.ndim != 2:
            raise DataError(f"dataset matrix must be 2-D, got shape {self.x.shape}")
        if self.labels.size != self.x.shape[0]:
            raise DataError(f"{self.labels.size} labels for {self.x.shape[0]} rows")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be 0 (normal) or 1 (anomaly)")
        if self.image_shape is not None:
            self.image_shape = tuple(int(v) for v in self.image_shape)
            if int(np.prod(self.image_shape)) != self.x.shape[1]:
                raise DataError(f"image shape {self.image_shape} does not match {self.x.shape[1]} columns")

    def __len__(self):
        return self.x.shape[0]

    def subset(self, idx, source=None) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.x[idx].copy(), self.labels[idx].copy(), self.image_shape,
                              self.source if source is None else source)

    def pools(self) -> tuple["LabeledDataset", "LabeledDataset"]:
        """Split into (normal rows, anomaly rows)."""
        return (self.subset(np.flatnonzero(self.labels == 0), f"{self.source}[normal]"),
                self.subset(np.flatnonzero(self.labels == 1), f"{self.source}[anomaly]"))


# ---------------------------------------------------------------- matrix I/O

def matrix_to_csv(m) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in m)


def matrix_to_bin(m) -> bytes:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    return _BIN_HEADER.pack(BIN_MAGIC, m.shape[0], m.shape[1]) + np.ascontiguousarray(m, dtype="<f8").tobytes()


def _format_of(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "bin"):
            raise DataError(f"unknown matrix format {fmt!r}")
        return fmt
    return "bin" if os.fspath(path).lower().endswith(".bin") else "csv"


def save_matrix(m, path, fmt: str | None = None):
    fmt = _format_of(path, fmt)
    atomic_write_bytes(path, matrix_to_bin(m) if fmt == "bin" else matrix_to_csv(m).encode())


def parse_csv_matrix(text: str, name: str = "<csv>") -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise DataError(f"{name}: line {lineno}: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"{name}: line {lineno}: expected {width} values, got {len(row)}")
        rows.append(row)
    if not rows:
        raise DataError(f"{name}: empty matrix file")
    m = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise DataError(f"{name}: non-finite values")
    return m


def parse_bin_matrix(buf: bytes, name: str = "<bin>") -> np.ndarray:
    if len(buf) == 0:
        raise DataError(f"{name}: empty matrix file")
    if len(buf) < _BIN_HEADER.size:
        raise DataError(f"{name}: truncated header ({len(buf)} bytes)")
    magic, rows, cols = _BIN_HEADER.unpack_from(buf)
    if magic != BIN_MAGIC:
        raise DataError(f"{name}: magic mismatch at offset 0 (got {magic!r}, expected {BIN_MAGIC!r})")
    expected = _BIN_HEADER.size + 8 * rows * cols
    if len(buf) != expected:
        raise DataError(f"{name}: expected {expected} bytes for {rows}x{cols}, found {len(buf)}")
    m = np.frombuffer(buf, dtype="<f8", offset=_BIN_HEADER.size).reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(m)):
        raise DataError(f"{name}: non-finite values")
    return m


def load_matrix(path, fmt: str | None = None) -> np.ndarray:
    fmt = _format_of(path, fmt)
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if fmt == "bin":
        return parse_bin_matrix(buf, os.fspath(path))
    try:
        text = buf.decode("ascii")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not an ASCII CSV file (byte offset {exc.start})") from None
    return parse_csv_matrix(text, os.fspath(path))


# ---------------------------------------------------------------- manifests

def read_manifest(path) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}: line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in MANIFEST_KEYS:
            raise DataError(f"{path}: line {lineno}: unknown manifest key {key!r}")
        out[key] = value
    if "x_path" not in out:
        raise DataError(f"{path}: manifest lacks x_path")
    return out


def load_dataset(manifest_path) -> LabeledDataset:
    info = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    x = load_matrix(resolve(info["x_path"]))
    if "labels_path" in info:
        labels = load_matrix(resolve(info["labels_path"])).ravel()
        if not np.all((labels == 0) | (labels == 1)):
            raise DataError(f"{info['labels_path']}: labels must be 0/1")
    else:
        labels = np.zeros(x.shape[0])
    shape = None
    if info.get("image_shape"):
        try:
            shape = tuple(int(v) for v in info["image_shape"].split(","))
        except ValueError:
            raise DataError(f"bad image_shape {info['image_shape']!r}; expected c,h,w") from None
    return LabeledDataset(x, labels, shape, info.get("source", os.fspath(manifest_path)))


def write_dataset(ds: LabeledDataset, directory, name: str, fmt: str = "csv") -> str:
    """Write ``ds`` as matrix + labels + manifest; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    ext = "bin" if fmt == "bin" else "csv"
    save_matrix(ds.x, os.path.join(directory, f"{name}_x.{ext}"))
    save_matrix(ds.labels.reshape(-1, 1).astype(np.float64), os.path.join(directory, f"{name}_labels.csv"))
    lines = [f"x_path={name}_x.{ext}", f"labels_path={name}_labels.csv"]
    if ds.image_shape:
        lines.append("image_shape=" + ",".join(map(str, ds.image_shape)))
    lines.append(f"source={ds.source or name}")
    manifest = os.path.join(directory, f"{name}.manifest")
    atomic_write_bytes(manifest, ("\n".join(lines) + "\n").encode())
    return manifest


# ---------------------------------------------------------------- transforms

@dataclass
class Scaling:
    lo: np.ndarray | float
    span: np.ndarray | float

    def forward(self, x):
        span = np.where(np.asarray(self.span) > 0, self.span, 1.0)
        return np.where(np.asarray(self.span) > 0, (x - self.lo) / span, 0.0)

    def inverse(self, z):
        return np.asarray(z) * self.span + self.lo


def normalize01(x, per_row: bool = False):
    """Min-max scale to [0, 1], globally (default) or per row.

    A constant matrix (or row) maps to zeros with a warning.
    """
    x = np.asarray(x, dtype=np.float64)
    if per_row:
        lo = x.min(axis=1, keepdims=True)
        span = x.max(axis=1, keepdims=True) - lo
        degenerate = bool(np.any(span == 0))
    else:
        lo = float(x.min()) if x.size else 0.0
        span = (float(x.max()) - lo) if x.size else 0.0
        degenerate = span == 0
    if degenerate:
        warnings.warn("constant input: normalisation maps it to zeros", RuntimeWarning, stacklevel=2)
    rec = Scaling(lo, span)
    return rec.forward(x), rec


def build_mixture(normal: LabeledDataset, anomaly: LabeledDataset, n_normal: int, n_anomaly: int,
                  rng: np.random.Generator) -> LabeledDataset:
    """Draw rows without replacement from each pool and shuffle them together."""
    if n_normal > len(normal) or n_anomaly > len(anomaly):
        raise DataError(f"requested {n_normal}+{n_anomaly} rows from pools of {len(normal)}+{len(anomaly)}")
    if normal.x.shape[1] != anomaly.x.shape[1]:
        raise DataError("normal and anomaly pools have different widths")
    i_norm = rng.choice(len(normal), size=n_normal, replace=False)
    i_anom = rng.choice(len(anomaly), size=n_anomaly, replace=False)
    x = np.vstack([normal.x[i_norm], anomaly.x[i_anom]])
    labels = np.r_[np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    order = rng.permutation(x.shape[0])
    return LabeledDataset(x[order], labels[order], normal.image_shape or anomaly.image_shape,
                          f"mixture({normal.source}:{n_normal}, {anomaly.source}:{n_anomaly})")


def split_inductive(train_pool: LabeledDataset, test_normal: int, test_anomaly: int,
                    rng: np.random.Generator, n_train: int | None = None):
    """Disjoint (train, test): train holds only normal rows; test mixes held-out normals and anomalies."""
    norm_idx = np.flatnonzero(train_pool.labels == 0)
    anom_idx = np.flatnonzero(train_pool.labels == 1)
    if test_normal > norm_idx.size or test_anomaly > anom_idx.size:
        raise DataError(f"need {test_normal} normal / {test_anomaly} anomalous test rows, pool has "
                        f"{norm_idx.size} / {anom_idx.size}")
    norm_idx = rng.permutation(norm_idx)
    test_idx = np.r_[norm_idx[:test_normal], rng.choice(anom_idx, size=test_anomaly, replace=False)]
    rest = norm_idx[test_normal:]
    if n_train is not None:
        if n_train > rest.size:
            raise DataError(f"only {rest.size} normal rows remain for training, {n_train} requested")
        rest = rest[:n_train]
    if rest.size == 0:
        raise DataError("no normal rows left for training")
    train = train_pool.subset(np.sort(rest), f"{train_pool.source}[train]")
    test = train_pool.subset(rng.permutation(test_idx), f"{train_pool.source}[test]")
    return train, test


def inject_salt_pepper(x, rate: float, rng: np.random.Generator):
    """Set each entry to 0 or 1 (equal odds) with probability ``rate``.

    Returns ``(noisy, mask)`` where ``mask`` is 1 on corrupted entries.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0.0 <= rate <= 1.0:
        raise DataError(f"noise rate must lie in [0, 1], got {rate}")
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise DataError("salt-and-pepper noise expects data scaled to [0, 1]")
    hit = rng.random(x.shape) < rate
    salt = (rng.random(x.shape) < 0.5).astype(np.float64)
    return np.where(hit, salt, x), hit.astype(np.float64)
