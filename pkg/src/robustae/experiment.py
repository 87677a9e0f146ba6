"""Experiment runner: config parsing, per-seed task construction, fitting, and reports.

A config is a flat ``key=value`` text file (``#`` starts a comment).  Command
line overrides use the same keys.  Every key is validated before any data is
touched; unknown keys are an error.

Per seed the runner builds the task (a fresh mixture draw, an inductive
split, or a noise injection, depending on ``mode``), fits the method, scores
rows by squared reconstruction error, and evaluates the metrics.  Outputs go
to ``out``:

    config.txt            resolved configuration
    metrics.csv           one row per seed (status, metrics, diagnostics)
    summary.csv           mean and standard error of each metric over seeds
    top_anomalies.csv     the ``top_k`` highest-scored rows for every seed
    seed<S>_scores.csv    row, label, score
    seed<S>_trace.csv     objective trace (cae, rcae)
    seed<S>_model.radm    trained network (ae, cae, rcae)
    seed<S>_noise.bin     learned noise matrix (rcae)
    pgm/                  top anomalous rows as images (``pgm=true``)

Every file is written atomically.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .architectures import ARCHITECTURES, specs_for
from .data import (LabeledDataset, Scaling, build_mixture, inject_salt_pepper, load_dataset,
                   matrix_to_bin, normalize01, split_inductive)
from .errors import ConfigError, DataError, RobustAEError
from .linalg import NONZERO_TOL
from .metrics import aggregate_runs, evaluate, ranking
from .network import Network
from .network.persist import atomic_write_bytes, network_to_bytes
from .trainer import RobustConfig, score, trace_csv, train_rcae

log = logging.getLogger(__name__)

METHODS = ("pca", "ae", "cae", "rcae", "rpca-convex", "rpca-factored", "drmf")
MODES = ("detect", "inductive", "denoise")
TRANSDUCTIVE = ("rpca-convex", "rpca-factored", "drmf")
NORMALIZATIONS = ("global", "row", "none")
METRIC_KEYS = ("auprc", "auroc", "p_at_10")
SWEEP_PARAMS = ("lambda", "k", "hidden", "mu")
METRICS_COLUMNS = ("seed", "status", "rows", "anomalies") + METRIC_KEYS + (
    "nnz", "objective", "alternations", "mse_masked", "mse_noisy_masked", "mse_all")


# ---------------------------------------------------------------- values

def parse_float(text) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    return float(t)


def _opt(parse):
    def inner(text):
        t = str(text).strip()
        return None if t.lower() in ("", "none", "auto") else parse(t)
    return inner


def _bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    t = str(text).strip()
    if not t:
        return None
    return [int(v) for v in t.replace(" ", "").split(",") if v]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "inf" if value == math.inf else repr(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    method: str = "rcae"
    mode: str = "detect"
    manifest: str = ""
    out: str = "results"
    lam: float = 0.5
    mu: float = 1e-3
    k: int = 64
    hidden: int = 64
    lr: float = 1e-3
    epochs: int = 10
    batch: int = 32
    alternations: int = 10
    objective_tol: float = 1e-4
    init: str = "scaled"
    init_scale: float = 1.0
    arch: str = "auto"
    ae_arch: str = "shallow"
    filters: int = 32
    seeds: list | None = None
    base_seed: int = 0
    n_seeds: int = 20
    n_normal: int | None = None
    n_anomaly: int | None = None
    test_normal: int | None = None
    test_anomaly: int | None = None
    n_train: int | None = None
    noise_rate: float = 0.1
    e: int | None = None
    rpca_lambda: float | None = None
    normalize: str = "global"
    top_k: int = 10
    pgm: bool = False
    save_model: bool = True

    def seed_list(self) -> list[int]:
        if self.seeds:
            return list(self.seeds)
        return list(range(self.base_seed, self.base_seed + self.n_seeds))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def validate(self, check_paths: bool = True) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.mode == "inductive" and self.method in TRANSDUCTIVE:
            raise ConfigError(f"method {self.method} is transductive and cannot score unseen rows; "
                              "inductive mode supports pca, ae, cae, rcae")
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown arch {self.arch!r}; choose from {', '.join(ARCHITECTURES)}")
        if self.ae_arch not in ("shallow", "deep"):
            raise ConfigError("ae_arch must be shallow or deep")
        if self.normalize not in NORMALIZATIONS:
            raise ConfigError(f"normalize must be one of {', '.join(NORMALIZATIONS)}")
        if self.init not in ("scaled", "unit"):
            raise ConfigError("init must be scaled or unit")
        if not (self.lam >= 0) or math.isnan(self.lam):
            raise ConfigError(f"lambda must be >= 0 (inf allowed), got {self.lam}")
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ConfigError(f"mu must be finite and >= 0, got {self.mu}")
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ConfigError(f"lr must be finite and >= 0, got {self.lr}")
        for name in ("k", "hidden", "batch", "alternations", "filters", "top_k", "n_seeds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not self.objective_tol > 0:
            raise ConfigError("objective_tol must be positive")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigError("noise_rate must lie in [0, 1]")
        for name in ("n_normal", "n_anomaly", "test_normal", "test_anomaly", "n_train", "e"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be >= 0")
        if (self.n_normal is None) != (self.n_anomaly is None):
            raise ConfigError("n_normal and n_anomaly must be given together")
        if self.rpca_lambda is not None and not self.rpca_lambda > 0:
            raise ConfigError("rpca_lambda must be positive")
        if self.seeds is not None and not self.seeds:
            raise ConfigError("seeds list is empty")
        if check_paths:
            if not self.manifest:
                raise ConfigError("manifest is required")
            if not os.path.isfile(self.manifest) or not os.access(self.manifest, os.R_OK):
                raise ConfigError(f"manifest {self.manifest!r} is not a readable file")
        return self

    def to_text(self) -> str:
        lines = []
        for key, attr in _KEYS.items():
            lines.append(f"{key}={_fmt(getattr(self, attr))}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    "method": str, "mode": str, "manifest": str, "out": str,
    "lambda": parse_float, "mu": parse_float, "k": int, "hidden": int, "lr": parse_float,
    "epochs": int, "batch": int, "alternations": int, "objective_tol": parse_float,
    "init": str, "init_scale": parse_float, "arch": str, "ae_arch": str, "filters": int,
    "seeds": _int_list, "base_seed": int, "n_seeds": int,
    "n_normal": _opt(int), "n_anomaly": _opt(int), "test_normal": _opt(int),
    "test_anomaly": _opt(int), "n_train": _opt(int), "noise_rate": parse_float,
    "e": _opt(int), "rpca_lambda": _opt(parse_float), "normalize": str,
    "top_k": int, "pgm": _bool, "save_model": _bool,
}
_KEYS = {key: ("lam" if key == "lambda" else key) for key in _PARSERS}
CONFIG_KEYS = tuple(_PARSERS)


def config_from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from string values; keys may use ``-`` or ``_``."""
    cfg = base or ExperimentConfig()
    changes = {}
    for raw_key, raw in values.items():
        key = raw_key.strip().replace("-", "_")
        if key == "lam":
            key = "lambda"
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {raw_key!r}")
        try:
            changes[_KEYS[key]] = _PARSERS[key](raw) if isinstance(raw, str) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from None
    return cfg.replace(**changes)


def parse_config_text(text: str, name: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{name}: line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{name}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file (optional), apply overrides, and resolve the manifest path."""
    values = {}
    base_dir = None
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values = parse_config_text(text, os.fspath(path))
        base_dir = os.path.dirname(os.path.abspath(path))
    cfg = config_from_mapping(values)
    if base_dir and cfg.manifest and not os.path.isabs(cfg.manifest):
        cfg = cfg.replace(manifest=os.path.join(base_dir, cfg.manifest))
    if overrides:
        cfg = config_from_mapping(overrides, cfg)
    return cfg


# ---------------------------------------------------------------- tasks

@dataclass
class Task:
    train: LabeledDataset
    test: LabeledDataset
    clean: np.ndarray | None = None
    mask: np.ndarray | None = None


def _scale(cfg, train_x, other=None):
    if cfg.normalize == "none":
        return train_x, other
    if cfg.normalize == "row":
        z = normalize01(train_x, per_row=True)[0]
        return z, (None if other is None else normalize01(other, per_row=True)[0])
    z, rec = normalize01(train_x)
    return z, (None if other is None else Scaling(rec.lo, rec.span).forward(other))


def build_task(cfg: ExperimentConfig, ds: LabeledDataset, rng: np.random.Generator) -> Task:
    if cfg.mode == "inductive":
        n_norm = int(np.sum(ds.labels == 0))
        test_normal = cfg.test_normal if cfg.test_normal is not None else max(1, n_norm // 10)
        test_anomaly = cfg.test_anomaly if cfg.test_anomaly is not None else int(ds.labels.sum())
        train, test = split_inductive(ds, test_normal, test_anomaly, rng, cfg.n_train)
        xtr, xte = _scale(cfg, train.x, test.x)
        train = LabeledDataset(xtr, train.labels, train.image_shape, train.source)
        test = LabeledDataset(xte, test.labels, test.image_shape, test.source)
        return Task(train, test)
    if cfg.n_normal is not None:
        normal = ds.subset(np.flatnonzero(ds.labels == 0), f"{ds.source}[normal]")
        anomaly = ds.subset(np.flatnonzero(ds.labels == 1), f"{ds.source}[anomaly]")
        ds = build_mixture(normal, anomaly, cfg.n_normal, cfg.n_anomaly, rng)
    x = _scale(cfg, ds.x)[0]
    if cfg.mode == "denoise":
        if cfg.normalize == "none" and x.size and (x.min() < 0 or x.max() > 1):
            raise DataError("denoise mode needs data in [0, 1]; set normalize=global or row")
        noisy, mask = inject_salt_pepper(x, cfg.noise_rate, rng)
        task_ds = LabeledDataset(noisy, ds.labels, ds.image_shape, ds.source)
        return Task(task_ds, task_ds, clean=x, mask=mask)
    task_ds = LabeledDataset(x, ds.labels, ds.image_shape, ds.source)
    return Task(task_ds, task_ds)


# ---------------------------------------------------------------- fitting

@dataclass
class Fit:
    reconstruction: np.ndarray
    network: Network | None = None
    noise: np.ndarray | None = None
    trace: list | None = None
    projection: tuple | None = None

    def score(self, x) -> np.ndarray:
        if self.network is not None:
            return score(self.network, x)
        if self.projection is not None:
            v, mean = self.projection
            xc = np.asarray(x, dtype=np.float64) - mean
            r = xc - (xc @ v) @ v.T
            return np.sum(r * r, axis=1)
        raise ConfigError("this method is transductive and cannot score new rows")


def robust_config(cfg: ExperimentConfig, seed: int, lam: float | None = None) -> RobustConfig:
    return RobustConfig(lam=cfg.lam if lam is None else lam, mu=cfg.mu, epochs_per_theta_step=cfg.epochs,
                        max_alternations=cfg.alternations, objective_tol=cfg.objective_tol,
                        batch_size=cfg.batch, learning_rate=cfg.lr, seed=seed,
                        init_scale=cfg.init_scale, init=cfg.init)


def fit_method(cfg: ExperimentConfig, data: LabeledDataset, seed: int) -> Fit:
    x = data.x
    m = cfg.method
    if m in ("cae", "rcae"):
        specs, shape = specs_for(cfg.arch, x.shape[1], data.image_shape, cfg.hidden, cfg.filters)
        lam = math.inf if m == "cae" else cfg.lam
        model = train_rcae(x, specs, robust_config(cfg, seed, lam), input_shape=shape)
        return Fit(model.reconstruct(x), model.network, model.noise, model.trace)
    if m == "ae":
        _, net, _ = baselines.fit_plain_ae(x, cfg.hidden, epochs=cfg.epochs * cfg.alternations,
                                           batch_size=cfg.batch, learning_rate=cfg.lr, mu=cfg.mu,
                                           seed=seed, deep=cfg.ae_arch == "deep", init=cfg.init)
        return Fit(net.predict(x), net)
    if m == "pca":
        res = baselines.fit_pca_svd(x, min(cfg.k, x.shape[1]))
        return Fit(res.s, projection=(res.extra["components"], res.extra["mean"]))
    if m == "rpca-convex":
        res = baselines.fit_rpca_convex(x, cfg.rpca_lambda)
    elif m == "rpca-factored":
        res = baselines.fit_rpca_factored(x, cfg.k, cfg.lam, cfg.mu)
    else:
        e = cfg.e if cfg.e is not None else int(round(0.01 * x.size))
        res = baselines.fit_drmf(x, cfg.k, e)
    return Fit(res.s, noise=res.n)


# ---------------------------------------------------------------- outputs

def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue().encode()


def scores_csv(scores, labels) -> bytes:
    return _csv_bytes(("row", "label", "score"),
                      ((i, int(lab), float(s)) for i, (lab, s) in enumerate(zip(labels, scores))))


def read_scores_csv(path):
    """Return ``(scores, labels)`` from a per-seed scores file."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read scores file {path}: {exc}") from None
    if not rows or [c.strip() for c in rows[0]] != ["row", "label", "score"]:
        raise DataError(f"{path}: expected header row,label,score")
    labels, scores = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
        try:
            labels.append(int(row[1]))
            scores.append(float(row[2]))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: bad number") from None
    return np.array(scores), np.array(labels, dtype=np.int64)


def pgm_bytes(image: np.ndarray) -> bytes:
    """Binary greyscale PGM of a (h, w) array in [0, 1]; channels are averaged first."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=0)
    h, w = img.shape
    pix = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode() + pix.tobytes()


def summarize(rows: list[dict]) -> dict:
    """``metric -> (mean, stderr, runs)`` over seeds with a value for that metric."""
    out = {}
    for key in METRIC_KEYS + ("nnz", "mse_masked", "mse_noisy_masked", "mse_all"):
        vals = [r[key] for r in rows if r.get(key) is not None]
        if not vals:
            continue
        if len(vals) == 1:
            out[key] = (float(vals[0]), math.nan, 1)
        else:
            mean, se = aggregate_runs(vals)
            out[key] = (mean, se, len(vals))
    return out


@dataclass
class ReportBundle:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    top: dict = field(default_factory=dict)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]

    def format_summary(self) -> str:
        lines = [f"{self.config.method} / {self.config.mode}: {len(self.rows) - len(self.failures)}"
                 f" of {len(self.rows)} seeds ok"]
        for key, (mean, se, runs) in self.summary.items():
            se_txt = "n/a" if math.isnan(se) else f"{se:.4f}"
            lines.append(f"  {key:<17} {mean:.4f} +- {se_txt}  (runs={runs})")
        return "\n".join(lines)


class _Writer:
    def __init__(self, out):
        self.out = out
        self.files = []

    def write(self, name, data: bytes):
        path = os.path.join(self.out, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        atomic_write_bytes(path, data)
        self.files.append(path)
        return path


def _run_seed(cfg, ds, seed, writer):
    row = {"seed": seed, "status": "ok"}
    rng = np.random.default_rng(seed)
    task = build_task(cfg, ds, rng)
    t0 = time.perf_counter()
    fit = fit_method(cfg, task.train, seed)
    scores = fit.score(task.test.x) if cfg.mode == "inductive" else np.sum(
        (task.train.x - fit.reconstruction) ** 2, axis=1)
    labels = task.test.labels
    row["rows"], row["anomalies"] = int(labels.size), int(labels.sum())
    if 0 < labels.sum() < labels.size:
        row.update(evaluate(scores, labels, k=10))
    if fit.noise is not None:
        row["nnz"] = int(np.count_nonzero(np.abs(fit.noise) > NONZERO_TOL))
    if fit.trace:
        row["objective"] = fit.trace[-1].objective
        row["alternations"] = fit.trace[-1].alternation
    if task.mask is not None:
        hit = task.mask.astype(bool)
        err = fit.reconstruction - task.clean
        if hit.any():
            row["mse_masked"] = float(np.mean(err[hit] ** 2))
            row["mse_noisy_masked"] = float(np.mean((task.train.x - task.clean)[hit] ** 2))
        row["mse_all"] = float(np.mean(err ** 2))
    log.info("seed %d: %s in %.1fs", seed, {k: row[k] for k in METRIC_KEYS if k in row},
             time.perf_counter() - t0)

    writer.write(f"seed{seed}_scores.csv", scores_csv(scores, labels))
    if fit.trace:
        writer.write(f"seed{seed}_trace.csv", trace_csv(fit.trace).encode())
    if fit.network is not None and cfg.save_model:
        writer.write(f"seed{seed}_model.radm", network_to_bytes(fit.network))
    if cfg.method == "rcae" and fit.noise is not None:
        writer.write(f"seed{seed}_noise.bin", matrix_to_bin(fit.noise))
    top = ranking(scores)[:min(cfg.top_k, scores.size)]
    if cfg.pgm and task.test.image_shape is not None:
        for rank, i in enumerate(top, start=1):
            img = task.test.x[i].reshape(task.test.image_shape)
            writer.write(os.path.join("pgm", f"seed{seed}_rank{rank:02d}_row{i}.pgm"), pgm_bytes(img))
    return row, [(int(i), float(scores[i]), int(labels[i])) for i in top]


def run_experiment(cfg: ExperimentConfig, dataset: LabeledDataset | None = None) -> ReportBundle:
    """Run every seed of ``cfg`` and write the report files.

    A seed that fails is recorded with its diagnostic and skipped; the run
    raises only if every seed fails (re-raising the last error).
    """
    cfg.validate(check_paths=dataset is None)
    seeds = cfg.seed_list()
    ds = dataset if dataset is not None else load_dataset(cfg.manifest)
    os.makedirs(cfg.out, exist_ok=True)
    writer = _Writer(cfg.out)
    writer.write("config.txt", cfg.to_text().encode())
    bundle = ReportBundle(cfg)
    last_error = None
    for seed in seeds:
        try:
            row, top = _run_seed(cfg, ds, seed, writer)
            bundle.top[seed] = top
        except RobustAEError as exc:
            log.error("seed %d failed: %s", seed, exc)
            row = {"seed": seed, "status": f"failed: {type(exc).__name__}: {exc}"}
            last_error = exc
        bundle.rows.append(row)
    bundle.summary = summarize([r for r in bundle.rows if r["status"] == "ok"])
    writer.write("metrics.csv", _csv_bytes(METRICS_COLUMNS, ([r.get(c) for c in METRICS_COLUMNS]
                                                            for r in bundle.rows)))
    writer.write("summary.csv", _csv_bytes(("metric", "mean", "stderr", "runs"),
                                           ((k, *v) for k, v in bundle.summary.items())))
    writer.write("top_anomalies.csv", _csv_bytes(
        ("seed", "rank", "row", "score", "label"),
        ((seed, rank, i, s, lab) for seed, top in bundle.top.items()
         for rank, (i, s, lab) in enumerate(top, start=1))))
    bundle.files = writer.files
    if last_error is not None and not bundle.top:
        raise last_error
    return bundle


def _grid_value(param, text):
    return parse_float(text) if param in ("lambda", "mu") else int(text)


def run_sweep(cfg: ExperimentConfig, param: str, grid, dataset: LabeledDataset | None = None):
    """Run :func:`run_experiment` per grid value; writes ``sweep.csv`` in ``cfg.out``.

    Returns ``(rows, bundles)``; each row holds the summary means/stderrs and
    the mean final noise support ``nnz``.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"cannot sweep {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    values = [_grid_value(param, v) if isinstance(v, str) else v for v in grid]
    if not values:
        raise ConfigError("sweep grid is empty")
    cfg.validate(check_paths=dataset is None)
    attr = _KEYS[param]
    rows, bundles = [], []
    for value in values:
        sub = cfg.replace(**{attr: value, "out": os.path.join(cfg.out, f"{param}_{_fmt(value)}")})
        bundle = run_experiment(sub, dataset)
        bundles.append(bundle)
        row = {"param": param, "value": value}
        for key in METRIC_KEYS + ("nnz",):
            mean, se, runs = bundle.summary.get(key, (None, None, 0))
            row[f"{key}_mean"], row[f"{key}_stderr"] = mean, se
            row["runs"] = max(row.get("runs", 0), runs)
        rows.append(row)
    header = ("param", "value") + tuple(f"{k}_{s}" for k in METRIC_KEYS + ("nnz",)
                                        for s in ("mean", "stderr")) + ("runs",)
    os.makedirs(cfg.out, exist_ok=True)
    atomic_write_bytes(os.path.join(cfg.out, "sweep.csv"),
                       _csv_bytes(header, ([r.get(h) for h in header] for r in rows)))
    return rows, bundles


def evaluate_score_files(paths, out=None):
    """Recompute metrics from per-seed score CSVs; optionally write ``metrics.csv``/``summary.csv``."""
    if not paths:
        raise ConfigError("no score files given")
    rows = []
    for path in paths:
        scores, labels = read_scores_csv(path)
        row = {"file": os.fspath(path), "rows": int(labels.size)}
        row.update(evaluate(scores, labels, k=10))
        rows.append(row)
    summary = summarize(rows)
    if out:
        os.makedirs(out, exist_ok=True)
        header = ("file", "rows") + METRIC_KEYS
        atomic_write_bytes(os.path.join(out, "metrics.csv"),
                           _csv_bytes(header, ([r[h] for h in header] for r in rows)))
        atomic_write_bytes(os.path.join(out, "summary.csv"),
                           _csv_bytes(("metric", "mean", "stderr", "runs"),
                                      ((k, *v) for k, v in summary.items())))
    return rows, summary
