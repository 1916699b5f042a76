"""Experiment sweeps, run manifests and CSV output.

A sweep is a grid of independent cells ``(dimension, scaling, seed)``. Each
cell preprocesses the data to ``dimension`` principal components, embeds it,
builds the train Gram and test cross-kernel once, selects C, fits and scores.
Cells that cannot run (too many qubits, memory or time budget) come back as
rows with a non-``ok`` status instead of aborting the sweep.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import platform
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import __version__
from .data import Dataset, Prepared, load_csv, load_idx, preprocess, synthetic_two_class
from .feature_maps import embed_states, make_feature_map
from .kernels import (
    ShotNoiseConfig,
    cross_from_states,
    gram_from_states,
    inject_noise,
    median_offdiag,
    nearest_psd,
    probe_indices,
    shot_sigma_from_gram,
    std_offdiag,
)
from .statevector import MAX_QUBITS, CapacityError
from .svm import (
    C_GRID,
    balanced_accuracy,
    predict,
    select_c_by_cv,
    select_c_by_train_score,
)

Scaling = Union[float, str]

DEFAULT_PRECISION_DECIMALS = (1, 2, 3, 4, 6, None)
# rough cost of one amplitude update, used by the wall-clock budget guard
_SECONDS_PER_AMPLITUDE_OP = 4e-9


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


# ------------------------------------------------------------------ config


@dataclass
class ExperimentConfig:
    # data
    dataset: str = "synthetic"  # synthetic | idx | csv
    synthetic_kind: str = "xor"
    synthetic_n: int = 1200
    synthetic_dim: int = 10
    synthetic_separation: float = 4.0
    synthetic_linear_separation: float = 1.0
    data_path: Optional[str] = None  # IDX images or CSV file
    labels_path: Optional[str] = None  # IDX labels
    test_data_path: Optional[str] = None
    test_labels_path: Optional[str] = None
    classes: list = field(default_factory=lambda: [0, 1])
    label_column: str = "label"
    n_train: int = 800
    n_test: int = 200
    restandardize: bool = True
    # embedding
    feature_map: str = "hamevo"
    dims: list = field(default_factory=lambda: [8])
    scalings: list = field(default_factory=lambda: [0.01, 0.05, 0.1, 0.2, 0.5, 1.0, "d/3"])
    trotter_steps: int = 40
    haar_seeds: Optional[list] = None  # None -> 5 seeds for hamevo, one for iqp
    decimals: Optional[int] = None
    precision_decimals: list = field(default_factory=lambda: list(DEFAULT_PRECISION_DECIMALS))
    # model selection
    c_selection: str = "cv"  # cv | train-score
    cv_folds: int = 5
    c_grid: list = field(default_factory=lambda: list(C_GRID))
    # shot noise
    noise_shots: int = 5000
    noise_probe: int = 5
    noise_repeats: int = 10
    # run control
    seed: int = 0
    max_qubits: int = MAX_QUBITS
    memory_budget_gib: float = 4.0
    time_budget_s: Optional[float] = None
    threads: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.haar_seeds is None:
            self.haar_seeds = [0, 1, 2, 3, 4] if self.feature_map == "hamevo" else [0]

    @property
    def noise(self) -> ShotNoiseConfig:
        return ShotNoiseConfig(self.noise_shots, self.noise_probe, self.noise_repeats)

    def validate(self) -> "ExperimentConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.dataset in ("synthetic", "idx", "csv"), f"unknown dataset {self.dataset!r}")
        if self.dataset != "synthetic":
            need(self.data_path, f"dataset={self.dataset} needs data_path")
        if self.dataset == "idx":
            need(self.labels_path, "dataset=idx needs labels_path")
            need(len(self.classes) == 2, "classes must list exactly two labels")
        need(self.feature_map in ("iqp", "hamevo"), f"unknown feature_map {self.feature_map!r}")
        need(self.c_selection in ("cv", "train-score"), "c_selection must be cv or train-score")
        for name in ("dims", "scalings", "haar_seeds", "c_grid", "precision_decimals"):
            need(isinstance(getattr(self, name), list) and getattr(self, name), f"{name} must be a nonempty list")
        need(all(isinstance(d, int) and d >= 1 for d in self.dims), "dims must be positive integers")
        for s in self.scalings:
            try:
                value = resolve_scaling(s, 1)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            need(value > 0, f"scaling {s!r} must be positive")
        need(all(c > 0 for c in self.c_grid), "c_grid must be positive")
        need(self.trotter_steps >= 1, "trotter_steps must be >= 1")
        need(self.cv_folds >= 2, "cv_folds must be >= 2")
        need(self.n_train >= 2 and self.n_test >= 2, "n_train and n_test must be >= 2")
        need(self.threads >= 1, "threads must be >= 1")
        need(self.noise_shots >= 1 and self.noise_repeats >= 1, "noise settings must be positive")
        need(self.noise_probe >= 2, "noise_probe must be >= 2")
        if self.dataset == "synthetic":
            need(self.synthetic_n >= self.n_train + self.n_test, "synthetic_n < n_train + n_test")
            need(max(self.dims) <= self.synthetic_dim, "dims exceed synthetic_dim")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SCALING_RE = re.compile(r"^\s*(?:(?P<mul>[0-9.eE+-]+)\s*\*\s*)?d\s*(?:/\s*(?P<div>[0-9.eE+-]+))?\s*$")


def resolve_scaling(spec: Scaling, dimension: int) -> float:
    """Numeric scaling for one cell; strings like ``"d/3"`` or ``"0.5*d"`` use the dimension."""
    if isinstance(spec, bool):
        raise ValueError(f"bad scaling {spec!r}")
    if isinstance(spec, (int, float)):
        return float(spec)
    m = _SCALING_RE.match(str(spec))
    if not m:
        try:
            return float(spec)
        except ValueError:
            raise ValueError(f"bad scaling {spec!r}; use a number or forms like d/3, 2*d") from None
    value = float(dimension)
    if m.group("mul"):
        value *= float(m.group("mul"))
    if m.group("div"):
        value /= float(m.group("div"))
    return value


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; values are JSON where they parse, else strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            if value.startswith("["):
                raise ConfigError(f"line {lineno}: malformed list {value!r}") from None
            out[key] = value
    return out


def config_from_dict(values: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; valid keys: {sorted(known)}")
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    """Read a flat text config, a JSON config, or a previous run's manifest.json."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        values = values.get("config", values)
    else:
        values = parse_config_text(text)
    return config_from_dict(values)


def config_to_text(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in cfg.to_dict().items())


# ------------------------------------------------------------- results

RESULT_COLUMNS = (
    "dataset", "feature_map", "dimension", "n_qubits", "scaling_spec", "scaling_factor",
    "T", "haar_seed", "C_selected", "train_bacc", "test_bacc", "median_offdiag",
    "std_offdiag", "n_support_vectors", "variant", "noise_sigma", "decimals", "status",
)


@dataclass
class ResultRow:
    dataset: str
    feature_map: str
    dimension: int
    n_qubits: int
    scaling_spec: str
    scaling_factor: float
    T: Optional[int]
    haar_seed: int
    C_selected: Optional[float] = None
    train_bacc: Optional[float] = None
    test_bacc: Optional[float] = None
    median_offdiag: Optional[float] = None
    std_offdiag: Optional[float] = None
    n_support_vectors: Optional[int] = None
    variant: str = "exact"  # exact | shots
    noise_sigma: float = 0.0
    decimals: Optional[int] = None
    status: str = "ok"
    wall_time_s: float = 0.0
    gram_sha256: str = ""

    def __post_init__(self):
        for name in ("train_bacc", "test_bacc"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def sort_key(self):
        return (
            self.n_qubits, self.scaling_factor, self.haar_seed,
            self.variant != "exact", 99 if self.decimals is None else self.decimals,
        )

    def csv_values(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in RESULT_COLUMNS]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ------------------------------------------------------------ data setup


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _array_sha256(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()


def load_pools(cfg: ExperimentConfig) -> tuple[Dataset, Optional[Dataset], dict]:
    """Training pool, optional separate test pool, and input checksums."""
    if cfg.dataset == "synthetic":
        ds = synthetic_two_class(
            cfg.synthetic_n, cfg.synthetic_dim, cfg.synthetic_separation, cfg.seed,
            kind=cfg.synthetic_kind, linear_separation=cfg.synthetic_linear_separation,
        )
        return ds, None, {"synthetic": _array_sha256(ds.X, ds.y)}
    sums = {}
    for key in ("data_path", "labels_path", "test_data_path", "test_labels_path"):
        p = getattr(cfg, key)
        if p:
            sums[key] = _file_sha256(p)
    a, b = cfg.classes
    if cfg.dataset == "idx":
        pool = load_idx(cfg.data_path, cfg.labels_path, a, b)
        test = None
        if cfg.test_data_path:
            test = load_idx(cfg.test_data_path, cfg.test_labels_path, a, b)
    else:
        pool = load_csv(cfg.data_path, cfg.label_column)
        test = load_csv(cfg.test_data_path, cfg.label_column) if cfg.test_data_path else None
    return pool, test, sums


# -------------------------------------------------------------- cells


@dataclass(frozen=True)
class Cell:
    dimension: int
    scaling_spec: Scaling
    haar_seed: int


@dataclass
class CellOutcome:
    K: np.ndarray
    cross: np.ndarray


def _qubits(cfg: ExperimentConfig, d: int) -> int:
    return d + 1 if cfg.feature_map == "hamevo" else d


def estimate_cell_seconds(cfg: ExperimentConfig, d: int) -> float:
    """Crude embedding-cost estimate used by the wall-clock budget guard."""
    nq = _qubits(cfg, d)
    passes = 3 * cfg.trotter_steps * d if cfg.feature_map == "hamevo" else 4 + 2 * d
    n = cfg.n_train + cfg.n_test
    embed = n * (1 << nq) * passes * _SECONDS_PER_AMPLITUDE_OP
    overlaps = n * cfg.n_train * (1 << nq) * _SECONDS_PER_AMPLITUDE_OP
    return embed + overlaps


def _base_row(cfg: ExperimentConfig, name: str, cell: Cell, scaling: float) -> ResultRow:
    return ResultRow(
        dataset=name,
        feature_map=cfg.feature_map,
        dimension=cell.dimension,
        n_qubits=_qubits(cfg, cell.dimension),
        scaling_spec=str(cell.scaling_spec),
        scaling_factor=scaling,
        T=cfg.trotter_steps if cfg.feature_map == "hamevo" else None,
        haar_seed=cell.haar_seed if cfg.feature_map == "hamevo" else 0,
    )


def _precheck(cfg: ExperimentConfig, d: int) -> Optional[str]:
    nq = _qubits(cfg, d)
    if nq > cfg.max_qubits:
        return "skipped-capacity"
    need = (cfg.n_train + cfg.n_test) * (1 << nq) * 16
    if need > cfg.memory_budget_gib * 2**30:
        return "skipped-capacity"
    if cfg.time_budget_s is not None and estimate_cell_seconds(cfg, d) > cfg.time_budget_s:
        return "skipped-budget"
    return None


def compute_kernels(cfg: ExperimentConfig, prep: Prepared, d: int, scaling: float,
                    haar_seed: int, decimals: Optional[int] = None) -> CellOutcome:
    fmap = make_feature_map(
        cfg.feature_map, d, scaling, trotter_steps=cfg.trotter_steps,
        init_seed=haar_seed, decimals=decimals,
    )
    if fmap.n_qubits > cfg.max_qubits:
        raise CapacityError(f"{fmap.n_qubits} qubits exceeds max_qubits={cfg.max_qubits}")
    train_states = embed_states(fmap, prep.X_train)
    test_states = embed_states(fmap, prep.X_test)
    return CellOutcome(gram_from_states(train_states), cross_from_states(test_states, train_states))


def fit_and_score(cfg: ExperimentConfig, K, cross, y_train, y_test):
    """Select C per the configured mode, fit on all training points, score both sets."""
    if cfg.c_selection == "cv":
        C, model = select_c_by_cv(K, y_train, cfg.c_grid, cfg.cv_folds, cfg.seed)
    else:
        C, model = select_c_by_train_score(K, y_train, cfg.c_grid)
    train = balanced_accuracy(predict(model, y_train, K), y_train)
    test = balanced_accuracy(predict(model, y_train, cross), y_test)
    return C, train, test, model


def _fill(row: ResultRow, cfg, K, cross, prep: Prepared) -> ResultRow:
    C, train, test, model = fit_and_score(cfg, K, cross, prep.y_train, prep.y_test)
    row.C_selected = float(C)
    row.train_bacc = train
    row.test_bacc = test
    row.n_support_vectors = model.n_support
    row.median_offdiag = median_offdiag(K)
    row.std_offdiag = std_offdiag(K)
    row.gram_sha256 = _array_sha256(K)
    return row


def _noise_seed(cfg: ExperimentConfig, cell: Cell, scale_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=(cell.dimension, scale_index, cell.haar_seed))


def _run_cell(cfg, name, prep, cell: Cell, study: str, scale_index: int) -> list[ResultRow]:
    scaling = resolve_scaling(cell.scaling_spec, cell.dimension)
    start = time.perf_counter()
    status = _precheck(cfg, cell.dimension)
    if status is not None:
        if study == "precision":
            variants = list(cfg.precision_decimals)
        elif study == "noise":
            variants = [cfg.decimals, cfg.decimals]
        else:
            variants = [cfg.decimals]
        rows = []
        for k, dec in enumerate(variants):
            row = _base_row(cfg, name, cell, scaling)
            row.decimals = dec
            row.status = status
            if study == "noise" and k == 1:
                row.variant = "shots"
            rows.append(row)
        return rows

    rows = []
    try:
        if study == "precision":
            for dec in cfg.precision_decimals:
                t0 = time.perf_counter()
                out = compute_kernels(cfg, prep, cell.dimension, scaling, cell.haar_seed, dec)
                row = _base_row(cfg, name, cell, scaling)
                row.decimals = dec
                rows.append(_fill(row, cfg, out.K, out.cross, prep))
                row.wall_time_s = time.perf_counter() - t0
            return rows

        out = compute_kernels(cfg, prep, cell.dimension, scaling, cell.haar_seed, cfg.decimals)
        exact = _base_row(cfg, name, cell, scaling)
        exact.decimals = cfg.decimals
        rows.append(_fill(exact, cfg, out.K, out.cross, prep))
        exact.wall_time_s = time.perf_counter() - start

        if study == "noise":
            t0 = time.perf_counter()
            noisy_K, noisy_cross, sigma = apply_shot_noise(cfg, out.K, out.cross, _noise_seed(cfg, cell, scale_index))
            noisy = _base_row(cfg, name, cell, scaling)
            noisy.decimals = cfg.decimals
            noisy.variant = "shots"
            noisy.noise_sigma = sigma
            rows.append(_fill(noisy, cfg, noisy_K, noisy_cross, prep))
            noisy.wall_time_s = time.perf_counter() - t0
    except CapacityError:
        row = _base_row(cfg, name, cell, scaling)
        row.status = "skipped-capacity"
        rows.append(row)
    except (ArithmeticError, RuntimeError) as exc:
        row = _base_row(cfg, name, cell, scaling)
        row.status = f"failed-{type(exc).__name__}"
        rows.append(row)
    return rows


def apply_shot_noise(cfg: ExperimentConfig, K, cross, seed: np.random.SeedSequence):
    """Finite-shot model: sigma from a binomial probe, Gaussian noise, PSD repair.

    The train Gram gets symmetric noise and is projected back onto the PSD
    cone; the test cross-kernel gets independent noise of the same sigma.
    sigma = 0 returns the inputs unchanged.
    """
    s_probe, s_train, s_cross = seed.spawn(3)
    noise_cfg = dataclasses.replace(cfg.noise, rng_seed=s_probe)
    p = probe_indices(len(K), noise_cfg)
    sigma = shot_sigma_from_gram(K[np.ix_(p, p)], noise_cfg)
    if sigma == 0:
        return K, cross, 0.0
    noisy_K = nearest_psd(inject_noise(K, sigma, s_train))
    rng = np.random.default_rng(s_cross)
    noisy_cross = cross + rng.normal(0.0, sigma, size=cross.shape)
    return noisy_K, noisy_cross, sigma


# -------------------------------------------------------------- runners


def _cells(cfg: ExperimentConfig) -> list[tuple[Cell, int]]:
    return [
        (Cell(d, s, seed), k)
        for d in cfg.dims
        for k, s in enumerate(cfg.scalings)
        for seed in cfg.haar_seeds
    ]


def run_study(cfg: ExperimentConfig, study: str = "bandwidth",
              pools: Optional[tuple] = None) -> tuple[list[ResultRow], dict]:
    """Run every cell of ``cfg`` for one study and return ``(rows, input checksums)``.

    ``study`` is ``bandwidth``, ``qubit``, ``noise`` or ``precision``.
    """
    cfg.validate()
    pool, test_pool, sums = pools if pools is not None else load_pools(cfg)
    preps = {}
    for d in sorted(set(cfg.dims)):
        if _precheck(cfg, d) is None:
            preps[d] = preprocess(
                pool, d, cfg.n_train, cfg.n_test, cfg.seed,
                restandardize=cfg.restandardize, test_pool=test_pool,
            )
    name = pool.name

    def job(item):
        cell, k = item
        return _run_cell(cfg, name, preps.get(cell.dimension), cell, study, k)

    items = _cells(cfg)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            chunks = list(ex.map(job, items))
    else:
        chunks = [job(it) for it in items]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: r.sort_key)
    return rows, sums


def run_bandwidth_sweep(cfg: ExperimentConfig, **kw) -> list[ResultRow]:
    return run_study(cfg, "bandwidth", **kw)[0]


def run_qubit_sweep(cfg: ExperimentConfig, **kw) -> list[ResultRow]:
    """Accuracy against dimension; the Haar seeds are the same for every qubit count."""
    return run_study(cfg, "qubit", **kw)[0]


def run_noise_study(cfg: ExperimentConfig, **kw) -> list[ResultRow]:
    """Exact and shot-noise rows per cell, sharing splits and seeds."""
    return run_study(cfg, "noise", **kw)[0]


def run_precision_study(cfg: ExperimentConfig, **kw) -> list[ResultRow]:
    return run_study(cfg, "precision", **kw)[0]


STUDIES: dict[str, str] = {
    "bandwidth-sweep": "bandwidth",
    "qubit-sweep": "qubit",
    "noise-study": "noise",
    "precision-study": "precision",
}


# -------------------------------------------------------------- outputs


def results_csv_text(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in rows:
        writer.writerow(r.csv_values())
    return buf.getvalue()


def build_manifest(cfg: ExperimentConfig, study: str, sums: dict) -> dict:
    return {
        "study": study,
        "config": cfg.to_dict(),
        "seeds": {"master": cfg.seed, "haar": list(cfg.haar_seeds)},
        "versions": {
            "qkbandwidth": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "input_checksums": dict(sorted(sums.items())),
    }


def emit_outputs(rows: Sequence[ResultRow], out_dir, cfg: ExperimentConfig,
                 study: str = "bandwidth", sums: Optional[dict] = None) -> dict:
    """Write results.csv, timings.csv, gram_checksums.csv and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.csv",
        "timings": out / "timings.csv",
        "checksums": out / "gram_checksums.csv",
        "manifest": out / "manifest.json",
    }
    paths["results"].write_text(results_csv_text(rows))
    key = ("n_qubits", "scaling_spec", "haar_seed", "variant", "decimals", "status")
    with open(paths["timings"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(key + ("wall_time_s",))
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in key] + [f"{r.wall_time_s:.3f}"])
    with open(paths["checksums"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(key + ("gram_sha256",))
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in key] + [r.gram_sha256])
    manifest = build_manifest(cfg, study, sums or {})
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def count_skipped(rows: Iterable[ResultRow]) -> int:
    return sum(r.status.startswith("skipped") for r in rows)


def count_failed(rows: Iterable[ResultRow]) -> int:
    return sum(r.status.startswith("failed") for r in rows)
