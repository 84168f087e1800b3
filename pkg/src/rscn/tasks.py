"""Benchmark task generators, lagged supervised sequences, CSV ingestion.

All generators are pure functions of their parameters and generator, so
every dataset is replayable from a task manifest (one JSON document
naming the generator or file, variant, splits, washout and seed).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ContractViolationError, CsvParseError, SchemaError
from .model import atomic_write_text
from .seeding import substream


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SupervisedSequence:
    """Inputs ``(K, n)`` and targets ``(L, n)`` over discrete time.

    The first ``washout`` steps are excluded from fitting and scoring to
    wash out the influence of the zero initial reservoir state.
    """

    inputs: np.ndarray
    targets: np.ndarray
    washout: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", _frozen(self.inputs))
        object.__setattr__(self, "targets", _frozen(self.targets))
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ContractViolationError("inputs and targets must be 2-D")
        if self.inputs.shape[1] != self.targets.shape[1]:
            raise ContractViolationError(
                "inputs and targets must cover the same number of steps"
            )
        if not 0 <= self.washout < self.inputs.shape[1]:
            raise ContractViolationError(
                f"washout {self.washout} must be shorter than the sequence"
            )
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ContractViolationError("sequence contains non-finite values")

    @property
    def n_steps(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[0]


@dataclass(frozen=True)
class TaskData:
    """Train/validation/test triple for one benchmark task."""

    name: str
    train: SupervisedSequence
    val: SupervisedSequence
    test: SupervisedSequence


# ---------------------------------------------------------------------------
# Chaotic delay-differential series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MGParams:
    """Delay-differential benchmark parameters.

    The series obeys ``dy/dn = upsilon*y + alpha*y_tau / (1 + y_tau**exponent)``
    with delay ``tau``; it is chaotic for delays beyond roughly 16.8.
    Integration uses the midpoint (second-order Runge-Kutta) scheme at
    step ``dt`` with the history initialised uniformly from ``init_range``
    at integer times and interpolated linearly in between.
    """

    upsilon: float = -0.1
    alpha: float = 0.2
    tau: int = 17
    exponent: int = 10
    dt: float = 0.1
    init_range: tuple[float, float] = (0.1, 1.3)
    length: int = 1177

    def __post_init__(self):
        if self.tau < 1:
            raise ContractViolationError("tau must be at least 1")
        if self.dt <= 0:
            raise ContractViolationError("dt must be positive")


def mackey_glass(p: MGParams, rng: np.random.Generator) -> np.ndarray:
    """Integrate the delayed series and sample it at unit intervals."""
    spu = round(1.0 / p.dt)
    if spu < 1 or abs(spu * p.dt - 1.0) > 1e-9:
        raise ContractViolationError("dt must divide the unit sampling interval")
    delay = p.tau * spu
    lo, hi = p.init_range
    knots = rng.uniform(lo, hi, size=p.tau + 1)
    # generated points start where the random history ends
    n_fine = delay + (p.length - 1) * spu + 1
    buf = np.empty(n_fine)
    fine_t = np.arange(delay + 1) * p.dt
    buf[: delay + 1] = np.interp(fine_t, np.arange(p.tau + 1, dtype=float), knots)

    def rate(y, y_tau):
        return p.upsilon * y + p.alpha * y_tau / (1.0 + y_tau**p.exponent)

    for i in range(delay, n_fine - 1):
        y = buf[i]
        k1 = rate(y, buf[i - delay])
        y_tau_mid = 0.5 * (buf[i - delay] + buf[i - delay + 1])
        k2 = rate(y + 0.5 * p.dt * k1, y_tau_mid)
        buf[i + 1] = y + p.dt * k2
    return buf[delay::spu][: p.length].copy()


MG_VARIANT_LAGS = {
    "mg": (0, 6, 12, 18),
    "mg1": (6, 12, 18),
    "mg2": (12, 18),
}
_MG_LEAD = 6
_MG_TRAIN_END = 500
_MG_VAL_END = 800
_MG_WASHOUT = 20


def mg_task(series: np.ndarray, variant: str = "mg") -> TaskData:
    """Build the lagged six-step-ahead prediction task from a raw series.

    Inputs at time ``n`` are the series values at the variant's lags and
    the target is the value six steps ahead. Time 1-500 trains, 501-800
    validates, the remainder tests; 20 steps of each split are washed out.
    """
    variant = variant.lower()
    if variant not in MG_VARIANT_LAGS:
        raise ContractViolationError(f"unknown variant {variant!r}")
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or series.size < 25:
        raise ContractViolationError("series too short for the lag structure")
    lags = MG_VARIANT_LAGS[variant]
    max_lag = max(MG_VARIANT_LAGS["mg"])
    first = max_lag  # every lag must exist, for any variant
    last = series.size - 1 - _MG_LEAD
    if last < first:
        raise ContractViolationError("series too short for the lag structure")
    idx = np.arange(first, last + 1)
    inputs = np.stack([series[idx - lag] for lag in lags])
    targets = series[idx + _MG_LEAD][None, :]

    def split(lo, hi, tag):
        sel = (idx >= lo) & (idx < hi)
        return SupervisedSequence(
            inputs[:, sel], targets[:, sel], washout=_MG_WASHOUT,
            name=f"{variant}-{tag}",
        )

    return TaskData(
        name=variant,
        train=split(0, _MG_TRAIN_END, "train"),
        val=split(_MG_TRAIN_END, _MG_VAL_END, "val"),
        test=split(_MG_VAL_END, idx[-1] + 1, "test"),
    )


# ---------------------------------------------------------------------------
# Nonlinear plant identification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantParams:
    """Recursion constants and split sizes of the nonlinear plant task."""

    coefficients: tuple[float, float, float, float] = (0.72, 0.025, 0.01, 0.2)
    initial_outputs: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.1)
    n_train: int = 2000
    n_val: int = 1000
    n_test: int = 1000
    washout: int = 100


def plant_response(u: np.ndarray, p: PlantParams = PlantParams()) -> np.ndarray:
    """Plant output ``y(1..n+1)`` driven by ``u(1..n)``.

    ``y(n+1) = c0 y(n) + c1 y(n-1) u(n) + c2 u(n-2)^2 + c3 u(n-3)``
    with the first four outputs fixed by ``initial_outputs``.
    """
    u = np.asarray(u, dtype=float)
    c0, c1, c2, c3 = p.coefficients
    n = u.size
    y = np.empty(n + 1)
    y[:4] = p.initial_outputs
    for j in range(4, n + 1):
        y[j] = c0 * y[j - 1] + c1 * y[j - 2] * u[j - 1] + c2 * u[j - 3] ** 2 + c3 * u[j - 4]
    return y


def plant_test_input(n: np.ndarray) -> np.ndarray:
    """Piecewise test drive over 1-based step indices ``n``."""
    n = np.asarray(n, dtype=float)
    u = np.empty_like(n)
    seg1 = n < 250
    seg2 = (n >= 250) & (n < 500)
    seg3 = (n >= 500) & (n < 750)
    seg4 = n >= 750
    u[seg1] = np.sin(np.pi * n[seg1] / 25.0)
    u[seg2] = 1.0
    u[seg3] = -1.0
    u[seg4] = (
        0.6 * np.cos(np.pi * n[seg4] / 10.0)
        + 0.1 * np.cos(np.pi * n[seg4] / 32.0)
        + 0.3 * np.sin(np.pi * n[seg4] / 25.0)
    )
    return u


def plant_simulate(
    p: PlantParams,
    phase: str,
    rng: np.random.Generator | None = None,
    n: int | None = None,
    name: str | None = None,
) -> SupervisedSequence:
    """One plant run: inputs ``[y(n), u(n)]`` predicting ``y(n+1)``.

    The training phase drives the plant with i.i.d. uniform input on
    [-1, 1]; the test phase uses the fixed piecewise drive.
    """
    if phase == "train":
        if rng is None:
            raise ContractViolationError("training phase needs a generator")
        m = n if n is not None else p.n_train
        u = rng.uniform(-1.0, 1.0, size=m)
    elif phase == "test":
        m = n if n is not None else p.n_test
        u = plant_test_input(np.arange(1, m + 1))
    else:
        raise ContractViolationError(f"unknown phase {phase!r}")
    y = plant_response(u, p)
    inputs = np.stack([y[:m], u])
    targets = y[1 : m + 1][None, :]
    return SupervisedSequence(
        inputs, targets, washout=p.washout, name=name or f"plant-{phase}"
    )


def plant_task(p: PlantParams = PlantParams(), rng: np.random.Generator | None = None) -> TaskData:
    rng = rng if rng is not None else np.random.default_rng(0)
    train = plant_simulate(p, "train", rng, p.n_train, name="plant-train")
    val = plant_simulate(p, "train", rng, p.n_val, name="plant-val")
    test = plant_simulate(p, "test", n=p.n_test, name="plant-test")
    return TaskData(name="plant", train=train, val=val, test=test)


# ---------------------------------------------------------------------------
# CSV ingestion with lagged feature maps
# ---------------------------------------------------------------------------

# Feature maps for the two industrial schemas. Each entry is
# (column or tuple of columns to average, lag in rows).
DEBUTANIZER_REDUCED_FEATURES = [
    ("u1", 0), ("u2", 0), ("u3", 0), ("u4", 0), ("u5", 0), ("y", 1),
]
DEBUTANIZER_FULL_FEATURES = [
    ("u1", 0), ("u2", 0), ("u3", 0), ("u4", 0), ("u5", 0),
    ("u5", 1), ("u5", 2), ("u5", 3),
    (("u1", "u2"), 0),
    ("y", 1), ("y", 2), ("y", 3), ("y", 4),
]
POWER_LOAD_FEATURES = [("u1", 0), ("u2", 0), ("u3", 0), ("u4", 0), ("y", 1)]

LagSpec = Sequence[tuple]


def load_csv(
    path: str,
    u_columns: Sequence[str],
    y_column: str,
    lag_spec: LagSpec | None = None,
    washout: int = 0,
    name: str | None = None,
) -> SupervisedSequence:
    """Build a supervised sequence from a headed CSV file.

    ``lag_spec`` lists the input features as ``(column, lag)`` pairs; a
    tuple of columns means their mean at that lag. The default uses every
    ``u`` column at lag zero. The target is ``y_column`` at lag zero, and
    the leading rows lacking any lagged value are dropped.
    """
    if lag_spec is None:
        lag_spec = [(c, 0) for c in u_columns]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        needed = list(dict.fromkeys(list(u_columns) + [y_column]))
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        col_idx = {c: header.index(c) for c in needed}
        columns: dict[str, list[float]] = {c: [] for c in needed}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            for c, i in col_idx.items():
                if i >= len(row):
                    raise CsvParseError(f"row has no column {c!r}", line=line_no)
                try:
                    columns[c].append(float(row[i]))
                except ValueError:
                    raise CsvParseError(
                        f"cell {row[i]!r} in column {c!r} is not numeric",
                        line=line_no,
                    ) from None
    series = {c: np.asarray(v) for c, v in columns.items()}
    n_rows = len(series[y_column])

    feats = []
    lags = []
    for chans, lag in lag_spec:
        if isinstance(chans, str):
            chans = (chans,)
        for c in chans:
            if c not in series:
                raise SchemaError(f"{path}: feature column {c!r} not in schema")
        lag = int(lag)
        if lag < 0:
            raise ContractViolationError("lags must be nonnegative")
        lags.append(lag)
        feats.append((tuple(chans), lag))
    max_lag = max(lags, default=0)
    if n_rows <= max_lag:
        raise ContractViolationError("file shorter than the largest lag")
    t = np.arange(max_lag, n_rows)
    inputs = np.stack(
        [np.mean([series[c][t - lag] for c in chans], axis=0) for chans, lag in feats]
    )
    targets = series[y_column][t][None, :]
    return SupervisedSequence(
        inputs, targets, washout=washout,
        name=name or os.path.splitext(os.path.basename(path))[0],
    )


def write_sequence_csv(seq: SupervisedSequence, path: str) -> None:
    """Write a sequence as CSV with columns ``u1..uK, y`` (or ``y1..yL``)."""
    k, ell = seq.n_inputs, seq.n_outputs
    u_names = [f"u{i + 1}" for i in range(k)]
    y_names = ["y"] if ell == 1 else [f"y{i + 1}" for i in range(ell)]
    lines = [",".join(u_names + y_names)]
    for t in range(seq.n_steps):
        cells = [repr(float(v)) for v in seq.inputs[:, t]]
        cells += [repr(float(v)) for v in seq.targets[:, t]]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_sequence_csv(path: str, n_inputs: int, washout: int = 0) -> SupervisedSequence:
    """Reload a sequence written by :func:`write_sequence_csv`."""
    u_cols = [f"u{i + 1}" for i in range(n_inputs)]
    return load_csv(path, u_cols, "y", washout=washout)


def add_gaussian_noise(
    seq: SupervisedSequence, sigma: float, rng: np.random.Generator
) -> SupervisedSequence:
    """Perturb targets with zero-mean Gaussian noise; inputs untouched."""
    if sigma < 0:
        raise ContractViolationError("sigma must be nonnegative")
    if sigma == 0.0:
        return seq
    noisy = seq.targets + rng.normal(0.0, sigma, size=seq.targets.shape)
    return replace(seq, targets=noisy)


def slice_sequence(
    seq: SupervisedSequence, start: int, stop: int, washout: int, name: str
) -> SupervisedSequence:
    return SupervisedSequence(
        seq.inputs[:, start:stop], seq.targets[:, start:stop],
        washout=washout, name=name,
    )


# ---------------------------------------------------------------------------
# Task manifests
# ---------------------------------------------------------------------------

GENERATOR_TASKS = ("mg", "mg1", "mg2", "plant")


def task_from_manifest(manifest: dict) -> TaskData:
    """Materialise the task a manifest describes.

    Generator tasks need only ``{"task", "seed"}``; CSV tasks carry the
    file, schema, feature map, split sizes and validation-noise level
    under a ``"csv"`` key. Unstated noise defaults to 5% of the clean
    test-target standard deviation.
    """
    kind = manifest.get("task")
    seed = int(manifest.get("seed", 0))
    if kind in ("mg", "mg1", "mg2"):
        params = MGParams(**manifest.get("mg_params", {}))
        series = mackey_glass(params, substream(seed, "task"))
        return mg_task(series, kind)
    if kind == "plant":
        params = PlantParams(**manifest.get("plant_params", {}))
        return plant_task(params, substream(seed, "task"))
    if kind == "csv":
        spec = manifest.get("csv")
        if not isinstance(spec, dict):
            raise SchemaError("csv task manifest needs a 'csv' section")
        for key in ("path", "u_columns", "y_column", "n_train", "n_test"):
            if key not in spec:
                raise SchemaError(f"csv manifest missing {key!r}")
        washout = int(manifest.get("washout", 0))
        lag_spec = spec.get("features")
        seq = load_csv(
            spec["path"], spec["u_columns"], spec["y_column"],
            lag_spec=lag_spec, washout=washout,
        )
        n_train, n_test = int(spec["n_train"]), int(spec["n_test"])
        if n_train + n_test > seq.n_steps:
            raise SchemaError(
                f"splits need {n_train + n_test} samples, file has {seq.n_steps}"
            )
        name = seq.name
        train = slice_sequence(seq, 0, n_train, washout, f"{name}-train")
        test = slice_sequence(seq, n_train, n_train + n_test, washout, f"{name}-test")
        sigma = spec.get("val_noise_sigma")
        if sigma is None:
            sigma = 0.05 * float(np.std(test.targets))
        val = replace(
            add_gaussian_noise(test, float(sigma), substream(seed, "noise")),
            name=f"{name}-val",
        )
        return TaskData(name=name, train=train, val=val, test=test)
    raise SchemaError(f"unknown task kind {kind!r}")


def load_manifest(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_manifest(manifest: dict, path: str) -> None:
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
