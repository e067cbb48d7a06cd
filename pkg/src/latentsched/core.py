"""Shared data model, scaling, error metrics, and fold partitioning.

Everything here is a pure function on immutable-by-convention inputs:
datasets are never mutated in place, so all operations are safe to call
from concurrent workers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DT_TOLERANCE = 1e-12


class ConfigurationError(ValueError):
    """Bad user-supplied configuration (missing channel, k out of range, ...)."""


class DimensionError(ValueError):
    """Array shapes do not match the operation's contract."""


class DegenerateSignalError(ValueError):
    """A signal is constant where a non-degenerate one is required."""


@dataclass
class TimeSeriesDataset:
    """Uniformly sampled multi-channel time series.

    t is in hours, strictly increasing with constant step dt_hours.
    episode_boundaries holds the start index of each independent episode
    (simulation restarts); a single continuous record has boundaries [0].
    """

    t: np.ndarray
    columns: dict[str, np.ndarray]
    dt_hours: float
    episode_boundaries: list[int] = field(default_factory=lambda: [0])
    seed: int | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        n = self.t.shape[0]
        for name, col in self.columns.items():
            if col.shape != (n,):
                raise DimensionError(f"column {name!r} has length {col.shape}, expected ({n},)")
        if self.dt_hours <= 0:
            raise ConfigurationError("dt_hours must be positive")
        if n > 1:
            steps = np.diff(self.t)
            if np.any(steps <= 0):
                raise ConfigurationError("t must be strictly increasing")
            if np.max(np.abs(steps - self.dt_hours)) > DT_TOLERANCE * max(1.0, abs(self.dt_hours)):
                raise ConfigurationError("t is not uniformly sampled at dt_hours")
        bounds = list(self.episode_boundaries)
        if bounds != sorted(bounds):
            raise ConfigurationError("episode_boundaries must be sorted")
        if bounds and (bounds[0] < 0 or bounds[-1] >= max(n, 1)):
            raise ConfigurationError("episode_boundaries out of range")
        self.episode_boundaries = bounds

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    @property
    def channel_names(self) -> list[str]:
        return list(self.columns.keys())

    def matrix(self, channels: list[str] | None = None) -> np.ndarray:
        """Stack the named channels (all by default) into an (N, n_ch) array."""
        names = self.channel_names if channels is None else channels
        missing = [c for c in names if c not in self.columns]
        if missing:
            raise ConfigurationError(f"channels not in dataset: {missing}")
        return np.column_stack([self.columns[c] for c in names])

    def select_channels(self, channels: list[str]) -> "TimeSeriesDataset":
        missing = [c for c in channels if c not in self.columns]
        if missing:
            raise ConfigurationError(f"channels not in dataset: {missing}")
        return TimeSeriesDataset(
            t=self.t.copy(),
            columns={c: self.columns[c].copy() for c in channels},
            dt_hours=self.dt_hours,
            episode_boundaries=list(self.episode_boundaries),
            seed=self.seed,
        )

    def slice_samples(self, start: int, stop: int) -> "TimeSeriesDataset":
        """Contiguous sample slice; episode boundaries are re-based into the slice."""
        bounds = [b - start for b in self.episode_boundaries if start <= b < stop]
        if not bounds or bounds[0] != 0:
            bounds = [0] + bounds
        return TimeSeriesDataset(
            t=self.t[start:stop].copy(),
            columns={c: v[start:stop].copy() for c, v in self.columns.items()},
            dt_hours=self.dt_hours,
            episode_boundaries=bounds,
            seed=self.seed,
        )

    def episode_slices(self) -> list[tuple[int, int]]:
        starts = list(self.episode_boundaries)
        stops = starts[1:] + [self.n_samples]
        return list(zip(starts, stops))


@dataclass
class ScalingSpec:
    """Per-channel (min, max) bounds in native units for 0-100% scaling."""

    bounds: dict[str, tuple[float, float]]

    def __post_init__(self):
        clean = {}
        for name, (lo, hi) in self.bounds.items():
            lo, hi = float(lo), float(hi)
            if not hi > lo:
                raise ConfigurationError(f"channel {name!r}: max {hi} must exceed min {lo}")
            clean[name] = (lo, hi)
        self.bounds = clean

    @classmethod
    def from_dataset(cls, dataset: TimeSeriesDataset, channels: list[str] | None = None) -> "ScalingSpec":
        """Empirical min/max per channel, the convention frozen at training time."""
        names = dataset.channel_names if channels is None else channels
        bounds = {}
        for name in names:
            col = dataset.columns[name]
            lo, hi = float(np.min(col)), float(np.max(col))
            if hi <= lo:
                # constant channel: widen symmetrically so scaling stays defined
                pad = max(1e-9, abs(lo) * 1e-9)
                lo, hi = lo - pad, hi + pad
            bounds[name] = (lo, hi)
        return cls(bounds)

    def to_jsonable(self) -> dict:
        return {name: {"min": lo, "max": hi} for name, (lo, hi) in self.bounds.items()}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ScalingSpec":
        return cls({name: (entry["min"], entry["max"]) for name, entry in obj.items()})


@dataclass
class FoldPlan:
    """Disjoint sample-index folds covering all samples; sizes differ by at most 1."""

    k: int
    assignments: list[np.ndarray]
    seed: int

    def __post_init__(self):
        self.assignments = [np.asarray(a, dtype=int) for a in self.assignments]
        if len(self.assignments) != self.k:
            raise ConfigurationError("assignments must contain exactly k folds")
        all_idx = np.concatenate(self.assignments) if self.assignments else np.array([], dtype=int)
        if len(np.unique(all_idx)) != len(all_idx):
            raise ConfigurationError("folds are not disjoint")
        sizes = [len(a) for a in self.assignments]
        if sizes and max(sizes) - min(sizes) > 1:
            raise ConfigurationError("fold sizes differ by more than 1")

    def train_test_indices(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.assignments[fold]
        train = np.concatenate([a for i, a in enumerate(self.assignments) if i != fold])
        return np.sort(train), np.sort(test)


def _check_spec_covers(series: TimeSeriesDataset, spec: ScalingSpec):
    for name in series.channel_names:
        if name not in spec.bounds:
            raise ConfigurationError(f"no scaling entry for channel {name!r}")


def scale_to_percent(series: TimeSeriesDataset, spec: ScalingSpec) -> TimeSeriesDataset:
    """Map each channel to 0-100% of its (min, max) range.

    Values outside [min, max] map outside [0, 100]; out-of-range is a
    diagnostic signal and is deliberately not clipped.
    """
    _check_spec_covers(series, spec)
    cols = {}
    for name, col in series.columns.items():
        lo, hi = spec.bounds[name]
        cols[name] = 100.0 * (col - lo) / (hi - lo)
    return TimeSeriesDataset(
        t=series.t.copy(),
        columns=cols,
        dt_hours=series.dt_hours,
        episode_boundaries=list(series.episode_boundaries),
        seed=series.seed,
    )


def unscale_from_percent(series: TimeSeriesDataset, spec: ScalingSpec) -> TimeSeriesDataset:
    """Exact inverse of scale_to_percent (round trip error <= 1e-10 relative)."""
    _check_spec_covers(series, spec)
    cols = {}
    for name, col in series.columns.items():
        lo, hi = spec.bounds[name]
        cols[name] = lo + (hi - lo) * col / 100.0
    return TimeSeriesDataset(
        t=series.t.copy(),
        columns=cols,
        dt_hours=series.dt_hours,
        episode_boundaries=list(series.episode_boundaries),
        seed=series.seed,
    )


def scale_matrix(X: np.ndarray, spec: ScalingSpec, channels: list[str]) -> np.ndarray:
    """Matrix variant of scale_to_percent for (N, n_ch) arrays in channel order."""
    if X.shape[1] != len(channels):
        raise DimensionError(f"matrix has {X.shape[1]} columns, expected {len(channels)}")
    lo = np.array([spec.bounds[c][0] for c in channels])
    hi = np.array([spec.bounds[c][1] for c in channels])
    return 100.0 * (X - lo) / (hi - lo)


def unscale_matrix(X: np.ndarray, spec: ScalingSpec, channels: list[str]) -> np.ndarray:
    if X.shape[1] != len(channels):
        raise DimensionError(f"matrix has {X.shape[1]} columns, expected {len(channels)}")
    lo = np.array([spec.bounds[c][0] for c in channels])
    hi = np.array([spec.bounds[c][1] for c in channels])
    return lo + (hi - lo) * X / 100.0


def compute_mse(reference: np.ndarray, estimate: np.ndarray) -> float:
    """Squared error averaged over samples AND channels.

    On 0-100% scaled data the units are squared percent. Averaging over
    channels keeps the value comparable across datasets with different
    channel counts.
    """
    ref = np.asarray(reference, dtype=float)
    est = np.asarray(estimate, dtype=float)
    if ref.shape != est.shape:
        raise DimensionError(f"shape mismatch: {ref.shape} vs {est.shape}")
    if ref.size == 0:
        raise DimensionError("empty arrays")
    return float(np.mean((ref - est) ** 2))


def compute_nmse(reference: np.ndarray, estimate: np.ndarray) -> float:
    """1 - ||ref - est||^2 / ||ref - mean(ref)||^2.

    1 is a perfect fit, 0 matches the mean predictor, negative is worse
    than the mean predictor. Invariant under a joint affine rescaling of
    both arguments.
    """
    ref = np.asarray(reference, dtype=float).ravel()
    est = np.asarray(estimate, dtype=float).ravel()
    if ref.shape != est.shape:
        raise DimensionError(f"length mismatch: {ref.shape} vs {est.shape}")
    if ref.size < 2:
        raise DimensionError("need at least 2 samples")
    denom = float(np.sum((ref - ref.mean()) ** 2))
    if denom == 0.0:
        raise DegenerateSignalError("reference signal is constant; NMSE undefined")
    return 1.0 - float(np.sum((ref - est) ** 2)) / denom


def kfold_partition(n_samples: int, k: int, seed: int) -> FoldPlan:
    """Seeded random partition into k folds with sizes differing by at most 1."""
    if not 2 <= k <= n_samples:
        raise ConfigurationError(f"k={k} out of range [2, {n_samples}]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_samples)
    assignments = [np.sort(chunk) for chunk in np.array_split(perm, k)]
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def write_timeseries_csv(dataset: TimeSeriesDataset, path: str | Path):
    """Write `t_hours,<channel>,...` CSV; floats as shortest exact repr."""
    path = Path(path)
    names = dataset.channel_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_hours"] + names)
        cols = [dataset.t] + [dataset.columns[c] for c in names]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])


def read_timeseries_csv(
    path: str | Path,
    episode_boundaries: list[int] | None = None,
    seed: int | None = None,
) -> TimeSeriesDataset:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "t_hours":
            raise ConfigurationError(f"{path}: first CSV column must be t_hours")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise ConfigurationError(f"{path}: no samples")
    t = data[:, 0]
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    columns = {name: data[:, i + 1] for i, name in enumerate(header[1:])}
    return TimeSeriesDataset(
        t=t,
        columns=columns,
        dt_hours=dt,
        episode_boundaries=episode_boundaries or [0],
        seed=seed,
    )


def write_scaling_spec(spec: ScalingSpec, path: str | Path):
    Path(path).write_text(json.dumps(spec.to_jsonable(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_scaling_spec(path: str | Path) -> ScalingSpec:
    return ScalingSpec.from_jsonable(json.loads(Path(path).read_text(encoding="utf-8")))
