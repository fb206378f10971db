"""Sampled trajectories and the transformations applied before fitting.

CSV layout for a single trajectory::

    t,x1,x2
    #iv: 0.0,1.5
    0.0,1.0,0.0
    0.5,0.77,0.12
    ...

The ``#iv:`` line is optional and carries the initial velocity. A dataset
is either a directory of such files or one file with a leading
``traj_id`` column, in which case velocities are written as
``#iv[<traj_id>]: ...``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, StateError
from .quadrature import TimeGrid


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    samples: np.ndarray
    initial_velocity: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] != self.grid.count:
            raise InputError(
                f"samples must be {self.grid.count} x n, got shape {np.shape(self.samples)}"
            )
        if not np.all(np.isfinite(s)):
            raise InputError("trajectory samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.initial_velocity is not None:
            v = np.array(self.initial_velocity, dtype=float).reshape(-1)
            if v.shape[0] != s.shape[1]:
                raise InputError(
                    f"initial velocity has length {v.shape[0]}, state dimension is {s.shape[1]}"
                )
            if not np.all(np.isfinite(v)):
                raise InputError("initial velocity must be finite")
            v.setflags(write=False)
            object.__setattr__(self, "initial_velocity", v)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def with_velocity(self, v) -> "Trajectory":
        return replace(self, initial_velocity=v)


@dataclass(frozen=True, eq=False)
class Dataset:
    trajectories: tuple = field(default_factory=tuple)

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise InputError("a dataset needs at least one trajectory")
        g, n = trajs[0].grid, trajs[0].dim
        for k, tr in enumerate(trajs):
            if not tr.grid.matches(g):
                raise InputError(f"trajectory {k} ({tr.label!r}) has a different time grid")
            if tr.dim != n:
                raise InputError(f"trajectory {k} ({tr.label!r}) has dimension {tr.dim}, expected {n}")
        object.__setattr__(self, "trajectories", trajs)

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, k):
        return self.trajectories[k]

    @property
    def grid(self) -> TimeGrid:
        return self.trajectories[0].grid

    @property
    def dim(self) -> int:
        return self.trajectories[0].dim

    def samples(self) -> np.ndarray:
        """Stacked samples, shape ``(M, count, n)``."""
        return np.stack([tr.samples for tr in self.trajectories])

    def velocities(self) -> np.ndarray:
        missing = [k for k, tr in enumerate(self.trajectories) if tr.initial_velocity is None]
        if missing:
            raise StateError(
                f"trajectories {missing} have no initial velocity; "
                "call with_estimated_velocities() first"
            )
        return np.stack([tr.initial_velocity for tr in self.trajectories])

    def with_estimated_velocities(self) -> "Dataset":
        return Dataset(
            tuple(tr.with_velocity(estimate_initial_velocity(tr)) for tr in self.trajectories)
        )


# --------------------------------------------------------------------- csv


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_floats(cells, lineno, path):
    try:
        vals = [float(c) for c in cells]
    except ValueError:
        raise FormatError(f"non-numeric cell in {cells!r}", lineno, path) from None
    if not all(math.isfinite(v) for v in vals):
        raise FormatError("non-finite value", lineno, path)
    return vals


def _grid_from_times(times, linenos, path):
    if len(times) < 2:
        raise FormatError("need at least 2 samples", linenos[-1] if linenos else None, path)
    times = np.asarray(times) - times[0]
    dt = times[1]
    if not dt > 0:
        raise FormatError("time column must be strictly increasing", linenos[1], path)
    dev = np.abs(times - dt * np.arange(len(times)))
    bad = np.nonzero(dev > 1e-9 * dt)[0]
    if bad.size:
        raise FormatError("non-uniform time grid", linenos[bad[0]], path)
    # dt from the full span is more accurate than the first difference
    return TimeGrid(times[-1] / (len(times) - 1), len(times))


def _read_lines(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc}", path=path) from None
    return text.splitlines()


def _parse(lines, path):
    """Yield ``(header, ivs, rows)`` where rows are (lineno, cells)."""
    if not lines:
        raise FormatError("empty file", path=path)
    header = [c.strip() for c in lines[0].split(",")]
    ivs, rows = {}, []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            tag, _, rest = line[1:].partition(":")
            tag = tag.strip()
            if tag == "iv":
                key = None
            elif tag.startswith("iv[") and tag.endswith("]"):
                key = tag[3:-1]
            else:
                continue
            ivs[key] = (lineno, [c.strip() for c in rest.split(",")])
            continue
        rows.append((lineno, [c.strip() for c in line.split(",")]))
    return header, ivs, rows


def _build(rows, header_width, iv, n, label, path):
    times, values, linenos = [], [], []
    for lineno, cells in rows:
        if len(cells) != header_width:
            raise FormatError(
                f"ragged row: expected {header_width} cells, got {len(cells)}", lineno, path
            )
        vals = _parse_floats(cells[header_width - n - 1:], lineno, path)
        times.append(vals[0])
        values.append(vals[1:])
        linenos.append(lineno)
    grid = _grid_from_times(times, linenos, path)
    v = None
    if iv is not None:
        ln, cells = iv
        v = _parse_floats(cells, ln, path)
        if len(v) != n:
            raise FormatError(f"#iv line has {len(v)} entries, expected {n}", ln, path)
    return Trajectory(grid, np.array(values), v, label)


def load_csv(path) -> Trajectory:
    header, ivs, rows = _parse(_read_lines(path), path)
    if header[0].lower() == "traj_id":
        raise FormatError("file holds several trajectories; use load_dataset", 1, path)
    if len(header) < 2 or header[0].lower() != "t":
        raise FormatError("header must be t,x1,...,xn", 1, path)
    n = len(header) - 1
    return _build(rows, len(header), ivs.get(None), n, Path(path).stem, path)


def save_csv(trajectory: Trajectory, path) -> None:
    Path(path).write_text(dumps_csv(trajectory), encoding="utf-8", newline="\n")


def dumps_csv(trajectory: Trajectory) -> str:
    out = io.StringIO()
    n = trajectory.dim
    out.write(",".join(["t"] + [f"x{k + 1}" for k in range(n)]) + "\n")
    if trajectory.initial_velocity is not None:
        out.write("#iv: " + ",".join(_fmt(v) for v in trajectory.initial_velocity) + "\n")
    for t, row in zip(trajectory.times, trajectory.samples):
        out.write(",".join([_fmt(t)] + [_fmt(v) for v in row]) + "\n")
    return out.getvalue()


def load_dataset(path) -> Dataset:
    """Load a directory of trajectory CSVs or a single multi-trajectory file."""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".csv")
        if not files:
            raise FormatError("no .csv files in directory", path=path)
        trajs = [load_csv(p) for p in files]
    else:
        header, ivs, rows = _parse(_read_lines(path), path)
        if header[0].lower() != "traj_id":
            trajs = [load_csv(path)]
        else:
            if len(header) < 3 or header[1].lower() != "t":
                raise FormatError("header must be traj_id,t,x1,...,xn", 1, path)
            n = len(header) - 2
            groups = {}
            for lineno, cells in rows:
                groups.setdefault(cells[0], []).append((lineno, cells))
            trajs = [
                _build(grp, len(header), ivs.get(key), n, key, path)
                for key, grp in groups.items()
            ]
    try:
        return Dataset(tuple(trajs))
    except InputError as exc:
        raise FormatError(f"heterogeneous dataset: {exc}", path=path) from None


def save_dataset(dataset: Dataset, path) -> None:
    """Write `dataset` as one ``traj_id`` CSV file."""
    out = io.StringIO()
    n = dataset.dim
    out.write(",".join(["traj_id", "t"] + [f"x{k + 1}" for k in range(n)]) + "\n")
    ids = [tr.label or str(k) for k, tr in enumerate(dataset)]
    for key, tr in zip(ids, dataset):
        if tr.initial_velocity is not None:
            out.write(f"#iv[{key}]: " + ",".join(_fmt(v) for v in tr.initial_velocity) + "\n")
    for key, tr in zip(ids, dataset):
        for t, row in zip(tr.times, tr.samples):
            out.write(",".join([key, _fmt(t)] + [_fmt(v) for v in row]) + "\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8", newline="\n")


# -------------------------------------------------------------- transforms


def segment(trajectory: Trajectory, window: int, stride: int = 1) -> Dataset:
    """Cut `trajectory` into overlapping windows, each restarting at t = 0."""
    window, stride = int(window), int(stride)
    count = trajectory.grid.count
    if window < 2:
        raise InputError(f"window must be >= 2, got {window}")
    if window > count:
        raise InputError(f"window {window} exceeds trajectory length {count}")
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    grid = TimeGrid(trajectory.grid.dt, window)
    base = trajectory.label or "traj"
    segs = []
    for start in range(0, count - window + 1, stride):
        segs.append(
            Trajectory(grid, trajectory.samples[start:start + window], None, f"{base}_{start:05d}")
        )
    return Dataset(tuple(segs))


def add_noise(dataset: Dataset, sigma: float, seed: int) -> Dataset:
    """Add i.i.d. N(0, sigma^2) to every sample and every stored velocity."""
    sigma = float(sigma)
    if not sigma >= 0:
        raise InputError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    out = []
    for tr in dataset:
        s = tr.samples + sigma * rng.standard_normal(tr.samples.shape)
        v = tr.initial_velocity
        if v is not None:
            v = v + sigma * rng.standard_normal(v.shape)
        out.append(Trajectory(tr.grid, s, v, tr.label))
    return Dataset(tuple(out))


def estimate_initial_velocity(trajectory: Trajectory) -> np.ndarray:
    """Stored velocity if present, else a one-sided difference at t = 0.

    Uses the second-order three-point stencil when at least three samples
    exist and a plain forward difference otherwise.
    """
    if trajectory.initial_velocity is not None:
        return trajectory.initial_velocity
    s, dt = trajectory.samples, trajectory.grid.dt
    if trajectory.grid.count >= 3:
        return (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * dt)
    return (s[1] - s[0]) / dt
