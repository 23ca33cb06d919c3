"""Gridded space-time fields: containers, text IO, noise, subsampling, flux recovery."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import central_diff, trapezoid_cumulative

GRID_MAGIC = "pic-grid v1"
_UNIFORM_RTOL = 1e-9


class GridFormatError(ValueError):
    """Raised when a grid file does not match the documented text format."""


def _check_coords(name: str, coords: np.ndarray) -> None:
    if coords.ndim != 1 or coords.size < 2:
        raise ValueError(f"{name} must be a 1-D array with at least 2 entries")
    if not np.all(np.isfinite(coords)):
        raise ValueError(f"{name} contains non-finite values")
    steps = np.diff(coords)
    if np.any(steps <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    span = coords[-1] - coords[0]
    if np.max(np.abs(steps - steps[0])) > _UNIFORM_RTOL * max(abs(span), 1.0):
        raise ValueError(f"{name} spacing is not uniform")


@dataclass(frozen=True)
class GridField:
    """Scalar field u(x, t) sampled on a uniform rectangular grid.

    ``values[i, j]`` holds u at ``xs[i]``, ``ts[j]``.
    """

    xs: np.ndarray
    ts: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xs", np.asarray(self.xs, dtype=float))
        object.__setattr__(self, "ts", np.asarray(self.ts, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        _check_coords("xs", self.xs)
        _check_coords("ts", self.ts)
        if self.values.shape != (self.xs.size, self.ts.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"({self.xs.size}, {self.ts.size})"
            )
        if not np.all(np.isfinite(self.values)):
            i, j = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite value at row {i}, column {j}")

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])

    @property
    def dt(self) -> float:
        return float(self.ts[1] - self.ts[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class SampleSet:
    """Scattered (x, t, u) observations drawn from a grid."""

    xs: np.ndarray
    ts: np.ndarray
    us: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xs", np.asarray(self.xs, dtype=float))
        object.__setattr__(self, "ts", np.asarray(self.ts, dtype=float))
        object.__setattr__(self, "us", np.asarray(self.us, dtype=float))
        if not (self.xs.shape == self.ts.shape == self.us.shape) or self.xs.ndim != 1:
            raise ValueError("xs, ts, us must be 1-D arrays of equal length")

    def __len__(self) -> int:
        return self.xs.size

    @property
    def x_bounds(self) -> tuple[float, float]:
        return float(self.xs.min()), float(self.xs.max())

    @property
    def t_bounds(self) -> tuple[float, float]:
        return float(self.ts.min()), float(self.ts.max())


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise scaled by the field's population standard deviation."""

    level: float
    kind: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.level) or self.level < 0:
            raise ValueError("noise level must be finite and >= 0")
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")


def save_grid(grid: GridField, path) -> None:
    """Write a grid in the versioned plain-text format (17 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GRID_MAGIC + "\n")
        fh.write(f"{grid.xs.size} {grid.ts.size}\n")
        fh.write(" ".join(f"{v:.17g}" for v in grid.xs) + "\n")
        fh.write(" ".join(f"{v:.17g}" for v in grid.ts) + "\n")
        for row in grid.values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_grid(path) -> GridField:
    """Read a grid written by :func:`save_grid`, validating structure and values."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != GRID_MAGIC:
        raise GridFormatError(f"bad header: expected {GRID_MAGIC!r}")
    try:
        n_x, n_t = (int(tok) for tok in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise GridFormatError("malformed dimensions line") from exc
    if len(lines) < 4 + n_x:
        raise GridFormatError(f"expected {4 + n_x} lines, found {len(lines)}")

    def parse_row(line: str, expect: int, what: str) -> np.ndarray:
        toks = line.split()
        if len(toks) != expect:
            raise GridFormatError(f"{what}: expected {expect} values, found {len(toks)}")
        try:
            return np.array([float(t) for t in toks])
        except ValueError as exc:
            raise GridFormatError(f"{what}: unparseable number") from exc

    xs = parse_row(lines[2], n_x, "x coordinates")
    ts = parse_row(lines[3], n_t, "t coordinates")
    values = np.empty((n_x, n_t))
    for i in range(n_x):
        values[i] = parse_row(lines[4 + i], n_t, f"row {i}")
        if not np.all(np.isfinite(values[i])):
            j = int(np.argwhere(~np.isfinite(values[i]))[0])
            raise GridFormatError(f"non-finite value at row {i}, column {j}")
    try:
        return GridField(xs, ts, values)
    except ValueError as exc:
        raise GridFormatError(str(exc)) from exc


def add_noise(grid: GridField, spec: NoiseSpec) -> GridField:
    """Return ``u + level * std(u) * eta`` with seeded i.i.d. noise.

    A constant field has std 0; it is returned unchanged with a warning.
    """
    if spec.level == 0.0:
        return grid
    sigma = float(grid.values.std(ddof=0))
    if sigma == 0.0:
        warnings.warn("field is constant (std = 0); returning it unchanged")
        return grid
    rng = np.random.default_rng(spec.seed)
    scale = spec.level * sigma
    if spec.kind == "gaussian":
        eta = rng.standard_normal(grid.values.shape)
        noisy = grid.values + scale * eta
    else:
        half_width = scale * np.sqrt(3.0)
        noisy = grid.values + rng.uniform(-half_width, half_width, grid.values.shape)
    return GridField(grid.xs, grid.ts, noisy)


def subsample(grid: GridField, n: int, seed: int) -> SampleSet:
    """Draw ``n`` distinct grid points uniformly without replacement (seeded)."""
    total = grid.xs.size * grid.ts.size
    if not 1 <= n <= total:
        raise ValueError(f"sample count must be in [1, {total}], got {n}")
    rng = np.random.default_rng(seed)
    flat = rng.choice(total, size=n, replace=False)
    ix, jt = np.unravel_index(flat, grid.shape)
    return SampleSet(grid.xs[ix], grid.ts[jt], grid.values[ix, jt])


def flux_from_height(grid: GridField) -> GridField:
    """Recover the conservative-form flux F with F_x = -h_t.

    h_t uses central time differences (one-sided at the temporal ends) and the
    spatial integral uses the trapezoid rule from the left grid edge, so
    F(x0, t) = 0 for every t.
    """
    if grid.xs.size < 3 or grid.ts.size < 3:
        raise ValueError("grid too small: need at least 3 points per axis")
    h_t = central_diff(grid.values, grid.dt, axis=1)
    flux = trapezoid_cumulative(-h_t, grid.dx, axis=0)
    return GridField(grid.xs, grid.ts, flux)
