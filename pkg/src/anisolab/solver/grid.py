"""Cell-centred rectangular grids, fields on them and recorded trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

BOUNDARY_CODES = {"periodic": 0, "dirichlet-zero": 1, "dirichlet-profile": 2, "noflux": 3}
BOUNDARY_NAMES = {v: k for k, v in BOUNDARY_CODES.items()}


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Cells ``origin_i + (k + 1/2) h_i`` for ``k < dims_i`` on each axis."""

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    boundary: str = "dirichlet-zero"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(h) for h in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if not 1 <= len(dims) <= 3:
            raise GridError(f"grids have 1 to 3 axes, got {len(dims)}")
        if not len(dims) == len(spacing) == len(origin):
            raise GridError("dims, spacing and origin must have equal length")
        if any(d < 4 for d in dims):
            raise GridError(f"every axis needs at least 4 cells, got {dims}")
        if any(not (h > 0 and math.isfinite(h)) for h in spacing):
            raise GridError(f"spacing must be positive, got {spacing}")
        if self.boundary not in BOUNDARY_CODES:
            raise GridError(f"unknown boundary {self.boundary!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def uniform(cls, lo: Sequence[float], hi: Sequence[float], dims: Sequence[int],
                boundary: str = "dirichlet-zero") -> "Grid":
        """Grid whose cells tile the box ``[lo, hi]`` exactly."""
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        spacing = (hi - lo) / np.asarray(dims)
        return cls(tuple(dims), tuple(spacing), tuple(lo), boundary)

    @property
    def N(self) -> int:
        return len(self.dims)

    @property
    def boundary_code(self) -> int:
        return BOUNDARY_CODES[self.boundary]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.asarray(self.dims) * np.asarray(self.spacing)

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + (np.arange(self.dims[a]) + 0.5) * self.spacing[a]

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.N)]

    def mesh(self) -> np.ndarray:
        """Cell centres as an array of shape ``dims + (N,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def with_boundary(self, boundary: str) -> "Grid":
        return Grid(self.dims, self.spacing, self.origin, boundary)

    # -- padded 3-d embedding used by the kernels --------------------------------
    @property
    def padded_shape(self) -> tuple[int, int, int]:
        lead = (1,) * (3 - self.N)
        return lead + tuple(d + 2 for d in self.dims)

    @property
    def interior(self) -> tuple[slice, ...]:
        return (slice(None),) * (3 - self.N) + (slice(1, -1),) * self.N

    def embed(self, values: np.ndarray) -> np.ndarray:
        w = np.zeros(self.padded_shape)
        w[self.interior] = np.asarray(values, dtype=float).reshape(
            (1,) * (3 - self.N) + self.dims)
        return w

    def extract(self, w: np.ndarray) -> np.ndarray:
        return w[self.interior].reshape(self.dims).copy()

    def face_buffers(self) -> list[np.ndarray]:
        """One face array per padded axis, sized ``n_a + 1`` along that axis."""
        shape3 = (1,) * (3 - self.N) + self.dims
        out = []
        for a in range(3):
            if a < 3 - self.N:
                out.append(np.zeros(1))
            else:
                s = list(shape3)
                s[a] += 1
                out.append(np.zeros(s))
        return out

    def ghost_points(self, axis: int, side: int) -> np.ndarray:
        """Centres of the ghost layer beyond the low (``side=0``) or high end of ``axis``."""
        coords = self.axes()
        h = self.spacing[axis]
        coords[axis] = np.array([self.origin[axis] - 0.5 * h if side == 0
                                 else self.origin[axis] + (self.dims[axis] + 0.5) * h])
        return np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1)

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "spacing": list(self.spacing),
                "origin": list(self.origin), "boundary": self.boundary}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(tuple(d["dims"]), tuple(d["spacing"]), tuple(d["origin"]),
                   d.get("boundary", "dirichlet-zero"))


@dataclass
class Field:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.dims:
            raise GridError(f"values of shape {v.shape} do not match grid {self.grid.dims}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        self.values = v
        self.time = float(self.time)

    @classmethod
    def from_function(cls, grid: Grid, f, t: float = 0.0) -> "Field":
        """Sample ``f(x, t)`` at the cell centres; ``x`` has shape ``dims + (N,)``."""
        return cls(grid, np.broadcast_to(f(grid.mesh(), t), grid.dims), t)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time)

    def scaled(self, k: float) -> "Field":
        return Field(self.grid, k * self.values, self.time)


@dataclass
class Trajectory:
    """Time-ordered snapshots on one grid, plus free-form metadata."""

    snapshots: list[Field] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        snaps, self.snapshots = list(self.snapshots), []
        for s in snaps:
            self.append(s)

    def append(self, f: Field) -> None:
        if self.snapshots:
            last = self.snapshots[-1]
            if f.grid != last.grid:
                raise GridError("all snapshots must share one grid")
            if not f.time > last.time:
                raise GridError(f"snapshot times must increase ({f.time} after {last.time})")
        self.snapshots.append(f)

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self) -> Iterator[Field]:
        return iter(self.snapshots)

    def __getitem__(self, i) -> Field:
        return self.snapshots[i]

    @property
    def grid(self) -> Grid:
        if not self.snapshots:
            raise GridError("empty trajectory")
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def stack(self) -> np.ndarray:
        """All snapshot values as one array with time as the leading axis."""
        return np.stack([s.values for s in self.snapshots])

    def map(self, fn) -> "Trajectory":
        return Trajectory([Field(s.grid, fn(s.values), s.time) for s in self.snapshots],
                          dict(self.metadata))


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping controls.

    ``flux_sign`` exists for fault injection only: ``-1`` turns the scheme
    into a backward diffusion that the validation suite must catch.
    """

    safety: float = 0.4
    dt_min: float = 0.0
    dt_max: float = 1.0
    snapshot_times: tuple[float, ...] = ()
    gradient_floor: float = 0.0
    max_steps: int = 10**9
    threads: int = 1
    flux_sign: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.safety <= 1.0:
            raise ValueError(f"safety must lie in (0, 1], got {self.safety}")
        if not 0.0 <= self.dt_min <= self.dt_max:
            raise ValueError("need 0 <= dt_min <= dt_max")
        if self.gradient_floor < 0:
            raise ValueError("gradient_floor must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        object.__setattr__(self, "snapshot_times",
                           tuple(sorted(float(t) for t in self.snapshot_times)))
