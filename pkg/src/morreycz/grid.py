"""
Uniform lattices over a box in R^n (n = 1, 2), lattice-aligned cubes and
fast window integrals.

A function on R^n is represented by its values at cell midpoints.  Every
integral is a Riemann sum against the cell measure ``h**dim``; suprema over
"all cubes" become maxima over a finite family of lattice-aligned cubes.

Cube convention: ``Cube(center, half_side)`` is the cube of side
``2 * half_side``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "Cube",
    "CubeFamily",
    "SummedTable",
    "Generator",
    "make_grid",
    "sample_function",
    "enumerate_cubes",
    "family_windows",
    "window_integral",
    "parse_generator",
    "save_grid_function",
    "load_grid_function",
    "GENERATORS",
]

_ALIGN_TOL = 1e-9
_DIRECT_BELOW = 1e-15


@dataclass(frozen=True)
class Grid:
    """Uniform lattice of ``resolution`` cells per axis over ``[box_min, box_max]``."""

    dim: int
    box_min: tuple[float, ...]
    box_max: tuple[float, ...]
    resolution: tuple[int, ...]
    cell_side: float = field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        for name in ("box_min", "box_max", "resolution"):
            if len(getattr(self, name)) != self.dim:
                raise ValueError(f"{name} must have {self.dim} entries")
        if any(n < 2 for n in self.resolution):
            raise ValueError(f"resolution must be >= 2 per axis, got {self.resolution}")
        if any(hi <= lo for lo, hi in zip(self.box_min, self.box_max)):
            raise ValueError("box_max must exceed box_min on every axis")
        sides = [(hi - lo) / n for lo, hi, n in zip(self.box_min, self.box_max, self.resolution)]
        if not all(math.isclose(s, sides[0], rel_tol=1e-12) for s in sides):
            raise ValueError(
                f"non-uniform cell side across axes: {sides}; "
                "choose resolutions proportional to the box extents"
            )
        object.__setattr__(self, "cell_side", sides[0])

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return math.prod(self.resolution)

    @property
    def cell_measure(self) -> float:
        return self.cell_side**self.dim

    def axes(self) -> list[np.ndarray]:
        """Midpoint coordinates along each axis."""
        h = self.cell_side
        return [lo + (np.arange(n) + 0.5) * h for lo, n in zip(self.box_min, self.resolution)]

    def points(self) -> np.ndarray:
        """Midpoints as an array of shape ``shape + (dim,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def is_square(self) -> bool:
        return len(set(self.resolution)) == 1

    def refine(self, factor: int = 2) -> Grid:
        return Grid(self.dim, self.box_min, self.box_max, tuple(n * factor for n in self.resolution))

    # --- cubes <-> index windows -------------------------------------------

    def window_of(self, cube: Cube) -> tuple[tuple[int, ...], int]:
        """Return ``(start, length)`` in cells of a lattice-aligned cube.

        Raises ValueError if the cube is not aligned or leaves the box.
        """
        if len(cube.center) != self.dim:
            raise ValueError("cube dimension does not match grid")
        h = self.cell_side
        length = 2 * cube.half_side / h
        n_len = round(length)
        if n_len < 1 or abs(length - n_len) > _ALIGN_TOL * max(1.0, length):
            raise ValueError(f"cube side {2 * cube.half_side} is not a multiple of cell side {h}")
        start = []
        for c, lo, n in zip(cube.center, self.box_min, self.resolution):
            s = (c - cube.half_side - lo) / h
            k = round(s)
            if abs(s - k) > _ALIGN_TOL * max(1.0, abs(s)):
                raise ValueError(f"cube {cube} is not lattice-aligned")
            if k < 0 or k + n_len > n:
                raise ValueError(f"cube {cube} is not contained in the domain box")
            start.append(k)
        return tuple(start), n_len

    def cube_at(self, start: Sequence[int], length: int) -> Cube:
        h = self.cell_side
        center = tuple(lo + (s + length / 2) * h for lo, s in zip(self.box_min, start))
        return Cube(center, length * h / 2)

    def full_cube(self) -> Cube:
        if not self.is_square():
            raise ValueError("the domain box is not a cube")
        return self.cube_at((0,) * self.dim, self.resolution[0])

    def window_slices(self, cube: Cube) -> tuple[slice, ...]:
        start, n = self.window_of(cube)
        return tuple(slice(s, s + n) for s in start)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "box": [list(self.box_min), list(self.box_max)],
            "resolution": list(self.resolution),
        }

    @classmethod
    def from_json(cls, d: dict) -> Grid:
        return cls(d["dim"], tuple(d["box"][0]), tuple(d["box"][1]), tuple(d["resolution"]))


def make_grid(dim: int, box_min, box_max, resolution) -> Grid:
    """Build a :class:`Grid`; scalars are broadcast to every axis.

    >>> make_grid(1, -2, 2, 400).cell_side
    0.01
    """

    def _tup(x, conv):
        if np.ndim(x) == 0:
            return (conv(x),) * dim
        return tuple(conv(v) for v in x)

    return Grid(dim, _tup(box_min, float), _tup(box_max, float), _tup(resolution, int))


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube with side length ``2 * half_side``."""

    center: tuple[float, ...]
    half_side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.half_side > 0:
            raise ValueError("half_side must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def side(self) -> float:
        return 2 * self.half_side

    @property
    def measure(self) -> float:
        return self.side**self.dim

    def contains(self, x) -> np.ndarray:
        """Open-cube membership of points ``x`` with shape ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        c = np.asarray(self.center)
        return np.all(np.abs(x - c) < self.half_side, axis=-1)

    def to_json(self) -> dict:
        return {"center": list(self.center), "half_side": self.half_side}


@dataclass(frozen=True)
class GridFunction:
    """Samples of a (possibly complex) function at the cell midpoints of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def is_real(self) -> bool:
        return self.values.dtype.kind == "f"

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def with_values(self, values) -> GridFunction:
        return GridFunction(self.grid, values)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            other = other.values
        return self.with_values(self.values + other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            other = other.values
        return self.with_values(self.values * other)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return self.with_values(-self.values)

    def __sub__(self, other):
        return self + (-other)


def _same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid != g.grid:
        raise ValueError("grid functions live on different grids")


# --- compensated prefix sums ------------------------------------------------


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _dd_add(ahi, alo, bhi, blo):
    s, e = _two_sum(ahi, bhi)
    e = e + (alo + blo)
    hi = s + e
    return hi, e - (hi - s)


def _dd_cumsum(hi, lo, axis):
    """Double-double running sum along ``axis`` with a leading zero slab."""
    hi = np.moveaxis(hi, axis, 0)
    lo = np.moveaxis(lo, axis, 0)
    out_hi = np.zeros((hi.shape[0] + 1,) + hi.shape[1:])
    out_lo = np.zeros_like(out_hi)
    acc_hi = np.zeros(hi.shape[1:])
    acc_lo = np.zeros(hi.shape[1:])
    for k in range(hi.shape[0]):
        acc_hi, acc_lo = _dd_add(acc_hi, acc_lo, hi[k], lo[k])
        out_hi[k + 1] = acc_hi
        out_lo[k + 1] = acc_lo
    return np.moveaxis(out_hi, 0, axis), np.moveaxis(out_lo, 0, axis)


class SummedTable:
    """Summed-area table of ``|f|**q * cell_measure`` in double-double precision.

    Window queries agree with direct (correctly rounded) summation to about
    one ulp of the window sum, independently of the total mass of ``f``:
    windows too small to resolve against their corner sums are summed directly.
    """

    def __init__(self, f: GridFunction, q: float = 1.0, weights: np.ndarray | None = None):
        if q < 1:
            raise ValueError("exponent q must be >= 1")
        self.grid = f.grid
        self.exponent = float(q)
        if weights is None:
            weights = np.abs(f.values) ** q * f.grid.cell_measure
        self.weights = np.asarray(weights, dtype=float)
        hi, lo = self.weights, np.zeros_like(self.weights)
        for ax in range(self.grid.dim):
            hi, lo = _dd_cumsum(hi, lo, ax)
        self._hi, self._lo = hi, lo

    def query_windows(self, starts: np.ndarray, length: int) -> np.ndarray:
        """Window sums for an ``(k, dim)`` array of starts sharing one side length."""
        starts = np.asarray(starts, dtype=np.intp).reshape(-1, self.grid.dim)
        ends = starts + length
        acc_hi = np.zeros(len(starts))
        acc_lo = np.zeros(len(starts))
        scale = np.zeros(len(starts))
        for corner in product((0, 1), repeat=self.grid.dim):
            idx = tuple(np.where(c, ends[:, k], starts[:, k]) for k, c in enumerate(corner))
            sign = -1.0 if (self.grid.dim - sum(corner)) % 2 else 1.0
            acc_hi, acc_lo = _dd_add(acc_hi, acc_lo, sign * self._hi[idx], sign * self._lo[idx])
            scale = np.maximum(scale, np.abs(self._hi[idx]))
        out = acc_hi + acc_lo
        # double-double prefixes carry ~1e-30 relative error; windows far below
        # their corner sums lose digits and are summed directly instead
        for i in np.nonzero(out < scale * _DIRECT_BELOW)[0]:
            sl = tuple(slice(s, s + length) for s in starts[i])
            out[i] = math.fsum(self.weights[sl].ravel())
        return out

    def query(self, cube: Cube) -> float:
        start, n = self.grid.window_of(cube)
        return float(self.query_windows(np.array([start]), n)[0])


def window_integral(table: SummedTable, cube: Cube) -> float:
    """``∫_Q |f|^q`` over a lattice-aligned cube, read from a summed table."""
    return table.query(cube)


# --- cube families ------------------------------------------------------------


@dataclass(frozen=True)
class CubeFamily:
    """Finite stand-in for "all cubes": every aligned cube, dyadic cubes, or a seeded sample."""

    policy: str = "all_aligned"
    seed: int | None = None
    count: int | None = None
    must_include_full_domain: bool = True

    def __post_init__(self):
        if self.policy not in ("all_aligned", "dyadic", "sampled"):
            raise ValueError(f"unknown cube family policy {self.policy!r}")
        if self.policy == "sampled" and (self.seed is None or not self.count or self.count < 1):
            raise ValueError("sampled family needs a seed and a positive count")

    @classmethod
    def all_aligned(cls, must_include_full_domain=True):
        return cls("all_aligned", must_include_full_domain=must_include_full_domain)

    @classmethod
    def dyadic(cls, must_include_full_domain=True):
        return cls("dyadic", must_include_full_domain=must_include_full_domain)

    @classmethod
    def sampled(cls, seed: int, count: int, must_include_full_domain=True):
        return cls("sampled", seed, count, must_include_full_domain)

    @classmethod
    def parse(cls, text: str) -> CubeFamily:
        """``all``, ``dyadic`` or ``sampled:SEED:COUNT``."""
        parts = text.split(":")
        if parts[0] in ("all", "all_aligned"):
            return cls.all_aligned()
        if parts[0] == "dyadic":
            return cls.dyadic()
        if parts[0] == "sampled" and len(parts) == 3:
            return cls.sampled(int(parts[1]), int(parts[2]))
        raise ValueError(f"cannot parse cube family {text!r}")

    def label(self) -> str:
        if self.policy == "sampled":
            return f"sampled:{self.seed}:{self.count}"
        return self.policy


def _all_starts(grid: Grid, length: int) -> np.ndarray:
    ranges = [np.arange(n - length + 1) for n in grid.resolution]
    mesh = np.meshgrid(*ranges, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def family_windows(grid: Grid, family: CubeFamily) -> list[tuple[int, np.ndarray]]:
    """Windows of a family grouped by side length: ``[(length, starts), ...]``.

    Lengths ascend; starts within a group are lexicographic.  This is the
    deterministic order used by :func:`enumerate_cubes` and by every norm.
    """
    nmin = min(grid.resolution)
    groups: dict[int, np.ndarray] = {}
    if family.policy == "all_aligned":
        for length in range(1, nmin + 1):
            groups[length] = _all_starts(grid, length)
    elif family.policy == "dyadic":
        length = 1
        while length <= nmin:
            ranges = [np.arange(0, n - length + 1, length) for n in grid.resolution]
            mesh = np.meshgrid(*ranges, indexing="ij")
            groups[length] = np.stack([m.ravel() for m in mesh], axis=-1)
            length *= 2
    else:
        rng = np.random.default_rng(family.seed)
        total = sum(math.prod(n - L + 1 for n in grid.resolution) for L in range(1, nmin + 1))
        target = min(family.count, total)
        chosen: set[tuple[int, tuple[int, ...]]] = set()
        if family.must_include_full_domain and grid.is_square():
            chosen.add((nmin, (0,) * grid.dim))
        while len(chosen) < target:
            length = int(rng.integers(1, nmin + 1))
            start = tuple(int(rng.integers(0, n - length + 1)) for n in grid.resolution)
            chosen.add((length, start))
        for length, start in sorted(chosen):
            groups.setdefault(length, []).append(start)
        groups = {k: np.array(v, dtype=np.intp).reshape(-1, grid.dim) for k, v in groups.items()}

    if family.must_include_full_domain:
        if not grid.is_square():
            raise ValueError("full-domain cube requested but the domain box is not a cube")
        full = np.zeros((1, grid.dim), dtype=np.intp)
        existing = groups.get(nmin)
        if existing is None:
            groups[nmin] = full
        elif not np.any(np.all(existing == 0, axis=1)):
            groups[nmin] = np.concatenate([full, existing])
    return [(k, np.asarray(groups[k], dtype=np.intp)) for k in sorted(groups)]


def enumerate_cubes(grid: Grid, family: CubeFamily) -> list[Cube]:
    return [
        grid.cube_at(start, length)
        for length, starts in family_windows(grid, family)
        for start in starts
    ]


def window_view(values: np.ndarray, length: int, starts: np.ndarray) -> np.ndarray:
    """Gather the cells of equal-size windows into rows: shape ``(len(starts), length**dim)``."""
    dim = values.ndim
    view = np.lib.stride_tricks.sliding_window_view(values, (length,) * dim)
    rows = view[tuple(starts[:, k] for k in range(dim))]
    return rows.reshape(len(starts), -1)


def iter_window_rows(values, family_groups, max_elems: int = 2_000_000) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(length, starts_chunk, rows)`` keeping each rows block under ``max_elems``."""
    dim = np.ndim(values)
    for length, starts in family_groups:
        per = max(1, max_elems // (length**dim))
        for k in range(0, len(starts), per):
            chunk = starts[k : k + per]
            yield length, chunk, window_view(values, length, chunk)


# --- generators -----------------------------------------------------------------


def _radius(points, center):
    c = np.zeros(points.shape[-1]) if center is None else np.broadcast_to(np.asarray(center, float), points.shape[-1:])
    return np.linalg.norm(points - c, axis=-1)


def _check_singularity(grid: Grid, r: np.ndarray, what: str):
    if np.min(r) <= 1e-12 * grid.cell_side:
        raise ValueError(f"{what}: singularity coincides with a sample point; shift the grid by half a cell")


def _gen_indicator(grid, pts, rng, center=0.0, half_side=1.0):
    cube = Cube(np.broadcast_to(np.asarray(center, float), (grid.dim,)), half_side)
    return cube.contains(pts).astype(float)


def _gen_power(grid, pts, rng, beta=0.25, center=None):
    if beta < 0:
        raise ValueError("beta must be >= 0")
    r = _radius(pts, center)
    _check_singularity(grid, r, "power")
    return r ** (-beta)


def _gen_log_abs(grid, pts, rng, center=None):
    r = _radius(pts, center)
    _check_singularity(grid, r, "log_abs")
    return np.log(r)


def _gen_abs_power(grid, pts, rng, alpha=0.5, center=None):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return _radius(pts, center) ** alpha


def _gen_sign(grid, pts, rng):
    return np.where(pts[..., 0] >= 0, 1.0, -1.0)


def _gen_constant(grid, pts, rng, value=1.0):
    return np.full(grid.shape, float(value))


def _gen_linear(grid, pts, rng, slope=1.0):
    return slope * pts[..., 0]


def _gen_random(grid, pts, rng, scale=1.0):
    return scale * rng.standard_normal(grid.shape)


def _gen_step(grid, pts, rng, pieces=5):
    """Sum of ``pieces`` random multiples of indicators of random aligned cubes."""
    out = np.zeros(grid.shape)
    nmin = min(grid.resolution)
    for _ in range(int(pieces)):
        length = int(rng.integers(1, nmin + 1))
        start = [int(rng.integers(0, n - length + 1)) for n in grid.resolution]
        sl = tuple(slice(s, s + length) for s in start)
        out[sl] += rng.standard_normal()
    return out


GENERATORS: dict[str, Callable] = {
    "indicator": _gen_indicator,
    "power": _gen_power,
    "log_abs": _gen_log_abs,
    "abs_power": _gen_abs_power,
    "sign": _gen_sign,
    "constant": _gen_constant,
    "linear": _gen_linear,
    "random": _gen_random,
    "step": _gen_step,
}


@dataclass(frozen=True)
class Generator:
    """A named sampling recipe, e.g. ``Generator("power", {"beta": 0.3})``."""

    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in GENERATORS:
            raise ValueError(f"unknown generator {self.name!r}; known: {sorted(GENERATORS)}")

    def label(self) -> str:
        def fmt(v):
            return ";".join(str(x) for x in v) if isinstance(v, (tuple, list)) else str(v)

        args = ",".join(f"{k}={fmt(v)}" for k, v in sorted(self.params.items()))
        text = self.name + (f":{args}" if args else "")
        if self.seed or self.name in ("random", "step"):
            text += f"@{self.seed}"
        return text

    def __hash__(self):
        return hash(self.label())


def parse_generator(text: str) -> Generator:
    """Parse ``name[:k=v,...][@seed]``; list values use ``;`` (``center=0.5;0.5``)."""
    seed = 0
    if "@" in text:
        text, s = text.rsplit("@", 1)
        seed = int(s)
    name, _, args = text.partition(":")
    params = {}
    for item in filter(None, args.split(",")):
        key, _, val = item.partition("=")
        if ";" in val:
            params[key] = tuple(float(v) for v in val.split(";"))
        else:
            params[key] = int(val) if val.lstrip("-").isdigit() and key == "pieces" else float(val)
    return Generator(name, params, seed)


def sample_function(grid: Grid, generator: Generator | str | Callable) -> GridFunction:
    """Sample a generator at the midpoints of ``grid``.

    ``generator`` is a :class:`Generator`, its string form, or a callable
    mapping a points array of shape ``shape + (dim,)`` to values.
    """
    pts = grid.points()
    if callable(generator) and not isinstance(generator, Generator):
        return GridFunction(grid, generator(pts if grid.dim > 1 else pts[..., 0]))
    if isinstance(generator, str):
        generator = parse_generator(generator)
    rng = np.random.default_rng(generator.seed)
    vals = GENERATORS[generator.name](grid, pts, rng, **generator.params)
    return GridFunction(grid, vals)


# --- serialization --------------------------------------------------------------

_MAGIC = b"GFN1"


def save_grid_function(path, f: GridFunction) -> None:
    """Write ``f`` as CSV (``.csv``) or flat binary (anything else).

    CSV: a ``# {json}`` header line, then ``index,re,im`` rows in C order.
    Binary: magic, little-endian u32 header length, JSON header, complex128 data.
    """
    path = Path(path)
    header = f.grid.to_json()
    flat = np.asarray(f.values, dtype=complex).ravel()
    if path.suffix == ".csv":
        with path.open("w") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            fh.write("index,re,im\n")
            for i, v in enumerate(flat):
                fh.write(f"{i},{float(v.real)!r},{float(v.imag)!r}\n")
    else:
        blob = json.dumps(header).encode()
        with path.open("wb") as fh:
            fh.write(_MAGIC + struct.pack("<I", len(blob)) + blob)
            fh.write(flat.astype("<c16").tobytes())


def load_grid_function(path) -> GridFunction:
    path = Path(path)
    if path.suffix == ".csv":
        lines = path.read_text().splitlines()
        grid = Grid.from_json(json.loads(lines[0].lstrip("# ")))
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:] if ln.strip()])
        vals = np.zeros(grid.size, dtype=complex)
        vals[rows[:, 0].astype(int)] = rows[:, 1] + 1j * rows[:, 2]
    else:
        raw = path.read_bytes()
        if raw[:4] != _MAGIC:
            raise ValueError(f"{path} is not a grid function file")
        (n,) = struct.unpack("<I", raw[4:8])
        grid = Grid.from_json(json.loads(raw[8 : 8 + n]))
        vals = np.frombuffer(raw[8 + n :], dtype="<c16").astype(complex)
    if not np.any(vals.imag):
        vals = vals.real
    return GridFunction(grid, vals)
