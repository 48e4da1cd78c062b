"""
Lebesgue, weak Lebesgue, Morrey, weak Morrey, BMO and Lipschitz functionals of
grid functions, computed exactly for the discrete (cell) measure.

Weak functionals use the order statistics of the samples: on a set of cells
the distribution function is a step function, and

    sup_λ λ^q |{|f| > λ}| = max_k  k · h · v_(k)^q ,

with v_(1) >= v_(2) >= ... the sorted moduli.  Strong and weak masses of a
cube are formed from the same per-cell weights ``|f|**q * h``, so that the
per-cube Chebyshev inequality survives floating point exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    Cube,
    CubeFamily,
    GridFunction,
    SummedTable,
    family_windows,
    iter_window_rows,
)

__all__ = [
    "NormParams",
    "DistributionFunction",
    "lp_norm",
    "weak_lp_norm",
    "morrey_norm",
    "weak_morrey_norm",
    "bmo_norm",
    "lipschitz_norm_diff",
    "lipschitz_norm_osc",
    "distribution_function",
    "mean_oscillation",
    "norm_record",
]

_REL = 1e-12


@dataclass(frozen=True)
class NormParams:
    """Exponents for Morrey-type norms and the fractional/Lipschitz relations between them.

    ``s``, ``t`` and ``l`` are the target exponents paired with ``(p, q, alpha)``:
    ``1/s = 1/p - alpha/n``, ``1/t = 1/q - alpha/n`` and ``l/s = q/p``.
    """

    p: float
    q: float
    alpha: float | None = None
    s: float | None = None
    t: float | None = None
    l: float | None = None
    dim: int = 1

    def __post_init__(self):
        if not (1 <= self.q <= self.p < math.inf):
            raise ValueError(f"need 1 <= q <= p < inf, got p={self.p}, q={self.q}")
        a, n = self.alpha, self.dim
        if a is not None and not 0 < a < n:
            raise ValueError(f"alpha must lie in (0, {n})")
        if (self.s is not None or self.t is not None or self.l is not None) and a is None:
            raise ValueError("target exponents need alpha")
        if self.s is not None and not math.isclose(1 / self.s, 1 / self.p - a / n, rel_tol=0, abs_tol=_REL):
            raise ValueError("1/s = 1/p - alpha/n violated")
        if self.t is not None and not math.isclose(1 / self.t, 1 / self.q - a / n, rel_tol=0, abs_tol=_REL):
            raise ValueError("1/t = 1/q - alpha/n violated")
        if self.l is not None and not math.isclose(self.l / self.s, self.q / self.p, rel_tol=0, abs_tol=_REL):
            raise ValueError("l/s = q/p violated")

    @classmethod
    def fractional(cls, p: float, q: float, alpha: float, dim: int = 1) -> NormParams:
        """Derive ``s, t, l`` from ``(p, q, alpha)``; rejects non-positive ``1/s`` or ``1/t``."""
        inv_s = 1 / p - alpha / dim
        inv_t = 1 / q - alpha / dim
        if inv_s <= 0 or inv_t <= 0:
            raise ValueError(f"need p < n/alpha and q < n/alpha (p={p}, q={q}, alpha={alpha}, n={dim})")
        s, t = 1 / inv_s, 1 / inv_t
        return cls(p, q, alpha, s, t, s * q / p, dim)


@dataclass(frozen=True)
class DistributionFunction:
    """``λ ↦ |{|f| > λ}|`` for a discrete measure.

    ``levels`` are the distinct nonzero moduli in decreasing order and
    ``counts[k]`` is the number of cells with ``|f| >= levels[k]``.
    """

    levels: np.ndarray
    counts: np.ndarray
    cell_measure: float

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0):
            raise ValueError("level must be >= 0")
        # number of levels strictly above lam
        above = len(self.levels) - np.searchsorted(self.levels[::-1], lam, side="right")
        total = np.concatenate([[0], self.counts])
        return total[above] * self.cell_measure

    @property
    def total_measure(self) -> float:
        return float(self.counts[-1] * self.cell_measure) if len(self.counts) else 0.0


def distribution_function(f: GridFunction, region: Cube | None = None) -> DistributionFunction:
    vals = _region_values(f, region)
    mod = np.abs(vals).ravel()
    mod = mod[mod > 0]
    levels, mult = np.unique(mod, return_counts=True)
    return DistributionFunction(levels[::-1].copy(), np.cumsum(mult[::-1]), f.grid.cell_measure)


def _region_values(f: GridFunction, region: Cube | None) -> np.ndarray:
    if region is None:
        return f.values
    return f.values[f.grid.window_slices(region)]


def _weights(f: GridFunction, q: float) -> np.ndarray:
    return np.abs(f.values) ** q * f.grid.cell_measure


def _weak_mass(sorted_desc: np.ndarray) -> np.ndarray:
    """Row-wise ``max_k k * w_(k)`` for rows sorted in decreasing order."""
    k = np.arange(1, sorted_desc.shape[-1] + 1)
    return np.max(sorted_desc * k, axis=-1)


def _scaled(mass, cube_measure, p: float, q: float):
    return mass ** (1 / q) * cube_measure ** (1 / p - 1 / q)


def lp_norm(f: GridFunction, p: float, region: Cube | None = None) -> float:
    """``(∫_Q |f|^p)^{1/p}`` with a correctly rounded sum; ``region=None`` is the whole box."""
    if p < 1:
        raise ValueError("p must be >= 1")
    w = np.abs(_region_values(f, region)) ** p * f.grid.cell_measure
    return math.fsum(w.ravel()) ** (1 / p)


def weak_lp_norm(f: GridFunction, p: float, region: Cube | None = None) -> float:
    """``sup_λ λ |{x in Q: |f(x)| > λ}|^{1/p}``, attained as λ increases to a sample value."""
    if p < 1:
        raise ValueError("p must be >= 1")
    w = np.abs(_region_values(f, region)) ** p * f.grid.cell_measure
    w = -np.sort(-w.ravel())
    return float(_weak_mass(w)) ** (1 / p)


def _check_morrey(p, q):
    if not 1 <= q <= p < math.inf:
        raise ValueError(f"Morrey exponents need 1 <= q <= p < inf, got p={p}, q={q}")


def _argmax_update(best, vals, length, starts):
    i = int(np.argmax(vals))
    if vals[i] > best[0]:
        return float(vals[i]), length, tuple(int(s) for s in starts[i])
    return best


def morrey_norm(f: GridFunction, p: float, q: float, family: CubeFamily | None = None, *, with_cube: bool = False):
    """``sup_Q |Q|^{1/p-1/q} (∫_Q |f|^q)^{1/q}`` over a cube family.

    Window integrals come from a compensated summed-area table.  With
    ``with_cube=True`` returns ``(value, argmax_cube)``.
    """
    _check_morrey(p, q)
    family = family or CubeFamily.all_aligned()
    grid = f.grid
    table = SummedTable(f, q, weights=_weights(f, q))
    best = (0.0, None, None)
    for length, starts in family_windows(grid, family):
        masses = table.query_windows(starts, length)
        vals = _scaled(masses, (length * grid.cell_side) ** grid.dim, p, q)
        best = _argmax_update(best, vals, length, starts)
    return _finish(grid, best, with_cube)


def weak_morrey_norm(f: GridFunction, p: float, q: float, family: CubeFamily | None = None, *, with_cube: bool = False):
    """``sup_Q |Q|^{1/p-1/q} sup_λ λ |{y in Q: |f(y)| > λ}|^{1/q}`` over a cube family."""
    _check_morrey(p, q)
    family = family or CubeFamily.all_aligned()
    grid = f.grid
    w = _weights(f, q)
    best = (0.0, None, None)
    for length, starts, rows in iter_window_rows(w, family_windows(grid, family)):
        rows = -np.sort(-rows, axis=1)
        vals = _scaled(_weak_mass(rows), (length * grid.cell_side) ** grid.dim, p, q)
        best = _argmax_update(best, vals, length, starts)
    return _finish(grid, best, with_cube)


def _finish(grid, best, with_cube):
    value, length, start = best
    if not with_cube:
        return value
    return value, (grid.cube_at(start, length) if length is not None else None)


# --- oscillation functionals -----------------------------------------------------


def _deviations(rows: np.ndarray) -> np.ndarray:
    """``b - b_Q`` per row; the average is taken relative to the first cell so constants give exact zeros."""
    shifted = rows - rows[:, :1]
    return shifted - shifted.mean(axis=1, keepdims=True)


def mean_oscillation(b: GridFunction, cube: Cube, reference: float | None = None) -> float:
    """``(1/|Q|) ∫_Q |b - c|``; ``c`` defaults to ``b_Q``."""
    vals = np.asarray(b.values[b.grid.window_slices(cube)], dtype=float).ravel()
    if reference is None:
        dev = _deviations(vals[None, :])[0]
    else:
        dev = vals - reference
    return math.fsum(np.abs(dev)) / dev.size


def _require_real(b: GridFunction, what: str):
    if not b.is_real:
        raise ValueError(f"{what} needs a real-valued function")


def _oscillation_sup(b, family, reduce, alpha, with_cube):
    grid = b.grid
    best = (0.0, None, None)
    for length, starts, rows in iter_window_rows(np.asarray(b.values, float), family_windows(grid, family)):
        vals = reduce(_deviations(rows))
        if alpha:
            vals = vals / (length * grid.cell_side) ** alpha
        best = _argmax_update(best, vals, length, starts)
    return _finish(grid, best, with_cube)


def bmo_norm(b: GridFunction, family: CubeFamily | None = None, *, with_cube: bool = False):
    """Largest mean oscillation ``(1/|Q|)∫_Q |b - b_Q|`` over the family."""
    _require_real(b, "bmo_norm")
    family = family or CubeFamily.all_aligned()
    return _oscillation_sup(b, family, lambda d: np.abs(d).mean(axis=1), None, with_cube)


def lipschitz_norm_osc(b: GridFunction, alpha: float, q: float | None = None,
                       family: CubeFamily | None = None, *, with_cube: bool = False):
    """Oscillation forms of the ``Lip_alpha`` seminorm.

    ``q=None``: ``sup_Q |Q|^{-1-alpha/n} ∫_Q |b - b_Q|``;
    ``1 < q < inf``: ``sup_Q |Q|^{-alpha/n} ((1/|Q|) ∫_Q |b - b_Q|^q)^{1/q}``;
    ``q=inf``: ``sup_Q |Q|^{-alpha/n} max_{x in Q} |b(x) - b_Q|``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    _require_real(b, "lipschitz_norm_osc")
    family = family or CubeFamily.all_aligned()
    if q is None:
        reduce = lambda d: np.abs(d).mean(axis=1)
    elif q == math.inf:
        reduce = lambda d: np.abs(d).max(axis=1)
    elif q > 1:
        reduce = lambda d: np.mean(np.abs(d) ** q, axis=1) ** (1 / q)
    else:
        raise ValueError("the L^q oscillation form needs 1 < q <= inf; use q=None for the mean form")
    return _oscillation_sup(b, family, reduce, alpha, with_cube)


def lipschitz_norm_diff(b: GridFunction, alpha: float, max_exact: int = 4096, *, with_pair: bool = False):
    """``max |b(x) - b(y)| / |x - y|^alpha`` over sample pairs.

    All pairs are used up to ``max_exact`` cells.  Beyond that a strided
    sublattice is paired exhaustively and every adjacent pair is added.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    grid = b.grid
    # integer lattice coordinates: distances are |k| h, as in the operator stencils
    pts = np.stack(np.unravel_index(np.arange(grid.size), grid.shape), axis=-1)
    vals = np.asarray(b.values).ravel()
    best = (0.0, None)

    if grid.size <= max_exact:
        idx = np.arange(grid.size)
    else:
        stride = math.ceil((grid.size / max_exact) ** (1 / grid.dim))
        sub = np.zeros(grid.shape, dtype=bool)
        sub[tuple(slice(None, None, stride) for _ in range(grid.dim))] = True
        idx = np.flatnonzero(sub)
        best = _adjacent_pairs(b, alpha, best)

    p_sub, v_sub = pts[idx], vals[idx]
    rows = max(1, 4_000_000 // len(idx))
    for k in range(0, len(idx), rows):
        dk = p_sub[k : k + rows, None, :] - p_sub[None, :, :]
        d = np.sqrt(np.sum(dk * dk, axis=-1).astype(float)) * grid.cell_side
        diff = np.abs(v_sub[k : k + rows, None] - v_sub[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d > 0, diff / d**alpha, 0.0)
        i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[i, j] > best[0]:
            best = (float(ratio[i, j]), (int(idx[k + i]), int(idx[j])))
    return best if with_pair else best[0]


def _adjacent_pairs(b, alpha, best):
    h = b.grid.cell_side
    vals = np.asarray(b.values)
    flat_index = np.arange(b.grid.size).reshape(b.grid.shape)
    for ax in range(b.grid.dim):
        diff = np.abs(np.diff(vals, axis=ax)) / h**alpha
        k = np.unravel_index(np.argmax(diff), diff.shape)
        if diff[k] > best[0]:
            nxt = list(k)
            nxt[ax] += 1
            best = (float(diff[k]), (int(flat_index[k]), int(flat_index[tuple(nxt)])))
    return best


def norm_record(norm: str, value: float, *, p=None, q=None, alpha=None, family=None, cube=None) -> dict:
    """JSON-ready record for a computed norm."""
    return {
        "norm": norm,
        "p": p,
        "q": q,
        "alpha": alpha,
        "family": family.label() if isinstance(family, CubeFamily) else family,
        "value": value,
        "argmax_cube": cube.to_json() if cube is not None else None,
    }
