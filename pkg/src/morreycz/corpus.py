"""Default function corpus: the extremal shapes Morrey/BMO/Lipschitz spaces are built around."""

from __future__ import annotations

import numpy as np

from .grid import Generator, Grid

__all__ = ["default_corpus", "parse_corpus", "CORPUS_KINDS"]

CORPUS_KINDS = ("indicator", "power", "log_abs", "abs_power", "step")


def _random_indicator(grid: Grid, rng) -> Generator:
    h = grid.cell_side
    extent = min(hi - lo for lo, hi in zip(grid.box_min, grid.box_max))
    half = float(rng.uniform(2 * h, extent / 3))
    center = tuple(
        round(float(rng.uniform(lo + half, hi - half)), 6) for lo, hi in zip(grid.box_min, grid.box_max)
    )
    center = center[0] if grid.dim == 1 else center
    return Generator("indicator", {"center": center, "half_side": round(half, 6)})


def _lattice_node(grid: Grid, rng):
    """A cell corner away from the boundary: never a sample point."""
    node = tuple(
        round(lo + int(rng.integers(n // 4, 3 * n // 4)) * grid.cell_side, 9)
        for lo, n in zip(grid.box_min, grid.resolution)
    )
    return node[0] if grid.dim == 1 else node


def default_corpus(grid: Grid, size: int = 20, seed: int = 0, p_max: float = 4.0) -> list[Generator]:
    """``size`` generators cycling through indicators of random cubes, ``|x|^{-beta}``
    with ``beta < n/p_max``, ``log|x|``, ``|x|^alpha`` and seeded step functions."""
    rng = np.random.default_rng(seed)
    n = grid.dim
    betas = np.linspace(0.1, 0.9, 5) * n / p_max
    alphas = (0.25, 0.5, 0.75)
    out: list[Generator] = []
    k = 0
    while len(out) < size:
        kind = CORPUS_KINDS[k % len(CORPUS_KINDS)]
        j = k // len(CORPUS_KINDS)
        if kind == "indicator":
            gen = _random_indicator(grid, rng)
        elif kind == "power":
            params = {"beta": round(float(betas[j % len(betas)]), 6)}
            if j >= len(betas):
                params["center"] = _lattice_node(grid, rng)
            gen = Generator("power", params)
        elif kind == "log_abs":
            gen = Generator("log_abs", {"center": _lattice_node(grid, rng)} if j else {})
        elif kind == "abs_power":
            gen = Generator("abs_power", {"alpha": alphas[j % len(alphas)]})
        else:
            gen = Generator("step", {"pieces": 3 + j % 5}, seed=seed * 1000 + j)
        if gen not in out:
            out.append(gen)
        k += 1
    return out


def parse_corpus(text: str, grid: Grid) -> list[Generator]:
    """``default[:SIZE[:SEED]]`` or a ``+``-separated list of generator strings."""
    from .grid import parse_generator

    if text.startswith("default"):
        parts = text.split(":")
        size = int(parts[1]) if len(parts) > 1 else 20
        seed = int(parts[2]) if len(parts) > 2 else 0
        return default_corpus(grid, size, seed)
    return [parse_generator(t) for t in text.split("+") if t]
