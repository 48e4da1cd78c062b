import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morreycz.grid import (
    Cube,
    CubeFamily,
    Generator,
    GridFunction,
    SummedTable,
    enumerate_cubes,
    family_windows,
    load_grid_function,
    make_grid,
    parse_generator,
    sample_function,
    save_grid_function,
    window_integral,
)


def direct_window_sum(values, start, length, q, cell_measure):
    sl = tuple(slice(s, s + length) for s in start)
    return math.fsum((np.abs(values[sl]) ** q * cell_measure).ravel())


# --- make_grid ----------------------------------------------------------------------


def test_make_grid_1d():
    g = make_grid(1, -2, 2, 400)
    assert g.cell_side == pytest.approx(0.01, rel=1e-15)
    assert g.cell_measure == pytest.approx(0.01, rel=1e-15)


def test_make_grid_2d():
    g = make_grid(2, (-1, -1), (1, 1), (100, 100))
    assert g.cell_side == pytest.approx(0.02, rel=1e-15)
    assert g.cell_measure == pytest.approx(4e-4, rel=1e-14)
    assert g.points().shape == (100, 100, 2)


def test_resolution_below_two_rejected():
    with pytest.raises(ValueError):
        make_grid(1, 0, 1, 1)


def test_nonuniform_side_rejected():
    with pytest.raises(ValueError, match="non-uniform"):
        make_grid(2, (0, 0), (1, 2), (10, 10))


def test_degenerate_box_and_dim_rejected():
    with pytest.raises(ValueError):
        make_grid(1, 1, 1, 10)
    with pytest.raises(ValueError):
        make_grid(3, 0, 1, 4)


def test_rectangular_box_with_matching_resolution():
    g = make_grid(2, (0, 0), (1, 2), (10, 20))
    assert not g.is_square()
    with pytest.raises(ValueError):
        g.full_cube()


# --- cubes and windows ----------------------------------------------------------------------


def test_cube_convention_side_is_twice_half_side():
    c = Cube((0.0, 0.0), 0.5)
    assert c.side == 1.0 and c.measure == 1.0
    with pytest.raises(ValueError):
        Cube(0.0, 0.0)


def test_window_of_roundtrip():
    g = make_grid(2, -1, 1, 20)
    c = g.cube_at((3, 5), 4)
    assert g.window_of(c) == ((3, 5), 4)


def test_unaligned_or_outside_cube_rejected():
    g = make_grid(1, -2, 2, 400)
    with pytest.raises(ValueError, match="aligned"):
        g.window_of(Cube(0.003, 0.5))
    with pytest.raises(ValueError, match="multiple"):
        g.window_of(Cube(0.0, 0.5025))
    with pytest.raises(ValueError, match="contained"):
        g.window_of(Cube(1.5, 1.0))


def test_all_aligned_count_1d():
    g = make_grid(1, 0, 1, 4)
    assert len(enumerate_cubes(g, CubeFamily.all_aligned())) == 10


def test_all_aligned_count_2d():
    g = make_grid(2, 0, 1, 6)
    expected = sum((6 - L + 1) ** 2 for L in range(1, 7))
    assert len(enumerate_cubes(g, CubeFamily.all_aligned())) == expected


def test_dyadic_count_1d():
    g = make_grid(1, 0, 1, 8)
    cubes = enumerate_cubes(g, CubeFamily.dyadic())
    assert len(cubes) == 15
    lengths = sorted({round(c.side / g.cell_side) for c in cubes})
    assert lengths == [1, 2, 4, 8]


def test_sampled_family_exact_count_and_reproducible():
    g = make_grid(1, -2, 2, 400)
    fam = CubeFamily.sampled(seed=7, count=100)
    a = enumerate_cubes(g, fam)
    b = enumerate_cubes(g, CubeFamily.sampled(seed=7, count=100))
    assert len(a) == 100
    assert a == b
    assert g.full_cube() in a
    assert enumerate_cubes(g, CubeFamily.sampled(seed=8, count=100)) != a


def test_full_domain_member_of_every_policy():
    g = make_grid(2, -1, 1, 12)
    for fam in (CubeFamily.all_aligned(), CubeFamily.dyadic(), CubeFamily.sampled(1, 30)):
        assert g.full_cube() in enumerate_cubes(g, fam)


def test_full_domain_requires_square_box():
    g = make_grid(2, (0, 0), (1, 2), (10, 20))
    with pytest.raises(ValueError):
        family_windows(g, CubeFamily.dyadic())
    assert family_windows(g, CubeFamily.dyadic(must_include_full_domain=False))


def test_family_parse():
    assert CubeFamily.parse("all").policy == "all_aligned"
    assert CubeFamily.parse("dyadic").policy == "dyadic"
    fam = CubeFamily.parse("sampled:3:50")
    assert (fam.seed, fam.count) == (3, 50)
    with pytest.raises(ValueError):
        CubeFamily.parse("bogus")


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.integers(2, 12), st.integers(0, 10_000))
def test_enumerated_cubes_aligned_and_inside(dim, n, seed):
    g = make_grid(dim, -1, 1, n)
    for fam in (CubeFamily.all_aligned(), CubeFamily.dyadic(), CubeFamily.sampled(seed, 7)):
        for c in enumerate_cubes(g, fam):
            start, length = g.window_of(c)  # raises if unaligned or outside
            # measure additivity: cells times cell measure
            assert c.measure == pytest.approx(length**dim * g.cell_measure, rel=1e-13)


# --- sampling -----------------------------------------------------------------------------------


def test_indicator_has_200_unit_cells():
    g = make_grid(1, -2, 2, 400)
    f = sample_function(g, "indicator")
    assert np.count_nonzero(f.values == 1) == 200
    assert np.count_nonzero(f.values) == 200


def test_log_abs_max_modulus():
    g = make_grid(1, -2, 2, 400)
    f = sample_function(g, "log_abs")
    assert np.all(np.isfinite(f.values))
    assert np.max(np.abs(f.values)) == pytest.approx(abs(math.log(g.cell_side / 2)), rel=1e-12)


def test_abs_power_range():
    g = make_grid(1, -1, 1, 200)
    f = sample_function(g, "abs_power:alpha=0.5")
    lo = (g.cell_side / 2) ** 0.5
    assert f.values.min() == pytest.approx(lo, rel=1e-12)
    assert f.values.max() <= 1.0
    assert f.values.min() >= lo * (1 - 1e-12)


def test_singularity_on_sample_rejected():
    g = make_grid(1, -2, 2, 400)
    with pytest.raises(ValueError, match="singularity"):
        sample_function(g, "power:beta=0.5,center=0.005")
    with pytest.raises(ValueError, match="singularity"):
        sample_function(g, "log_abs:center=-0.005")


def test_generator_parameter_validation():
    g = make_grid(1, -1, 1, 10)
    with pytest.raises(ValueError):
        sample_function(g, "power:beta=-1")
    with pytest.raises(ValueError):
        sample_function(g, "abs_power:alpha=1.5")
    with pytest.raises(ValueError):
        Generator("nope")


def test_sample_function_deterministic():
    g = make_grid(2, -1, 1, 16)
    a = sample_function(g, "step:pieces=4@11")
    b = sample_function(g, "step:pieces=4@11")
    c = sample_function(g, "step:pieces=4@12")
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_callable_generator():
    g = make_grid(1, 0, 1, 10)
    f = sample_function(g, lambda x: x**2)
    assert np.allclose(f.values, g.axes()[0] ** 2)


def test_parse_generator_roundtrip():
    gen = parse_generator("indicator:center=0.5;-0.25,half_side=0.5@3")
    assert gen.params["center"] == (0.5, -0.25)
    assert gen.seed == 3
    assert parse_generator(gen.label()) == gen


def test_grid_function_rejects_nonfinite_and_wrong_size():
    g = make_grid(1, 0, 1, 4)
    with pytest.raises(ValueError):
        GridFunction(g, [1.0, np.nan, 0.0, 0.0])
    with pytest.raises(ValueError):
        GridFunction(g, [1.0, 2.0])


def test_grid_function_is_immutable():
    g = make_grid(1, 0, 1, 4)
    f = GridFunction(g, np.arange(4.0))
    with pytest.raises(ValueError):
        f.values[0] = 5.0


# --- summed table ---------------------------------------------------------------------------


def test_window_integral_constant():
    g = make_grid(1, -2, 2, 400)
    f = sample_function(g, "constant:value=1")
    table = SummedTable(f, 2)
    assert window_integral(table, Cube(0.0, 1.0)) == pytest.approx(2.0, rel=1e-14)


def test_window_integral_indicator_full_box():
    g = make_grid(1, -2, 2, 400)
    f = sample_function(g, "indicator")
    assert window_integral(SummedTable(f, 1), g.full_cube()) == pytest.approx(2.0, rel=1e-14)


def test_window_integral_unaligned_rejected():
    g = make_grid(1, -2, 2, 400)
    table = SummedTable(sample_function(g, "indicator"), 1)
    with pytest.raises(ValueError):
        window_integral(table, Cube(0.0013, 0.5))


@settings(max_examples=60, deadline=None)
@given(
    dim=st.integers(1, 2),
    n=st.integers(2, 40),
    q=st.sampled_from([1.0, 1.5, 2.0, 3.0]),
    seed=st.integers(0, 2**31),
    spread=st.floats(0, 12),
)
def test_window_integral_matches_direct_sum(dim, n, q, seed, spread):
    rng = np.random.default_rng(seed)
    g = make_grid(dim, -1, 1, n)
    vals = rng.standard_normal(g.shape) * np.exp(spread * rng.standard_normal(g.shape))
    f = GridFunction(g, vals)
    table = SummedTable(f, q)
    for _ in range(5):
        length = int(rng.integers(1, n + 1))
        start = tuple(int(rng.integers(0, n - length + 1)) for _ in range(dim))
        cube = g.cube_at(start, length)
        exact = direct_window_sum(f.values, start, length, q, g.cell_measure)
        assert window_integral(table, cube) == pytest.approx(exact, rel=1e-12, abs=1e-300)


def test_window_integral_small_window_next_to_huge_mass():
    g = make_grid(1, 0, 1, 64)
    vals = np.ones(64)
    vals[:32] = 1e8
    f = GridFunction(g, vals)
    table = SummedTable(f, 1)
    cube = g.cube_at((40,), 3)
    assert window_integral(table, cube) == pytest.approx(3 * g.cell_measure, rel=1e-12)


# --- serialization -------------------------------------------------------------------------


@pytest.mark.parametrize("suffix", [".csv", ".gfn"])
def test_serialization_roundtrip(tmp_path, suffix):
    g = make_grid(2, -1, 1, 8)
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    path = tmp_path / f"f{suffix}"
    save_grid_function(path, f)
    back = load_grid_function(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_serialization_real_stays_real(tmp_path):
    g = make_grid(1, -1, 1, 10)
    f = sample_function(g, "abs_power:alpha=0.25")
    save_grid_function(tmp_path / "f.csv", f)
    back = load_grid_function(tmp_path / "f.csv")
    assert back.is_real and np.array_equal(back.values, f.values)
    text = (tmp_path / "f.csv").read_text().splitlines()
    assert text[0].startswith("# {") and text[1] == "index,re,im"


def test_window_integral_extreme_dynamic_range():
    # weights spanning ~1e36: the prefix sums alone cannot resolve the small window
    g = make_grid(1, -1, 1, 12)
    vals = np.ones(12) * 1e-6
    vals[:4] = 1e6
    f = GridFunction(g, vals)
    table = SummedTable(f, 3)
    cube = g.cube_at((8,), 2)
    assert window_integral(table, cube) == pytest.approx(2 * 1e-18 * g.cell_measure, rel=1e-12)
    assert window_integral(table, g.full_cube()) == pytest.approx(4e18 * g.cell_measure, rel=1e-12)
