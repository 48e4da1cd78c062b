import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morreycz.grid import CubeFamily, GridFunction, enumerate_cubes, make_grid, sample_function
from morreycz.embeddings import (
    NormSpec,
    OperatorSpec,
    Report,
    check_exponents,
    embedding_constant,
    layer_cake_integral,
    proof_bound,
    proof_threshold,
    verify_chain,
    verify_embedding,
    verify_lemma31,
    verify_operator_bound,
    verify_pointwise_domination,
    weak_to_morrey_constant,
)
from morreycz.norms import morrey_norm, weak_morrey_norm

ADMISSIBLE = st.sampled_from([(2, 1, 2), (3, 1, 2), (3, 2, 3), (4, 1, 3), (4, 1.5, 2.5), (2.5, 1, 1.2)])


def random_step(seed, dim=1, n=32, pieces=None):
    rng = np.random.default_rng(seed)
    g = make_grid(dim, -1, 1, n)
    k = pieces or int(rng.integers(1, 8))
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(k, n - 1), replace=False))
    levels = rng.standard_normal(len(cuts) + 1) * np.exp(rng.standard_normal(len(cuts) + 1))
    line = np.repeat(levels, np.diff(np.concatenate([[0], cuts, [n]])))
    vals = line if dim == 1 else np.add.outer(line, rng.permutation(line))
    return GridFunction(g, vals)


# --- constants ----------------------------------------------------------------------------


def test_embedding_constant_examples():
    assert embedding_constant(1, 2) == 2.0
    assert embedding_constant(2, 4) == 2.0
    assert embedding_constant(1, 3) == pytest.approx(1.5874010519681994, rel=1e-12)
    with pytest.raises(ValueError):
        embedding_constant(2, 2)
    with pytest.raises(ValueError):
        embedding_constant(0.5, 2)


def test_weak_to_morrey_constant():
    assert weak_to_morrey_constant(1, 2) == 2.0
    with pytest.raises(ValueError):
        weak_to_morrey_constant(2, 2)


def test_proof_threshold_examples():
    assert proof_threshold(1, 1, 1, 2, p=2) == 1.0
    assert proof_threshold(0, 3.7, 1, 2, p=2) == 0.0
    assert proof_threshold(2, 4, 1, 2, p=2) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        proof_threshold(1, 1, 2, 1, p=2)
    with pytest.raises(ValueError):
        proof_threshold(1, 1, 1, 3, p=2)
    with pytest.raises(ValueError):
        proof_threshold(1, 0, 1, 2, p=2)


# --- layer cake ---------------------------------------------------------------------------


def test_layer_cake_indicator():
    g = make_grid(1, -2, 2, 400)
    f = sample_function(g, "indicator")
    assert layer_cake_integral(f, 3) == pytest.approx(2.0, rel=1e-14)
    assert math.fsum(np.abs(f.values) ** 3 * g.cell_measure) == pytest.approx(2.0, rel=1e-14)


def test_layer_cake_zero():
    g = make_grid(1, -2, 2, 40)
    assert layer_cake_integral(sample_function(g, "constant:value=0"), 2) == 0.0


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 2), st.integers(2, 30), st.integers(0, 2**31), st.floats(1, 5), st.booleans())
def test_layer_cake_matches_power_sum(dim, n, seed, q, ties):
    rng = np.random.default_rng(seed)
    g = make_grid(dim, -1, 1, n)
    v = rng.standard_normal(g.shape)
    if ties:
        v = np.round(v * 2) / 2
    f = GridFunction(g, v)
    direct = math.fsum((np.abs(v) ** q * g.cell_measure).ravel())
    assert layer_cake_integral(f, q) == pytest.approx(direct, rel=1e-12, abs=1e-300)


def test_layer_cake_region():
    g = make_grid(1, -2, 2, 400)
    f = sample_function(g, "indicator")
    cube = g.cube_at((150,), 100)  # [-0.5, 0.5]
    assert layer_cake_integral(f, 2, cube) == pytest.approx(1.0, rel=1e-14)


# --- embedding ----------------------------------------------------------------------------


def test_embedding_indicator_example():
    g = make_grid(1, -2, 2, 400)
    f = sample_function(g, "indicator")
    rep = verify_embedding(f, 2, 1, 2)
    assert rep.passed and rep.exact and rep.tolerance == 0
    assert rep.constant == 2.0
    assert rep.lhs == morrey_norm(f, 2, 1)
    assert rep.rhs == 2.0 * weak_morrey_norm(f, 2, 2)
    assert rep.witness is not None


def test_embedding_zero():
    g = make_grid(1, -2, 2, 40)
    rep = verify_embedding(sample_function(g, "constant:value=0"), 2, 1, 2)
    assert rep.lhs == 0 and rep.rhs == 0 and rep.passed


def test_embedding_rejects_exponents():
    g = make_grid(1, -2, 2, 40)
    f = sample_function(g, "indicator")
    with pytest.raises(ValueError):
        verify_embedding(f, 2, 2, 1)
    with pytest.raises(ValueError):
        verify_embedding(f, 2, 1, 3)


@pytest.mark.parametrize("seed", range(50))
def test_embedding_random_steps(seed):
    f = random_step(seed, dim=1 + seed % 2, n=24 if seed % 2 else 64)
    for p, q1, q2 in [(2, 1, 2), (3, 1, 2), (3, 2, 3), (4, 1, 3)]:
        fam = CubeFamily.all_aligned() if seed % 3 else CubeFamily.dyadic()
        assert verify_embedding(f, p, q1, q2, fam).passed


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), ADMISSIBLE, st.sampled_from(["all", "dyadic", "sampled:5:9"]))
def test_embedding_property(seed, triple, fam):
    p, q1, q2 = triple
    f = random_step(seed, dim=1 + seed % 2, n=12 + seed % 9)
    assert verify_embedding(f, p, q1, q2, CubeFamily.parse(fam)).passed


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), ADMISSIBLE)
def test_proof_bound_holds_on_every_cube(seed, triple):
    p, q1, q2 = triple
    f = random_step(seed, n=16)
    wm = weak_morrey_norm(f, p, q2)
    for cube in enumerate_cubes(f.grid, CubeFamily.all_aligned()):
        pb = proof_bound(f, cube, p, q1, q2, wm)
        assert pb["holds"]
        # the split bound collapses to the embedding constant
        bound = embedding_constant(q1, q2) * wm * cube.measure ** (1 / q1 - 1 / p)
        assert pb["integral"] ** (1 / q1) <= bound * (1 + 1e-12)


# --- chain --------------------------------------------------------------------------------


def test_chain_critical_power():
    g = make_grid(1, -1, 1, 400)
    f = sample_function(g, "power:beta=0.3333333333333333")
    reps = verify_chain(f, 3, 1, 2)
    assert [r.claim for r in reps] == ["chain.embedding", "chain.chebyshev", "chain.weak_lp"]
    assert all(math.isfinite(r.lhs) and math.isfinite(r.rhs) for r in reps)
    assert reps[0].passed and reps[1].passed
    assert reps[0].exact and reps[1].exact and not reps[2].exact
    assert reps[1].constant == 1.0
    assert reps[2].constant <= reps[2].meta["known_bound"]


def test_chain_zero():
    g = make_grid(1, -1, 1, 40)
    reps = verify_chain(sample_function(g, "constant:value=0"), 3, 1, 2)
    assert all(r.lhs == 0 and r.rhs == 0 and r.passed for r in reps)


def test_chain_needs_q2_below_p():
    g = make_grid(1, -1, 1, 40)
    with pytest.raises(ValueError):
        verify_chain(sample_function(g, "indicator"), 2, 1, 2)


def test_chain_indicator_sweep_middle_link():
    g = make_grid(1, -2, 2, 64)
    for i in range(20):
        c = -1.5 + 0.15 * i
        f = sample_function(g, f"indicator:center={c!r},half_side={0.125 + 0.0625 * (i % 5)!r}")
        reps = verify_chain(f, 3, 1, 2)
        assert reps[1].lhs <= reps[1].rhs
        assert reps[2].constant <= reps[2].meta["known_bound"]


# --- pointwise domination -----------------------------------------------------------------


def test_domination_constant_b():
    g = make_grid(1, -2, 2, 200)
    rep = verify_pointwise_domination(sample_function(g, "constant:value=2"), 0.5, sample_function(g, "indicator"))
    assert rep.passed
    assert rep.meta["lip"] == 0


def test_domination_sqrt_with_positive_margin():
    g = make_grid(1, -2, 2, 400)
    b = sample_function(g, "abs_power:alpha=0.5")
    rep = verify_pointwise_domination(b, 0.5, sample_function(g, "indicator"))
    assert rep.passed and rep.lhs < 0
    assert rep.meta["max_ratio"] < 1


def test_domination_zero_f():
    g = make_grid(1, -2, 2, 100)
    rep = verify_pointwise_domination(sample_function(g, "abs_power:alpha=0.5"), 0.5,
                                      sample_function(g, "constant:value=0"))
    assert rep.lhs == 0 and rep.passed


def test_domination_2d_riesz():
    g = make_grid(2, -1, 1, 20)
    b = sample_function(g, "abs_power:alpha=0.5")
    f = sample_function(g, "step:pieces=4@2")
    for k in ("riesz1", "riesz2"):
        assert verify_pointwise_domination(b, 0.5, f, k).passed


def test_domination_fails_with_too_small_constant():
    g = make_grid(1, -2, 2, 200)
    b = sample_function(g, "abs_power:alpha=0.5")
    rep = verify_pointwise_domination(b, 0.5, sample_function(g, "indicator"), lip=0.1)
    assert not rep.passed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 0.9))
def test_domination_property(seed, alpha):
    rng = np.random.default_rng(seed)
    g = make_grid(1, -1, 1, 60)
    b = GridFunction(g, rng.standard_normal(60))
    f = GridFunction(g, rng.standard_normal(60))
    assert verify_pointwise_domination(b, alpha, f).passed


def test_domination_rejects_complex_b_and_alpha():
    g = make_grid(1, -1, 1, 10)
    f = sample_function(g, "indicator")
    with pytest.raises(ValueError):
        verify_pointwise_domination(GridFunction(g, np.ones(10) * 1j), 0.5, f)
    with pytest.raises(ValueError):
        verify_pointwise_domination(f, 1.0, f)


# --- Lipschitz forms ----------------------------------------------------------------------


def test_lipschitz_forms_constant_skipped():
    g = make_grid(1, -1, 1, 64)
    rep = verify_lemma31(sample_function(g, "constant:value=1"), 0.5)
    assert rep.passed and "skipped" in rep.meta


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_lipschitz_forms_power_ratios(alpha):
    g = make_grid(1, -1, 1, 256)
    gen = f"abs_power:alpha={alpha}"
    rep = verify_lemma31(sample_function(g, gen), alpha, refined=sample_function(g.refine(2), gen))
    assert rep.passed
    assert all(0.1 <= r <= 10 for r in rep.meta["ratios"].values())
    assert not rep.meta["non_lipschitz"]


def test_lipschitz_forms_step_flagged():
    g = make_grid(1, -1, 1, 128)
    rep = verify_lemma31(sample_function(g, "sign"), 0.5, refined=sample_function(g.refine(2), "sign"))
    assert rep.meta["non_lipschitz"]
    assert max(rep.meta["growth"].values()) == pytest.approx(2**0.5, rel=1e-9)


# --- operator bounds ----------------------------------------------------------------------

FUNCTIONS = ["indicator", "indicator:center=0.5,half_side=0.25", "power:beta=0.2", "abs_power:alpha=0.5",
             "step:pieces=6@3", "constant:value=0"]


def test_operator_bound_inadmissible_example_rejected():
    g = make_grid(1, -2, 2, 100)
    with pytest.raises(ValueError):
        verify_operator_bound(OperatorSpec("frac", 0.5), NormSpec("morrey", 4, 2), NormSpec("morrey", 4, 4),
                              FUNCTIONS, g)


def test_operator_bound_wrong_target_rejected():
    with pytest.raises(ValueError):
        check_exponents(OperatorSpec("frac", 0.25), NormSpec("morrey", 3, 2), NormSpec("morrey", 12, 5), 1)
    with pytest.raises(ValueError):
        check_exponents(OperatorSpec("frac", 0.25), NormSpec("morrey", 3, 2), NormSpec("morrey", 10, 4), 1)
    with pytest.raises(ValueError):
        check_exponents(OperatorSpec("commutator", b="log_abs"), NormSpec("lp", 2), NormSpec("weak_lp", 3), 1)


@pytest.mark.parametrize("target_q", [4, 8])
def test_frac_bound_stable(target_q):
    g = make_grid(1, -2, 2, 200)
    rep = verify_operator_bound(OperatorSpec("frac", 0.25), NormSpec("morrey", 3, 2),
                                NormSpec("morrey", 12, target_q), FUNCTIONS, g)
    assert rep.passed
    assert 0 < rep.meta["ratio"] < math.inf
    assert "constant:value=0" not in rep.meta["ratios"]


def test_commutator_log_bound_stable():
    g = make_grid(1, -2, 2, 400)
    rep = verify_operator_bound(OperatorSpec("commutator", b="log_abs"), NormSpec("lp", 2), NormSpec("weak_lp", 2),
                                FUNCTIONS, g)
    assert rep.passed and rep.meta["change"] < 0.25


def test_all_zero_family_gives_zero():
    g = make_grid(1, -2, 2, 50)
    rep = verify_operator_bound(OperatorSpec("frac", 0.25), NormSpec("lp", 3), NormSpec("lp", 12),
                                ["constant:value=0"], g)
    assert rep.meta["ratio"] == 0 and rep.meta["ratios"] == {}


def test_norm_spec_validation():
    with pytest.raises(ValueError):
        NormSpec("bmo", 2)
    with pytest.raises(ValueError):
        NormSpec("lp", 2, 1)
    with pytest.raises(ValueError):
        NormSpec("morrey", 1, 2)
    with pytest.raises(ValueError):
        OperatorSpec("frac")
    with pytest.raises(ValueError):
        OperatorSpec("commutator")


# --- reports ------------------------------------------------------------------------------


def test_report_json_roundtrip_and_summary():
    g = make_grid(1, -2, 2, 40)
    rep = verify_embedding(sample_function(g, "indicator"), 2, 1, 2, function_id="indicator")
    data = json.loads(json.dumps(rep.to_json()))
    assert Report(**data) == rep
    assert rep.summary().startswith("PASS embedding [exact]")
    assert rep.summary().endswith("indicator")


def test_verifiers_deterministic():
    g = make_grid(1, -1, 1, 64)
    f = sample_function(g, "step:pieces=5@4")
    assert verify_embedding(f, 3, 1, 2).to_json() == verify_embedding(f, 3, 1, 2).to_json()
