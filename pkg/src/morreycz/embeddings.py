"""
Verifiers for norm inequalities and operator bounds on grid functions.

Claims whose proofs are per-cube or per-point inequalities are checked at
tolerance 0.  Norm equivalences with unknown constants are reported as ratios
together with their stability under one grid refinement.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .grid import Cube, CubeFamily, Generator, Grid, GridFunction, sample_function
from .norms import (
    NormParams,
    distribution_function,
    lipschitz_norm_diff,
    lipschitz_norm_osc,
    lp_norm,
    morrey_norm,
    weak_lp_norm,
    weak_morrey_norm,
)
from .operators import commutator_apply, dominating_sum, frac_integral, get_kernel, check_kernel

__all__ = [
    "Report",
    "embedding_constant",
    "weak_to_morrey_constant",
    "proof_threshold",
    "proof_bound",
    "layer_cake_integral",
    "verify_embedding",
    "verify_chain",
    "verify_pointwise_domination",
    "lipschitz_forms",
    "verify_lemma31",
    "OperatorSpec",
    "NormSpec",
    "verify_operator_bound",
]


@dataclass
class Report:
    """Outcome of one checked claim: ``passed`` means ``lhs <= rhs + tolerance``."""

    claim: str
    anchor: str
    lhs: float
    rhs: float
    constant: float | None
    passed: bool
    exact: bool = True
    tolerance: float = 0.0
    witness: dict | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        kind = "exact" if self.exact else "empirical"
        src = self.meta.get("function", "")
        return f"{status} {self.claim} [{kind}] lhs={self.lhs:.6g} rhs={self.rhs:.6g} {src}".rstrip()


def _cube_json(c: Cube | None):
    return None if c is None else {"cube": c.to_json()}


def _check_q1q2(q1, q2, p=None):
    if not 1 <= q1 < q2:
        raise ValueError(f"need 1 <= q1 < q2, got q1={q1}, q2={q2}")
    if p is not None and not q2 <= p:
        raise ValueError(f"need q2 <= p, got q2={q2}, p={p}")


def embedding_constant(q1: float, q2: float) -> float:
    """``2 (q1/(q2-q1))^{1/q2}``: the constant of ``WM^p_{q2} ⊂ M^p_{q1}``.

    >>> embedding_constant(1, 2)
    2.0
    """
    _check_q1q2(q1, q2)
    return 2 * (q1 / (q2 - q1)) ** (1 / q2)


def weak_to_morrey_constant(q: float, p: float) -> float:
    """``(p/(p-q))^{1/q}``, with ``‖f‖_{M^p_q} <= C ‖f‖_{L^{p,∞}}`` cube by cube."""
    if not 1 <= q < p:
        raise ValueError(f"need 1 <= q < p, got q={q}, p={p}")
    return (p / (p - q)) ** (1 / q)


def proof_threshold(wm_norm: float, cube_measure: float, q1: float, q2: float, p: float) -> float:
    """Level ``N = W |Q|^{-1/p} (q1/(q2-q1))^{1/q2}`` splitting the layer-cake integral."""
    _check_q1q2(q1, q2, p)
    if wm_norm < 0 or cube_measure <= 0:
        raise ValueError("need wm_norm >= 0 and cube_measure > 0")
    return wm_norm * cube_measure ** (-1 / p) * (q1 / (q2 - q1)) ** (1 / q2)


def proof_bound(f: GridFunction, cube: Cube, p: float, q1: float, q2: float, wm_norm: float) -> dict:
    """Both pieces of the split layer-cake bound for ``∫_Q |f|^{q1}``.

    Below ``N`` the distribution function is bounded by ``|Q|``, above it by
    the weak Morrey bound ``W^{q2} |Q|^{1-q2/p} λ^{-q2}``.
    """
    mq = cube.measure
    n_lvl = proof_threshold(wm_norm, mq, q1, q2, p)
    low = mq * n_lvl**q1
    if n_lvl > 0:
        high = q1 / (q2 - q1) * wm_norm**q2 * mq ** (1 - q2 / p) * n_lvl ** (q1 - q2)
    else:
        high = 0.0
    integral = layer_cake_integral(f, q1, cube)
    return {"threshold": n_lvl, "low": low, "high": high, "integral": integral, "holds": integral <= low + high}


def layer_cake_integral(f: GridFunction, q: float, region: Cube | None = None) -> float:
    """``q ∫_0^∞ λ^{q-1} |{|f| > λ}| dλ`` integrated exactly over the steps of the distribution function.

    On ``[v_{k+1}, v_k)`` the measure is constant, so each step contributes
    ``μ_k (v_k^q - v_{k+1}^q)``.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    dist = distribution_function(f, region)
    if len(dist.levels) == 0:
        return 0.0
    lv = dist.levels**q
    nxt = np.append(lv[1:], 0.0)
    return math.fsum(dist.counts * dist.cell_measure * (lv - nxt))


def _meta(f: GridFunction, **kw) -> dict:
    out = {"grid": f.grid.to_json()}
    out.update({k: v for k, v in kw.items() if v is not None})
    return out


def verify_embedding(f: GridFunction, p: float, q1: float, q2: float, family: CubeFamily | None = None,
                     *, function_id: str | None = None) -> Report:
    """``‖f‖_{M^p_{q1}} <= C ‖f‖_{WM^p_{q2}}`` checked at tolerance 0."""
    _check_q1q2(q1, q2, p)
    family = family or CubeFamily.all_aligned()
    lhs, cube = morrey_norm(f, p, q1, family, with_cube=True)
    wm = weak_morrey_norm(f, p, q2, family)
    c = embedding_constant(q1, q2)
    rhs = c * wm
    return Report(
        "embedding", "WM^p_q2 into M^p_q1 with constant 2(q1/(q2-q1))^(1/q2)",
        lhs, rhs, c, lhs <= rhs, witness=_cube_json(cube),
        meta=_meta(f, p=p, q1=q1, q2=q2, family=family.label(), function=function_id),
    )


def verify_chain(f: GridFunction, p: float, q1: float, q2: float, family: CubeFamily | None = None,
                 *, function_id: str | None = None) -> list[Report]:
    """``M^p_{q1} <= C WM^p_{q2} <= M^p_{q2} <= C' L^{p,∞}``.

    The first two links are exact; the last is reported as an empirical
    ratio next to the per-cube bound ``(p/(p-q2))^{1/q2}``.
    """
    _check_q1q2(q1, q2, p)
    if not q2 < p:
        raise ValueError("the chain needs q2 < p")
    family = family or CubeFamily.all_aligned()
    m1 = morrey_norm(f, p, q1, family)
    w2 = weak_morrey_norm(f, p, q2, family)
    m2 = morrey_norm(f, p, q2, family)
    wp = weak_lp_norm(f, p)
    meta = _meta(f, p=p, q1=q1, q2=q2, family=family.label(), function=function_id)
    c = embedding_constant(q1, q2)
    ratio = m2 / wp if wp > 0 else 0.0
    return [
        Report("chain.embedding", "M^p_q1 <= C WM^p_q2", m1, c * w2, c, m1 <= c * w2, meta=dict(meta)),
        Report("chain.chebyshev", "WM^p_q2 <= M^p_q2", w2, m2, 1.0, w2 <= m2, meta=dict(meta)),
        Report(
            "chain.weak_lp", "M^p_q2 <= C L^{p,inf}", m2, wp, ratio, bool(np.isfinite(ratio)), exact=False,
            tolerance=math.inf, meta=dict(meta, known_bound=weak_to_morrey_constant(q2, p)),
        ),
    ]


def verify_pointwise_domination(b: GridFunction, alpha: float, f: GridFunction, kernel="hilbert",
                                *, lip: float | None = None, function_id: str | None = None) -> Report:
    """``|[b,T] f(x_i)| <= L I_alpha(|f|)(x_i)`` at every sample, diagonal excluded on both sides.

    ``L`` defaults to the sample Lipschitz seminorm times ``sup |Ω|``.  The
    report's ``lhs`` is ``max_i (|[b,T]f| - L I)`` and ``rhs`` is 0.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not b.is_real:
        raise ValueError("b must be real-valued")
    kernel = get_kernel(kernel)
    omega_sup = check_kernel(kernel)["omega_sup"]
    lip_b = lipschitz_norm_diff(b, alpha) if lip is None else lip
    L = lip_b * max(1.0, omega_sup)
    comm = np.abs(commutator_apply(kernel, b, f).values).ravel()
    dom = dominating_sum(alpha, f).values.ravel()
    gap = comm - L * dom
    i = int(np.argmax(gap))
    lhs = float(gap[i])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(dom > 0, comm / (L * dom), 0.0)
    point = [float(c) for c in b.grid.points().reshape(-1, b.grid.dim)[i]]
    return Report(
        "domination", "|[b,T]f| <= ||b||_Lip I_alpha(|f|) pointwise", lhs, 0.0, L, lhs <= 0.0,
        witness={"point": point, "index": i},
        meta=_meta(f, alpha=alpha, kernel=kernel.name, lip=lip_b, max_ratio=float(rel.max()) if rel.size else 0.0,
                   function=function_id),
    )


# --- Lipschitz characterisations ---------------------------------------------------------


LIP_FORMS = ("diff", "mean", "q2", "inf")


def lipschitz_forms(b: GridFunction, alpha: float, family: CubeFamily | None = None) -> dict:
    """Difference quotient form and the three oscillation forms of the ``Lip_alpha`` seminorm."""
    return {
        "diff": lipschitz_norm_diff(b, alpha),
        "mean": lipschitz_norm_osc(b, alpha, None, family),
        "q2": lipschitz_norm_osc(b, alpha, 2.0, family),
        "inf": lipschitz_norm_osc(b, alpha, math.inf, family),
    }


def _pair_ratios(forms: dict) -> dict:
    names = list(forms)
    return {f"{a}/{b}": forms[a] / forms[b] for i, a in enumerate(names) for b in names[i + 1:]}


def verify_lemma31(b: GridFunction, alpha: float, family: CubeFamily | None = None, c_star: float = 10.0,
                   *, refined: GridFunction | None = None, stability: float = 0.3,
                   function_id: str | None = None) -> Report:
    """Pairwise ratios of the four ``Lip_alpha`` forms must lie in ``[1/c_star, c_star]``.

    With ``refined`` (the same function on a finer grid) the ratios must also
    move by less than ``stability``, and the growth of each form is recorded:
    a form growing by more than ``2^{alpha/2}`` per refinement marks ``b`` as
    not Lipschitz at this scale.
    """
    forms = lipschitz_forms(b, alpha, family)
    vals = np.array(list(forms.values()))
    meta = _meta(b, alpha=alpha, c_star=c_star, forms=forms, function=function_id)
    if np.all(vals == 0):
        return Report("lemma31", "Lip_alpha oscillation characterisations agree", 0.0, 0.0, c_star, True,
                      exact=False, tolerance=0.0, meta=dict(meta, skipped="all forms vanish"))
    if np.any(vals == 0):
        return Report("lemma31", "Lip_alpha oscillation characterisations agree", math.inf, c_star, c_star, False,
                      exact=False, meta=meta)
    ratios = _pair_ratios(forms)
    worst = max(max(r, 1 / r) for r in ratios.values())
    passed = worst <= c_star
    meta["ratios"] = ratios
    if refined is not None:
        fine = lipschitz_forms(refined, alpha, family)
        growth = {k: fine[k] / forms[k] for k in forms}
        fine_ratios = _pair_ratios(fine) if all(v > 0 for v in fine.values()) else {}
        drift = max((abs(fine_ratios[k] / ratios[k] - 1) for k in ratios), default=math.inf)
        meta.update(refined_forms=fine, growth=growth, ratio_drift=drift,
                    non_lipschitz=any(g > 2 ** (alpha / 2) for g in growth.values()))
        passed = passed and drift < stability
    return Report("lemma31", "Lip_alpha oscillation characterisations agree", worst, c_star, c_star, passed,
                  exact=False, meta=meta)


# --- empirical operator bounds ------------------------------------------------------------


@dataclass(frozen=True)
class NormSpec:
    """A source or target norm: ``lp``, ``weak_lp``, ``morrey`` or ``weak_morrey``."""

    kind: str
    p: float
    q: float | None = None

    def __post_init__(self):
        if self.kind not in ("lp", "weak_lp", "morrey", "weak_morrey"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.q is None:
            object.__setattr__(self, "q", self.p)
        if self.kind.endswith("morrey"):
            NormParams(self.p, self.q)
        elif self.q != self.p:
            raise ValueError(f"{self.kind} takes a single exponent")

    def __call__(self, f: GridFunction, family: CubeFamily | None = None) -> float:
        if self.kind == "lp":
            return lp_norm(f, self.p)
        if self.kind == "weak_lp":
            return weak_lp_norm(f, self.p)
        if self.kind == "morrey":
            return morrey_norm(f, self.p, self.q, family)
        return weak_morrey_norm(f, self.p, self.q, family)

    def label(self) -> str:
        return f"{self.kind}({self.p:g},{self.q:g})"


@dataclass(frozen=True)
class OperatorSpec:
    """``frac`` (``I_alpha``) or ``commutator`` (``[b, T]`` with ``b`` from a generator)."""

    kind: str
    alpha: float | None = None
    kernel: str = "hilbert"
    b: Generator | str | None = None

    def __post_init__(self):
        if self.kind == "frac" and self.alpha is None:
            raise ValueError("frac needs alpha")
        if self.kind == "commutator" and self.b is None:
            raise ValueError("commutator needs a symbol b")
        if self.kind not in ("frac", "commutator"):
            raise ValueError(f"unknown operator {self.kind!r}")

    def apply(self, f: GridFunction) -> GridFunction:
        if self.kind == "frac":
            return frac_integral(self.alpha, f)
        b = sample_function(f.grid, self.b)
        return commutator_apply(self.kernel, b, f)

    def label(self) -> str:
        if self.kind == "frac":
            return f"I_{self.alpha:g}"
        b = self.b.label() if isinstance(self.b, Generator) else self.b
        return f"[{b},{self.kernel}]"


def check_exponents(op: OperatorSpec, source: NormSpec, target: NormSpec, dim: int):
    """Reject exponent tuples outside the admissible relations.

    With a smoothing order ``alpha``: ``1/s = 1/p - alpha/n`` and the second
    target exponent is either ``t`` with ``1/t = 1/q - alpha/n`` or ``l`` with
    ``l/s = q/p``.  Without one (``[b,T]``, ``b`` in BMO) exponents are kept.
    """
    if op.alpha is None:
        if not (math.isclose(source.p, target.p) and math.isclose(source.q, target.q)):
            raise ValueError("without a smoothing order the target exponents must equal the source exponents")
        return
    prm = NormParams.fractional(source.p, source.q, op.alpha, dim)
    if not math.isclose(1 / target.p, 1 / prm.s, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"target p must be s={prm.s:g} (1/s = 1/p - alpha/n)")
    if not (math.isclose(1 / target.q, 1 / prm.t, rel_tol=0, abs_tol=1e-12)
            or math.isclose(target.q, prm.l, rel_tol=1e-12)):
        raise ValueError(f"target q must be t={prm.t:g} or l={prm.l:g}")


def _sup_ratio(op, source, target, functions, grid, family):
    best, arg, ratios = 0.0, None, {}
    for gen in functions:
        f = sample_function(grid, gen)
        den = source(f, family)
        if den == 0:
            continue  # 0/0: excluded by rule
        r = target(op.apply(f), family) / den
        key = gen.label() if isinstance(gen, Generator) else str(gen)
        ratios[key] = r
        if r > best:
            best, arg = r, key
    return best, arg, ratios


def verify_operator_bound(op: OperatorSpec, source: NormSpec, target: NormSpec, functions: Sequence,
                          grid: Grid, family: CubeFamily | None = None, *, refine: int = 2,
                          stability: float = 0.25) -> Report:
    """Empirical ``sup_f ‖Op f‖_target / ‖f‖_source`` and its change under one refinement.

    Zero sources are skipped.  Passes when both ratios are finite and the
    relative change is below ``stability``.
    """
    check_exponents(op, source, target, grid.dim)
    r1, arg1, ratios = _sup_ratio(op, source, target, functions, grid, family)
    r2, arg2, _ = _sup_ratio(op, source, target, functions, grid.refine(refine), family)
    change = abs(r2 - r1) / r1 if r1 > 0 else (0.0 if r2 == 0 else math.inf)
    finite = math.isfinite(r1) and math.isfinite(r2)
    return Report(
        "operator_bound", f"{op.label()}: {source.label()} -> {target.label()} bounded",
        change, stability, r1, finite and change < stability, exact=False, tolerance=stability,
        witness={"function": arg1, "refined_function": arg2},
        meta={"grid": grid.to_json(), "operator": op.label(), "source": source.label(), "target": target.label(),
              "ratio": r1, "refined_ratio": r2, "change": change, "ratios": ratios,
              "family": (family or CubeFamily.all_aligned()).label()},
    )
