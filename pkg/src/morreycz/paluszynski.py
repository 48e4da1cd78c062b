"""
Lower bounds for mean oscillation through commutator pairings.

The reciprocal ``1/K`` of a kernel is smooth on a cube away from the origin,
so there it is a rapidly converging Fourier series

    1/K(u) ≈ E(u) = Σ_m a_m exp(i <v_m, u>),      u in z0 ± R,  R = |z0|/2.

For a cube ``Q`` of side ``r`` and its translate ``Q'`` by ``-r w0`` with
``w0 = z0/δ`` and ``δ = |z0|/(2√n)``, every difference ``u = δ(x - y)/r`` with
``x ∈ Q, y ∈ Q'`` stays in that cube, and homogeneity gives
``1/K(x - y) = r^n δ^{-n} E(δ(x - y)/r)``.  Splitting the exponential into a
factor in ``x`` and one in ``y`` turns the mean oscillation of ``b`` on ``Q``
into a weighted sum of pairings ``<[b,T] g_m, h_m>``.

Coefficients come from a smooth periodisation: ``1/K`` is multiplied by a
C^∞ cutoff equal to 1 on the validity cube and 0 outside a box ``margin``
times larger, then sampled and transformed with the FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .embeddings import Report, weak_to_morrey_constant
from .grid import Cube, Grid, GridFunction
from .norms import mean_oscillation
from .operators import KernelSpec, commutator_matrix, get_kernel

__all__ = [
    "FourierExpansion",
    "TestPair",
    "reciprocal_expansion",
    "build_test_pair",
    "geometric_validity",
    "first_link",
    "oscillation_identity_check",
    "bmo_lower_bound",
]

_M_LADDER = (16, 32, 64, 128, 256, 512)


def _phi(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1 / x[pos])
    return out


def _cutoff(t, inner: float, outer: float):
    """Smooth step: 1 for ``t <= inner``, 0 for ``t >= outer``."""
    s = np.clip((t - inner) / (outer - inner), 0.0, 1.0)
    a, b = _phi(1 - s), _phi(s)
    return a / (a + b)


def _reciprocal(kernel: KernelSpec, u: np.ndarray) -> np.ndarray:
    """``1/K(u) = |u|^n / Ω(u/|u|)`` for points of shape ``(..., n)``."""
    r = np.sqrt(np.sum(u * u, axis=-1))
    return r**kernel.dim / kernel.omega(u / r[..., None])


@dataclass(frozen=True)
class FourierExpansion:
    """Truncated series ``Σ_{|m|_∞ <= M} a_m exp(i <v_m, u>)`` approximating ``1/K`` on ``z0 ± R``.

    ``coeffs`` has shape ``(2M+1,) * dim`` with mode ``m`` stored at ``m + M``;
    the frequencies are the same on every axis, ``v_m = π m / H``.
    """

    kernel: str
    z0: tuple[float, ...]
    delta: float
    M: int
    margin: float
    coeffs: np.ndarray
    axis_freqs: np.ndarray
    tail: float = math.nan
    rec_error: float = math.nan

    @property
    def dim(self) -> int:
        return len(self.z0)

    @property
    def half_width(self) -> float:
        """Half side ``R = δ √n = |z0|/2`` of the validity cube."""
        return self.delta * math.sqrt(self.dim)

    @property
    def period_half(self) -> float:
        return self.margin * self.half_width

    @property
    def w0(self) -> np.ndarray:
        """Offset direction ``z0/δ`` between the paired cubes, in units of their side."""
        return np.asarray(self.z0) / self.delta

    @property
    def abs_sum(self) -> float:
        return math.fsum(np.abs(self.coeffs).ravel())

    def validity_cube(self) -> Cube:
        return Cube(self.z0, self.half_width)

    def modes(self) -> np.ndarray:
        """Integer mode vectors in storage order, shape ``(K, dim)``."""
        m = np.arange(-self.M, self.M + 1)
        grids = np.meshgrid(*([m] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def frequencies(self) -> np.ndarray:
        """``v_m`` in storage order, shape ``(K, dim)``."""
        return self.modes() * (self.axis_freqs[1] - self.axis_freqs[0])

    def flat_coeffs(self) -> np.ndarray:
        return self.coeffs.ravel()

    def evaluate(self, u) -> np.ndarray:
        """Series at points ``u`` of shape ``(..., dim)`` (1D also accepts a plain array)."""
        u = np.asarray(u, dtype=float)
        if self.dim == 1 and (u.ndim == 0 or u.shape[-1] != 1):
            u = u[..., None]
        shape = u.shape[:-1]
        u = u.reshape(-1, self.dim)
        out = np.exp(1j * np.outer(u[:, 0], self.axis_freqs)) @ self.coeffs if self.dim == 1 else np.einsum(
            "pi,ij,pj->p",
            np.exp(1j * np.outer(u[:, 0], self.axis_freqs)),
            self.coeffs,
            np.exp(1j * np.outer(u[:, 1], self.axis_freqs)),
        )
        return out.reshape(shape)

    def reconstruction_error(self, n_test: int | None = None) -> float:
        """Sup of ``|1/K - E|`` over a uniform tensor grid on the closed validity cube."""
        kernel = get_kernel(self.kernel)
        n_test = n_test or (2001 if self.dim == 1 else 129)
        t = np.linspace(-self.half_width, self.half_width, n_test)
        axes = [c + t for c in self.z0]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return float(np.max(np.abs(self.evaluate(pts) - _reciprocal(kernel, pts))))

    def to_json(self) -> dict:
        return {
            "kernel": self.kernel,
            "z0": list(self.z0),
            "delta": self.delta,
            "M": self.M,
            "margin": self.margin,
            "a_m": {"re": self.coeffs.real.ravel().tolist(), "im": self.coeffs.imag.ravel().tolist()},
            "v_m": self.axis_freqs.tolist(),
            "tail": self.tail,
            "rec_error": self.rec_error,
        }

    @classmethod
    def from_json(cls, d: dict) -> FourierExpansion:
        n = len(d["z0"])
        a = (np.array(d["a_m"]["re"]) + 1j * np.array(d["a_m"]["im"])).reshape((2 * d["M"] + 1,) * n)
        return cls(d["kernel"], tuple(d["z0"]), d["delta"], d["M"], d["margin"], a, np.array(d["v_m"]),
                   d.get("tail", math.nan), d.get("rec_error", math.nan))


def _expand(kernel: KernelSpec, z0: np.ndarray, M: int, margin: float, oversample: int) -> FourierExpansion:
    n = kernel.dim
    delta = float(np.linalg.norm(z0)) / (2 * math.sqrt(n))
    R = delta * math.sqrt(n)
    H = margin * R
    ns = max(64, oversample * M)
    axes = [c - H + np.arange(ns) * (2 * H / ns) for c in z0]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    weight = np.ones(pts.shape[:-1])
    for k in range(n):
        weight = weight * _cutoff(np.abs(pts[..., k] - z0[k]), R, H)
    inside = weight > 0
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    omega = np.zeros_like(weight)
    omega[inside] = kernel.omega(pts[inside] / r[inside][:, None])
    signs = np.sign(omega[inside])
    if np.any(signs == 0) or np.any(signs != signs[0]):
        raise ValueError(
            f"the angular part of {kernel.name} vanishes or changes sign near z0={tuple(z0)}; "
            "1/K is not smooth there, choose z0 away from its zero set"
        )
    values = np.zeros_like(weight)
    values[inside] = r[inside] ** n / omega[inside] * weight[inside]

    c = np.fft.fftn(values) / ns**n
    m = np.arange(-M, M + 1)
    v = np.pi * m / H
    keep = np.ix_(*([m % ns] * n))
    a = c[keep]
    # samples start at z0 - H rather than 0: shift phases
    for k in range(n):
        shape = [1] * n
        shape[k] = -1
        a = a * np.exp(-1j * v * (z0[k] - H)).reshape(shape)
    # tail: computed coefficients with |m|_∞ > M
    all_m = np.fft.fftfreq(ns, 1 / ns)
    outside = np.ones(c.shape, dtype=bool)
    outside[np.ix_(*([np.abs(all_m) <= M] * n))] = False
    tail = math.fsum(np.abs(c[outside]).ravel())
    exp = FourierExpansion(kernel.name, tuple(float(x) for x in z0), delta, M, margin, a, v, tail)
    return replace(exp, rec_error=exp.reconstruction_error())


def reciprocal_expansion(kernel: KernelSpec | str, z0, M: int | None = None, margin: float = 1.9,
                         oversample: int = 8, eps_rec: float = 1e-6) -> FourierExpansion:
    """Fourier expansion of ``1/K`` on the cube ``z0 ± |z0|/2``.

    With ``M=None`` the truncation is doubled from 16 until the reconstruction
    error is below ``eps_rec`` and the discarded coefficient mass below
    ``eps_rec/10`` (capped at 512).
    """
    kernel = get_kernel(kernel)
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    if z0.shape != (kernel.dim,):
        raise ValueError(f"z0 must have {kernel.dim} components")
    if not np.any(z0 != 0):
        raise ValueError("z0 must be nonzero")
    if margin <= 1:
        raise ValueError("margin must exceed 1")
    if oversample < 2:
        raise ValueError("oversample must be >= 2")
    if M is not None:
        if M < 1:
            raise ValueError("M must be positive")
        return _expand(kernel, z0, M, margin, oversample)
    for m in _M_LADDER:
        exp = _expand(kernel, z0, m, margin, oversample)
        if exp.rec_error < eps_rec and exp.tail < eps_rec / 10:
            break
    return exp


# --- test pair -----------------------------------------------------------------------------


@dataclass(frozen=True)
class TestPair:
    """Cubes ``Q``, ``Q'`` of side ``r``, sign ``s`` and the unimodular test functions of mode ``m``."""

    Q: Cube
    Qp: Cube
    r: float
    w0: tuple[float, ...]
    mode: tuple[int, ...]
    s: GridFunction
    g: GridFunction
    h: GridFunction


def _place(expansion: FourierExpansion, x0, r: float, grid: Grid):
    """``Q = Q(x0, r/2)`` and its partner ``Q'``, whose offset ``r w0`` is snapped to the lattice."""
    if expansion.dim != grid.dim:
        raise ValueError("expansion and grid dimensions differ")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    Q = Cube(x0, r / 2)
    grid.window_of(Q)
    hgt = grid.cell_side
    w0 = np.round(r * expansion.w0 / hgt) * hgt / r
    Qp = Cube(x0 - r * w0, r / 2)
    try:
        grid.window_of(Qp)
    except ValueError as err:
        lo = np.minimum(x0, Qp.center) - r / 2
        hi = np.maximum(x0, Qp.center) + r / 2
        raise ValueError(
            f"partner cube {Qp} is not inside the domain ({err}); "
            f"the pair needs a box containing [{lo.tolist()}, {hi.tolist()}]"
        ) from None
    return Q, Qp, tuple(float(w) for w in w0)


def _flat_cells(grid: Grid, cube: Cube) -> np.ndarray:
    idx = np.arange(grid.size).reshape(grid.shape)
    return idx[grid.window_slices(cube)].ravel()


def _sign_and_deviation(b: GridFunction, Q: Cube, Qp: Cube):
    """``b(x) - b_{Q'}`` on ``Q`` (shifted so constants give exact zeros) and its sign, 0 mapped to +1."""
    grid = b.grid
    bv = np.asarray(b.values, dtype=float).ravel()
    xq, yq = _flat_cells(grid, Q), _flat_cells(grid, Qp)
    ref = bv[yq[0]]
    dev = (bv[xq] - ref) - math.fsum(bv[yq] - ref) / len(yq)
    return np.where(dev < 0, -1.0, 1.0), dev


def build_test_pair(expansion: FourierExpansion, x0, r: float, m, b: GridFunction, grid: Grid | None = None) -> TestPair:
    """Test functions ``g_m = e^{-i<v_m, δy/r>} χ_{Q'}`` and ``h_m = e^{i<v_m, δx/r>} s χ_Q``."""
    grid = grid or b.grid
    if b.grid != grid:
        raise ValueError("b must live on the given grid")
    if not b.is_real:
        raise ValueError("b must be real-valued")
    Q, Qp, w0 = _place(expansion, x0, r, grid)
    mode = tuple(int(k) for k in np.atleast_1d(m))
    if len(mode) != grid.dim or max(abs(k) for k in mode) > expansion.M:
        raise ValueError(f"mode {m} outside the truncation |m| <= {expansion.M}")
    v = np.array(mode) * (expansion.axis_freqs[1] - expansion.axis_freqs[0])
    scale = expansion.delta / r
    pts = grid.points()
    phase = np.exp(1j * scale * (pts @ v))
    sign, _ = _sign_and_deviation(b, Q, Qp)
    s = np.zeros(grid.size)
    s[_flat_cells(grid, Q)] = sign
    s = s.reshape(grid.shape)
    g = np.where(Qp.contains(pts), np.conj(phase), 0)
    h = np.where(Q.contains(pts), phase, 0) * s
    return TestPair(Q, Qp, r, w0, mode, GridFunction(grid, s), GridFunction(grid, g), GridFunction(grid, h))


def geometric_validity(expansion: FourierExpansion, x0, r: float, grid: Grid) -> dict:
    """Check every midpoint pair ``(x, y) ∈ Q × Q'``.

    Returns the largest ``|(x - y)/r - z0/δ|`` (must stay below ``√n``) and
    the largest ``|δ(x - y)/r - z0|_∞`` (must stay below ``R`` so the series
    is used only where it is accurate).  Axes vary independently, so the
    maxima follow from per-axis extremes exactly.
    """
    Q, Qp, _ = _place(expansion, x0, r, grid)
    axes = grid.axes()
    ball = 0.0
    box = 0.0
    for k in range(grid.dim):
        sl_q, sl_p = grid.window_slices(Q)[k], grid.window_slices(Qp)[k]
        d = (axes[k][sl_q][:, None] - axes[k][sl_p][None, :]) / r
        dev = np.abs(d - expansion.w0[k])
        ball += float(dev.max()) ** 2
        box = max(box, float(np.abs(expansion.delta * d - expansion.z0[k]).max()))
    ball = math.sqrt(ball)
    n = grid.dim
    return {"ball": ball, "ball_limit": math.sqrt(n), "box": box, "box_limit": expansion.half_width,
            "valid": ball < math.sqrt(n) and box < expansion.half_width}


def first_link(b: GridFunction, Q: Cube, Qp: Cube) -> Report:
    """``(1/|Q|)∫_Q |b - b_Q| <= 2 (1/|Q|)∫_Q |b - b_{Q'}|``, exact on the discrete measure."""
    vals = np.asarray(b.values[b.grid.window_slices(Qp)], dtype=float).ravel()
    ref = math.fsum(vals) / vals.size
    lhs = mean_oscillation(b, Q)
    rhs = 2 * mean_oscillation(b, Q, reference=ref)
    return Report("first_link", "oscillation about b_Q <= 2 x oscillation about b_Q'", lhs, rhs, 2.0, lhs <= rhs,
                  witness={"Q": Q.to_json(), "Qp": Qp.to_json()})


# --- pairings --------------------------------------------------------------------------------


def _mode_chunks(expansion: FourierExpansion, n_cells: int, budget: int = 4_000_000):
    freqs = expansion.frequencies()
    coeffs = expansion.flat_coeffs()
    step = max(1, budget // max(1, n_cells))
    for k in range(0, len(freqs), step):
        yield freqs[k : k + step], coeffs[k : k + step]


def _pairing_setup(b, kernel, expansion, x0, r):
    grid = b.grid
    if not b.is_real:
        raise ValueError("b must be real-valued")
    kernel = get_kernel(kernel)
    if kernel.name != get_kernel(expansion.kernel).name:
        raise ValueError("expansion was built for a different kernel")
    Q, Qp, w0 = _place(expansion, x0, r, grid)
    sign, dev = _sign_and_deviation(b, Q, Qp)
    xq, yq = _flat_cells(grid, Q), _flat_cells(grid, Qp)
    pts = grid.points().reshape(-1, grid.dim)
    return kernel, Q, Qp, w0, sign, dev, xq, yq, pts


def _identity_sides(b, kernel, expansion, x0, r):
    """Direct oscillation about ``b_{Q'}`` and the pairings ``P_m = <[b,T] g_m, h_m>``."""
    kernel, Q, Qp, w0, sign, dev, xq, yq, pts = _pairing_setup(b, kernel, expansion, x0, r)
    grid = b.grid
    hn = grid.cell_measure
    A = commutator_matrix(kernel, b, xq, yq)
    scale = expansion.delta / r
    pairings = []
    for freqs, _ in _mode_chunks(expansion, len(xq) + len(yq)):
        G = np.exp(-1j * scale * (pts[yq] @ freqs.T))
        Hm = np.exp(1j * scale * (pts[xq] @ freqs.T)) * sign[:, None]
        pairings.append(np.sum(Hm * (A @ G), axis=0) * hn)
    P = np.concatenate(pairings)
    direct = math.fsum(np.abs(dev)) / len(dev)
    kappa = r**grid.dim * expansion.delta ** (-grid.dim) / (Q.measure * Qp.measure)
    return direct, P, kappa, Q, Qp, w0


def oscillation_identity_check(b: GridFunction, kernel, expansion: FourierExpansion, x0, r: float,
                               grid: Grid | None = None, eps_id: float = 1e-2) -> Report:
    """Compare ``(1/|Q|)∫_Q |b - b_{Q'}|`` with ``κ Σ_m a_m <[b,T] g_m, h_m>``, ``κ = r^n δ^{-n}/(|Q||Q'|)``.

    The two sides differ only by the truncation error of the series, because
    ``Q`` and ``Q'`` are disjoint and no principal value is involved.
    """
    if grid is not None and b.grid != grid:
        raise ValueError("b must live on the given grid")
    direct, P, kappa, Q, Qp, w0 = _identity_sides(b, kernel, expansion, x0, r)
    series = kappa * np.sum(expansion.flat_coeffs() * P)
    if direct == 0:
        residual = 0.0 if series == 0 else math.inf
    else:
        residual = abs(direct - series) / direct
    return Report(
        "identity", "mean oscillation equals the weighted sum of commutator pairings",
        direct, float(series.real), kappa, residual < eps_id, exact=False, tolerance=eps_id,
        witness={"Q": Q.to_json(), "Qp": Qp.to_json()},
        meta={"grid": b.grid.to_json(), "kernel": expansion.kernel, "M": expansion.M, "residual": residual,
              "imag": float(series.imag), "w0": list(w0)},
    )


def _weak_lp_columns(F: np.ndarray, p: float, hn: float) -> np.ndarray:
    w = -np.sort(-(np.abs(F) ** p * hn), axis=0)
    k = np.arange(1, F.shape[0] + 1)[:, None]
    return np.max(w * k, axis=0) ** (1 / p)


def _morrey_columns(F, p, q, hn, cells_q, domain_measure):
    """``M^p_q`` norm per column over the family ``{Q, whole box}``."""
    mq = len(cells_q) * hn
    on_q = np.sum(np.abs(F[cells_q]) ** q, axis=0) * hn
    full = np.sum(np.abs(F) ** q, axis=0) * hn
    return np.maximum(on_q ** (1 / q) * mq ** (1 / p - 1 / q), full ** (1 / q) * domain_measure ** (1 / p - 1 / q))


def bmo_lower_bound(b: GridFunction, kernel, expansion: FourierExpansion, x0, r: float, p: float,
                    q: float | None = None, grid: Grid | None = None, eps_id: float = 1e-2) -> Report:
    """Follow the chain from the mean oscillation of ``b`` on ``Q`` down to ``‖[b,T]‖_{L^p -> L^{p,∞}}``.

    Links, each recorded with its two sides:

    1. ``MO_Q(b) <= 2 MO'_Q(b)`` (exact);
    2. ``MO'_Q = κ Σ a_m P_m`` (series identity, residual below ``eps_id``);
    3. ``|Σ a_m P_m| <= Σ |a_m| |P_m|`` (exact);
    4. ``|P_m| <= |Q|^{1-1/p} ‖F_m‖_{M^p_q}`` with ``F_m = [b,T] g_m`` (Hölder, exact);
    5. ``‖F_m‖_{M^p_q} <= (p/(p-q))^{1/q} ‖F_m‖_{L^{p,∞}}`` (exact);
    6. ``‖F_m‖_{L^{p,∞}} <= ρ ‖g_m‖_{L^p}`` with ``ρ`` the largest observed ratio.

    Since ``|Q| = |Q'| = r^n`` the chain yields
    ``ρ >= MO_Q(b) δ^n / (2 Σ|a_m| C)``, the reported lower bound.
    """
    if not 1 < (q if q is not None else (1 + p) / 2) < p:
        raise ValueError("need 1 < q < p")
    q = (1 + p) / 2 if q is None else q
    if grid is not None and b.grid != grid:
        raise ValueError("b must live on the given grid")
    grid = b.grid
    kernel_s, Q, Qp, w0, sign, dev, xq, yq, pts = _pairing_setup(b, kernel, expansion, x0, r)
    hn = grid.cell_measure
    n = grid.dim
    A_full = commutator_matrix(kernel_s, b, np.arange(grid.size), yq)
    scale = expansion.delta / r
    domain = math.prod(hi - lo for lo, hi in zip(grid.box_min, grid.box_max)) if grid.is_square() else None

    P_parts, weak_parts, morrey_parts, unimod = [], [], [], 0.0
    for freqs, _ in _mode_chunks(expansion, grid.size + len(yq)):
        G = np.exp(-1j * scale * (pts[yq] @ freqs.T))
        unimod = max(unimod, float(np.max(np.abs(np.abs(G) - 1))))
        F = A_full @ G
        Hm = np.exp(1j * scale * (pts[xq] @ freqs.T)) * sign[:, None]
        P_parts.append(np.sum(Hm * F[xq], axis=0) * hn)
        weak_parts.append(_weak_lp_columns(F, p, hn))
        if domain is None:
            morrey_parts.append(_morrey_columns(F, p, q, hn, xq, Q.measure))
        else:
            morrey_parts.append(_morrey_columns(F, p, q, hn, xq, domain))
    P = np.concatenate(P_parts)
    W = np.concatenate(weak_parts)
    Mq = np.concatenate(morrey_parts)
    a = expansion.flat_coeffs()
    abs_a = np.abs(a)
    kappa = r**n * expansion.delta ** (-n) / (Q.measure * Qp.measure)
    c_emb = weak_to_morrey_constant(q, p)
    gnorm = Qp.measure ** (1 / p)

    mo = mean_oscillation(b, Q)
    mo_p = math.fsum(np.abs(dev)) / len(dev)
    series = kappa * np.sum(a * P)
    residual = 0.0 if mo_p == 0 and series == 0 else abs(mo_p - series) / (mo_p or 1.0)
    holder = Q.measure ** (1 - 1 / p) * Mq
    rho = float(W.max()) / gnorm
    links = [
        {"name": "first_link", "lhs": mo, "rhs": 2 * mo_p, "exact": True, "passed": mo <= 2 * mo_p},
        {"name": "identity", "lhs": mo_p, "rhs": float(abs(series)), "exact": False, "residual": residual,
         "passed": residual < eps_id},
        {"name": "triangle", "lhs": float(abs(np.sum(a * P))), "rhs": math.fsum(abs_a * np.abs(P)), "exact": True,
         "passed": bool(abs(np.sum(a * P)) <= math.fsum(abs_a * np.abs(P)))},
        {"name": "holder", "lhs": float(np.max(np.abs(P) - holder)), "rhs": 0.0, "exact": True,
         "passed": bool(np.all(np.abs(P) <= holder))},
        {"name": "weak_embedding", "lhs": float(np.max(Mq - c_emb * W)), "rhs": 0.0, "exact": True,
         "passed": bool(np.all(Mq <= c_emb * W)), "constant": c_emb},
        {"name": "operator_ratio", "lhs": float(W.max()), "rhs": rho * gnorm, "exact": True,
         "passed": bool(W.max() <= rho * gnorm), "unimodularity_defect": unimod},
    ]
    implied = mo * expansion.delta**n / (2 * expansion.abs_sum * c_emb)
    passed = all(l["passed"] for l in links) and implied <= rho * (1 + eps_id)
    return Report(
        "bmo_lower", "mean oscillation of b bounded by the commutator norm L^p -> L^{p,inf}",
        implied, rho, 2 * expansion.abs_sum * c_emb / expansion.delta**n, passed, exact=True, tolerance=eps_id,
        witness={"Q": Q.to_json(), "Qp": Qp.to_json()},
        meta={"grid": grid.to_json(), "kernel": expansion.kernel, "M": expansion.M, "p": p, "q": q,
              "mean_oscillation": mo, "abs_sum": expansion.abs_sum, "links": links, "w0": list(w0)},
    )
