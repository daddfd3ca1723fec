"""Convex-body averages of vector fields and bilinear sparse forms.

For a field ``f`` with values in ``C^d`` and an interval ``I`` the body
``<<f>>_p(I) = { avg_I phi f : ||phi||_{L^p'(I, dx/|I|)} <= 1 }`` has support
function ``h(v) = ||f . v||_{L^p(I, dx/|I|)}``. Sketch: ``Re avg phi (f . v)``
is at most ``||f . v||_p`` by Hoelder, with equality for
``phi = |f . v|^{p-2} conj(f . v) / ||f . v||_p^{p-1}``. On piecewise-constant
fields this is a finite sum, and the maximizing ``phi`` also gives the
boundary point, so every average comes with an exact oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .characteristics import INF, IntervalFamily, apq_characteristic, conjugate
from .convex_geometry import (
    DirectionGrid,
    Ellipsoid,
    GeometryError,
    SupportBody,
    dot_magnitude_detail,
    john_ellipsoid,
)
from .dyadic_grid import DyadicInterval, SparseCollection, dilate, generate_sparse
from .hermitian_core import power_stack, spectral_norm
from .weight_store import Domain, PiecewiseWeight, WeightError, cellwise_power, random_weight, tile_cells

SPAN_RTOL = 1e-10
DEFAULT_LAMBDA = 5.0


class SparseError(ValueError):
    pass


# -- vector fields -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VectorField:
    """One vector of ``C^d`` per dyadic cell; cells tile the domain."""

    domain: Domain
    levels: np.ndarray
    indices: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        lv = np.asarray(self.levels, dtype=np.int64)
        ix = np.asarray(self.indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or len(vals) != len(lv) or len(lv) != len(ix):
            raise SparseError(f"inconsistent cell arrays: levels {lv.shape}, indices {ix.shape}, values {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise SparseError("vector field has non-finite entries")
        try:
            order, left, right = tile_cells(self.domain, lv, ix)
        except WeightError as exc:
            raise SparseError(str(exc)) from exc
        lv, ix, vals = lv[order], ix[order], vals[order]
        for a in (lv, ix, vals, left, right):
            a.setflags(write=False)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "indices", ix)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_left", left)
        object.__setattr__(self, "_right", right)

    @classmethod
    def uniform(cls, values: np.ndarray, level: int, domain: Domain = Domain()) -> "VectorField":
        vals = np.asarray(values, dtype=complex)
        lo, _ = domain.bounds
        first = int(round(lo * 2**level))
        return cls(domain, np.full(len(vals), level), first + np.arange(len(vals)), vals)

    @classmethod
    def constant(cls, vector: Sequence[complex], level: int = 0, domain: Domain = Domain()) -> "VectorField":
        u = np.atleast_1d(np.asarray(vector, dtype=complex))
        lo, hi = domain.bounds
        n = int(round((hi - lo) * 2**level))
        return cls.uniform(np.broadcast_to(u, (n, len(u))).copy(), level, domain)

    @classmethod
    def like(cls, W: PiecewiseWeight, values: np.ndarray) -> "VectorField":
        """Field on the same partition as ``W``."""
        return cls(W.domain, W.levels, W.indices, values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_cells(self) -> int:
        return int(len(self.levels))

    @property
    def left(self) -> np.ndarray:
        return self._left  # type: ignore[attr-defined]

    @property
    def right(self) -> np.ndarray:
        return self._right  # type: ignore[attr-defined]

    @property
    def lengths(self) -> np.ndarray:
        return self.right - self.left

    @property
    def resolution(self) -> int:
        return int(self.levels.max())

    def overlaps(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))[:, None]
        b = np.atleast_1d(np.asarray(b, dtype=float))[:, None]
        return np.clip(np.minimum(b, self.right) - np.maximum(a, self.left), 0.0, None)

    def refine(self, level: int) -> "VectorField":
        if level < self.resolution:
            raise SparseError("refinement level below current resolution")
        reps = np.left_shift(1, level - self.levels)
        return VectorField.uniform(np.repeat(self.values, reps, axis=0), level, self.domain)

    def scaled(self, c: complex) -> "VectorField":
        return VectorField(self.domain, self.levels, self.indices, c * self.values)

    def same_cells(self, other) -> bool:
        return (
            self.domain == other.domain
            and np.array_equal(self.levels, other.levels)
            and np.array_equal(self.indices, other.indices)
        )


def random_field(
    d: int, resolution: int, seed: int = 0, domain: Domain = Domain(), density: float = 1.0
) -> VectorField:
    """Complex Gaussian cell values; each cell is nonzero with probability ``density``."""
    lo, hi = domain.bounds
    n = int(round((hi - lo) * 2**resolution))
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    if density < 1:
        vals *= (rng.random(n) < density)[:, None]
    return VectorField.uniform(vals, resolution, domain)


# -- exponent profile ------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentProfile:
    """Exponents attached to ``1 <= p0 < p < q0 <= inf``."""

    p0: float
    q0: float
    p: float
    t: float
    s: float
    s_prime: float
    s_tilde: float
    a: float
    b: float
    r: float
    alpha: float

    def identities(self) -> dict[str, tuple[float, float]]:
        """Named pairs ``(lhs, rhs)`` that must agree; ``b >= a'`` is stored as ``(min(b, a'), a')``."""
        p0, q0, p = self.p0, self.q0, self.p
        tp = conjugate(self.t)
        ap = conjugate(self.a)
        q0p = conjugate(q0)
        return {
            "t = p/p0": (self.t, p / p0),
            "s = q0/p": (self.s, q0 / p if q0 != INF else INF),
            "a = t'p/t = p/(t-1)": (self.a, p / (self.t - 1.0)),
            "a = t'p0": (self.a, tp * p0),
            "b = s'p = s~'q0'": (self.b, conjugate(self.s_tilde) * q0p),
            "1/a + 1/b = 1/p0 - 1/q0": (1.0 / self.a + 1.0 / self.b, 1.0 / p0 - (0.0 if q0 == INF else 1.0 / q0)),
            "b >= a'": (min(self.b, ap), ap),
            "b/a = r-1 = s't/t'": (self.b / self.a, self.s_prime * self.t / tp),
            "r - 1 = b/a": (self.r - 1.0, self.b / self.a),
            "alpha": (self.alpha, 1.0 / (self.s_prime * (p - p0)) + 1.0 / conjugate(p)),
        }

    def check(self, rtol: float = 1e-12) -> dict[str, bool]:
        return {k: math.isclose(l, r, rel_tol=rtol, abs_tol=rtol) for k, (l, r) in self.identities().items()}

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in ("p0", "q0", "p", "t", "s", "s_prime", "s_tilde", "a", "b", "r", "alpha")}


def exponent_profile(p0: float, q0: float, p: float) -> ExponentProfile:
    """Derived exponents for ``1 <= p0 < p < q0 <= inf`` (``q0 = inf`` gives ``s' = 1``)."""
    p0, q0, p = float(p0), float(q0), float(p)
    if math.isnan(p0) or math.isnan(q0) or math.isnan(p):
        raise SparseError("exponents must be numbers")
    if not p0 >= 1:
        raise SparseError(f"need p0 >= 1, got {p0}")
    if p == p0 or p == q0:
        raise SparseError(f"p must differ from both endpoints, got p0={p0}, p={p}, q0={q0}")
    if not (p0 < p < q0) or p == INF:
        raise SparseError(f"need p0 < p < q0, got p0={p0}, p={p}, q0={q0}")
    t = p / p0
    s = INF if q0 == INF else q0 / p
    sp = conjugate(s)
    pp = conjugate(p)
    q0p = conjugate(q0)
    s_tilde = pp / q0p
    a = p / (t - 1.0)
    b = sp * p
    r = sp * (t - 1.0) + 1.0
    alpha = 1.0 / (sp * (p - p0)) + 1.0 / pp
    return ExponentProfile(p0, q0, p, t, s, sp, s_tilde, a, b, r, alpha)


# -- convex averages -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AverageBody(SupportBody):
    """Convex-body average; ``zero`` flags a field vanishing on the interval,
    ``outside`` is the fraction of the interval lying outside the domain."""

    zero: bool = False
    outside: float = 0.0


def _local(f: VectorField, a: float, b: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Normalized masses and values of the cells meeting ``[a, b)``."""
    if not b > a:
        raise SparseError(f"empty interval [{a}, {b})")
    ov = f.overlaps(a, b)[0]
    keep = ov > 0
    lo, hi = f.domain.bounds
    inside = max(0.0, min(b, hi) - max(a, lo))
    return ov[keep] / (b - a), f.values[keep], 1.0 - inside / (b - a)


def _norm_p(mass: np.ndarray, D: np.ndarray, p: float) -> np.ndarray:
    """``(sum_c mass_c |D_c|^p)^{1/p}`` along the first axis."""
    if p == INF:
        return np.max(np.where(mass[:, None] > 0, np.abs(D), 0.0), axis=0, initial=0.0)
    return (mass @ np.abs(D) ** p) ** (1.0 / p)


def _average_oracle(mass: np.ndarray, F: np.ndarray, p: float):
    def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        V = np.atleast_2d(np.asarray(V, dtype=complex))
        D = F @ V.conj().T  # D[c, j] = f_c . v_j
        h = _norm_p(mass, D, p)
        aD = np.abs(D)
        with np.errstate(divide="ignore", invalid="ignore"):
            if p == 1:
                phi = np.where(aD > 0, np.conj(D) / aD, 0.0)
            else:
                phi = np.where(aD > 0, aD ** (p - 2) * np.conj(D), 0.0) / np.where(h > 0, h, 1.0) ** (p - 1)
        pts = (mass[:, None] * phi).T @ F
        return h, pts

    return orc


def convex_average(
    f: VectorField, interval: tuple[float, float], p: float, grid: Optional[DirectionGrid] = None
) -> AverageBody:
    """``<<f>>_p`` over ``interval`` on ``grid`` (zero extension outside the domain)."""
    if not 1 <= p < INF:
        raise SparseError(f"need 1 <= p < inf, got {p}")
    a, b = float(interval[0]), float(interval[1])
    grid = grid or DirectionGrid(f.dim)
    if grid.dim != f.dim:
        raise SparseError(f"grid dimension {grid.dim} != field dimension {f.dim}")
    mass, F, out = _local(f, a, b)
    orc = _average_oracle(mass, F, p)
    h, pts = orc(grid.base)
    zero = bool(np.all(h == 0))
    return AverageBody(grid, grid.tile(h), grid.tile_points(pts), orc, zero=zero, outside=out)


# -- John surrogates -----------------------------------------------------------------------


@dataclass(frozen=True)
class Surrogate:
    """Ellipsoid ``basis @ shape @ (unit ball of C^m)`` inscribed in an average body.

    ``factor`` is the measured ratio with ``body subset factor * ellipsoid``
    on the grid (at most about ``sqrt(m)``); ``m = 0`` encodes the zero body.
    """

    basis: np.ndarray
    shape: np.ndarray
    factor: float

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])


def span_basis(mass: np.ndarray, F: np.ndarray, rtol: float = SPAN_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of the span of the cell values that carry mass."""
    d = F.shape[1]
    if F.size == 0:
        return np.zeros((d, 0), dtype=complex)
    Y = np.sqrt(mass)[:, None] * F
    _, sv, vh = np.linalg.svd(Y, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros((d, 0), dtype=complex)
    m = int(np.sum(sv > rtol * sv[0]))
    U = vh[:m].T.copy()
    # SVD phases are arbitrary; fix them so the grid sees the same coordinates for f and c f
    lead = U[np.argmax(np.abs(U) > 0.5 / np.sqrt(d), axis=0), np.arange(m)]
    return U * (np.abs(lead) / lead)


def _grid_for(m: int, grids: dict[int, DirectionGrid]) -> DirectionGrid:
    if m not in grids:
        grids[m] = DirectionGrid(m)
    return grids[m]


def john_surrogate(
    f: VectorField,
    interval: tuple[float, float],
    p: float,
    grids: Optional[dict[int, DirectionGrid]] = None,
    backend: str | None = None,
) -> Surrogate:
    """John ellipsoid of ``<<f>>_p`` inside the span of the values of ``f`` on the interval."""
    grids = {} if grids is None else grids
    mass, F, _ = _local(f, *interval)
    U = span_basis(mass, F)
    m = U.shape[1]
    if m == 0:
        return Surrogate(U, np.zeros((0, 0), dtype=complex), 1.0)
    Fm = F @ U.conj()  # coordinates U^* f_c
    if m == 1:
        r = float(_norm_p(mass, Fm, p)[0])
        return Surrogate(U, np.array([[r]], dtype=complex), 1.0)
    grid = _grid_for(m, grids)
    orc = _average_oracle(mass, Fm, p)
    body = SupportBody.from_oracle(grid, orc)
    E = john_ellipsoid(body, backend=backend)
    return Surrogate(U, E.shape.entries.copy(), float(E.info["outward_ratio"]))


def surrogate_dot(K: Surrogate, L: Surrogate) -> float:
    """``|E_K . E_L| = |B U_L^* U_K A|`` for ellipsoids ``U_K A ball`` and ``U_L B ball``."""
    if K.rank == 0 or L.rank == 0:
        return 0.0
    return spectral_norm(L.shape @ (L.basis.conj().T @ K.basis) @ K.shape)


# -- sparse forms -----------------------------------------------------------------------------


@dataclass
class SparseFormReport:
    value: float
    terms: dict[DyadicInterval, float] = field(repr=False)
    distortion: float
    zero_extension: bool
    zero_terms: int
    degenerate_terms: int
    lam: float

    def __float__(self) -> float:
        return float(self.value)

    def partial(self, depth: int) -> float:
        """Form restricted to cubes of level at most ``depth`` (same summation order)."""
        return float(sum(v for q, v in sorted(self.terms.items()) if q.level <= depth))


def _check_form_exponents(p0: float, q0: float) -> float:
    if not (1 <= p0 < q0 <= INF) or p0 == INF:
        raise SparseError(f"need 1 <= p0 < q0 <= inf, got p0={p0}, q0={q0}")
    return conjugate(q0)


def _check_pair(f: VectorField, g: VectorField) -> None:
    if f.dim != g.dim:
        raise SparseError(f"dimension mismatch {f.dim} vs {g.dim}")
    if f.domain != g.domain:
        raise SparseError("fields live on different domains")


def _cube_term(
    f: VectorField,
    g: VectorField,
    iv: tuple[float, float],
    p0: float,
    q0p: float,
    grids: dict[int, DirectionGrid],
    backend: str | None,
) -> tuple[float, float, bool, bool]:
    """``(dot, distortion, zero, degenerate)`` for one dilated cube."""
    if f.dim == 1:
        mf, Ff, _ = _local(f, *iv)
        mg, Fg, _ = _local(g, *iv)
        v = float(_norm_p(mf, Ff, p0)[0] * _norm_p(mg, Fg, q0p)[0])
        return v, 1.0, v == 0.0, False
    K = john_surrogate(f, iv, p0, grids, backend)
    L = john_surrogate(g, iv, q0p, grids, backend)
    if K.rank == 0 or L.rank == 0:
        return 0.0, 1.0, True, False
    degenerate = K.rank < f.dim or L.rank < f.dim
    return surrogate_dot(K, L), K.factor * L.factor, False, degenerate


def sparse_form(
    S: SparseCollection | Iterable,
    f: VectorField,
    g: VectorField,
    p0: float,
    q0: float,
    lam: float = DEFAULT_LAMBDA,
    backend: str | None = None,
) -> SparseFormReport:
    """``sum_P |P| |<<f>>_{p0}(lam P) . <<g>>_{q0'}(lam P)|`` through John surrogates.

    In ``d = 1`` each term is the exact product of the two normalized norms.
    For ``d >= 2`` the dot magnitude of the two inscribed ellipsoids is exact,
    so every term is a lower bound off by at most ``distortion`` (reported,
    at most ``d``). Parts of ``lam P`` outside the domain count as zero.
    """
    q0p = _check_form_exponents(p0, q0)
    _check_pair(f, g)
    if lam < 1:
        raise SparseError(f"dilation must be >= 1, got {lam}")
    cubes = sorted(S.intervals if isinstance(S, SparseCollection) else {DyadicInterval(*q) if not isinstance(q, DyadicInterval) else q for q in S})
    lo, hi = f.domain.bounds
    grids: dict[int, DirectionGrid] = {}
    terms: dict[DyadicInterval, float] = {}
    worst = 1.0
    outside = False
    zeros = degs = 0
    total = 0.0
    for Q in cubes:
        iv = dilate(Q, lam).as_float()
        outside |= iv[0] < lo or iv[1] > hi
        dot, dist, zero, deg = _cube_term(f, g, iv, p0, q0p, grids, backend)
        term = float(Q.length) * dot
        terms[Q] = term
        total += term
        worst = max(worst, dist)
        zeros += zero
        degs += deg
    return SparseFormReport(total, terms, worst, outside, zeros, degs, float(lam))


# -- one-scale check --------------------------------------------------------------------------


@dataclass(frozen=True)
class OneScaleRecord:
    lhs: float
    rhs: float
    slack: float  # 1 - lhs / rhs; negative means lhs exceeds rhs
    budget: float
    holds: bool
    rank: int
    dot: float


def one_scale_check(
    f: VectorField,
    g: VectorField,
    Q: DyadicInterval,
    lam: float,
    r1: float,
    r2: float,
    slack_budget: float = 0.1,
    backend: str | None = None,
) -> OneScaleRecord:
    """Compare ``sum_i ||x_i||_{r1} ||y_i||_{r2}`` with ``m^{3/2} |<<f>> . <<g>>|``.

    ``m`` is the numerical rank of ``f`` on ``lam Q``; both fields are
    expressed in an orthonormal basis of that span first. With ``S`` the
    John shape of ``<<f>>`` there, ``x = S^{-1} f`` and ``y = S g``. The dot
    magnitude on the right is the refined sampled value, a lower bound, so
    the check errs on the strict side.
    """
    _check_pair(f, g)
    for r in (r1, r2):
        if not 1 <= r < INF:
            raise SparseError(f"need 1 <= r < inf, got {r}")
    iv = dilate(Q, lam).as_float()
    mf, Ff, _ = _local(f, *iv)
    mg, Fg, _ = _local(g, *iv)
    U = span_basis(mf, Ff)
    m = U.shape[1]
    if m == 0:
        return OneScaleRecord(0.0, 0.0, 0.0, slack_budget, True, 0, 0.0)
    Fm = Ff @ U.conj()
    Gm = Fg @ U.conj()  # S P g in the same coordinates
    grid = DirectionGrid(m)
    K = SupportBody.from_oracle(grid, _average_oracle(mf, Fm, r1))
    L = SupportBody.from_oracle(grid, _average_oracle(mg, Gm, r2))
    if m == 1:
        shape = np.array([[float(K.h[0])]], dtype=complex)
    else:
        shape = john_ellipsoid(K, backend=backend).shape.entries
    x = np.linalg.solve(shape, Fm.T).T
    y = Gm @ shape.T
    lhs = float(np.sum(_norm_p(mf, x, r1) * _norm_p(mg, y, r2)))
    if m == 1:
        dot = float(K.h[0] * L.h[0])
    else:
        dot = dot_magnitude_detail(K, L).value
    rhs = m**1.5 * dot
    holds = lhs <= rhs * (1.0 + slack_budget) + 1e-300
    slack = 1.0 - lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else -INF)
    return OneScaleRecord(lhs, rhs, slack, slack_budget, bool(holds), m, dot)


# -- weighted norms and the sparse bound experiment --------------------------------------


def _common(f: VectorField, W: PiecewiseWeight) -> tuple[VectorField, PiecewiseWeight]:
    if f.domain != W.domain:
        raise SparseError("field and weight live on different domains")
    if f.dim != W.dim:
        raise SparseError(f"dimension mismatch {f.dim} vs {W.dim}")
    if f.same_cells(W):
        return f, W
    lv = max(f.resolution, W.resolution)
    return f.refine(lv), W.refine(lv)


def weighted_norm(f: VectorField, W: PiecewiseWeight, p: float) -> float:
    """``(int |W^{1/p} f|^p dx)^{1/p}`` as a finite sum over cells."""
    if not 1 <= p < INF:
        raise SparseError(f"need 1 <= p < inf, got {p}")
    f, W = _common(f, W)
    R = power_stack(W.values, 1.0 / p)
    v = np.linalg.norm(np.einsum("cij,cj->ci", R, f.values), axis=1)
    return float(np.sum(f.lengths * v**p) ** (1.0 / p))


def dual_weight(W: PiecewiseWeight, p: float) -> PiecewiseWeight:
    """``W' = W^{-1/(p-1)}``."""
    return cellwise_power(W, -1.0 / (p - 1.0))


@dataclass
class SparseBoundRecord:
    form: float
    char: float
    norm_f: float
    norm_g: float
    ratio: float
    distortion: float
    epsilon: float
    unbounded: bool = False
    notes: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "form": self.form,
            "char": self.char,
            "norm_f": self.norm_f,
            "norm_g": self.norm_g,
            "ratio": self.ratio,
            "distortion": self.distortion,
        }


OVERFLOW_GUARD = 1e150


def weight_characteristic(W: PiecewiseWeight, profile: ExponentProfile, family: IntervalFamily) -> float:
    """``[W^{s'}]_{A_{a',b}}`` maximized over ``family``."""
    V = cellwise_power(W, profile.s_prime)
    return apq_characteristic(V, conjugate(profile.a), profile.b, family).value


def _ratio(form: float, eps: float, char: float, alpha: float, nf: float, ng: float) -> tuple[float, bool]:
    if not math.isfinite(char) or char > OVERFLOW_GUARD:
        return INF, True
    if form == 0:
        return 0.0, False
    den = char**alpha * nf * ng
    return form * eps / den, False


def sparse_bound_experiment(
    W: PiecewiseWeight,
    S: SparseCollection,
    f: VectorField,
    g: VectorField,
    profile: ExponentProfile,
    family: IntervalFamily,
    lam: float = DEFAULT_LAMBDA,
    char: Optional[float] = None,
    backend: str | None = None,
) -> SparseBoundRecord:
    """``ratio = form * eps / (char^alpha ||f||_{L^p_W} ||g||_{L^{p'}_{W'}})``.

    A precomputed characteristic may be passed in to share it between
    sparse families.
    """
    rep = sparse_form(S, f, g, profile.p0, profile.q0, lam, backend)
    c = weight_characteristic(W, profile, family) if char is None else float(char)
    nf = weighted_norm(f, W, profile.p)
    ng = weighted_norm(g, dual_weight(W, profile.p), conjugate(profile.p))
    ratio, unb = _ratio(rep.value, float(S.epsilon), c, profile.alpha, nf, ng)
    return SparseBoundRecord(
        rep.value, c, nf, ng, ratio, rep.distortion, float(S.epsilon), unb,
        {"zero_extension": rep.zero_extension, "cubes": len(S), "family": family.describe()},
    )


SWEEP_COLUMNS = ("seed", "depth", "d", "form", "char", "norm_f", "norm_g", "ratio", "distortion")


def sparse_bound_sweep(
    seeds: Sequence[int],
    dims: Sequence[int],
    depths: Sequence[int],
    profile: ExponentProfile,
    resolution: int = 5,
    spread: float = 0.5,
    eps: float = 0.25,
    admit: float = 0.5,
    lam: float = DEFAULT_LAMBDA,
    backend: str | None = None,
) -> list[dict]:
    """Rows ``SWEEP_COLUMNS`` for seeded weights, fields and nested sparse families.

    Families for smaller depths are sub-families of the deepest one, so the
    per-cube terms are computed once and summed per depth. The
    characteristic uses all windows of dyadic widths 1..4 at every level up
    to ``resolution``.
    """
    rows = []
    family = IntervalFamily.windows(range(0, resolution + 1))
    top = max(depths)
    for d in dims:
        for seed in seeds:
            W = random_weight(d, resolution, spread, seed)
            f = random_field(d, resolution, 10_000 + seed)
            g = random_field(d, resolution, 20_000 + seed)
            S = generate_sparse(top, eps, seed, admit)
            rep = sparse_form(S, f, g, profile.p0, profile.q0, lam, backend)
            char = weight_characteristic(W, profile, family)
            nf = weighted_norm(f, W, profile.p)
            ng = weighted_norm(g, dual_weight(W, profile.p), conjugate(profile.p))
            for depth in sorted(depths):
                form = rep.partial(depth)
                ratio, _ = _ratio(form, eps, char, profile.alpha, nf, ng)
                rows.append(
                    {"seed": seed, "depth": depth, "d": d, "form": form, "char": char,
                     "norm_f": nf, "norm_g": ng, "ratio": ratio, "distortion": rep.distortion}
                )
    return rows


# -- the q' ** q bound ----------------------------------------------------------------------


@dataclass(frozen=True)
class ConjugatePowerRecord:
    t: float
    delta: float
    theta: float
    q: float
    value: float  # (q')^q
    bound: float  # e (t + 1) / (delta (t - 1))
    y_exact: float  # q - 1
    y_formula: float  # delta (t - 1) / (1 + delta)
    holds: bool


def conjugate_power_check(t: float, delta: float) -> ConjugatePowerRecord:
    """``theta = t'(1 + delta)``, ``q = t / theta'``; checks ``(q')^q <= e (t+1) / (delta (t-1))``."""
    if not t > 1 or t == INF:
        raise SparseError(f"need 1 < t < inf, got {t}")
    if not 0 < delta < 1:
        raise SparseError(f"need 0 < delta < 1, got {delta}")
    theta = conjugate(t) * (1.0 + delta)
    q = t / conjugate(theta)
    value = conjugate(q) ** q
    bound = math.e * (t + 1.0) / (delta * (t - 1.0))
    yf = delta * (t - 1.0) / (1.0 + delta)
    return ConjugatePowerRecord(t, delta, theta, q, value, bound, q - 1.0, yf, bool(value <= bound))


theorem14_experiment = sparse_bound_experiment
lemma42_check = conjugate_power_check
