"""Limited-range extrapolation calculus and a small Rubio de Francia iteration.

Body-valued functions live on a uniform dyadic partition of ``[0, 1)`` and
are stored through their support values on a direction grid. The maximal
operator is the dyadic one: averages over dyadic intervals add support
functions, and the hull of a union takes their pointwise maximum, so
``h_{M F(x)}(v) = max_{Q containing x} avg_Q h_{F(y)}(v)`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .characteristics import INF, IntervalFamily, _esssup_average, conjugate, pair_norms
from .convex_geometry import DirectionGrid, SupportBody
from .hermitian_core import power_stack
from .weight_store import PiecewiseWeight

MAX_RDF_CELLS = 2**10
A1K_RTOL = 1e-12


class ExtrapolationError(ValueError):
    pass


# -- exponent calculus ----------------------------------------------------------


@dataclass(frozen=True)
class ExtrapolationProfile:
    """``t(p) = p/p0``, ``s(p) = q0/p`` and ``r(p) = s(p)'(t(p) - 1) + 1`` for ``0 < p0 < q0 <= inf``."""

    p0: float
    q0: float

    def __post_init__(self) -> None:
        if not (0 < self.p0 < self.q0) or self.p0 == INF:
            raise ExtrapolationError(f"need 0 < p0 < q0 <= inf, got p0={self.p0}, q0={self.q0}")

    def _in_range(self, p: float) -> None:
        if not self.p0 <= p < self.q0:
            raise ExtrapolationError(f"exponent {p} outside [{self.p0}, {self.q0})")

    def t(self, p: float) -> float:
        self._in_range(p)
        return p / self.p0

    def s(self, p: float) -> float:
        self._in_range(p)
        return INF if self.q0 == INF else self.q0 / p

    def s_prime(self, p: float) -> float:
        return conjugate(self.s(p))

    def r(self, p: float) -> float:
        return self.s_prime(p) * (self.t(p) - 1.0) + 1.0


@dataclass(frozen=True)
class AlphaValue:
    value: float
    case: str  # "p<=q", "q<p<q0" or "q<p=q0"
    boundary: bool  # p == q, where the case formulas meet


def alpha_detail(profile: ExtrapolationProfile, p: float, q: float) -> AlphaValue:
    if not profile.p0 <= p <= profile.q0:
        raise ExtrapolationError(f"p={p} outside [{profile.p0}, {profile.q0}]")
    if not profile.p0 < q < profile.q0:
        raise ExtrapolationError(f"q={q} outside ({profile.p0}, {profile.q0})")
    if p <= q:
        return AlphaValue(1.0, "p<=q", p == q)
    if p < profile.q0:
        return AlphaValue((profile.r(p) - 1.0) / (profile.r(q) - 1.0), "q<p<q0", False)
    return AlphaValue(1.0 / (profile.r(q) - 1.0), "q<p=q0", False)


def alpha(profile: ExtrapolationProfile, p: float, q: float) -> float:
    """Exponent of the characteristic when passing from ``p`` to ``q``."""
    return alpha_detail(profile, p, q).value


@dataclass(frozen=True)
class IdentityRecord:
    first_lhs: float  # s(p)'s(q)'(p - q)
    first_rhs: float  # p s(p)' - q s(q)'
    second_lhs: float  # r(p) / r(q)
    second_rhs: float  # p s(p)' / (q s(q)')

    def holds(self, rtol: float = 1e-12) -> bool:
        return math.isclose(self.first_lhs, self.first_rhs, rel_tol=rtol, abs_tol=rtol) and math.isclose(
            self.second_lhs, self.second_rhs, rel_tol=rtol, abs_tol=rtol
        )


def identity_check(profile: ExtrapolationProfile, p: float, q: float) -> IdentityRecord:
    sp, sq = profile.s_prime(p), profile.s_prime(q)
    return IdentityRecord(sp * sq * (p - q), p * sp - q * sq, profile.r(p) / profile.r(q), p * sp / (q * sq))


# -- body fields ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BodyField:
    """Support values ``h[x, j]`` of one body per cell of a uniform partition of ``[0, 1)``.

    ``shapes`` is set for ellipsoid-valued fields ``F(x) = shapes[x] (unit ball)``.
    """

    grid: DirectionGrid
    level: int
    h: np.ndarray = field(repr=False)
    shapes: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        n = 2**self.level
        if h.shape != (n, self.grid.count):
            raise ExtrapolationError(f"expected support array of shape {(n, self.grid.count)}, got {h.shape}")
        if not np.all(np.isfinite(h)) or np.any(h < 0):
            raise ExtrapolationError("support values must be finite and nonnegative")
        hb = h.reshape(n, 4, -1)
        if np.any(hb != hb[:, :1]):
            raise ExtrapolationError("support values are not invariant under multiplication by i")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def from_base(cls, grid: DirectionGrid, level: int, h_base: np.ndarray, shapes=None) -> "BodyField":
        return cls(grid, level, np.tile(np.asarray(h_base, dtype=float), (1, 4)), shapes)

    @classmethod
    def ellipsoids(cls, grid: DirectionGrid, shapes: np.ndarray) -> "BodyField":
        """``F(x) = A_x (unit ball)``, so ``h(x, v) = |A_x v|`` (``A_x`` Hermitian)."""
        A = np.asarray(shapes, dtype=complex)
        n = len(A)
        level = int(round(math.log2(n)))
        if 2**level != n:
            raise ExtrapolationError("number of cells must be a power of two")
        hb = np.linalg.norm(np.einsum("xij,bj->xbi", A, grid.base), axis=2)
        return cls.from_base(grid, level, hb, A)

    @property
    def n_cells(self) -> int:
        return 2**self.level

    @property
    def h_base(self) -> np.ndarray:
        return self.h[:, : self.grid.n_base]

    def body(self, x: int) -> SupportBody:
        return SupportBody(self.grid, self.h[x])


def convex_maximal(F: BodyField) -> BodyField:
    """Dyadic convex-set-valued maximal function, exact per grid direction."""
    n = F.n_cells
    hb = F.h_base
    out = hb.copy()
    for j in range(F.level):
        size = n >> j  # cells per dyadic interval at level j
        avg = hb.reshape(2**j, size, -1).sum(axis=1) / size
        out = np.maximum(out, np.repeat(avg, size, axis=0))
    return BodyField.from_base(F.grid, F.level, out)


def convex_maximal_bruteforce(F: BodyField) -> BodyField:
    """Reference for :func:`convex_maximal`: loops over every dyadic interval containing each cell."""
    n = F.n_cells
    hb = F.h_base
    out = np.zeros_like(hb)
    for x in range(n):
        for k in range(hb.shape[1]):
            best = 0.0
            for j in range(F.level + 1):
                size = n >> j
                start = (x // size) * size
                total = 0.0
                for y in range(start, start + size):
                    total += hb[y, k]
                best = max(best, total / size)
            out[x, k] = best
    return BodyField.from_base(F.grid, F.level, out)


def matrix_a1(W: PiecewiseWeight, family: IntervalFamily) -> float:
    """``max_I max_{x in I} avg_I |W(x)^{-1} W(y)| dy`` over ``family``."""
    a, b = family.bounds(W)
    K = pair_norms(W, -1.0, 1.0, 1.0)
    return float(np.max(_esssup_average(W, K, a, b)))


def a1k_check(F: BodyField, C: float, rtol: float = A1K_RTOL) -> bool:
    """``h_{M F(x)}(v) <= C h_{F(x)}(v)`` for every cell and grid direction.

    ``rtol`` absorbs the rounding of the averages.
    """
    if not C > 0:
        raise ExtrapolationError(f"constant must be positive, got {C}")
    M = convex_maximal(F).h_base
    return bool(np.all(M <= C * F.h_base * (1.0 + rtol)))


def weight_field(W: PiecewiseWeight, grid: DirectionGrid, power: float = 1.0) -> BodyField:
    """``W^power (unit ball)`` per cell; ``W`` must sit on a uniform partition of ``[0, 1)``."""
    if W.domain.bounds != (0.0, 1.0) or np.any(W.levels != W.levels[0]):
        raise ExtrapolationError("body fields need a uniform partition of [0, 1)")
    return BodyField.ellipsoids(grid, power_stack(W.values, power))


# -- Rubio de Francia iteration -----------------------------------------------------


@dataclass
class RdfResult:
    SG: BodyField
    sigma: np.ndarray  # SG(x) = sigma(x) W(x)^{-1/r} (unit ball)
    coefficients: np.ndarray  # (k_max + 2, n): scalar profiles of P^k G
    B: float
    r: float
    checks: dict
    trace: list[dict]


def _level_groups(n: int):
    level = int(round(math.log2(n)))
    for j in range(level + 1):
        yield n >> j


def _image_radius(
    c: np.ndarray, Binv: np.ndarray, A: np.ndarray, starts: np.ndarray, steps: int = 60, tol: float = 1e-12
) -> np.ndarray:
    """``out[x] = max_{Q dyadic, x in Q} |A_x K_Q|`` with ``K_Q = avg_{y in Q} c_y Binv_y (unit ball)``.

    ``|A_x K_Q| = max_{|u| = 1} phi(u)`` with ``phi(u) = avg_Q c_y |Binv_y A_x u|``,
    a convex function. The best of ``starts`` seeds a fixed-point ascent
    ``u <- grad / |grad|``; no step decreases ``phi``.
    """
    n, d, _ = A.shape
    out = np.zeros(n)
    if d == 1:
        bv = c * np.abs(Binv[:, 0, 0])
        for size in _level_groups(n):
            avg = np.repeat(bv.reshape(-1, size).mean(axis=1), size)
            out = np.maximum(out, avg * np.abs(A[:, 0, 0]))
        return out
    G = Binv @ Binv  # |Binv_y w|^2 = w^* G_y w
    for size in _level_groups(n):
        nq = n // size
        Gq = G.reshape(nq, size, d, d)
        cq = c.reshape(nq, size) / size
        Aq = A.reshape(nq, size, d, d)

        # explicit 2x2 arithmetic; x indexes the evaluation cell, y the averaged cell
        a00, a01 = Aq[:, :, 0, 0], Aq[:, :, 0, 1]
        a10, a11 = Aq[:, :, 1, 0], Aq[:, :, 1, 1]
        g00, g01 = Gq[:, None, :, 0, 0], Gq[:, None, :, 0, 1]
        g10, g11 = Gq[:, None, :, 1, 0], Gq[:, None, :, 1, 1]
        cw = cq[:, None, :]

        def phi(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            w0 = (a00 * u[..., 0] + a01 * u[..., 1])[..., None]
            w1 = (a10 * u[..., 0] + a11 * u[..., 1])[..., None]
            h0 = g00 * w0 + g01 * w1
            h1 = g10 * w0 + g11 * w1
            quad = np.maximum((w0.conj() * h0 + w1.conj() * h1).real, 0.0)
            mag = np.sqrt(quad)
            val = np.sum(cw * mag, axis=2)
            with np.errstate(divide="ignore", invalid="ignore"):
                scale = np.where(mag > 0, cw / mag, 0.0)
            z0 = np.sum(scale * h0, axis=2)
            z1 = np.sum(scale * h1, axis=2)
            grad = np.stack([a00 * z0 + a01 * z1, a10 * z0 + a11 * z1], axis=-1)
            return val, grad

        best_val = np.full((nq, size), -1.0)
        u = np.zeros((nq, size, d), dtype=complex)
        for u0 in starts:
            trial = np.broadcast_to(u0, (nq, size, d)).astype(complex)
            v, _ = phi(trial)
            better = v > best_val
            best_val = np.where(better, v, best_val)
            u = np.where(better[..., None], trial, u)
        val, grad = phi(u)
        for _ in range(steps):
            gn = np.linalg.norm(grad, axis=2)
            u = np.where(gn[..., None] > 0, grad / np.where(gn > 0, gn, 1.0)[..., None], u)
            new, grad = phi(u)
            moved = np.max(new - val)
            val = np.maximum(val, new)
            if moved <= tol * max(float(np.max(val)), 1e-300):
                break
        out = np.maximum(out, val.reshape(n))
    return out


def _lr_norm(c: np.ndarray, r: float) -> float:
    n = len(c)
    return float((np.sum(np.abs(c) ** r) / n) ** (1.0 / r))


def ellipsoid_coefficients(G: BodyField, shapes: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Scalars ``c`` with ``G(x) = c(x) shapes[x] (unit ball)``; raises if no such ``c`` exists."""
    ref = np.linalg.norm(np.einsum("xij,bj->xbi", shapes, G.grid.base), axis=2)
    ratio = G.h_base / ref
    c = ratio.max(axis=1)
    spread = c - ratio.min(axis=1)
    if np.any(spread > rtol * np.maximum(c, 1e-300)):
        x = int(np.argmax(spread))
        raise ExtrapolationError(
            f"body field is not ellipsoid-valued with respect to W^(-1/r) (cell {x}, spread {spread[x]:.3e})"
        )
    return c


def rdf_iterate(
    G: BodyField,
    W: PiecewiseWeight,
    q: float,
    profile: ExtrapolationProfile,
    k_max: int = 40,
    probes: int = 32,
    seed: int = 0,
    starts: int = 8,
) -> RdfResult:
    """Truncated ``SG = sum_{k <= k_max} P^k G / (2B)^k`` for ``P H = N(M(Sigma H))``.

    With ``r = r(q)``, ``V = W^{s(q)'}`` and ``Sigma = W^{(1 - s(q)')/r}``,
    ``N H(x) = |V(x)^{1/r} H(x)| W(x)^{-1/r} (unit ball)``. Inputs that are
    ellipsoid-valued with respect to ``W^{-1/r}`` stay so, and ``P`` acts
    on their scalar profile ``c`` by
    ``c -> max_Q |V(x)^{1/r} avg_Q c(y) V(y)^{-1/r} (unit ball)|``.

    ``B`` is twice the largest measured ratio ``||P H|| / ||H||`` over
    ``probes`` seeded positive profiles and the iterates. The ``L^r_K(W)``
    norm of ``c W^{-1/r} (unit ball)`` is the ``L^r`` norm of ``c``.
    """
    if G.n_cells > MAX_RDF_CELLS:
        raise ExtrapolationError(f"grid of {G.n_cells} cells exceeds {MAX_RDF_CELLS}")
    if W.dim > 2:
        raise ExtrapolationError("the iteration demo supports d <= 2")
    if W.n_cells != G.n_cells or np.any(W.levels != G.level):
        raise ExtrapolationError("weight and body field must share the uniform partition")
    if k_max < 1:
        raise ExtrapolationError("k_max must be >= 1")
    r = profile.r(q)
    sp = profile.s_prime(q)
    shapes = power_stack(W.values, -1.0 / r)  # W^{-1/r}
    c0 = ellipsoid_coefficients(G, shapes)
    A = power_stack(W.values, sp / r)  # V^{1/r}
    Binv = power_stack(W.values, -sp / r)  # V^{-1/r}
    d = W.dim
    grid_starts = DirectionGrid(d, count=4 * max(starts, 1), seed=seed).base if d > 1 else np.ones((1, 1))

    def P(c: np.ndarray) -> np.ndarray:
        return _image_radius(c, Binv, A, grid_starts)

    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(probes):
        c = np.exp(rng.standard_normal(G.n_cells))
        ratios.append(_lr_norm(P(c), r) / _lr_norm(c, r))
    coeffs = [c0]
    for _ in range(k_max + 1):
        coeffs.append(P(coeffs[-1]))
    norms = [_lr_norm(c, r) for c in coeffs]
    if not all(math.isfinite(v) for v in norms):
        raise ExtrapolationError("iterates overflowed; operator-norm estimate diverged")
    for k in range(1, len(norms)):
        if norms[k - 1] > 0:
            ratios.append(norms[k] / norms[k - 1])
    B = 2.0 * max(ratios)
    if not math.isfinite(B) or B <= 0:
        raise ExtrapolationError(f"invalid operator-norm estimate {B}")

    weights = (2.0 * B) ** -np.arange(k_max + 1, dtype=float)
    C = np.array(coeffs)
    partial = np.cumsum(weights[:, None] * C[: k_max + 1], axis=0)
    sigma = partial[-1]
    tail = C[k_max + 1] / (2.0 * B) ** k_max  # P^{k_max+1} G / (2B)^{k_max}
    PSG = P(sigma)

    ref = np.linalg.norm(np.einsum("xij,bj->xbi", shapes, G.grid.base), axis=2)
    hG = G.h_base
    hSG = sigma[:, None] * ref
    hP = PSG[:, None] * ref
    htail = tail[:, None] * ref
    scale = float(np.max(hSG)) if hSG.size else 1.0
    tol = 1e-6 * scale
    normSG = _lr_norm(sigma, r)
    checks = {
        "contains_G": bool(np.all(hG <= hSG + tol)),
        "contains_G_worst": float(np.max(hG - hSG)),
        "norm_SG": normSG,
        "norm_G": norms[0],
        "norm_bound": bool(normSG <= (2.0 + 2.0 ** (-k_max + 2)) * norms[0]),
        "norm_ratio": normSG / norms[0] if norms[0] > 0 else 0.0,
        "a1_type": bool(np.all(hP <= 2.0 * B * hSG + htail + tol)),
        "a1_type_worst": float(np.max(hP - 2.0 * B * hSG - htail)),
        # the series of scalar profiles is itself a scalar profile
        "ellipsoid_valued": bool(np.all(np.isfinite(sigma)) and np.all(sigma >= 0)),
        "B": B,
        "r": r,
    }
    trace = []
    for k in range(k_max + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            worst = float(np.max(np.where(partial[k] > 0, (C[k + 1] / (2.0 * B) ** k) / partial[k], 0.0)))
        trace.append({"k": k, "norm_PkG": norms[k], "cumulative_norm": _lr_norm(partial[k], r), "worst_containment_slack": worst})
    SG = BodyField.from_base(G.grid, G.level, hSG, sigma[:, None, None] * shapes)
    return RdfResult(SG, sigma, C, B, r, checks, trace)


def scalar_rdf_oracle(
    w: np.ndarray, g: np.ndarray, r: float, s_prime: float, B: float, k_max: int
) -> np.ndarray:
    """Direct scalar iteration on ``2^L`` cells; returns the scalar profile of ``SG``.

    ``P c(x) = v(x)^{1/r} max_{Q dyadic containing x} avg_Q c v^{-1/r}`` with ``v = w^{s'}``.
    """
    w = [float(x) for x in w]
    n = len(w)
    level = int(round(math.log2(n)))
    v = [x**s_prime for x in w]

    def P(c: list[float]) -> list[float]:
        out = []
        for x in range(n):
            best = 0.0
            for j in range(level + 1):
                size = n >> j
                start = (x // size) * size
                avg = sum(c[y] * v[y] ** (-1.0 / r) for y in range(start, start + size)) / size
                best = max(best, avg)
            out.append(v[x] ** (1.0 / r) * best)
        return out

    term = [float(x) for x in g]
    total = list(term)
    for k in range(1, k_max + 1):
        term = P(term)
        total = [a + b / (2.0 * B) ** k for a, b in zip(total, term)]
    return np.array(total)
