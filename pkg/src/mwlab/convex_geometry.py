"""Complex-symmetric convex bodies through their support functions.

A body ``K`` in ``C^d`` is stored as the values ``h_K(v) = sup_{k in K} Re(k . v)``
on a fixed direction grid, where ``x . y = sum_j x_j conj(y_j)``. The grid is
a union of orbits ``{v, iv, -v, -iv}`` so that complex symmetry
``h(v) = h(iv)`` holds exactly. Bodies may also carry boundary points
(an argmax for every grid direction) and an oracle that evaluates both at
arbitrary directions; those enable sampled dot-product magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy.stats import norm, qmc

from .hermitian_core import MAX_DIM, PDMatrix, fractional_power, spectral_norm
from .kernels import mvee_circled

# oracle(V) -> (h, points) for directions V of shape (m, d)
SupportOracle = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

ORBIT = np.array([1.0, 1j, -1.0, -1j])


class GeometryError(ValueError):
    pass


class DegenerateBodyError(GeometryError):
    """Body has empty interior on the grid (some support value vanishes)."""


@lru_cache(maxsize=64)
def _grid_vectors(d: int, n_base: int, seed: int) -> np.ndarray:
    sampler = qmc.Halton(2 * d, scramble=True, seed=seed)
    pts = sampler.random(n_base)
    z = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    v = z[:, :d] + 1j * z[:, d:]
    v /= np.linalg.norm(v, axis=1)[:, None]
    full = np.concatenate([c * v for c in ORBIT])
    full.setflags(write=False)
    return full


@dataclass(frozen=True)
class DirectionGrid:
    """Unit directions in ``C^d`` closed under multiplication by ``i``.

    Direction ``j = o * n_base + b`` equals ``i**o`` times base direction ``b``.
    """

    dim: int
    count: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.dim <= MAX_DIM:
            raise GeometryError(f"dimension {self.dim} outside 1..{MAX_DIM}")
        count = self.count or 64 * self.dim * self.dim
        if count % 4 or count < 4:
            raise GeometryError(f"direction count must be a positive multiple of 4, got {count}")
        object.__setattr__(self, "count", count)

    @property
    def n_base(self) -> int:
        return self.count // 4

    @property
    def vectors(self) -> np.ndarray:
        return _grid_vectors(self.dim, self.n_base, self.seed)

    @property
    def base(self) -> np.ndarray:
        return self.vectors[: self.n_base]

    def times_i(self) -> np.ndarray:
        """Index permutation sending direction ``v`` to ``i v``."""
        j = np.arange(self.count)
        return ((j // self.n_base + 1) % 4) * self.n_base + j % self.n_base

    def tile(self, base_values: np.ndarray) -> np.ndarray:
        return np.tile(np.asarray(base_values, dtype=float), 4)

    def tile_points(self, base_points: np.ndarray) -> np.ndarray:
        return np.concatenate([c * base_points for c in ORBIT])


@dataclass(frozen=True, eq=False)
class SupportBody:
    """Support values (and optionally argmax points) of a body on a grid."""

    grid: DirectionGrid
    h: np.ndarray = field(repr=False)
    points: Optional[np.ndarray] = field(default=None, repr=False)
    oracle: Optional[SupportOracle] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        if h.shape != (self.grid.count,):
            raise GeometryError(f"expected {self.grid.count} support values, got shape {h.shape}")
        if not np.all(np.isfinite(h)) or np.any(h < 0):
            raise GeometryError("support values must be finite and nonnegative")
        hb = h.reshape(4, -1)
        if np.any(hb != hb[0]):
            raise GeometryError("support values are not invariant under multiplication by i")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if self.points is not None:
            pts = np.asarray(self.points, dtype=complex)
            if pts.shape != (self.grid.count, self.grid.dim):
                raise GeometryError(f"points must have shape {(self.grid.count, self.grid.dim)}")
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)

    @classmethod
    def from_base(
        cls,
        grid: DirectionGrid,
        h_base: np.ndarray,
        points_base: Optional[np.ndarray] = None,
        oracle: Optional[SupportOracle] = None,
    ) -> "SupportBody":
        pts = None if points_base is None else grid.tile_points(np.asarray(points_base, dtype=complex))
        return cls(grid, grid.tile(h_base), pts, oracle)

    @classmethod
    def from_oracle(cls, grid: DirectionGrid, oracle: SupportOracle) -> "SupportBody":
        h, pts = oracle(grid.base)
        return cls.from_base(grid, h, pts, oracle)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def h_base(self) -> np.ndarray:
        return self.h[: self.grid.n_base]

    def radius(self) -> float:
        """Grid estimate of ``|K| = sup_{k in K} |k|`` (a lower bound)."""
        return float(np.max(self.h)) if self.h.size else 0.0

    def scaled(self, c: float) -> "SupportBody":
        if c < 0:
            raise GeometryError("scale factor must be nonnegative")
        pts = None if self.points is None else c * self.points
        orc = None
        if self.oracle is not None:
            base = self.oracle

            def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
                h, p = base(V)
                return c * h, c * p

        return SupportBody(self.grid, c * self.h, pts, orc)


def zero_body(grid: DirectionGrid) -> SupportBody:
    def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        V = np.atleast_2d(V)
        return np.zeros(len(V)), np.zeros_like(V, dtype=complex)

    return SupportBody.from_oracle(grid, orc)


def ball(grid: DirectionGrid, r: float) -> SupportBody:
    """Closed Euclidean ball of radius ``r``."""
    if r < 0:
        raise GeometryError("radius must be nonnegative")

    def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        V = np.atleast_2d(np.asarray(V, dtype=complex))
        nv = np.linalg.norm(V, axis=1)
        safe = np.where(nv > 0, nv, 1.0)
        return r * nv, r * V / safe[:, None]

    return SupportBody.from_oracle(grid, orc)


def circled_hull(grid: DirectionGrid, points: np.ndarray) -> SupportBody:
    """Convex hull of ``{c x_i : |c| = 1}``, so ``h(v) = max_i |x_i^* v|``."""
    X = np.atleast_2d(np.asarray(points, dtype=complex))
    if X.ndim != 2 or X.shape[1] != grid.dim:
        raise GeometryError(f"points must have shape (m, {grid.dim}), got {X.shape}")

    def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        V = np.atleast_2d(np.asarray(V, dtype=complex))
        ip = V @ X.conj().T  # x_i^* v
        k = np.argmax(np.abs(ip), axis=1)
        z = ip[np.arange(len(V)), k]
        h = np.abs(z)
        phase = np.where(h > 0, z / np.where(h > 0, h, 1.0), 1.0)
        return h, X[k] * phase[:, None]

    return SupportBody.from_oracle(grid, orc)


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """The set ``A * (closed unit ball)`` for a Hermitian PD shape ``A``."""

    shape: PDMatrix
    info: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.shape.dim

    @classmethod
    def from_array(cls, a: np.ndarray) -> "Ellipsoid":
        return cls(PDMatrix(np.atleast_2d(np.asarray(a, dtype=complex))))

    def support(self, V: np.ndarray) -> np.ndarray:
        V = np.atleast_2d(np.asarray(V, dtype=complex))
        return np.linalg.norm(V @ self.shape.entries.T, axis=1)

    def oracle(self) -> SupportOracle:
        a = self.shape.entries
        a2 = a @ a

        def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            V = np.atleast_2d(np.asarray(V, dtype=complex))
            av = V @ a.T
            h = np.linalg.norm(av, axis=1)
            safe = np.where(h > 0, h, 1.0)
            return h, (V @ a2.T) / safe[:, None]

        return orc

    def body(self, grid: DirectionGrid) -> SupportBody:
        if grid.dim != self.dim:
            raise GeometryError(f"grid dimension {grid.dim} != ellipsoid dimension {self.dim}")
        return SupportBody.from_oracle(grid, self.oracle())

    def scaled(self, c: float) -> "Ellipsoid":
        return Ellipsoid(PDMatrix(c * self.shape.entries))


def _same_grid(K: SupportBody, L: SupportBody) -> None:
    if K.grid != L.grid:
        raise GeometryError(f"grid mismatch: {K.grid} vs {L.grid}")


def minkowski_sum(K: SupportBody, L: SupportBody) -> SupportBody:
    """``K + L``: support functions and argmax points both add."""
    _same_grid(K, L)
    pts = None
    if K.points is not None and L.points is not None:
        pts = K.points + L.points
    orc = None
    if K.oracle is not None and L.oracle is not None:
        ok, ol = K.oracle, L.oracle

        def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            h1, p1 = ok(V)
            h2, p2 = ol(V)
            return h1 + h2, p1 + p2

    return SupportBody(K.grid, K.h + L.h, pts, orc)


def hull_union(bodies: list[SupportBody]) -> SupportBody:
    """Convex hull of a union: pointwise maximum of support values."""
    if not bodies:
        raise GeometryError("empty list of bodies")
    for b in bodies[1:]:
        _same_grid(bodies[0], b)
    hs = np.stack([b.h for b in bodies])
    arg = np.argmax(hs, axis=0)
    pts = None
    if all(b.points is not None for b in bodies):
        allp = np.stack([b.points for b in bodies])
        pts = allp[arg, np.arange(hs.shape[1])]
    return SupportBody(bodies[0].grid, hs[arg, np.arange(hs.shape[1])], pts)


@dataclass(frozen=True)
class DotMagnitude:
    value: float
    sampled: float
    pairs: int
    refined: bool


def _ascent(
    ok: SupportOracle, ol: SupportOracle, k: np.ndarray, steps: int = 200
) -> float:
    best = 0.0
    for _ in range(steps):
        nk = np.linalg.norm(k)
        if nk == 0:
            return best
        _, lp = ol(k[None, :] / nk)
        l = lp[0]
        nl = np.linalg.norm(l)
        if nl == 0:
            return best
        _, kp = ok(l[None, :] / nl)
        k = kp[0]
        val = float(abs(np.vdot(l, k)))
        if val <= best * (1 + 1e-14):
            best = max(best, val)
            break
        best = val
    return best


def dot_magnitude_detail(
    K: Union[SupportBody, Ellipsoid], L: Union[SupportBody, Ellipsoid], refine: bool = True
) -> DotMagnitude:
    """Radius of the disk ``K . L = {k . l}`` with sampling diagnostics.

    Ellipsoid pairs use the exact value ``|B A|``. Otherwise the supremum of
    ``|k(u) . l(w)|`` over all pairs of stored boundary points is taken
    (a lower bound), then, when both bodies carry oracles, polished by an
    alternating ascent ``l <- argmax_L(k), k <- argmax_K(l)``, which never
    decreases ``|k . l|`` and stays a lower bound.
    """
    if K.dim != L.dim:
        raise GeometryError(f"dimension mismatch {K.dim} vs {L.dim}")
    if isinstance(K, Ellipsoid) and isinstance(L, Ellipsoid):
        v = spectral_norm(L.shape.entries @ K.shape.entries)
        return DotMagnitude(v, v, 0, False)
    if isinstance(K, Ellipsoid):
        K = K.body(L.grid)  # type: ignore[union-attr]
    if isinstance(L, Ellipsoid):
        L = L.body(K.grid)
    assert isinstance(K, SupportBody) and isinstance(L, SupportBody)
    if K.points is None or L.points is None:
        raise GeometryError("sampled dot magnitude needs boundary points on both bodies")
    kb = K.points[: K.grid.n_base]
    lb = L.points[: L.grid.n_base]
    # phases are irrelevant to |k . l|, so the base orbit representatives suffice
    mags = np.abs(kb @ lb.conj().T)
    sampled = float(mags.max()) if mags.size else 0.0
    value = sampled
    did = False
    if refine and K.oracle is not None and L.oracle is not None and sampled > 0:
        i, j = np.unravel_index(int(np.argmax(mags)), mags.shape)
        value = max(value, _ascent(K.oracle, L.oracle, kb[i]), _ascent(L.oracle, K.oracle, lb[j]))
        did = True
    return DotMagnitude(value, sampled, int(K.grid.count * L.grid.count), did)


def dot_magnitude(K: Union[SupportBody, Ellipsoid], L: Union[SupportBody, Ellipsoid]) -> float:
    """``|K . L|``; exact for ellipsoids, a refined sampled lower bound otherwise."""
    return dot_magnitude_detail(K, L).value


@dataclass(frozen=True)
class SandwichReport:
    inward_excess: float  # max over grid of h_E/h_K - 1 (<= 0 means E inside K)
    outward_ratio: float  # max over grid of h_K/h_E
    factor: float
    inward_tol: float
    passed: bool


def verify_sandwich(
    K: SupportBody, E: Ellipsoid, factor: float, inward_tol: float = 1e-6
) -> SandwichReport:
    """Check ``h_E <= h_K`` and ``h_K <= factor * h_E`` on every grid direction."""
    hE = E.support(K.grid.vectors)
    hK = K.h
    with np.errstate(divide="ignore", invalid="ignore"):
        inward = np.where(hK > 0, hE / hK - 1.0, np.where(hE > 0, np.inf, 0.0))
        outward = np.where(hE > 0, hK / hE, np.where(hK > 0, np.inf, 1.0))
    iw = float(np.max(inward))
    ow = float(np.max(outward))
    passed = iw <= inward_tol and ow <= factor * (1.0 + 1e-12)
    return SandwichReport(iw, ow, float(factor), inward_tol, bool(passed))


def john_ellipsoid(
    K: SupportBody,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    backend: str | None = None,
    adapt_rounds: int = 6,
    adapt_tol: float = 1e-9,
) -> Ellipsoid:
    """Maximal-volume ellipsoid inscribed in the grid hull of ``K``.

    The points ``v / h_K(v)`` lie on the boundary of the polar body. Their
    circled minimum-volume enclosing ellipsoid ``{z^* M z <= 1}`` is polar to
    ``M^{1/2} (unit ball)``, which is returned. By construction
    ``h_E <= h_K`` on the grid, and ``h_K <= sqrt(g_max) h_E`` with
    ``g_max <= d (1 + tol)``.

    When ``K`` has an oracle, up to ``adapt_rounds`` extra passes add the
    grid directions pulled back through the current ellipsoid, so elongated
    bodies are sampled evenly in their own frame; passes stop once the
    shape moves by less than ``adapt_tol`` (relative). The grid points are kept,
    so the containment guarantee on the grid is unaffected.
    Diagnostics land in ``E.info``.
    """
    hb = K.h_base
    top = float(np.max(hb)) if hb.size else 0.0
    if top <= 0 or np.min(hb) <= 1e-12 * top:
        raise DegenerateBodyError(
            "body has (numerically) empty interior; project onto its span first"
        )
    d = K.dim
    iters = 0
    if d == 1:
        r = float(np.min(hb))
        E = Ellipsoid.from_array(np.array([[r]]))
        gmax = 1.0
    else:
        X = K.grid.base / hb[:, None]
        M, u, gmax, iters = mvee_circled(X, tol=tol, max_iter=max_iter, backend=backend)
        nb = K.grid.n_base
        if K.oracle is not None:
            for _ in range(adapt_rounds):
                pull = K.grid.base @ np.linalg.inv(fractional_power(M, 0.5).entries).T
                pull /= np.linalg.norm(pull, axis=1)[:, None]
                hp, _ = K.oracle(pull)
                if np.min(hp) <= 1e-12 * top:
                    break
                # warm start: keep the weights of the grid points, seed the new ones evenly
                warm = np.concatenate([u[:nb], np.full(len(pull), 1.0 / len(pull))])
                X = np.concatenate([X[:nb], pull / hp[:, None]])
                prev = M
                M, u, gmax, more = mvee_circled(X, tol=tol, max_iter=max_iter, backend=backend, u0=warm)
                iters += more
                if np.linalg.norm(M - prev) <= adapt_tol * np.linalg.norm(M):
                    break
        E = Ellipsoid(fractional_power(M, 0.5))
    rep = verify_sandwich(K, E, math.sqrt(d) * (1.0 + 1e-9) * math.sqrt(1.0 + tol))
    E.info.update(
        tol_in=max(rep.inward_excess, 0.0),
        tol_out=max(rep.outward_ratio / math.sqrt(d) - 1.0, 0.0),
        outward_ratio=rep.outward_ratio,
        g_max=gmax,
        iterations=iters,
    )
    return E
