"""Matrix Muckenhoupt and reverse Hoelder characteristics on piecewise weights.

Every supremum over "all intervals" is replaced by a maximum over a declared
:class:`IntervalFamily`; the reports carry the family descriptor so a value
is never mistaken for the true supremum. Integrals are exact sums over cell
overlaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .convex_geometry import DirectionGrid, SupportBody, john_ellipsoid
from .dyadic_grid import DyadicInterval
from .hermitian_core import PDMatrix, power_stack, spectral_norm, spectral_norm_stack
from .weight_store import PiecewiseWeight, cellwise_power, counterexample_blocks, counterexample_weight

INF = math.inf
CHUNK = 2048


class CharacteristicError(ValueError):
    pass


def conjugate(p: float) -> float:
    """Hoelder conjugate ``p' = p / (p - 1)`` with ``1' = inf`` and ``inf' = 1``."""
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    if p < 1:
        raise CharacteristicError(f"conjugate exponent needs p >= 1, got {p}")
    return p / (p - 1.0)


# -- interval families ---------------------------------------------------------


@dataclass(frozen=True)
class IntervalFamily:
    """A finite family of half-open intervals.

    kinds
      ``dyadic``: all dyadic intervals inside the domain from the coarsest
      level that fits down to level ``depth``.
      ``windows``: for every level ``m`` in ``levels`` and width ``w`` in
      ``widths``, the intervals ``[j 2^-m, (j + w) 2^-m)`` inside the domain.
      ``explicit``: the listed ``(a, b)`` pairs.
    """

    kind: str
    depth: int = 0
    levels: tuple[int, ...] = ()
    widths: tuple[int, ...] = (1,)
    items: tuple[tuple[float, float], ...] = ()

    @classmethod
    def dyadic(cls, depth: int) -> "IntervalFamily":
        return cls("dyadic", depth=depth)

    @classmethod
    def windows(cls, levels: Sequence[int], widths: Sequence[int] = (1, 2, 3, 4)) -> "IntervalFamily":
        return cls("windows", levels=tuple(int(m) for m in levels), widths=tuple(int(w) for w in widths))

    @classmethod
    def explicit(cls, items: Sequence[tuple[float, float]]) -> "IntervalFamily":
        return cls("explicit", items=tuple((float(a), float(b)) for a, b in items))

    @classmethod
    def of_dyadic(cls, intervals: Sequence[DyadicInterval]) -> "IntervalFamily":
        return cls.explicit([q.bounds() for q in intervals])

    def describe(self) -> dict:
        if self.kind == "dyadic":
            return {"kind": "dyadic", "depth": self.depth}
        if self.kind == "windows":
            return {"kind": "windows", "levels": list(self.levels), "widths": list(self.widths)}
        return {"kind": "explicit", "count": len(self.items)}

    def bounds(self, W: PiecewiseWeight) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = W.domain.bounds
        if self.kind == "dyadic":
            top = -int(round(math.log2(hi - lo))) + (1 if lo < 0 else 0)
            a, b = [], []
            for k in range(top, self.depth + 1):
                step = math.ldexp(1.0, -k)
                j = np.arange(int(round(lo / step)), int(round(hi / step)))
                a.append(j * step)
                b.append((j + 1) * step)
            if not a:
                raise CharacteristicError("empty interval family")
            return np.concatenate(a), np.concatenate(b)
        if self.kind == "windows":
            a, b = [], []
            for m in self.levels:
                step = math.ldexp(1.0, -m)
                n = int(round((hi - lo) / step))
                for w in self.widths:
                    if w < 1 or w > n:
                        continue
                    j = np.arange(n - w + 1)
                    a.append(lo + j * step)
                    b.append(lo + (j + w) * step)
            if not a:
                raise CharacteristicError("empty interval family")
            return np.concatenate(a), np.concatenate(b)
        if self.kind == "explicit":
            if not self.items:
                raise CharacteristicError("empty interval family")
            arr = np.asarray(self.items, dtype=float)
            if np.any(arr[:, 0] < lo) or np.any(arr[:, 1] > hi) or np.any(arr[:, 1] <= arr[:, 0]):
                raise CharacteristicError("family member outside the weight's domain or empty")
            return arr[:, 0].copy(), arr[:, 1].copy()
        raise CharacteristicError(f"unknown family kind {self.kind!r}")


@dataclass
class CharReport:
    """Maximum of a local characteristic over a family (a lower bound for the sup)."""

    characteristic: str
    value: float
    argmax: tuple[float, float]
    family: dict
    values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    intervals: tuple[np.ndarray, np.ndarray] = field(repr=False, default=(np.zeros(0), np.zeros(0)))
    notes: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return float(self.value)

    def summary(self) -> dict:
        return {
            "characteristic": self.characteristic,
            "family": self.family,
            "value": self.value,
            "argmax-interval": list(self.argmax),
            **({"notes": self.notes} if self.notes else {}),
        }


def _report(name: str, vals: np.ndarray, a: np.ndarray, b: np.ndarray, family: IntervalFamily, **notes) -> CharReport:
    j = int(np.argmax(vals))
    return CharReport(name, float(vals[j]), (float(a[j]), float(b[j])), family.describe(), vals, (a, b), dict(notes))


# -- kernels ---------------------------------------------------------------------


def pair_norms(W: PiecewiseWeight, left_exp: float, right_exp: float, power: float) -> np.ndarray:
    """``K[u, v] = |W_u^{left_exp} W_v^{right_exp}|^power`` over all cell pairs."""
    L = power_stack(W.values, left_exp)
    R = power_stack(W.values, right_exp)
    n = W.n_cells
    out = np.empty((n, n))
    step = max(1, CHUNK * 8 // max(n, 1))
    for s in range(0, n, step):
        prod = L[s : s + step, None] @ R[None, :]
        out[s : s + step] = spectral_norm_stack(prod) ** power
    return out


def _double_average(
    W: PiecewiseWeight, K: np.ndarray, a: np.ndarray, b: np.ndarray, inner_power: float
) -> np.ndarray:
    """``avg_I (avg_I K(x, y) dy)^inner_power dx`` for every interval."""
    out = np.empty(len(a))
    for s in range(0, len(a), CHUNK):
        M = W.overlaps(a[s : s + CHUNK], b[s : s + CHUNK])
        size = (b[s : s + CHUNK] - a[s : s + CHUNK])[:, None]
        inner = (M @ K.T) / size
        out[s : s + CHUNK] = np.sum(M * inner**inner_power, axis=1) / size[:, 0]
    return out


def _esssup_average(W: PiecewiseWeight, K: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``max_{x in I} avg_I K(x, y) dy`` for every interval."""
    out = np.empty(len(a))
    for s in range(0, len(a), CHUNK):
        M = W.overlaps(a[s : s + CHUNK], b[s : s + CHUNK])
        size = (b[s : s + CHUNK] - a[s : s + CHUNK])[:, None]
        inner = (M @ K.T) / size
        out[s : s + CHUNK] = np.max(np.where(M > 0, inner, -np.inf), axis=1)
    return out


def _check_pq(p: float, q: float, strict_order: bool) -> None:
    if not (1 < p < INF and 1 < q < INF):
        raise CharacteristicError(f"need 1 < p, q < inf, got p={p}, q={q}")
    if strict_order and p > q:
        raise CharacteristicError(f"need p <= q, got p={p}, q={q}")


# -- characteristics ---------------------------------------------------------------


def apq_local(W: PiecewiseWeight, p: float, q: float, interval: tuple[float, float], strict_order: bool = True) -> float:
    """``avg_I (avg_I |W(x)^{1/q} W(y)^{-1/q}|^{p'} dy)^{q/p'} dx`` on ``I = [a, b)``."""
    _check_pq(p, q, strict_order)
    a, b = interval
    lo, hi = W.domain.bounds
    if not lo <= a < b <= hi:
        raise CharacteristicError(f"interval [{a}, {b}) not inside domain [{lo}, {hi})")
    pp = conjugate(p)
    K = pair_norms(W, 1.0 / q, -1.0 / q, pp)
    return float(_double_average(W, K, np.array([a]), np.array([b]), q / pp)[0])


def apq_characteristic(
    W: PiecewiseWeight, p: float, q: float, family: IntervalFamily, strict_order: bool = True
) -> CharReport:
    """Maximum of :func:`apq_local` over ``family``.

    ``strict_order=False`` admits ``p > q``; the local quantity is still well
    defined, and the report notes that the pair lies outside the usual range.
    """
    _check_pq(p, q, strict_order)
    a, b = family.bounds(W)
    pp = conjugate(p)
    K = pair_norms(W, 1.0 / q, -1.0 / q, pp)
    vals = _double_average(W, K, a, b, q / pp)
    notes = {"p": p, "q": q}
    if p > q:
        notes["outside_p_le_q"] = True
    return _report(f"A_{{{p:g},{q:g}}}", vals, a, b, family, **notes)


def at_infinity_characteristic(W: PiecewiseWeight, t: float, family: IntervalFamily) -> CharReport:
    """``max_I max_{x in I} avg_I |W(x)^{1/t} W(y)^{-1/t}|^t dy``."""
    if not 1 <= t < INF:
        raise CharacteristicError(f"need 1 <= t < inf, got {t}")
    a, b = family.bounds(W)
    K = pair_norms(W, 1.0 / t, -1.0 / t, t)
    vals = _esssup_average(W, K, a, b)
    return _report(f"A_{{{t:g},inf}}", vals, a, b, family, t=t)


def _direction_profiles(W: PiecewiseWeight, t: float, directions: np.ndarray) -> np.ndarray:
    """``w_e(x) = |W(x)^{1/t} e|^t`` as an array ``(n_cells, n_dirs)``."""
    R = power_stack(W.values, 1.0 / t)
    return np.linalg.norm(np.einsum("uij,ej->uei", R, directions), axis=2) ** t


def scalar_rh(values: np.ndarray, M: np.ndarray, size: np.ndarray, s: float) -> np.ndarray:
    """Scalar RH_s ratios for cell values ``(n_cells, m)`` over intervals given by overlaps ``M``."""
    avg = (M @ values) / size[:, None]
    if s == INF:
        top = np.max(np.where((M > 0)[:, :, None], values[None, :, :], -np.inf), axis=1)
        return top / avg
    return ((M @ values**s) / size[:, None]) ** (1.0 / s) / avg


def rh_characteristic(
    W: PiecewiseWeight,
    t: float,
    s: float,
    directions: Optional[DirectionGrid],
    family: IntervalFamily,
) -> CharReport:
    """``sup_e [ |W^{1/t} e|^t ]_{RH_s}`` with ``e`` over the grid's base directions.

    Phases do not change ``|W^{1/t} e|``, so one representative per
    ``i``-orbit suffices. In ``d = 1`` the value is exact for the family.
    """
    if not 1 < t < INF:
        raise CharacteristicError(f"need 1 < t < inf, got {t}")
    if not (1 < s <= INF):
        raise CharacteristicError(f"need 1 < s <= inf, got {s}")
    if W.dim == 1:
        dirs = np.ones((1, 1), dtype=complex)
    else:
        grid = directions or DirectionGrid(W.dim)
        dirs = grid.base
    a, b = family.bounds(W)
    prof = _direction_profiles(W, t, dirs)
    vals = np.empty(len(a))
    arg_e = np.empty(len(a), dtype=int)
    for st in range(0, len(a), CHUNK):
        M = W.overlaps(a[st : st + CHUNK], b[st : st + CHUNK])
        size = b[st : st + CHUNK] - a[st : st + CHUNK]
        r = scalar_rh(prof, M, size, s)
        arg_e[st : st + CHUNK] = np.argmax(r, axis=1)
        vals[st : st + CHUNK] = np.max(r, axis=1)
    rep = _report(f"RH_{{{t:g},{s:g}}}", vals, a, b, family, t=t, s=s, directions=int(len(dirs)))
    rep.notes["sampled_lower_bound"] = W.dim > 1
    return rep


# -- reducing operators ----------------------------------------------------------


@dataclass(frozen=True)
class ReducingOperator:
    matrix: PDMatrix
    exact: bool
    scale: float  # max over grid of rho(e) / |A e| for the John shape A (1 when exact)
    grid: Optional[DirectionGrid] = None


def _rho_oracle(W: PiecewiseWeight, interval: tuple[float, float], p: float):
    a, b = interval
    m = W.overlaps(a, b)[0] / (b - a)
    keep = m > 0
    m = m[keep]
    R = power_stack(W.values[keep], 1.0 / p)
    R2 = R @ R

    def orc(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        V = np.atleast_2d(np.asarray(V, dtype=complex))
        x = np.einsum("uij,ej->uei", R, V)
        nx = np.linalg.norm(x, axis=2)
        rho = (m @ nx**p) ** (1.0 / p)
        wts = m[:, None] * nx ** (p - 2)
        grad = np.einsum("ue,uij,ej->ei", wts, R2, V)
        safe = np.where(rho > 0, rho, 1.0)
        return rho, grad * (safe ** (1.0 - p))[:, None]

    return orc


def rho(W: PiecewiseWeight, interval: tuple[float, float], p: float, V: np.ndarray) -> np.ndarray:
    """The averaging norm ``(avg_I |W^{1/p} e|^p)^{1/p}`` at the rows of ``V``."""
    return _rho_oracle(W, interval, p)(V)[0]


def reducing_operator(
    W: PiecewiseWeight,
    interval: tuple[float, float],
    p: float,
    grid: Optional[DirectionGrid] = None,
    force_john: bool = False,
) -> ReducingOperator:
    """PD matrix ``R`` with ``rho(e) <= |R e| <= sqrt(d) rho(e)``.

    For ``p = 2`` or ``d = 1`` this is ``(avg_I W)^{1/p}`` with equality on the
    left. Otherwise ``rho`` is the support function of the polar of its unit
    ball; the John ellipsoid ``A B`` of that polar body gives
    ``|A e| <= rho(e) <= sqrt(d) |A e|`` on the grid, and ``R = c A`` with
    ``c = max rho / |A e|`` makes the left inequality hold on every grid
    direction.
    """
    if p < 1:
        raise CharacteristicError(f"need p >= 1, got {p}")
    a, b = interval
    if not b > a:
        raise CharacteristicError("empty interval")
    if (p == 2 or W.dim == 1) and not force_john:
        avg = W.average(a, b)
        return ReducingOperator(PDMatrix(power_stack(avg, 1.0 / p)), True, 1.0)
    grid = grid or DirectionGrid(W.dim)
    body = SupportBody.from_oracle(grid, _rho_oracle(W, interval, p))
    E = john_ellipsoid(body)
    A = E.shape.entries
    ratio = body.h / np.linalg.norm(grid.vectors @ A.T, axis=1)
    c = float(np.max(ratio))
    return ReducingOperator(PDMatrix(c * A), False, c, grid)


@dataclass(frozen=True)
class StandardLemmaReport:
    double_average: float
    reducing_side: float
    ratio: float


def standardlemma_check(
    W: PiecewiseWeight,
    V: PiecewiseWeight,
    interval: tuple[float, float],
    a: float,
    b: float,
    grid: Optional[DirectionGrid] = None,
) -> StandardLemmaReport:
    """Compare ``avg_x (avg_y |W(x)^{1/b} V(y)^{1/a}|^a)^{b/a}`` with ``|R_{W,b} R_{V,a}|^b``."""
    if a < 1 or b < 1:
        raise CharacteristicError("need a, b >= 1")
    if W.dim != V.dim:
        raise CharacteristicError("weights of different dimensions")
    x0, x1 = interval
    Lw = power_stack(W.values, 1.0 / b)
    Rv = power_stack(V.values, 1.0 / a)
    mw = W.overlaps(x0, x1)[0] / (x1 - x0)
    mv = V.overlaps(x0, x1)[0] / (x1 - x0)
    K = spectral_norm_stack(Lw[:, None] @ Rv[None, :]) ** a
    inner = K @ mv
    lhs = float(mw @ inner ** (b / a))
    Rw = reducing_operator(W, interval, b, grid).matrix.entries
    Rvv = reducing_operator(V, interval, a, grid).matrix.entries
    rhs = spectral_norm(Rw @ Rvv) ** b
    return StandardLemmaReport(lhs, rhs, lhs / rhs)


# -- comparability, monotonicity, blowup -------------------------------------------


@dataclass
class ComparabilityReport:
    a_t: float
    rh: float
    power_char: float
    exponent: float  # s for part (1), t'/t for part (2)
    lower_ratio: float  # max(A_t, RH)^exponent / power_char
    upper_ratio: float  # power_char / (A_t * RH)^exponent
    family: dict
    part: int


def comparability_sweep(
    W: PiecewiseWeight,
    t: float,
    s: float,
    family: IntervalFamily,
    directions: Optional[DirectionGrid] = None,
) -> ComparabilityReport:
    """Quantities of the ``A_t cap RH_{t,s}`` versus ``W^s in A_{t,st}`` comparison.

    For finite ``s`` the power weight is ``W^s`` measured in ``A_{t,st}``; for
    ``s = inf`` it is ``W^{t'/t}`` measured in ``A_{t',inf}``.
    """
    if not 1 < t < INF:
        raise CharacteristicError(f"need 1 < t < inf, got {t}")
    at = apq_characteristic(W, t, t, family).value
    rh = rh_characteristic(W, t, s, directions, family).value
    if s == INF:
        e = conjugate(t) / t
        pc = at_infinity_characteristic(cellwise_power(W, e), conjugate(t), family).value
        part = 2
    else:
        if not s > 1:
            raise CharacteristicError(f"need s > 1, got {s}")
        e = s
        pc = apq_characteristic(cellwise_power(W, s), t, s * t, family).value
        part = 1
    return ComparabilityReport(
        at, rh, pc, e, max(at, rh) ** e / pc, pc / (at * rh) ** e, family.describe(), part
    )


def solve_q2(p1: float, q1: float, p2: float) -> float:
    """``q2`` from ``q2 / p2' = q1 / p1'``."""
    return q1 * conjugate(p2) / conjugate(p1)


def _check_constraint(p1: float, q1: float, p2: float, q2: float) -> None:
    if abs(q2 / conjugate(p2) - q1 / conjugate(p1)) > 1e-10 * max(1.0, q1 / conjugate(p1)):
        raise CharacteristicError(
            f"exponents violate q2/p2' = q1/p1': {q2 / conjugate(p2):.12g} vs {q1 / conjugate(p1):.12g}"
        )


@dataclass
class MonotonicityReport:
    value_1: float
    value_2: float
    holds: bool
    family: dict


def monotonicity_check(
    W: PiecewiseWeight, p1: float, q1: float, p2: float, q2: float, family: IntervalFamily
) -> MonotonicityReport:
    """Check ``[W]_{A_{p1,q1}} <= [W]_{A_{p2,q2}}`` under ``p1 <= p2`` and the exponent constraint.

    The inequality holds interval by interval, so it is checked per family
    member and the maxima are reported. The constraint forces ``q2 < p2``
    whenever ``p2 > p1 = q1``, so neither pair is required to satisfy ``p <= q``.
    """
    _check_constraint(p1, q1, p2, q2)
    if p1 > p2:
        raise CharacteristicError("need p1 <= p2")
    r1 = apq_characteristic(W, p1, q1, family, strict_order=False)
    r2 = apq_characteristic(W, p2, q2, family, strict_order=False)
    per_interval = bool(np.all(r1.values <= r2.values * (1 + 1e-9)))
    return MonotonicityReport(r1.value, r2.value, per_interval and r1.value <= r2.value * (1 + 1e-9), family.describe())


def monotonicity_check_infinity(W: PiecewiseWeight, s: float, t: float, family: IntervalFamily) -> MonotonicityReport:
    """Check ``[W]_{A_{t,inf}} <= [W]_{A_{s,inf}}`` for ``1 <= s <= t``."""
    if not 1 <= s <= t:
        raise CharacteristicError("need 1 <= s <= t")
    rt = at_infinity_characteristic(W, t, family)
    rs = at_infinity_characteristic(W, s, family)
    holds = bool(np.all(rt.values <= rs.values * (1 + 1e-9)))
    return MonotonicityReport(rt.value, rs.value, holds, family.describe())


@dataclass
class BlowupRow:
    depth: int
    dyadic_char: float
    lower_bound: float
    proof_bound: float  # 2^{-1 - q2/p2'} * lower_bound, implied by the cell pair of J_{depth-1}
    windows_char: float


def blowup_sweep(
    p1: float,
    q1: float,
    p2: float,
    q2: float,
    depths: Sequence[int],
    widths: Sequence[int] = (1, 2, 3, 4, 6, 8),
) -> list[BlowupRow]:
    """Per-depth table for the counterexample weight.

    Columns: the dyadic ``(p2, q2)`` characteristic, the block quantity
    ``|A_{n+1}^{-1/q2} B_{n+1}^{1/q2}|^{q2}`` at ``n = depth - 1``, and the
    ``(p1, q1)`` characteristic over sliding windows at every level of the
    weight. The pair ``(p2, q2)`` may fall outside ``p2 <= q2``; it is then
    evaluated all the same.
    """
    _check_constraint(p1, q1, p2, q2)
    if not p1 < p2:
        raise CharacteristicError("need p1 < p2")
    rows = []
    for depth in depths:
        W = counterexample_weight(p1, q1, depth)
        dy = apq_characteristic(W, p2, q2, IntervalFamily.dyadic(depth + 1), strict_order=False).value
        if depth == 0:
            lb = 1.0
        else:
            A, B = counterexample_blocks(q1, depth)
            lb = spectral_norm(power_stack(A.entries, -1.0 / q2) @ power_stack(B.entries, 1.0 / q2)) ** q2
        pb = 2.0 ** (-1.0 - q2 / conjugate(p2)) * lb if depth > 0 else 1.0
        win = apq_characteristic(W, p1, q1, IntervalFamily.windows(range(depth + 2), widths)).value
        rows.append(BlowupRow(depth, dy, lb, pb, win))
    return rows


def scalar_ar(values: Sequence[float], r: float, intervals: Sequence[tuple[int, int]]) -> float:
    """Brute-force scalar ``[w]_{A_r}`` over index ranges ``[i, j)`` of equal cells."""
    w = np.asarray(values, dtype=float)
    best = 0.0
    for i, j in intervals:
        seg = w[i:j]
        val = np.mean(seg) * np.mean(seg ** (-1.0 / (r - 1.0))) ** (r - 1.0)
        best = max(best, float(val))
    return best
