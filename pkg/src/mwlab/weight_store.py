"""Piecewise-constant matrix weights on dyadic partitions.

A weight is a partition of its domain (``[0, 1)`` or a window
``[-2^a, 2^a)``) into dyadic cells of possibly different levels, with one
Hermitian positive-definite matrix per cell. Every integral of a weight is a
finite sum over cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .hermitian_core import PDMatrix, converse_pair, power_stack, _hermitian_part, _checked_eigh


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    kind: str = "unit"  # "unit" -> [0, 1); "line" -> [-2^a, 2^a)
    window_exp: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("unit", "line"):
            raise WeightError(f"unknown domain kind {self.kind!r}")
        if self.kind == "line" and self.window_exp < 0:
            raise WeightError("window exponent must be >= 0")

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "unit":
            return 0.0, 1.0
        r = float(2**self.window_exp)
        return -r, r


def tile_cells(domain: Domain, levels: np.ndarray, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sort dyadic cells left to right and check that they tile ``domain``.

    Returns the sorting permutation and the sorted left and right endpoints.
    """
    lv = np.asarray(levels, dtype=np.int64)
    ix = np.asarray(indices, dtype=np.int64)
    order = np.lexsort((-lv, ix * 2.0 ** (-lv)))
    lv, ix = lv[order], ix[order]
    left = ix * np.ldexp(1.0, -lv)
    right = (ix + 1) * np.ldexp(1.0, -lv)
    lo, hi = domain.bounds
    if len(lv) == 0 or left[0] != lo or right[-1] != hi or np.any(right[:-1] != left[1:]):
        raise WeightError("cells do not tile the domain")
    return order, left, right


@dataclass(frozen=True, eq=False)
class PiecewiseWeight:
    """Matrix weight constant on each cell ``[idx 2^-lvl, (idx+1) 2^-lvl)``.

    Cells are stored sorted left to right and must tile the domain.
    """

    domain: Domain
    levels: np.ndarray
    indices: np.ndarray
    values: np.ndarray = field(repr=False)
    validate: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        lv = np.asarray(self.levels, dtype=np.int64)
        ix = np.asarray(self.indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 3 or vals.shape[1] != vals.shape[2] or len(vals) != len(lv) or len(lv) != len(ix):
            raise WeightError(f"inconsistent cell arrays: levels {lv.shape}, indices {ix.shape}, values {vals.shape}")
        order, left, right = tile_cells(self.domain, lv, ix)
        lv, ix, vals = lv[order], ix[order], vals[order]
        if self.validate:
            _checked_eigh(_hermitian_part(vals))
            vals = _hermitian_part(vals)
        for a in (lv, ix, vals, left, right):
            a.setflags(write=False)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "indices", ix)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_left", left)
        object.__setattr__(self, "_right", right)

    # -- construction helpers -------------------------------------------------
    @classmethod
    def uniform(cls, values: np.ndarray, level: int, domain: Domain = Domain()) -> "PiecewiseWeight":
        vals = np.asarray(values, dtype=complex)
        lo, _ = domain.bounds
        first = int(round(lo * 2**level))
        n = len(vals)
        return cls(domain, np.full(n, level), first + np.arange(n), vals)

    @classmethod
    def constant(cls, matrix: np.ndarray, level: int = 0, domain: Domain = Domain()) -> "PiecewiseWeight":
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        lo, hi = domain.bounds
        n = int(round((hi - lo) * 2**level))
        return cls.uniform(np.broadcast_to(m, (n,) + m.shape).copy(), level, domain)

    @classmethod
    def identity(cls, d: int, level: int = 0, domain: Domain = Domain()) -> "PiecewiseWeight":
        return cls.constant(np.eye(d), level, domain)

    # -- geometry --------------------------------------------------------------
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
        """Matrix ``|[a_j, b_j) cap cell_u|`` of shape ``(len(a), n_cells)``."""
        a = np.atleast_1d(np.asarray(a, dtype=float))[:, None]
        b = np.atleast_1d(np.asarray(b, dtype=float))[:, None]
        return np.clip(np.minimum(b, self.right) - np.maximum(a, self.left), 0.0, None)

    def cell_at(self, x: float) -> int:
        j = int(np.searchsorted(self.right, x, side="right"))
        if j >= self.n_cells or x < self.left[0]:
            raise WeightError(f"point {x} outside the domain")
        return j

    def average(self, a: float, b: float) -> np.ndarray:
        """``(1/|I|) int_I W`` for ``I = [a, b)``."""
        w = self.overlaps(a, b)[0]
        return np.tensordot(w, self.values, axes=1) / (b - a)

    def refine(self, level: int) -> "PiecewiseWeight":
        """Same weight on the uniform partition at ``level`` (must not coarsen)."""
        if level < self.resolution:
            raise WeightError("refinement level below current resolution")
        reps = np.left_shift(1, level - self.levels)
        vals = np.repeat(self.values, reps, axis=0)
        return PiecewiseWeight.uniform(vals, level, self.domain)

    def with_values(self, values: np.ndarray, validate: bool = True) -> "PiecewiseWeight":
        return PiecewiseWeight(self.domain, self.levels, self.indices, values, validate)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PiecewiseWeight):
            return NotImplemented
        return (
            self.domain == other.domain
            and np.array_equal(self.levels, other.levels)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    # -- persistence -----------------------------------------------------------
    def to_json(self) -> dict:
        uniform = bool(np.all(self.levels == self.levels[0]))
        cells = []
        for lv, ix, m in zip(self.levels, self.indices, self.values):
            cell: dict = {"index": int(ix)}
            if not uniform:
                cell["level"] = int(lv)
            cell["matrix"] = [[repr(float(z.real)), repr(float(z.imag))] for z in m.ravel()]
            cells.append(cell)
        return {
            "dim": self.dim,
            "domain": {"kind": self.domain.kind, "window_exp": self.domain.window_exp},
            "level": int(self.resolution),
            "cells": cells,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def from_json(cls, obj: dict) -> "PiecewiseWeight":
        try:
            d = int(obj["dim"])
            dom = Domain(str(obj["domain"]["kind"]), int(obj["domain"].get("window_exp", 0)))
            level = int(obj["level"])
            cells = obj["cells"]
        except (KeyError, TypeError, ValueError) as exc:
            raise WeightError(f"malformed weight header: {exc}") from exc
        lv, ix, vals = [], [], []
        for pos, cell in enumerate(cells):
            try:
                entries = cell["matrix"]
                if len(entries) != d * d:
                    raise WeightError(
                        f"cell {pos} (index {cell.get('index')}): expected {d * d} entries, got {len(entries)}"
                    )
                m = np.array([complex(float(re), float(im)) for re, im in entries]).reshape(d, d)
                lv.append(int(cell.get("level", level)))
                ix.append(int(cell["index"]))
            except WeightError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise WeightError(f"cell {pos}: malformed entry ({exc})") from exc
            vals.append(m)
        if not vals:
            raise WeightError("weight has no cells")
        return cls(dom, np.array(lv), np.array(ix), np.array(vals))

    @classmethod
    def load(cls, path: str | Path) -> "PiecewiseWeight":
        return cls.from_json(json.loads(Path(path).read_text()))


def cellwise_power(W: PiecewiseWeight, s: float) -> PiecewiseWeight:
    """Apply ``A -> A^s`` on every cell."""
    if s == 1:
        return W
    return W.with_values(power_stack(W.values, s), validate=False)


def counterexample_weight(p1: float, q1: float, depth: int) -> PiecewiseWeight:
    """Weight on ``[0, 1)`` built from the family one of :func:`converse_pair`.

    On ``J_n = [2^-(n+1), 2^-n)`` the left half carries ``A_{n+1} = C_{n+1}^{-q1/2}``
    and the right half ``B_{n+1} = D_{n+1}^{q1/2}`` for ``n < depth``; the
    residual ``[0, 2^-depth)`` carries ``A_{depth+1}``. The values depend on
    ``q1`` only; ``p1`` is validated for the caller.
    """
    if not (1 < p1 <= q1 < np.inf):
        raise WeightError(f"need 1 < p1 <= q1 < inf, got p1={p1}, q1={q1}")
    if not 0 <= depth <= 40:
        raise WeightError(f"depth must lie in 0..40, got {depth}")
    lv, ix, vals = [depth], [0], []

    def pair(n: int) -> tuple[np.ndarray, np.ndarray]:
        c, dm = converse_pair(n, "one")
        return power_stack(c.entries, -q1 / 2), power_stack(dm.entries, q1 / 2)

    vals.append(pair(depth + 1)[0])
    for n in range(depth):
        a, b = pair(n + 1)
        lv += [n + 2, n + 2]
        ix += [2, 3]
        vals += [a, b]
    return PiecewiseWeight(Domain("unit"), np.array(lv), np.array(ix), np.array(vals))


def counterexample_blocks(q1: float, n: int) -> tuple[PDMatrix, PDMatrix]:
    """``(A_n, B_n)`` used by :func:`counterexample_weight`."""
    c, dm = converse_pair(n, "one")
    return PDMatrix(power_stack(c.entries, -q1 / 2)), PDMatrix(power_stack(dm.entries, q1 / 2))


def extend_to_line(w: PiecewiseWeight, window_exp: int) -> PiecewiseWeight:
    """Extend a weight on ``[0, 1)`` to ``[-2^a, 2^a)``.

    On ``[k, k+1)`` the value is ``w(x - k)`` for even ``k`` and
    ``w(k + 1 - x)`` for odd ``k``.
    """
    if w.domain.kind != "unit":
        raise WeightError("extension needs a weight on [0, 1)")
    if window_exp < 0:
        raise WeightError("window exponent must be >= 0")
    r = 2**window_exp
    lv, ix, vals = [], [], []
    rev = slice(None, None, -1)
    for k in range(-r, r):
        shift = np.left_shift(np.int64(1), w.levels) * k
        if k % 2 == 0:
            lv.append(w.levels)
            ix.append(w.indices + shift)
            vals.append(w.values)
        else:
            lv.append(w.levels[rev])
            ix.append((np.left_shift(np.int64(1), w.levels) * (k + 1) - w.indices - 1)[rev])
            vals.append(w.values[rev])
    return PiecewiseWeight(
        Domain("line", window_exp), np.concatenate(lv), np.concatenate(ix), np.concatenate(vals), validate=False
    )


def random_hermitian(rng: np.random.Generator, d: int, n: int, spread: float) -> np.ndarray:
    g = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    return spread * 0.5 * (g + np.conj(np.swapaxes(g, 1, 2))) / np.sqrt(2.0)


def random_weight(
    d: int, resolution: int, spread: float, seed: int = 0, domain: Domain = Domain()
) -> PiecewiseWeight:
    """Cell values ``exp(H)`` with ``H`` random Hermitian scaled by ``spread``."""
    if spread < 0:
        raise WeightError("spread must be nonnegative")
    lo, hi = domain.bounds
    n = int(round((hi - lo) * 2**resolution))
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, d, n, spread)
    lam, vec = np.linalg.eigh(h)
    vals = (vec * np.exp(lam)[:, None, :]) @ np.conj(np.swapaxes(vec, 1, 2))
    if spread == 0:
        vals = np.broadcast_to(np.eye(d, dtype=complex), (n, d, d)).copy()
    return PiecewiseWeight.uniform(vals, resolution, domain)


def scalar_weight(values: Sequence[float], level: int | None = None, domain: Domain = Domain()) -> PiecewiseWeight:
    """``d = 1`` weight from a list of positive cell values (uniform level)."""
    v = np.asarray(values, dtype=float)
    if level is None:
        level = int(np.log2(len(v)))
        if 2**level != len(v):
            raise WeightError("number of values must be a power of two")
    return PiecewiseWeight.uniform(v.reshape(-1, 1, 1), level, domain)


def cells_from(items: Iterable[tuple[int, int, np.ndarray]], domain: Domain = Domain()) -> PiecewiseWeight:
    lv, ix, vals = zip(*items)
    return PiecewiseWeight(domain, np.array(lv), np.array(ix), np.array([np.atleast_2d(v) for v in vals]))
