"""Dyadic intervals, dilations, annuli and sparse collections on the line."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Union

import numpy as np

Number = Union[int, float, Fraction]


class DyadicError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """``[m 2^-k, (m+1) 2^-k)`` for level ``k`` and index ``m``."""

    level: int
    index: int

    def __post_init__(self) -> None:
        if not isinstance(self.level, (int, np.integer)) or not isinstance(self.index, (int, np.integer)):
            raise DyadicError(f"level and index must be integers, got {self.level!r}, {self.index!r}")
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "index", int(self.index))

    @property
    def length(self) -> Fraction:
        return Fraction(1, 2**self.level) if self.level >= 0 else Fraction(2 ** (-self.level))

    @property
    def left(self) -> Fraction:
        return self.index * self.length

    @property
    def right(self) -> Fraction:
        return (self.index + 1) * self.length

    def bounds(self) -> tuple[float, float]:
        return float(self.left), float(self.right)

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.level - 1, self.index >> 1)

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return DyadicInterval(self.level + 1, 2 * self.index), DyadicInterval(self.level + 1, 2 * self.index + 1)

    def ancestor(self, level: int) -> "DyadicInterval":
        if level > self.level:
            raise DyadicError("ancestor level must not exceed own level")
        return DyadicInterval(level, self.index >> (self.level - level))

    def contains(self, other: "DyadicInterval") -> bool:
        return other.level >= self.level and other.ancestor(self.level) == self

    def __str__(self) -> str:
        return f"[{self.left}, {self.right})"


@dataclass(frozen=True, order=True)
class RealInterval:
    """Half-open interval ``[left, right)``."""

    left: Fraction
    right: Fraction

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def as_float(self) -> tuple[float, float]:
        return float(self.left), float(self.right)

    def __str__(self) -> str:
        return f"[{self.left}, {self.right})"


def _frac(x: Number) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def dilate(Q: DyadicInterval, lam: Number) -> RealInterval:
    """The ``lam``-neighbourhood ``[a - (lam-1) l, b + (lam-1) l)`` with ``l = |Q|``."""
    lam_f = _frac(lam)
    if lam_f < 1:
        raise DyadicError(f"dilation factor must be >= 1, got {lam}")
    pad = (lam_f - 1) * Q.length
    return RealInterval(Q.left - pad, Q.right + pad)


def annulus(Q: DyadicInterval, k: int) -> list[RealInterval]:
    """``2Q`` for ``k = 0``; ``2^{k+1}Q`` minus ``2^k Q`` (two pieces) otherwise."""
    if k < 0:
        raise DyadicError(f"annulus index must be >= 0, got {k}")
    outer = dilate(Q, 2 ** (k + 1))
    if k == 0:
        return [outer]
    inner = dilate(Q, 2**k)
    return [RealInterval(outer.left, inner.left), RealInterval(inner.right, outer.right)]


@dataclass(frozen=True)
class SparseCollection:
    """A finite family of dyadic intervals with a sparseness parameter."""

    intervals: tuple[DyadicInterval, ...]
    epsilon: float

    def __post_init__(self) -> None:
        ivs = tuple(sorted(set(_coerce(q) for q in self.intervals)))
        object.__setattr__(self, "intervals", ivs)
        if not 0 < float(self.epsilon) <= 1:
            raise DyadicError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "intervals": [[q.level, q.index] for q in self.intervals]}

    @classmethod
    def from_json(cls, obj: dict) -> "SparseCollection":
        try:
            ivs = [DyadicInterval(int(a), int(b)) for a, b in obj["intervals"]]
            eps = float(obj["epsilon"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DyadicError(f"malformed sparse collection: {exc}") from exc
        return cls(tuple(ivs), eps)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "SparseCollection":
        return cls.from_json(json.loads(Path(path).read_text()))


def _coerce(q) -> DyadicInterval:
    if isinstance(q, DyadicInterval):
        return q
    if isinstance(q, (tuple, list)) and len(q) == 2:
        return DyadicInterval(q[0], q[1])
    raise DyadicError(f"not a dyadic interval: {q!r}")


@dataclass
class SparseCertificate:
    """Outcome of :func:`verify_sparse`.

    ``sets[Q]`` lists the pieces of the disjoint set ``F_Q``; when ``ok`` is
    false, ``failures`` maps each offending interval to the measure it could
    still claim.
    """

    ok: bool
    epsilon: Fraction
    sets: dict[DyadicInterval, list[RealInterval]] = field(default_factory=dict)
    failures: dict[DyadicInterval, Fraction] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok

    def packing(self) -> dict[DyadicInterval, Fraction]:
        return {q: sum((p.length for p in s), Fraction(0)) for q, s in self.sets.items()}


def verify_sparse(family: Iterable, eps: Number) -> SparseCertificate:
    """Exact sparseness decision with explicit disjoint sets.

    Intervals are processed deepest first; each ``Q`` claims exactly
    ``eps |Q|`` of what its descendants left free, taken from the right.
    Claiming no more than needed is optimal, so the procedure succeeds iff
    ``eps * sum_{P in S, P subset Q} |P| <= |Q|`` for every ``Q`` in the
    family, which is necessary for any choice of disjoint sets.
    """
    eps_f = _frac(eps)
    if not 0 < eps_f <= 1:
        raise DyadicError(f"epsilon must lie in (0, 1], got {eps}")
    ivs = sorted(set(_coerce(q) for q in family), key=lambda q: (-q.level, q.index))
    taken_l: list[Fraction] = []
    taken_r: list[Fraction] = []
    cert = SparseCertificate(ok=True, epsilon=eps_f)
    for Q in ivs:
        a, b = Q.left, Q.right
        lo = bisect.bisect_left(taken_l, a)
        hi = bisect.bisect_left(taken_l, b)
        need = eps_f * Q.length
        pieces: list[RealInterval] = []
        cursor = b
        # walk free gaps from the right
        for j in range(hi - 1, lo - 1, -1):
            if need <= 0:
                break
            gap_l = taken_r[j]
            if cursor > gap_l:
                take = min(need, cursor - gap_l)
                pieces.append(RealInterval(cursor - take, cursor))
                need -= take
            cursor = taken_l[j]
        if need > 0 and cursor > a:
            take = min(need, cursor - a)
            pieces.append(RealInterval(cursor - take, cursor))
            need -= take
        if need > 0:
            cert.ok = False
            cert.failures[Q] = eps_f * Q.length - need
        pieces.sort()
        cert.sets[Q] = pieces
        for p in pieces:
            k = bisect.bisect_left(taken_l, p.left)
            taken_l.insert(k, p.left)
            taken_r.insert(k, p.right)
    return cert


def generate_sparse(depth: int, eps: float, seed: int = 0, admit: float = 0.5) -> SparseCollection:
    """Random ``eps``-sparse family of dyadic subintervals of ``[0, 1)``.

    Levels are visited top-down and every candidate consumes one draw in a
    fixed order, so the family for a larger depth extends the one for a
    smaller depth. A candidate is admitted with probability ``admit`` when
    the packing condition stays true for all its admitted ancestors; the
    root is always admitted.
    """
    if depth < 0:
        raise DyadicError("depth must be >= 0")
    if not 0 < eps < 1:
        raise DyadicError(f"generation needs 0 < eps < 1, got {eps}")
    rng = np.random.default_rng(seed)
    eps_f = Fraction(eps)
    mass: dict[DyadicInterval, Fraction] = {}
    chosen: list[DyadicInterval] = []
    for k in range(depth + 1):
        draws = rng.random(2**k)
        for m in range(2**k):
            Q = DyadicInterval(k, m)
            if k > 0 and draws[m] >= admit:
                continue
            anc = [Q.ancestor(j) for j in range(k)]
            anc = [R for R in anc if R in mass]
            if any(eps_f * (mass[R] + Q.length) > R.length for R in anc):
                continue
            for R in anc:
                mass[R] += Q.length
            mass[Q] = Q.length
            chosen.append(Q)
    return SparseCollection(tuple(chosen), float(eps))


def dyadic_family(depth: int, root: DyadicInterval = DyadicInterval(0, 0)) -> list[DyadicInterval]:
    """All dyadic subintervals of ``root`` down to ``depth`` levels below it."""
    out = []
    for k in range(depth + 1):
        base = root.index << k
        out.extend(DyadicInterval(root.level + k, base + m) for m in range(2**k))
    return out


def level_of_length(length: float) -> int:
    k = -math.log2(length)
    if k != int(k):
        raise DyadicError(f"{length} is not a power of two")
    return int(k)
