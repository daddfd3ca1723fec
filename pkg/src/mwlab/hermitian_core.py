"""Hermitian positive-definite matrix calculus.

Fractional powers through the spectral decomposition, the spectral norm,
checks of the Cordes inequality ``|A^a B^a| <= |AB|^a`` and the two 2x2
matrix families that show the inequality fails outside ``0 <= a <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

MAX_DIM = 8
HERMITIAN_RTOL = 1e-12
PD_RTOL = 1e-12

Family = Literal["one", "two"]


class MatrixError(ValueError):
    """Raised for non-Hermitian, non-PD or otherwise invalid matrix input."""


def _hermitian_part(a: np.ndarray) -> np.ndarray:
    """Validate Hermitian symmetry of a stack ``(..., d, d)`` and symmetrize."""
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise MatrixError(f"expected square matrices, got shape {a.shape}")
    d = a.shape[-1]
    if d < 1 or d > MAX_DIM:
        raise MatrixError(f"dimension {d} outside supported range 1..{MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise MatrixError("matrix has non-finite entries")
    ah = np.conj(np.swapaxes(a, -1, -2))
    scale = np.max(np.abs(a), axis=(-2, -1), initial=0.0)
    asym = np.max(np.abs(a - ah), axis=(-2, -1), initial=0.0)
    bad = asym > HERMITIAN_RTOL * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        where = np.argwhere(np.atleast_1d(bad))[0]
        raise MatrixError(
            f"matrix is not Hermitian (asymmetry {float(np.atleast_1d(asym)[tuple(where)]):.3e} "
            f"at stack index {tuple(int(i) for i in where)})"
        )
    return 0.5 * (a + ah)


def _checked_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian stack that rejects non-PD members."""
    lam, vec = np.linalg.eigh(a)
    top = lam[..., -1]
    low = lam[..., 0]
    bad = ~(low > PD_RTOL * np.abs(top)) | ~(top > 0)
    if np.any(bad):
        where = np.argwhere(np.atleast_1d(bad))[0]
        lo = float(np.atleast_1d(low)[tuple(where)])
        hi = float(np.atleast_1d(top)[tuple(where)])
        raise MatrixError(
            f"matrix is not positive definite (eigenvalues {lo:.3e} .. {hi:.3e} "
            f"at stack index {tuple(int(i) for i in where)})"
        )
    return lam, vec


@dataclass(frozen=True)
class PDMatrix:
    """Immutable complex Hermitian positive-definite matrix."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = _hermitian_part(self.entries)
        if a.ndim != 2:
            raise MatrixError(f"PDMatrix needs a single 2-d array, got shape {a.shape}")
        _checked_eigh(a)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self) -> str:
        return f"PDMatrix(dim={self.dim}, entries={np.array2string(self.entries, precision=6)})"

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    @classmethod
    def identity(cls, d: int) -> "PDMatrix":
        return cls(np.eye(d, dtype=complex))


MatrixLike = Union[PDMatrix, np.ndarray]


def _arr(a: MatrixLike) -> np.ndarray:
    return a.entries if isinstance(a, PDMatrix) else np.asarray(a, dtype=complex)


def power_stack(stack: np.ndarray, a: float) -> np.ndarray:
    """Fractional power ``A^a`` of every member of a PD stack ``(..., d, d)``."""
    if not math.isfinite(a):
        raise MatrixError(f"exponent must be finite, got {a}")
    h = _hermitian_part(stack)
    lam, vec = _checked_eigh(h)
    if a == 0:
        return np.broadcast_to(np.eye(h.shape[-1], dtype=complex), h.shape).copy()
    out = (vec * lam[..., None, :] ** a) @ np.conj(np.swapaxes(vec, -1, -2))
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def fractional_power(A: MatrixLike, a: float) -> PDMatrix:
    """Return ``A^a`` for a Hermitian positive-definite ``A``.

    Parameters
    ----------
    A : PDMatrix or array_like
        Hermitian positive-definite matrix. Inputs that are Hermitian only up to
        a relative 1e-12 are symmetrized first; larger asymmetry is rejected.
    a : float
        Any finite real exponent.

    Returns
    -------
    PDMatrix
        Same eigenvectors as ``A`` with eigenvalues raised to ``a``.
    """
    return PDMatrix(power_stack(_arr(A), float(a)))


def spectral_norm(A: np.ndarray | PDMatrix) -> float:
    """Largest singular value of a finite square or rectangular matrix."""
    a = _arr(A)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def spectral_norm_stack(stack: np.ndarray) -> np.ndarray:
    """Largest singular value of every matrix in a stack ``(..., m, n)``."""
    stack = np.asarray(stack)
    if stack.shape[-2:] == (1, 1):
        return np.abs(stack[..., 0, 0])
    if stack.shape[-2:] == (2, 2):
        # closed form on the Gram matrix [[g1, z], [conj z, g2]] = M M^*:
        # sigma_max^2 = (g1 + g2)/2 + sqrt(((g1 - g2)/2)^2 + |z|^2), free of cancellation
        a, b, c, d = stack[..., 0, 0], stack[..., 0, 1], stack[..., 1, 0], stack[..., 1, 1]
        g1 = np.abs(a) ** 2 + np.abs(b) ** 2
        g2 = np.abs(c) ** 2 + np.abs(d) ** 2
        z = a * np.conj(c) + b * np.conj(d)
        return np.sqrt(0.5 * (g1 + g2) + np.hypot(0.5 * (g1 - g2), np.abs(z)))
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def trace(A: MatrixLike) -> complex:
    return complex(np.trace(_arr(A)))


@dataclass(frozen=True)
class CordesRecord:
    lhs: float
    rhs: float
    holds: bool


def cordes_check(A: MatrixLike, B: MatrixLike, a: float) -> CordesRecord:
    """Compare ``|A^a B^a|`` with ``|AB|^a`` for ``0 <= a <= 1``."""
    if not 0.0 <= a <= 1.0:
        raise MatrixError(
            f"Cordes exponent must lie in [0, 1], got {a}; outside that range "
            "the inequality can fail (see cordes_gap)"
        )
    pa = power_stack(_arr(A), a)
    pb = power_stack(_arr(B), a)
    lhs = spectral_norm(pa @ pb)
    rhs = spectral_norm(_arr(A) @ _arr(B)) ** a
    return CordesRecord(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs * (1.0 + 1e-9)))


def _check_n(n: float) -> float:
    n = float(n)
    if not math.isfinite(n) or n < 1:
        raise MatrixError(f"family index n must be a real number >= 1, got {n}")
    return n


def converse_pair(n: float, family: Family = "one") -> tuple[PDMatrix, PDMatrix]:
    """The 2x2 pairs ``(C_n, D_n)`` that defeat the converse of Cordes.

    Family one: ``C_n = diag(1, n)`` and ``D_n = [[1, 1/(2 sqrt n)], [1/(2 sqrt n), 1/n]]``.
    Family two: ``C_n = diag(1, L)`` with ``L = n (1 + log n)`` and ``D_n`` the
    rotation by angle ``asin(1/sqrt n)`` of ``diag(1, 1/L)``.

    ``n`` may be any real ``>= 1``; integers recover the original sequences.
    """
    n = _check_n(n)
    if family == "one":
        c = np.diag([1.0, n]).astype(complex)
        off = 0.5 / math.sqrt(n)
        dmat = np.array([[1.0, off], [off, 1.0 / n]], dtype=complex)
    elif family == "two":
        big = n * (1.0 + math.log(n))
        c = np.diag([1.0, big]).astype(complex)
        co, si = math.sqrt(1.0 - 1.0 / n), 1.0 / math.sqrt(n)
        rot = np.array([[co, -si], [si, co]])
        dmat = (rot @ np.diag([1.0, 1.0 / big]) @ rot.T).astype(complex)
    else:
        raise MatrixError(f"unknown family {family!r}; expected 'one' or 'two'")
    return PDMatrix(c), PDMatrix(dmat)


def cordes_gap(n: float, a: float, family: Family = "one") -> float:
    """``tr(C_n^a D_n^a)`` in the regime where it is unbounded or bounded.

    Family one needs ``a > 1`` (the trace grows like ``n^(a-1)`` while
    ``tr(C_n D_n) = 2``). Family two needs ``0 < a < 1``.
    """
    if family == "one" and not a > 1:
        raise MatrixError(
            f"family one needs a > 1, got {a}; for a in [0, 1] the Cordes "
            "inequality bounds the trace and no gap appears"
        )
    if family == "two" and not 0 < a < 1:
        raise MatrixError(f"family two needs 0 < a < 1, got {a}")
    c, d = converse_pair(n, family)
    return float(np.real(np.trace(power_stack(c.entries, a) @ power_stack(d.entries, a))))


appendix_pair = converse_pair
