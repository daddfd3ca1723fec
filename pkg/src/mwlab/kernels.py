"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the NumPy
fallback. Setting ``MWLAB_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import math
import os
from types import ModuleType

import numpy as np

from . import _kernels_py

_ext: ModuleType | None
try:
    from . import _kernels_ext as _ext  # type: ignore[attr-defined,no-redef]
except ImportError:  # pragma: no cover - depends on build
    _ext = None

HAVE_EXTENSION = _ext is not None


def _pick() -> str:
    if os.environ.get("MWLAB_PURE_PYTHON", "") not in ("", "0"):
        return "python"
    return "cython" if HAVE_EXTENSION else "python"


BACKEND = _pick()


def available_backends() -> list[str]:
    return ["python", "cython"] if HAVE_EXTENSION else ["python"]


def _module(backend: str | None) -> ModuleType:
    name = backend or BACKEND
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _ext is None:
            raise RuntimeError("compiled extension is not built")
        return _ext
    raise ValueError(f"unknown backend {name!r}")


class ConvergenceError(RuntimeError):
    """The ellipsoid iteration hit its iteration cap before the tolerance."""


def _logdet(sigma: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(sigma)
    return float(val) if sign.real > 0 else -np.inf


def _barrier_polish(X: np.ndarray, u0: np.ndarray, tol: float) -> np.ndarray:
    """Interior-point solve of ``max log det sum u_i x_i x_i^*`` over the simplex.

    Newton steps on ``log det Sigma(u) + mu sum log u_i`` with ``mu`` shrinking
    geometrically; at the end ``g_i <= d + m mu`` for every point, so
    ``mu`` is driven below ``tol d / m``.
    """
    m, d = X.shape
    u = 0.9 * u0 / u0.sum() + 0.1 / m
    mu = 1e-2 / m
    mu_end = 0.1 * tol * d / m

    while True:
        for _ in range(80):
            sigma = (X.T * u) @ X.conj()
            G = X.conj() @ np.linalg.inv(sigma) @ X.T
            grad = np.real(np.diag(G)) + mu / u
            hess = -np.abs(G) ** 2 - np.diag(mu / u**2)
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = hess
            kkt[:m, m] = 1.0
            kkt[m, :m] = 1.0
            step = np.linalg.solve(kkt, np.concatenate([-grad, [0.0]]))[:m]
            dec = max(float(-step @ hess @ step), 0.0)
            # damped Newton step for a self-concordant barrier
            t = 1.0 if dec < 0.25 else 1.0 / (1.0 + math.sqrt(dec))
            neg = step < 0
            if np.any(neg):
                t = min(t, 0.99 * float(np.min(-u[neg] / step[neg])))
            u = u + t * step
            # intermediate stages only need rough centring
            if dec < (1e-20 if mu <= mu_end else 1e-2):
                break
        if mu <= mu_end:
            return u / u.sum()
        mu = max(mu * 0.05, mu_end)


def mvee_circled(
    X: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    backend: str | None = None,
    refresh: int = 500,
    u0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Minimum-volume origin-centred ellipsoid containing ``{c x_i : |c| = 1}``.

    Coordinate (add/away) steps run in the selected backend in chunks of
    ``refresh``; between chunks the state is recomputed from scratch and an
    interior-point pass over the candidate support (points with leverage
    near ``d``) settles degenerate optima that coordinate steps approach
    only slowly. Violators found afterwards join the candidates.

    ``u0`` warm-starts the weights (it is mixed with a little uniform mass).

    Returns ``(M, u, g_max, iterations)`` where the ellipsoid is
    ``{z : z^* M z <= 1}`` and ``M = (sum u_i x_i x_i^*)^{-1} / g_max``.
    Every point satisfies ``x_i^* M x_i <= 1`` up to rounding, and
    ``g_max <= d (1 + tol)`` on return.
    """
    X = np.ascontiguousarray(X, dtype=complex)
    n, d = X.shape
    if n == 0:
        raise ValueError("no points")
    kern = _module(backend)
    u = np.full(n, 1.0 / n)
    if u0 is not None:
        w = np.clip(np.asarray(u0, dtype=float), 0.0, None)
        if w.shape == (n,) and w.sum() > 0:
            u = 0.99 * w / w.sum() + 0.01 / n
    done = 0
    cand = np.zeros(n, dtype=bool)
    while True:
        sigma = (X.T * u) @ X.conj()
        if np.min(np.linalg.eigvalsh(0.5 * (sigma + sigma.conj().T))) <= 1e-300:
            raise ValueError("points do not span the space")
        sinv = np.linalg.inv(sigma)
        sinv = np.ascontiguousarray(0.5 * (sinv + sinv.conj().T))
        g = np.ascontiguousarray(np.real(np.einsum("ik,kl,il->i", X.conj(), sinv, X)))
        if not np.all(np.isfinite(g)):
            raise ValueError("points do not span the space")
        gmax = float(np.max(g))
        if gmax / d - 1.0 <= tol:
            break
        if done >= max_iter:
            raise ConvergenceError(
                f"ellipsoid iteration did not reach tolerance {tol} in {max_iter} steps "
                f"(g_max/d - 1 = {gmax / d - 1:.3e})"
            )
        if done > 0:
            # final phase: interior-point solve on the points that can matter
            cand |= (u > 0) | (g >= d * (1.0 - 0.01))
            idx = np.flatnonzero(cand)
            if len(idx) > 256:
                idx = idx[np.argsort(-g[idx])[:256]]
                cand[:] = False
                cand[idx] = True
            try:
                ui = _barrier_polish(X[idx], u[idx] + 1e-300, tol)
            except np.linalg.LinAlgError:
                ui = None
            if ui is not None:
                trial = np.zeros(n)
                trial[idx] = ui
                if _logdet((X.T * trial) @ X.conj()) >= _logdet(sigma):
                    u = trial
                    done += 1
                    sigma = (X.T * u) @ X.conj()
                    sinv = np.ascontiguousarray(np.linalg.inv(sigma))
                    sinv = np.ascontiguousarray(0.5 * (sinv + sinv.conj().T))
                    g = np.ascontiguousarray(np.real(np.einsum("ik,kl,il->i", X.conj(), sinv, X)))
                    gmax = float(np.max(g))
                    if gmax / d - 1.0 <= tol:
                        break
                    cand |= g > d * (1.0 + tol)
        steps, _ = kern.mvee_steps(X, u, sinv, g, min(refresh, max_iter - done), tol)
        done += int(steps)
        u = np.clip(u, 0.0, None)
        u /= u.sum()
    m = sinv / gmax
    return 0.5 * (m + m.conj().T), u, gmax, done
