"""Pure NumPy implementation of the hot loops (fallback backend)."""

from __future__ import annotations

import numpy as np


def mvee_steps(
    X: np.ndarray,
    u: np.ndarray,
    sinv: np.ndarray,
    g: np.ndarray,
    max_steps: int,
    tol: float,
) -> tuple[int, bool]:
    """Run up to ``max_steps`` add/away iterations of the complex MVEE update.

    ``X`` holds the points as rows, ``u`` the design weights, ``sinv`` the
    inverse of ``sum u_i x_i x_i^*`` and ``g`` the leverages
    ``x_i^* sinv x_i``. All three state arrays are updated in place.
    Returns the number of steps taken and whether ``max g <= d (1 + tol)``.
    """
    n, d = X.shape
    dd = float(d)
    for step in range(max_steps):
        jp = int(np.argmax(g))
        gp = g[jp]
        eps_plus = gp / dd - 1.0
        if eps_plus <= tol:
            return step, True
        active = u > 0.0
        gm_masked = np.where(active, g, np.inf)
        jm = int(np.argmin(gm_masked))
        gm = g[jm]
        eps_minus = 1.0 - gm / dd
        if eps_plus >= eps_minus:
            j, gj = jp, gp
            beta = (gj - dd) / (dd * (gj - 1.0))
        else:
            j, gj = jm, gm
            floor = -u[j] / (1.0 - u[j])
            if gj <= 1.0:
                beta = floor
            else:
                beta = max((gj - dd) / (dd * (gj - 1.0)), floor)
        x = X[j]
        w = sinv @ x
        coef = (beta / (1.0 - beta)) / (1.0 + beta * gj / (1.0 - beta))
        sinv -= coef * np.outer(w, np.conj(w))
        sinv /= 1.0 - beta
        y = X.conj() @ w
        g -= coef * (y.real**2 + y.imag**2)
        g /= 1.0 - beta
        u *= 1.0 - beta
        u[j] += beta
        if u[j] < 0.0:
            u[j] = 0.0
    return max_steps, bool(np.max(g) / dd - 1.0 <= tol)
