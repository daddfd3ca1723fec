# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Mirrors ``_kernels_py`` step for step."""

import numpy as np

cdef extern from "complex.h" nogil:
    double creal(double complex)
    double cimag(double complex)
    double complex conj(double complex)


def mvee_steps(double complex[:, ::1] X, double[::1] u, double complex[:, ::1] sinv,
               double[::1] g, Py_ssize_t max_steps, double tol):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef double dd = <double>d
    cdef Py_ssize_t step, i, k, l, j, jp, jm
    cdef double gp, gm, gj, eps_plus, eps_minus, beta, floor, coef, inv, re, im
    cdef double complex acc
    cdef double complex w[8]
    cdef Py_ssize_t taken = max_steps
    cdef bint converged = False
    if d > 8:
        raise ValueError("dimension above 8 is not supported")
    with nogil:
        for step in range(max_steps):
            jp = 0
            gp = g[0]
            jm = -1
            gm = 0.0
            for i in range(n):
                if g[i] > gp:
                    gp = g[i]
                    jp = i
                if u[i] > 0.0 and (jm < 0 or g[i] < gm):
                    gm = g[i]
                    jm = i
            eps_plus = gp / dd - 1.0
            if eps_plus <= tol:
                taken = step
                converged = True
                break
            eps_minus = 1.0 - gm / dd
            if eps_plus >= eps_minus:
                j = jp
                gj = gp
                beta = (gj - dd) / (dd * (gj - 1.0))
            else:
                j = jm
                gj = gm
                floor = -u[j] / (1.0 - u[j])
                if gj <= 1.0:
                    beta = floor
                else:
                    beta = (gj - dd) / (dd * (gj - 1.0))
                    if beta < floor:
                        beta = floor
            for k in range(d):
                acc = 0.0
                for l in range(d):
                    acc = acc + sinv[k, l] * X[j, l]
                w[k] = acc
            coef = (beta / (1.0 - beta)) / (1.0 + beta * gj / (1.0 - beta))
            inv = 1.0 / (1.0 - beta)
            for k in range(d):
                for l in range(d):
                    sinv[k, l] = (sinv[k, l] - coef * w[k] * conj(w[l])) * inv
            for i in range(n):
                acc = 0.0
                for k in range(d):
                    acc = acc + conj(X[i, k]) * w[k]
                re = creal(acc)
                im = cimag(acc)
                g[i] = (g[i] - coef * (re * re + im * im)) * inv
                u[i] = u[i] * (1.0 - beta)
            u[j] = u[j] + beta
            if u[j] < 0.0:
                u[j] = 0.0
    if not converged:
        gp = g[0]
        for i in range(n):
            if g[i] > gp:
                gp = g[i]
        converged = gp / dd - 1.0 <= tol
    return taken, bool(converged)
