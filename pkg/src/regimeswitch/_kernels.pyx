# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""
Compiled filtering recursions.

The transition matrix is passed dense but iterated over its nonzero entries
only; expanded regime chains are very sparse (M nonzeros per row).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, isfinite, INFINITY

from .errors import NumericalUnderflowError

cnp.import_array()

__all__ = ["forward", "backward"]


def _nonzeros(trans):
    rows, cols = np.nonzero(trans)
    return (
        np.ascontiguousarray(rows, dtype=np.intp),
        np.ascontiguousarray(cols, dtype=np.intp),
        np.ascontiguousarray(trans[rows, cols], dtype=np.float64),
    )


def forward(logg, trans, init):
    cdef double[:, ::1] lg = np.ascontiguousarray(logg, dtype=np.float64)
    cdef Py_ssize_t nobs = lg.shape[0]
    cdef Py_ssize_t nstate = lg.shape[1]
    rows_a, cols_a, vals_a = _nonzeros(np.asarray(trans, dtype=np.float64))
    cdef Py_ssize_t[::1] rows = rows_a
    cdef Py_ssize_t[::1] cols = cols_a
    cdef double[::1] vals = vals_a
    cdef Py_ssize_t nnz = vals.shape[0]

    predicted_a = np.zeros((nobs, nstate))
    filtered_a = np.empty((nobs, nstate))
    obs_a = np.empty(nobs)
    shift_a = np.empty(nobs)
    cdef double[:, ::1] pred = predicted_a
    cdef double[:, ::1] filt = filtered_a
    cdef double[::1] obs = obs_a
    cdef double[::1] shift = shift_a
    cdef double[::1] prev = np.ascontiguousarray(init, dtype=np.float64).copy()

    cdef Py_ssize_t t, i, k
    cdef double m, c, d
    cdef int bad = -1

    with nogil:
        for t in range(nobs):
            for k in range(nnz):
                pred[t, cols[k]] += prev[rows[k]] * vals[k]
            m = -INFINITY
            for i in range(nstate):
                if pred[t, i] > 0.0 and lg[t, i] > m:
                    m = lg[t, i]
            if not isfinite(m):
                bad = t
                break
            c = 0.0
            for i in range(nstate):
                if pred[t, i] > 0.0:
                    d = pred[t, i] * exp(lg[t, i] - m)
                    filt[t, i] = d
                    c += d
                else:
                    filt[t, i] = 0.0
            if not (c > 0.0 and isfinite(c)):
                bad = t
                break
            for i in range(nstate):
                filt[t, i] /= c
                prev[i] = filt[t, i]
            obs[t] = log(c) + m
            shift[t] = m
    if bad >= 0:
        raise NumericalUnderflowError(
            f"observation {bad + 1} has zero density under every reachable state"
        )
    return predicted_a, filtered_a, obs_a, shift_a


def backward(logg, trans, predicted, obs_loglik, shift):
    cdef double[:, ::1] lg = np.ascontiguousarray(logg, dtype=np.float64)
    cdef double[:, ::1] pred = np.ascontiguousarray(predicted, dtype=np.float64)
    cdef double[::1] obs = np.ascontiguousarray(obs_loglik, dtype=np.float64)
    cdef double[::1] sh = np.ascontiguousarray(shift, dtype=np.float64)
    cdef Py_ssize_t nobs = lg.shape[0]
    cdef Py_ssize_t nstate = lg.shape[1]
    rows_a, cols_a, vals_a = _nonzeros(np.asarray(trans, dtype=np.float64))
    cdef Py_ssize_t[::1] rows = rows_a
    cdef Py_ssize_t[::1] cols = cols_a
    cdef double[::1] vals = vals_a
    cdef Py_ssize_t nnz = vals.shape[0]

    beta_a = np.zeros((nobs + 1, nstate))
    cdef double[:, ::1] beta = beta_a
    cdef double[::1] work = np.empty(nstate)
    cdef Py_ssize_t t, i, k
    cdef double scale

    with nogil:
        for i in range(nstate):
            beta[nobs, i] = 1.0
        for t in range(nobs, 0, -1):
            scale = exp(obs[t - 1] - sh[t - 1])
            for i in range(nstate):
                if pred[t - 1, i] > 0.0:
                    work[i] = exp(lg[t - 1, i] - sh[t - 1]) * beta[t, i] / scale
                else:
                    work[i] = 0.0
            for k in range(nnz):
                beta[t - 1, rows[k]] += vals[k] * work[cols[k]]
    return beta_a
