# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled SIS step kernel; arithmetic mirrors kernels/pure.py exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sis_step(
    cnp.uint8_t[::1] xi,
    double[::1] gamma,
    double[::1] lam,
    cnp.int64_t[::1] indptr,
    cnp.int32_t[::1] indices,
    double[::1] u,
    double[::1] u_prime,
    cnp.uint8_t[::1] out,
):
    """One synchronous SIS update; reads xi, writes out.  See pure.sis_step."""
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t i, e
    cdef double acc, infect_p, g
    for i in range(n):
        g = gamma[i]
        acc = 1.0
        for e in range(indptr[i], indptr[i + 1]):
            acc = acc * (1.0 - g * <double> xi[indices[e]])
        infect_p = 1.0 - acc
        if xi[i] == 0:
            out[i] = 1 if u[i] <= infect_p else 0
        else:
            out[i] = 0 if u_prime[i] <= lam[i] else 1
    return np.asarray(out)
