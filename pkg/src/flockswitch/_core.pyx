# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integrator kernel. Mirrors _kernel_py.run_segment exactly."""
import numpy as np

from libc.math cimport pow, sqrt

COMPILED = True


def run_segment(
    double[:, ::1] x,
    double[:, ::1] v,
    double[:, :, ::1] adj_stack,
    long long[::1] sigma,
    Py_ssize_t t0,
    Py_ssize_t t1,
    double h,
    int weight_kind,
    double kappa,
    double beta,
    double[::1] dx_out,
    double[::1] dv_out,
    double v_tol,
    double x_cap,
    xhist=None,
    vhist=None,
):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef double scale = h / n
    accel_arr = np.zeros((n, d))
    cdef double[:, ::1] accel = accel_arr
    cdef double[:, :, ::1] xh = None
    cdef double[:, :, ::1] vh = None
    cdef bint record = xhist is not None
    if record:
        xh = xhist
        vh = vhist

    cdef Py_ssize_t t, i, j, m, k
    cdef double r2, wgt, diff, dx2, dv2, dx, dv

    for t in range(t0, t1):
        k = <Py_ssize_t> sigma[t]
        for i in range(n):
            for m in range(d):
                accel[i, m] = 0.0
            for j in range(n):
                if adj_stack[k, i, j] != 0.0:
                    if weight_kind == 0:
                        wgt = kappa
                    else:
                        r2 = 0.0
                        for m in range(d):
                            diff = x[i, m] - x[j, m]
                            r2 += diff * diff
                        wgt = kappa * pow(1.0 + r2, -beta)
                    for m in range(d):
                        accel[i, m] += wgt * (v[j, m] - v[i, m])
            for m in range(d):
                accel[i, m] *= scale
        for i in range(n):
            for m in range(d):
                x[i, m] += h * v[i, m]
                v[i, m] += accel[i, m]
        dx2 = 0.0
        dv2 = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                r2 = 0.0
                for m in range(d):
                    diff = x[i, m] - x[j, m]
                    r2 += diff * diff
                if r2 > dx2:
                    dx2 = r2
                r2 = 0.0
                for m in range(d):
                    diff = v[i, m] - v[j, m]
                    r2 += diff * diff
                if r2 > dv2:
                    dv2 = r2
        dx = sqrt(dx2)
        dv = sqrt(dv2)
        dx_out[t + 1] = dx
        dv_out[t + 1] = dv
        if record:
            for i in range(n):
                for m in range(d):
                    xh[t + 1, i, m] = x[i, m]
                    vh[t + 1, i, m] = v[i, m]
        if dv <= v_tol:
            return t + 1, 1
        if dx >= x_cap:
            return t + 1, 2
    return t1, 0
