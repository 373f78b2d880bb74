# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled steering-vector kernel.

Mirrors ``_fallback.steering_rows``; see that module for the math.  The phase,
cosine and sine passes are separate loops so gcc emits SIMD math calls instead
of a fused scalar ``sincos``.
"""

from libc.math cimport cos, sin, sqrt


cdef void _phase_row(const double* y, const double* z, const double* vv, Py_ssize_t n_el,
                     double rp, double kx, double ky, double kz, double wavenumber,
                     double* psi) noexcept nogil:
    cdef Py_ssize_t n
    cdef double dx2 = (rp * kx) * (rp * kx)
    cdef double dy, dz, rt
    for n in range(n_el):
        dy = rp * ky - y[n]
        dz = rp * kz - z[n]
        rt = sqrt(dx2 + dy * dy + dz * dz)
        psi[n] = wavenumber * ((vv[n] - 2.0 * rp * (ky * y[n] + kz * z[n])) / (rt + rp))


cdef void _cos_row(const double* psi, double* out, Py_ssize_t n_el) noexcept nogil:
    cdef Py_ssize_t n
    for n in range(n_el):
        out[n] = cos(psi[n])


cdef void _sin_row(double* psi, Py_ssize_t n_el) noexcept nogil:
    cdef Py_ssize_t n
    for n in range(n_el):
        psi[n] = sin(psi[n])


def steering_rows(const double[::1] y, const double[::1] z, const double[::1] vv,
                  const double[::1] r, const double[::1] phi, const double[::1] theta,
                  double wavenumber, double[:, ::1] out):
    cdef Py_ssize_t n_el = y.shape[0]
    cdef Py_ssize_t n_pt = r.shape[0]
    cdef Py_ssize_t p
    cdef double ct
    if n_el == 0 or n_pt == 0:
        return
    with nogil:
        for p in range(n_pt):
            ct = cos(theta[p])
            _phase_row(&y[0], &z[0], &vv[0], n_el, r[p], ct * cos(phi[p]), ct * sin(phi[p]),
                       sin(theta[p]), wavenumber, &out[p, n_el])
            _cos_row(&out[p, n_el], &out[p, 0], n_el)
            _sin_row(&out[p, n_el], n_el)
