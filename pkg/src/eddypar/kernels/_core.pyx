# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled explicit-Euler march on the Schur-reduced ODE.

Per step: w = K12^T a, solve K22 z = w through the extracted LU factors,
s = K11 a - K12 z, then a <- a - h * s / Mbar + h * Ybar * i(t). All sparse
data arrives as raw CSR/CSC arrays so the loop runs without the GIL.
"""

from libc.math cimport sin, asin, M_PI


cdef inline double _excite(int kind, double t, double I0, double f_sin,
                           double f_pwm, double m_a) nogil:
    cdef double ref, car
    if kind == 0:
        return 0.0
    if kind == 1:
        return I0
    if kind == 2:
        return m_a * I0 * sin(2.0 * M_PI * f_sin * t)
    # two-level PWM, natural sampling, ties resolve to +I0
    ref = m_a * sin(2.0 * M_PI * f_sin * t)
    car = (2.0 / M_PI) * asin(sin(2.0 * M_PI * f_pwm * t))
    return I0 if ref >= car else -I0


cdef inline void _csr_matvec(const int[::1] indptr, const int[::1] indices,
                             const double[::1] data, const double[::1] x,
                             double[::1] out) nogil:
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(out.shape[0]):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


cdef inline void _lu_solve(const int[::1] Lp, const int[::1] Li, const double[::1] Lx,
                           const int[::1] Up, const int[::1] Ui, const double[::1] Ux,
                           const int[::1] row_map, const int[::1] col_map,
                           const double[::1] b, double[::1] work,
                           double[::1] out) nogil:
    """Solve K22 x = b given K22 = Pr^T L U Pc^T from SuperLU."""
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t j, p
    cdef double xj
    for j in range(n):
        work[j] = b[row_map[j]]
    # forward substitution, CSC lower with the diagonal first in each column
    for j in range(n):
        xj = work[j] / Lx[Lp[j]]
        work[j] = xj
        for p in range(Lp[j] + 1, Lp[j + 1]):
            work[Li[p]] -= Lx[p] * xj
    # back substitution, CSC upper with the diagonal last in each column
    for j in range(n - 1, -1, -1):
        xj = work[j] / Ux[Up[j + 1] - 1]
        work[j] = xj
        for p in range(Up[j], Up[j + 1] - 1):
            work[Ui[p]] -= Ux[p] * xj
    for j in range(n):
        out[j] = work[col_map[j]]


def explicit_march(const int[::1] K11p, const int[::1] K11i, const double[::1] K11x,
                   const int[::1] K12p, const int[::1] K12i, const double[::1] K12x,
                   const int[::1] K21p, const int[::1] K21i, const double[::1] K21x,
                   const int[::1] Lp, const int[::1] Li, const double[::1] Lx,
                   const int[::1] Up, const int[::1] Ui, const double[::1] Ux,
                   const int[::1] row_map, const int[::1] col_map,
                   const double[::1] inv_m, const double[::1] ybar,
                   double[::1] a, double t0, double h, Py_ssize_t n_steps,
                   int exc_kind, double I0, double f_sin, double f_pwm, double m_a,
                   double[::1] tmp_c, double[::1] tmp_c2, double[::1] tmp_nc,
                   double[::1] tmp_nc2, double[::1] work_nc):
    cdef Py_ssize_t step, j, nc = a.shape[0]
    cdef double i_t
    with nogil:
        for step in range(n_steps):
            i_t = _excite(exc_kind, t0 + step * h, I0, f_sin, f_pwm, m_a)
            _csr_matvec(K21p, K21i, K21x, a, tmp_nc)
            _lu_solve(Lp, Li, Lx, Up, Ui, Ux, row_map, col_map,
                      tmp_nc, work_nc, tmp_nc2)
            _csr_matvec(K11p, K11i, K11x, a, tmp_c)
            _csr_matvec(K12p, K12i, K12x, tmp_nc2, tmp_c2)
            for j in range(nc):
                a[j] = a[j] - h * (tmp_c[j] - tmp_c2[j]) * inv_m[j] + h * ybar[j] * i_t
    return 0
