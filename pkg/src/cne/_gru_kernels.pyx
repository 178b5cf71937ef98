# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled GRU pointwise kernels (vectorized C in ``_gru_simd.c``)."""
from cython cimport floating

cdef extern from "_gru_simd.h" nogil:
    void gru_fwd_gates_d(const double*, const double*, double*, double*, double*, long, long)
    void gru_fwd_gates_f(const float*, const float*, float*, float*, float*, long, long)
    void gru_fwd_blend_d(const double*, const double*, const double*, const signed char*, double*, double*, long, long)
    void gru_fwd_blend_f(const float*, const float*, const float*, const signed char*, float*, float*, long, long)
    void gru_bwd_blend_d(const double*, const signed char*, const double*, const double*, const double*,
                         double*, double*, double*, long, long)
    void gru_bwd_blend_f(const float*, const signed char*, const float*, const float*, const float*,
                         float*, float*, float*, long, long)
    void gru_bwd_reset_d(const double*, const double*, const double*, double*, double*, long)
    void gru_bwd_reset_f(const float*, const float*, const float*, float*, float*, long)


def gru_fwd_gates(const floating[:, ::1] pre_rz, const floating[:, ::1] h_prev,
                  floating[:, ::1] r, floating[:, ::1] z, floating[:, ::1] rh):
    cdef long nb = h_prev.shape[0], hd = h_prev.shape[1]
    if nb == 0 or hd == 0:
        return
    with nogil:
        if floating is double:
            gru_fwd_gates_d(&pre_rz[0, 0], &h_prev[0, 0], &r[0, 0], &z[0, 0], &rh[0, 0], nb, hd)
        else:
            gru_fwd_gates_f(&pre_rz[0, 0], &h_prev[0, 0], &r[0, 0], &z[0, 0], &rh[0, 0], nb, hd)


def gru_fwd_blend(const floating[:, ::1] pre_c, const floating[:, ::1] z,
                  const floating[:, ::1] h_prev, const signed char[::1] mask,
                  floating[:, ::1] c, floating[:, ::1] h_new):
    cdef long nb = h_prev.shape[0], hd = h_prev.shape[1]
    if nb == 0 or hd == 0:
        return
    with nogil:
        if floating is double:
            gru_fwd_blend_d(&pre_c[0, 0], &z[0, 0], &h_prev[0, 0], &mask[0], &c[0, 0], &h_new[0, 0], nb, hd)
        else:
            gru_fwd_blend_f(&pre_c[0, 0], &z[0, 0], &h_prev[0, 0], &mask[0], &c[0, 0], &h_new[0, 0], nb, hd)


def gru_bwd_blend(const floating[:, ::1] dh, const signed char[::1] mask,
                  const floating[:, ::1] z, const floating[:, ::1] c,
                  const floating[:, ::1] h_prev, floating[:, ::1] dc_pre,
                  floating[:, ::1] dz_pre, floating[:, ::1] dh_prev):
    cdef long nb = dh.shape[0], hd = dh.shape[1]
    if nb == 0 or hd == 0:
        return
    with nogil:
        if floating is double:
            gru_bwd_blend_d(&dh[0, 0], &mask[0], &z[0, 0], &c[0, 0], &h_prev[0, 0],
                            &dc_pre[0, 0], &dz_pre[0, 0], &dh_prev[0, 0], nb, hd)
        else:
            gru_bwd_blend_f(&dh[0, 0], &mask[0], &z[0, 0], &c[0, 0], &h_prev[0, 0],
                            &dc_pre[0, 0], &dz_pre[0, 0], &dh_prev[0, 0], nb, hd)


def gru_bwd_reset(const floating[:, ::1] d_rh, const floating[:, ::1] r,
                  const floating[:, ::1] h_prev, floating[:, ::1] dr_pre,
                  floating[:, ::1] dh_prev):
    cdef long n = r.shape[0] * r.shape[1]
    if n == 0:
        return
    with nogil:
        if floating is double:
            gru_bwd_reset_d(&d_rh[0, 0], &r[0, 0], &h_prev[0, 0], &dr_pre[0, 0], &dh_prev[0, 0], n)
        else:
            gru_bwd_reset_f(&d_rh[0, 0], &r[0, 0], &h_prev[0, 0], &dr_pre[0, 0], &dh_prev[0, 0], n)
