#ifndef CNE_GRU_SIMD_H
#define CNE_GRU_SIMD_H

#define DECLARE_KERNELS(T, SFX)                                                          \
void gru_fwd_gates_##SFX(const T *pre_rz, const T *h_prev, T *r, T *z, T *rh,            \
                         long nb, long hd);                                              \
void gru_fwd_blend_##SFX(const T *pre_c, const T *z, const T *h_prev,                    \
                         const signed char *mask, T *c, T *h_new, long nb, long hd);     \
void gru_bwd_blend_##SFX(const T *dh, const signed char *mask, const T *z, const T *c,   \
                         const T *h_prev, T *dc_pre, T *dz_pre, T *dh_prev,              \
                         long nb, long hd);                                              \
void gru_bwd_reset_##SFX(const T *d_rh, const T *r, const T *h_prev, T *dr_pre,          \
                         T *dh_prev, long n);

DECLARE_KERNELS(double, d)
DECLARE_KERNELS(float, f)

#endif
