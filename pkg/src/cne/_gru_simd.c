/* Fused GRU pointwise steps over (B, H) row-major blocks.
 *
 * Compiled with -ffast-math -fopenmp-simd so exp/tanh vectorize through
 * glibc libmvec. Sigmoid inputs are clamped so no inf is ever produced,
 * which keeps the finite-math assumption valid. Not linked with
 * -ffast-math: that would pull in crtfastmath and set FTZ process-wide.
 */
#include <math.h>
#include "_gru_simd.h"

#define SIG_CLAMP_D 700.0
#define SIG_CLAMP_F 80.0f

#define DEFINE_KERNELS(T, SFX, EXP, TANH, CLAMP)                                   \
void gru_fwd_gates_##SFX(const T *restrict pre_rz, const T *restrict h_prev,       \
                         T *restrict r, T *restrict z, T *restrict rh,             \
                         long nb, long hd)                                         \
{                                                                                  \
    for (long b = 0; b < nb; ++b) {                                                \
        const T *pr = pre_rz + b * 2 * hd, *pz = pr + hd, *hp = h_prev + b * hd;   \
        T *rr = r + b * hd, *zz = z + b * hd, *o = rh + b * hd;                    \
        _Pragma("omp simd")                                                        \
        for (long j = 0; j < hd; ++j) {                                            \
            T a = pr[j] < -CLAMP ? -CLAMP : (pr[j] > CLAMP ? CLAMP : pr[j]);       \
            T c = pz[j] < -CLAMP ? -CLAMP : (pz[j] > CLAMP ? CLAMP : pz[j]);       \
            T rv = (T)1 / ((T)1 + EXP(-a));                                        \
            rr[j] = rv;                                                            \
            zz[j] = (T)1 / ((T)1 + EXP(-c));                                       \
            o[j] = rv * hp[j];                                                     \
        }                                                                          \
    }                                                                              \
}                                                                                  \
                                                                                   \
void gru_fwd_blend_##SFX(const T *restrict pre_c, const T *restrict z,             \
                         const T *restrict h_prev, const signed char *mask,        \
                         T *restrict c, T *restrict h_new, long nb, long hd)       \
{                                                                                  \
    for (long b = 0; b < nb; ++b) {                                                \
        const T *pc = pre_c + b * hd, *zz = z + b * hd, *hp = h_prev + b * hd;     \
        T *cc = c + b * hd, *hn = h_new + b * hd;                                  \
        _Pragma("omp simd")                                                        \
        for (long j = 0; j < hd; ++j)                                              \
            cc[j] = TANH(pc[j]);                                                   \
        if (mask[b]) {                                                             \
            _Pragma("omp simd")                                                    \
            for (long j = 0; j < hd; ++j)                                          \
                hn[j] = ((T)1 - zz[j]) * hp[j] + zz[j] * cc[j];                    \
        } else {                                                                   \
            for (long j = 0; j < hd; ++j)                                          \
                hn[j] = hp[j];                                                     \
        }                                                                          \
    }                                                                              \
}                                                                                  \
                                                                                   \
void gru_bwd_blend_##SFX(const T *restrict dh, const signed char *mask,            \
                         const T *restrict z, const T *restrict c,                 \
                         const T *restrict h_prev, T *restrict dc_pre,             \
                         T *restrict dz_pre, T *restrict dh_prev, long nb, long hd)\
{                                                                                  \
    for (long b = 0; b < nb; ++b) {                                                \
        long o = b * hd;                                                           \
        if (mask[b]) {                                                             \
            _Pragma("omp simd")                                                    \
            for (long j = o; j < o + hd; ++j) {                                    \
                T g = dh[j], zz = z[j], cc = c[j];                                 \
                dc_pre[j] = g * zz * ((T)1 - cc * cc);                             \
                dz_pre[j] = g * (cc - h_prev[j]) * zz * ((T)1 - zz);               \
                dh_prev[j] = g * ((T)1 - zz);                                      \
            }                                                                      \
        } else {                                                                   \
            for (long j = o; j < o + hd; ++j) {                                    \
                dc_pre[j] = 0;                                                     \
                dz_pre[j] = 0;                                                     \
                dh_prev[j] = dh[j];                                                \
            }                                                                      \
        }                                                                          \
    }                                                                              \
}                                                                                  \
                                                                                   \
void gru_bwd_reset_##SFX(const T *restrict d_rh, const T *restrict r,              \
                         const T *restrict h_prev, T *restrict dr_pre,             \
                         T *restrict dh_prev, long n)                              \
{                                                                                  \
    _Pragma("omp simd")                                                            \
    for (long j = 0; j < n; ++j) {                                                 \
        T rr = r[j];                                                               \
        dr_pre[j] = d_rh[j] * h_prev[j] * rr * ((T)1 - rr);                        \
        dh_prev[j] += d_rh[j] * rr;                                                \
    }                                                                              \
}

DEFINE_KERNELS(double, d, exp, tanh, SIG_CLAMP_D)
DEFINE_KERNELS(float, f, expf, tanhf, SIG_CLAMP_F)
