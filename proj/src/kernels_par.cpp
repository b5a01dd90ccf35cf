// OpenMP kernels. Parallel decomposition rules, chosen so results are
// bit-deterministic for any thread count:
//   - convolution: im2col + register-blocked GEMM, each output tile owned by
//     one thread, contraction order fixed as (ic, kh, kw);
//   - batchnorm: one thread per channel, double accumulators;
//   - resize / pool / elementwise: one thread per output plane or block;
//   - reductions (weight gradients): fixed block order, serial combine.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "lc3net/kernels.hpp"

namespace lc3::kernels::par {

namespace {

// ---- im2col -----------------------------------------------------------
//
// Column buffer layout: rows indexed by (ic, kh, kw) in that order, columns
// by (oh, ow) for a block of output rows [oh0, oh1). Row-blocking keeps the
// buffer small for large feature maps and dilations.

void im2col_block(const float* in, int IC, int H, int W, int KH, int KW, const ConvGeom& g,
                  int OW, int oh0, int oh1, float* col) {
    const long cols = static_cast<long>(oh1 - oh0) * OW;
#pragma omp parallel for collapse(2) schedule(static)
    for (int ic = 0; ic < IC; ++ic)
        for (int kh = 0; kh < KH; ++kh)
            for (int kw = 0; kw < KW; ++kw) {
                float* dst = col + ((static_cast<long>(ic) * KH + kh) * KW + kw) * cols;
                const int ih_off = kh * g.dilation - g.pad;
                const int iw_off = kw * g.dilation - g.pad;
                for (int oh = oh0; oh < oh1; ++oh, dst += OW) {
                    const int ih = oh * g.stride + ih_off;
                    if (ih < 0 || ih >= H) {
                        std::memset(dst, 0, sizeof(float) * OW);
                        continue;
                    }
                    const float* src = in + (static_cast<long>(ic) * H + ih) * W;
                    if (g.stride == 1) {
                        const int ow0 = std::max(0, -iw_off);
                        const int ow1 = std::min(OW, W - iw_off);
                        for (int ow = 0; ow < ow0; ++ow) dst[ow] = 0.0f;
                        if (ow1 > ow0)
                            std::memcpy(dst + ow0, src + ow0 + iw_off,
                                        sizeof(float) * (ow1 - ow0));
                        for (int ow = std::max(ow0, ow1); ow < OW; ++ow) dst[ow] = 0.0f;
                    } else {
                        for (int ow = 0; ow < OW; ++ow) {
                            const int iw = ow * g.stride + iw_off;
                            dst[ow] = (iw < 0 || iw >= W) ? 0.0f : src[iw];
                        }
                    }
                }
            }
}

// ---- small GEMMs --------------------------------------------------------

constexpr int kMr = 4;
constexpr int kNr = 16;

// C[M,N] = A[M,K] * B[K,N] (+ optional per-row bias), C overwritten.
void gemm_nn(const float* A, const float* B, float* C, int M, int K, int N,
             const float* bias_per_row) {
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < M; i0 += kMr) {
        const int mi = std::min(kMr, M - i0);
        for (int j0 = 0; j0 < N; j0 += kNr) {
            const int nj = std::min(kNr, N - j0);
            float acc[kMr][kNr] = {};
            if (mi == kMr && nj == kNr) {
                for (int k = 0; k < K; ++k) {
                    const float* b = B + static_cast<long>(k) * N + j0;
                    for (int i = 0; i < kMr; ++i) {
                        const float a = A[static_cast<long>(i0 + i) * K + k];
#pragma omp simd
                        for (int j = 0; j < kNr; ++j) acc[i][j] += a * b[j];
                    }
                }
            } else {
                for (int k = 0; k < K; ++k) {
                    const float* b = B + static_cast<long>(k) * N + j0;
                    for (int i = 0; i < mi; ++i) {
                        const float a = A[static_cast<long>(i0 + i) * K + k];
                        for (int j = 0; j < nj; ++j) acc[i][j] += a * b[j];
                    }
                }
            }
            for (int i = 0; i < mi; ++i) {
                const float base = bias_per_row != nullptr ? bias_per_row[i0 + i] : 0.0f;
                float* c = C + static_cast<long>(i0 + i) * N + j0;
                for (int j = 0; j < nj; ++j) c[j] = acc[i][j] + base;
            }
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T, contraction over the contiguous K axis.
void gemm_nt_accum(const float* A, const float* B, float* C, int M, int K, int N) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        const float* a = A + static_cast<long>(i) * K;
        float* c = C + static_cast<long>(i) * N;
        for (int j = 0; j < N; ++j) {
            const float* b = B + static_cast<long>(j) * K;
            float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] += acc;
        }
    }
}

// How many output rows fit a ~8 MiB column buffer (always at least 1).
int rows_per_block(long ck, int OW) {
    const long budget = 8L * 1024 * 1024 / sizeof(float);
    const long per_row = ck * OW;
    return static_cast<int>(std::clamp(budget / std::max(1L, per_row), 1L, 1L << 20));
}

thread_local std::vector<float> tl_col;
thread_local std::vector<float> tl_scratch;

}  // namespace

void conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor* bias,
                    const ConvGeom& g, Tensor& out) {
    detail::check_conv_args(in, weight, bias, g, out);
    const int N = in.n(), IC = in.c(), H = in.h(), W = in.w();
    const int OC = weight.n(), KH = weight.h(), KW = weight.w();
    const int OH = out.h(), OW = out.w();
    const long CK = static_cast<long>(IC) * KH * KW;
    const int block = rows_per_block(CK, OW);
    tl_col.resize(static_cast<size_t>(CK) * block * OW);
    for (int n = 0; n < N; ++n) {
        const float* in_n = in.data() + static_cast<long>(n) * IC * H * W;
        float* out_n = out.data() + static_cast<long>(n) * OC * OH * OW;
        for (int oh0 = 0; oh0 < OH; oh0 += block) {
            const int oh1 = std::min(OH, oh0 + block);
            const long cols = static_cast<long>(oh1 - oh0) * OW;
            im2col_block(in_n, IC, H, W, KH, KW, g, OW, oh0, oh1, tl_col.data());
            // Output rows for this block are strided by the full plane, so
            // write into a compact scratch and scatter rows afterwards.
            if (oh0 == 0 && oh1 == OH) {
                gemm_nn(weight.data(), tl_col.data(), out_n, OC, static_cast<int>(CK),
                        static_cast<int>(cols), bias != nullptr ? bias->data() : nullptr);
            } else {
                tl_scratch.resize(static_cast<size_t>(OC) * cols);
                gemm_nn(weight.data(), tl_col.data(), tl_scratch.data(), OC,
                        static_cast<int>(CK), static_cast<int>(cols),
                        bias != nullptr ? bias->data() : nullptr);
#pragma omp parallel for schedule(static)
                for (int oc = 0; oc < OC; ++oc) {
                    std::memcpy(out_n + (static_cast<long>(oc) * OH + oh0) * OW,
                                tl_scratch.data() + static_cast<long>(oc) * cols,
                                sizeof(float) * cols);
                }
            }
        }
    }
}

void conv2d_backward_input(const Tensor& gout, const Tensor& weight, const ConvGeom& g,
                           Tensor& gin) {
    const int N = gin.n(), IC = gin.c(), H = gin.h(), W = gin.w();
    const int OC = weight.n(), KH = weight.h(), KW = weight.w();
    const int OH = gout.h(), OW = gout.w();
    const long CK = static_cast<long>(IC) * KH * KW;

    // W^T as a [CK, OC] matrix so column gradients come from one gemm.
    std::vector<float> wt(static_cast<size_t>(CK) * OC);
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        const float* src = weight.data() + static_cast<long>(oc) * CK;
        for (long k = 0; k < CK; ++k) wt[static_cast<size_t>(k) * OC + oc] = src[k];
    }

    const int block = rows_per_block(CK, OW);
    tl_col.resize(static_cast<size_t>(CK) * block * OW);
    for (int n = 0; n < N; ++n) {
        const float* gout_n = gout.data() + static_cast<long>(n) * OC * OH * OW;
        float* gin_n = gin.data() + static_cast<long>(n) * IC * H * W;
        for (int oh0 = 0; oh0 < OH; oh0 += block) {
            const int oh1 = std::min(OH, oh0 + block);
            const long cols = static_cast<long>(oh1 - oh0) * OW;
            // Gather the gout rows of this block into compact form.
            tl_scratch.resize(static_cast<size_t>(OC) * cols);
#pragma omp parallel for schedule(static)
            for (int oc = 0; oc < OC; ++oc) {
                std::memcpy(tl_scratch.data() + static_cast<long>(oc) * cols,
                            gout_n + (static_cast<long>(oc) * OH + oh0) * OW,
                            sizeof(float) * cols);
            }
            gemm_nn(wt.data(), tl_scratch.data(), tl_col.data(), static_cast<int>(CK), OC,
                    static_cast<int>(cols), nullptr);
            // col2im: one thread per input channel keeps the scatter-add
            // deterministic.
#pragma omp parallel for schedule(static)
            for (int ic = 0; ic < IC; ++ic) {
                float* gplane = gin_n + static_cast<long>(ic) * H * W;
                for (int kh = 0; kh < KH; ++kh)
                    for (int kw = 0; kw < KW; ++kw) {
                        const float* src =
                            tl_col.data() +
                            ((static_cast<long>(ic) * KH + kh) * KW + kw) * cols;
                        const int ih_off = kh * g.dilation - g.pad;
                        const int iw_off = kw * g.dilation - g.pad;
                        for (int oh = oh0; oh < oh1; ++oh, src += OW) {
                            const int ih = oh * g.stride + ih_off;
                            if (ih < 0 || ih >= H) continue;
                            float* grow = gplane + static_cast<long>(ih) * W;
                            if (g.stride == 1) {
                                const int ow0 = std::max(0, -iw_off);
                                const int ow1 = std::min(OW, W - iw_off);
#pragma omp simd
                                for (int ow = ow0; ow < ow1; ++ow)
                                    grow[ow + iw_off] += src[ow];
                            } else {
                                for (int ow = 0; ow < OW; ++ow) {
                                    const int iw = ow * g.stride + iw_off;
                                    if (iw >= 0 && iw < W) grow[iw] += src[ow];
                                }
                            }
                        }
                    }
            }
        }
    }
}

void conv2d_backward_weight(const Tensor& in, const Tensor& gout, const ConvGeom& g,
                            Tensor& gweight, Tensor* gbias) {
    const int N = in.n(), IC = in.c(), H = in.h(), W = in.w();
    const int OC = gout.c(), KH = gweight.h(), KW = gweight.w();
    const int OH = gout.h(), OW = gout.w();
    const long CK = static_cast<long>(IC) * KH * KW;
    const int block = rows_per_block(CK, OW);
    tl_col.resize(static_cast<size_t>(CK) * block * OW);
    for (int n = 0; n < N; ++n) {
        const float* in_n = in.data() + static_cast<long>(n) * IC * H * W;
        const float* gout_n = gout.data() + static_cast<long>(n) * OC * OH * OW;
        for (int oh0 = 0; oh0 < OH; oh0 += block) {
            const int oh1 = std::min(OH, oh0 + block);
            const long cols = static_cast<long>(oh1 - oh0) * OW;
            im2col_block(in_n, IC, H, W, KH, KW, g, OW, oh0, oh1, tl_col.data());
            tl_scratch.resize(static_cast<size_t>(OC) * cols);
#pragma omp parallel for schedule(static)
            for (int oc = 0; oc < OC; ++oc) {
                std::memcpy(tl_scratch.data() + static_cast<long>(oc) * cols,
                            gout_n + (static_cast<long>(oc) * OH + oh0) * OW,
                            sizeof(float) * cols);
            }
            gemm_nt_accum(tl_scratch.data(), tl_col.data(), gweight.data(), OC,
                          static_cast<int>(cols), static_cast<int>(CK));
        }
    }
    if (gbias != nullptr) {
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < OC; ++oc) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = gout.data() + (static_cast<long>(n) * OC + oc) * OH * OW;
                for (long i = 0; i < static_cast<long>(OH) * OW; ++i) acc += p[i];
            }
            gbias->data()[oc] += static_cast<float>(acc);
        }
    }
}

void batchnorm_forward_train(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                             double eps, Tensor& out, Tensor& save_mean, Tensor& save_invstd) {
    detail::check_bn_args(in, gamma, beta);
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    const long plane = static_cast<long>(H) * W;
    const long M = static_cast<long>(N) * plane;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* p = in.data() + (static_cast<long>(n) * C + c) * plane;
            for (long i = 0; i < plane; ++i) {
                const double v = p[i];
                sum += v;
                sumsq += v * v;
            }
        }
        const double mean = sum / static_cast<double>(M);
        const double var = std::max(0.0, sumsq / static_cast<double>(M) - mean * mean);
        const double invstd = 1.0 / std::sqrt(var + eps);
        save_mean.data()[c] = static_cast<float>(mean);
        save_invstd.data()[c] = static_cast<float>(invstd);
        const float fm = static_cast<float>(mean);
        const float scale = static_cast<float>(gamma.data()[c] * invstd);
        const float shift = beta.data()[c];
        for (int n = 0; n < N; ++n) {
            const float* p = in.data() + (static_cast<long>(n) * C + c) * plane;
            float* q = out.data() + (static_cast<long>(n) * C + c) * plane;
#pragma omp simd
            for (long i = 0; i < plane; ++i) q[i] = (p[i] - fm) * scale + shift;
        }
    }
}

void batchnorm_forward_eval(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                            const Tensor& running_mean, const Tensor& running_var, double eps,
                            Tensor& out) {
    detail::check_bn_args(in, gamma, beta);
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    const long plane = static_cast<long>(H) * W;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + eps);
        const float fm = running_mean.data()[c];
        const float scale = static_cast<float>(gamma.data()[c] * invstd);
        const float shift = beta.data()[c];
        for (int n = 0; n < N; ++n) {
            const float* p = in.data() + (static_cast<long>(n) * C + c) * plane;
            float* q = out.data() + (static_cast<long>(n) * C + c) * plane;
#pragma omp simd
            for (long i = 0; i < plane; ++i) q[i] = (p[i] - fm) * scale + shift;
        }
    }
}

void batchnorm_backward_train(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                              const Tensor& save_mean, const Tensor& save_invstd, Tensor& gin,
                              Tensor& ggamma, Tensor& gbeta) {
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    const long plane = static_cast<long>(H) * W;
    const double M = static_cast<double>(N) * plane;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const double mean = save_mean.data()[c];
        const double invstd = save_invstd.data()[c];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* x = in.data() + (static_cast<long>(n) * C + c) * plane;
            const float* g = gout.data() + (static_cast<long>(n) * C + c) * plane;
            for (long i = 0; i < plane; ++i) {
                sum_g += g[i];
                sum_gx += g[i] * ((x[i] - mean) * invstd);
            }
        }
        ggamma.data()[c] += static_cast<float>(sum_gx);
        gbeta.data()[c] += static_cast<float>(sum_g);
        const double gc = gamma.data()[c];
        const float k1 = static_cast<float>(gc * invstd);
        const float mg = static_cast<float>(sum_g / M);
        const float mgx = static_cast<float>(sum_gx / M);
        const float fm = static_cast<float>(mean);
        const float fi = static_cast<float>(invstd);
        for (int n = 0; n < N; ++n) {
            const float* x = in.data() + (static_cast<long>(n) * C + c) * plane;
            const float* g = gout.data() + (static_cast<long>(n) * C + c) * plane;
            float* q = gin.data() + (static_cast<long>(n) * C + c) * plane;
#pragma omp simd
            for (long i = 0; i < plane; ++i) {
                q[i] += k1 * (g[i] - mg - ((x[i] - fm) * fi) * mgx);
            }
        }
    }
}

void batchnorm_backward_eval(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                             const Tensor& running_mean, const Tensor& running_var, double eps,
                             Tensor& gin, Tensor& ggamma, Tensor& gbeta) {
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    const long plane = static_cast<long>(H) * W;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + eps);
        const float fm = running_mean.data()[c];
        const float fi = static_cast<float>(invstd);
        const float k1 = static_cast<float>(gamma.data()[c] * invstd);
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* x = in.data() + (static_cast<long>(n) * C + c) * plane;
            const float* g = gout.data() + (static_cast<long>(n) * C + c) * plane;
            float* q = gin.data() + (static_cast<long>(n) * C + c) * plane;
            for (long i = 0; i < plane; ++i) {
                sum_g += g[i];
                sum_gx += g[i] * ((x[i] - fm) * fi);
                q[i] += g[i] * k1;
            }
        }
        ggamma.data()[c] += static_cast<float>(sum_gx);
        gbeta.data()[c] += static_cast<float>(sum_g);
    }
}

void relu_forward(const Tensor& in, Tensor& out) {
    const float* p = in.data();
    float* q = out.data();
    const long n = in.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) q[i] = p[i] > 0.0f ? p[i] : 0.0f;
}

void relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin) {
    const float* p = in.data();
    const float* g = gout.data();
    float* q = gin.data();
    const long n = in.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        if (p[i] > 0.0f) q[i] += g[i];
    }
}

void sigmoid_forward(const Tensor& in, Tensor& out) {
    const float* p = in.data();
    float* q = out.data();
    const long n = in.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) q[i] = 1.0f / (1.0f + std::exp(-p[i]));
}

void sigmoid_backward(const Tensor& y, const Tensor& gout, Tensor& gin) {
    const float* p = y.data();
    const float* g = gout.data();
    float* q = gin.data();
    const long n = y.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) q[i] += g[i] * p[i] * (1.0f - p[i]);
}

void add_forward(const Tensor& a, const Tensor& b, Tensor& out) {
    const long n = a.size();
    const float* pa = a.data();
    const float* pb = b.data();
    float* q = out.data();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) q[i] = pa[i] + pb[i];
}

void mul_forward(const Tensor& a, const Tensor& b, Tensor& out) {
    const long n = a.size();
    const float* pa = a.data();
    const float* pb = b.data();
    float* q = out.data();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) q[i] = pa[i] * pb[i];
}

void axpy(float alpha, const Tensor& src, Tensor& dst) {
    const long n = src.size();
    const float* p = src.data();
    float* q = dst.data();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) q[i] += alpha * p[i];
}

void mul_accum(const Tensor& a, const Tensor& b, Tensor& dst) {
    const long n = a.size();
    const float* pa = a.data();
    const float* pb = b.data();
    float* q = dst.data();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) q[i] += pa[i] * pb[i];
}

void concat_channels_forward(const std::vector<const Tensor*>& parts, Tensor& out) {
    const int N = out.n();
    const long plane = static_cast<long>(out.h()) * out.w();
    const int P = static_cast<int>(parts.size());
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int p = 0; p < P; ++p) {
            long c_off = 0;
            for (int q = 0; q < p; ++q) c_off += parts[static_cast<size_t>(q)]->c();
            const Tensor* part = parts[static_cast<size_t>(p)];
            std::memcpy(out.data() + (static_cast<long>(n) * out.c() + c_off) * plane,
                        part->data() + static_cast<long>(n) * part->c() * plane,
                        sizeof(float) * part->c() * plane);
        }
}

void concat_channels_backward(const Tensor& gout, const std::vector<Tensor*>& gparts) {
    const int N = gout.n();
    const long plane = static_cast<long>(gout.h()) * gout.w();
    const int P = static_cast<int>(gparts.size());
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int p = 0; p < P; ++p) {
            long c_off = 0;
            for (int q = 0; q < p; ++q) c_off += gparts[static_cast<size_t>(q)]->c();
            Tensor* gpart = gparts[static_cast<size_t>(p)];
            const float* src = gout.data() + (static_cast<long>(n) * gout.c() + c_off) * plane;
            float* dst = gpart->data() + static_cast<long>(n) * gpart->c() * plane;
            const long len = static_cast<long>(gpart->c()) * plane;
#pragma omp simd
            for (long i = 0; i < len; ++i) dst[i] += src[i];
        }
}

namespace {

struct LinCoef {
    int lo, hi;
    float frac;
};

LinCoef linear_coef(int dst, int in_dim, double scale) {
    const double src = (dst + 0.5) * scale - 0.5;
    const double f = std::floor(src);
    int lo = static_cast<int>(f);
    const float frac = static_cast<float>(src - f);
    int hi = lo + 1;
    lo = std::clamp(lo, 0, in_dim - 1);
    hi = std::clamp(hi, 0, in_dim - 1);
    return {lo, hi, frac};
}

}  // namespace

void resize_bilinear_forward(const Tensor& in, Tensor& out) {
    if (in.h() == out.h() && in.w() == out.w()) {
        std::memcpy(out.data(), in.data(), sizeof(float) * in.size());
        return;
    }
    const int planes = in.n() * in.c();
    const int OH = out.h(), OW = out.w();
    const double sh = static_cast<double>(in.h()) / OH;
    const double sw = static_cast<double>(in.w()) / OW;
    std::vector<LinCoef> xs(static_cast<size_t>(OW));
    for (int ow = 0; ow < OW; ++ow) xs[static_cast<size_t>(ow)] = linear_coef(ow, in.w(), sw);
    std::vector<LinCoef> ys(static_cast<size_t>(OH));
    for (int oh = 0; oh < OH; ++oh) ys[static_cast<size_t>(oh)] = linear_coef(oh, in.h(), sh);
#pragma omp parallel for schedule(static)
    for (int pl = 0; pl < planes; ++pl) {
        const float* src = in.data() + static_cast<long>(pl) * in.h() * in.w();
        float* dst = out.data() + static_cast<long>(pl) * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
            const LinCoef& y = ys[static_cast<size_t>(oh)];
            const float* r0 = src + static_cast<long>(y.lo) * in.w();
            const float* r1 = src + static_cast<long>(y.hi) * in.w();
            float* drow = dst + static_cast<long>(oh) * OW;
            for (int ow = 0; ow < OW; ++ow) {
                const LinCoef& x = xs[static_cast<size_t>(ow)];
                const float top = (1.0f - x.frac) * r0[x.lo] + x.frac * r0[x.hi];
                const float bot = (1.0f - x.frac) * r1[x.lo] + x.frac * r1[x.hi];
                drow[ow] = (1.0f - y.frac) * top + y.frac * bot;
            }
        }
    }
}

void resize_bilinear_backward(const Tensor& gout, Tensor& gin) {
    if (gin.h() == gout.h() && gin.w() == gout.w()) {
        axpy(1.0f, gout, gin);
        return;
    }
    const int planes = gout.n() * gout.c();
    const int OH = gout.h(), OW = gout.w();
    const double sh = static_cast<double>(gin.h()) / OH;
    const double sw = static_cast<double>(gin.w()) / OW;
    std::vector<LinCoef> xs(static_cast<size_t>(OW));
    for (int ow = 0; ow < OW; ++ow) xs[static_cast<size_t>(ow)] = linear_coef(ow, gin.w(), sw);
    std::vector<LinCoef> ys(static_cast<size_t>(OH));
    for (int oh = 0; oh < OH; ++oh) ys[static_cast<size_t>(oh)] = linear_coef(oh, gin.h(), sh);
#pragma omp parallel for schedule(static)
    for (int pl = 0; pl < planes; ++pl) {
        const float* src = gout.data() + static_cast<long>(pl) * OH * OW;
        float* dst = gin.data() + static_cast<long>(pl) * gin.h() * gin.w();
        for (int oh = 0; oh < OH; ++oh) {
            const LinCoef& y = ys[static_cast<size_t>(oh)];
            float* r0 = dst + static_cast<long>(y.lo) * gin.w();
            float* r1 = dst + static_cast<long>(y.hi) * gin.w();
            const float* grow = src + static_cast<long>(oh) * OW;
            for (int ow = 0; ow < OW; ++ow) {
                const LinCoef& x = xs[static_cast<size_t>(ow)];
                const float g = grow[ow];
                r0[x.lo] += (1.0f - y.frac) * (1.0f - x.frac) * g;
                r0[x.hi] += (1.0f - y.frac) * x.frac * g;
                r1[x.lo] += y.frac * (1.0f - x.frac) * g;
                r1[x.hi] += y.frac * x.frac * g;
            }
        }
    }
}

void resize_nearest_forward(const Tensor& in, Tensor& out) {
    const int planes = in.n() * in.c();
    const int OH = out.h(), OW = out.w();
    const double sh = static_cast<double>(in.h()) / OH;
    const double sw = static_cast<double>(in.w()) / OW;
    std::vector<int> xs(static_cast<size_t>(OW));
    for (int ow = 0; ow < OW; ++ow)
        xs[static_cast<size_t>(ow)] = std::min(in.w() - 1, static_cast<int>((ow + 0.5) * sw));
#pragma omp parallel for schedule(static)
    for (int pl = 0; pl < planes; ++pl) {
        const float* src = in.data() + static_cast<long>(pl) * in.h() * in.w();
        float* dst = out.data() + static_cast<long>(pl) * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
            const int ih = std::min(in.h() - 1, static_cast<int>((oh + 0.5) * sh));
            const float* srow = src + static_cast<long>(ih) * in.w();
            float* drow = dst + static_cast<long>(oh) * OW;
            for (int ow = 0; ow < OW; ++ow) drow[ow] = srow[xs[static_cast<size_t>(ow)]];
        }
    }
}

void maxpool_forward(const Tensor& in, int kernel, int stride, int pad, Tensor& out,
                     std::vector<int>& argmax) {
    const int C = in.c(), H = in.h(), W = in.w();
    const int OH = out.h(), OW = out.w();
    const int planes = in.n() * C;
    argmax.assign(static_cast<size_t>(out.size()), -1);
#pragma omp parallel for schedule(static)
    for (int pl = 0; pl < planes; ++pl) {
        const float* src = in.data() + static_cast<long>(pl) * H * W;
        const long in_base = static_cast<long>(pl) * H * W;
        float* dst = out.data() + static_cast<long>(pl) * OH * OW;
        int* am = argmax.data() + static_cast<long>(pl) * OH * OW;
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                float best = -std::numeric_limits<float>::infinity();
                int best_idx = -1;
                for (int kh = 0; kh < kernel; ++kh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    for (int kw = 0; kw < kernel; ++kw) {
                        const int iw = ow * stride - pad + kw;
                        if (iw < 0 || iw >= W) continue;
                        const float v = src[static_cast<long>(ih) * W + iw];
                        if (v > best) {
                            best = v;
                            best_idx = static_cast<int>(in_base + static_cast<long>(ih) * W + iw);
                        }
                    }
                }
                dst[static_cast<long>(oh) * OW + ow] = best;
                am[static_cast<long>(oh) * OW + ow] = best_idx;
            }
    }
}

void maxpool_backward(const Tensor& gout, const std::vector<int>& argmax, Tensor& gin) {
    const long plane_out = static_cast<long>(gout.h()) * gout.w();
    const int planes = gout.n() * gout.c();
    // Each input plane receives contributions only from its own output plane,
    // so per-plane threads never collide.
#pragma omp parallel for schedule(static)
    for (int pl = 0; pl < planes; ++pl) {
        const float* g = gout.data() + static_cast<long>(pl) * plane_out;
        const int* am = argmax.data() + static_cast<long>(pl) * plane_out;
        for (long i = 0; i < plane_out; ++i) {
            if (am[i] >= 0) gin.data()[am[i]] += g[i];
        }
    }
}

void sgd_momentum_update(Tensor& param, const Tensor& grad, Tensor& velocity, float lr,
                         float momentum, float weight_decay) {
    const long n = param.size();
    float* p = param.data();
    const float* g = grad.data();
    float* v = velocity.data();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        const float gi = g[i] + weight_decay * p[i];
        v[i] = momentum * v[i] + gi;
        p[i] -= lr * v[i];
    }
}

}  // namespace lc3::kernels::par
