// Serial reference kernels. Plain loops kept deliberately close to the
// mathematical definitions; the parallel backend is checked against these.

#include <algorithm>
#include <cmath>

#include "lc3net/kernels.hpp"

namespace lc3::kernels {

int conv_out_dim(int in, int kernel, const ConvGeom& g) {
    const int eff = g.dilation * (kernel - 1) + 1;
    return (in + 2 * g.pad - eff) / g.stride + 1;
}

namespace detail {

void check_conv_args(const Tensor& in, const Tensor& weight, const Tensor* bias,
                     const ConvGeom& g, const Tensor& out) {
    if (g.stride < 1 || g.dilation < 1 || g.pad < 0) {
        throw ConfigError("conv2d: stride/dilation must be >= 1 and pad >= 0");
    }
    if (weight.c() != in.c()) {
        throw ConfigError("conv2d: weight expects " + std::to_string(weight.c()) +
                          " input channels, got " + std::to_string(in.c()));
    }
    if (bias != nullptr && (bias->c() != weight.n() || bias->size() != weight.n())) {
        throw ConfigError("conv2d: bias shape does not match output channels");
    }
    const int oh = conv_out_dim(in.h(), weight.h(), g);
    const int ow = conv_out_dim(in.w(), weight.w(), g);
    if (oh < 1 || ow < 1) {
        throw StructureError("conv2d: output would be empty for input " + in.shape_str());
    }
    if (out.n() != in.n() || out.c() != weight.n() || out.h() != oh || out.w() != ow) {
        throw StructureError("conv2d: output tensor has wrong shape " + out.shape_str());
    }
}

void check_bn_args(const Tensor& in, const Tensor& gamma, const Tensor& beta) {
    if (gamma.size() != in.c() || beta.size() != in.c()) {
        throw ConfigError("batchnorm: parameter size does not match channel count " +
                          std::to_string(in.c()));
    }
}

}  // namespace detail

namespace ref {

void conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor* bias,
                    const ConvGeom& g, Tensor& out) {
    detail::check_conv_args(in, weight, bias, g, out);
    const int N = in.n(), IC = in.c(), H = in.h(), W = in.w();
    const int OC = weight.n(), KH = weight.h(), KW = weight.w();
    const int OH = out.h(), OW = out.w();
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    float acc = bias != nullptr ? bias->data()[oc] : 0.0f;
                    for (int ic = 0; ic < IC; ++ic)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int ih = oh * g.stride - g.pad + kh * g.dilation;
                                const int iw = ow * g.stride - g.pad + kw * g.dilation;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += weight.at(oc, ic, kh, kw) * in.at(n, ic, ih, iw);
                            }
                    out.at(n, oc, oh, ow) = acc;
                }
}

void conv2d_backward_input(const Tensor& gout, const Tensor& weight, const ConvGeom& g,
                           Tensor& gin) {
    const int N = gin.n(), IC = gin.c(), H = gin.h(), W = gin.w();
    const int OC = weight.n(), KH = weight.h(), KW = weight.w();
    const int OH = gout.h(), OW = gout.w();
    for (int n = 0; n < N; ++n)
        for (int ic = 0; ic < IC; ++ic)
            for (int oc = 0; oc < OC; ++oc)
                for (int kh = 0; kh < KH; ++kh)
                    for (int kw = 0; kw < KW; ++kw) {
                        const float wv = weight.at(oc, ic, kh, kw);
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * g.stride - g.pad + kh * g.dilation;
                            if (ih < 0 || ih >= H) continue;
                            for (int ow = 0; ow < OW; ++ow) {
                                const int iw = ow * g.stride - g.pad + kw * g.dilation;
                                if (iw < 0 || iw >= W) continue;
                                gin.at(n, ic, ih, iw) += wv * gout.at(n, oc, oh, ow);
                            }
                        }
                    }
}

void conv2d_backward_weight(const Tensor& in, const Tensor& gout, const ConvGeom& g,
                            Tensor& gweight, Tensor* gbias) {
    const int N = in.n(), IC = in.c(), H = in.h(), W = in.w();
    const int OC = gout.c(), KH = gweight.h(), KW = gweight.w();
    const int OH = gout.h(), OW = gout.w();
    for (int oc = 0; oc < OC; ++oc)
        for (int ic = 0; ic < IC; ++ic)
            for (int kh = 0; kh < KH; ++kh)
                for (int kw = 0; kw < KW; ++kw) {
                    double acc = 0.0;
                    for (int n = 0; n < N; ++n)
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * g.stride - g.pad + kh * g.dilation;
                            if (ih < 0 || ih >= H) continue;
                            for (int ow = 0; ow < OW; ++ow) {
                                const int iw = ow * g.stride - g.pad + kw * g.dilation;
                                if (iw < 0 || iw >= W) continue;
                                acc += static_cast<double>(gout.at(n, oc, oh, ow)) *
                                       in.at(n, ic, ih, iw);
                            }
                        }
                    gweight.at(oc, ic, kh, kw) += static_cast<float>(acc);
                }
    if (gbias != nullptr) {
        for (int oc = 0; oc < OC; ++oc) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) acc += gout.at(n, oc, oh, ow);
            gbias->data()[oc] += static_cast<float>(acc);
        }
    }
}

void batchnorm_forward_train(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                             double eps, Tensor& out, Tensor& save_mean, Tensor& save_invstd) {
    detail::check_bn_args(in, gamma, beta);
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    const long M = static_cast<long>(N) * H * W;
    for (int c = 0; c < C; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double v = in.at(n, c, h, w);
                    sum += v;
                    sumsq += v * v;
                }
        const double mean = sum / static_cast<double>(M);
        const double var = std::max(0.0, sumsq / static_cast<double>(M) - mean * mean);
        const double invstd = 1.0 / std::sqrt(var + eps);
        save_mean.data()[c] = static_cast<float>(mean);
        save_invstd.data()[c] = static_cast<float>(invstd);
        const double gc = gamma.data()[c], bc = beta.data()[c];
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    out.at(n, c, h, w) = static_cast<float>(
                        gc * ((in.at(n, c, h, w) - mean) * invstd) + bc);
                }
    }
}

void batchnorm_forward_eval(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                            const Tensor& running_mean, const Tensor& running_var, double eps,
                            Tensor& out) {
    detail::check_bn_args(in, gamma, beta);
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    for (int c = 0; c < C; ++c) {
        const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + eps);
        const double mean = running_mean.data()[c];
        const double gc = gamma.data()[c], bc = beta.data()[c];
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    out.at(n, c, h, w) =
                        static_cast<float>(gc * ((in.at(n, c, h, w) - mean) * invstd) + bc);
                }
    }
}

void batchnorm_backward_train(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                              const Tensor& save_mean, const Tensor& save_invstd, Tensor& gin,
                              Tensor& ggamma, Tensor& gbeta) {
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    const double M = static_cast<double>(N) * H * W;
    for (int c = 0; c < C; ++c) {
        const double mean = save_mean.data()[c];
        const double invstd = save_invstd.data()[c];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double g = gout.at(n, c, h, w);
                    const double xh = (in.at(n, c, h, w) - mean) * invstd;
                    sum_g += g;
                    sum_gx += g * xh;
                }
        ggamma.data()[c] += static_cast<float>(sum_gx);
        gbeta.data()[c] += static_cast<float>(sum_g);
        const double gc = gamma.data()[c];
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double g = gout.at(n, c, h, w);
                    const double xh = (in.at(n, c, h, w) - mean) * invstd;
                    gin.at(n, c, h, w) += static_cast<float>(
                        gc * invstd * (g - sum_g / M - xh * sum_gx / M));
                }
    }
}

void batchnorm_backward_eval(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                             const Tensor& running_mean, const Tensor& running_var, double eps,
                             Tensor& gin, Tensor& ggamma, Tensor& gbeta) {
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    for (int c = 0; c < C; ++c) {
        const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + eps);
        const double mean = running_mean.data()[c];
        const double gc = gamma.data()[c];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double g = gout.at(n, c, h, w);
                    sum_g += g;
                    sum_gx += g * ((in.at(n, c, h, w) - mean) * invstd);
                    gin.at(n, c, h, w) += static_cast<float>(g * gc * invstd);
                }
        ggamma.data()[c] += static_cast<float>(sum_gx);
        gbeta.data()[c] += static_cast<float>(sum_g);
    }
}

void relu_forward(const Tensor& in, Tensor& out) {
    for (long i = 0; i < in.size(); ++i) out.data()[i] = std::max(0.0f, in.data()[i]);
}

void relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin) {
    for (long i = 0; i < in.size(); ++i) {
        if (in.data()[i] > 0.0f) gin.data()[i] += gout.data()[i];
    }
}

void sigmoid_forward(const Tensor& in, Tensor& out) {
    for (long i = 0; i < in.size(); ++i) {
        out.data()[i] = 1.0f / (1.0f + std::exp(-in.data()[i]));
    }
}

void sigmoid_backward(const Tensor& y, const Tensor& gout, Tensor& gin) {
    for (long i = 0; i < y.size(); ++i) {
        const float yv = y.data()[i];
        gin.data()[i] += gout.data()[i] * yv * (1.0f - yv);
    }
}

void add_forward(const Tensor& a, const Tensor& b, Tensor& out) {
    for (long i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
}

void mul_forward(const Tensor& a, const Tensor& b, Tensor& out) {
    for (long i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
}

void axpy(float alpha, const Tensor& src, Tensor& dst) {
    for (long i = 0; i < src.size(); ++i) dst.data()[i] += alpha * src.data()[i];
}

void mul_accum(const Tensor& a, const Tensor& b, Tensor& dst) {
    for (long i = 0; i < a.size(); ++i) dst.data()[i] += a.data()[i] * b.data()[i];
}

void concat_channels_forward(const std::vector<const Tensor*>& parts, Tensor& out) {
    const int N = out.n(), H = out.h(), W = out.w();
    const long plane = static_cast<long>(H) * W;
    for (int n = 0; n < N; ++n) {
        long c_off = 0;
        for (const Tensor* part : parts) {
            for (int c = 0; c < part->c(); ++c) {
                const float* src = part->data() + (static_cast<long>(n) * part->c() + c) * plane;
                float* dst = out.data() + (static_cast<long>(n) * out.c() + c_off + c) * plane;
                std::copy(src, src + plane, dst);
            }
            c_off += part->c();
        }
    }
}

void concat_channels_backward(const Tensor& gout, const std::vector<Tensor*>& gparts) {
    const int N = gout.n(), H = gout.h(), W = gout.w();
    const long plane = static_cast<long>(H) * W;
    for (int n = 0; n < N; ++n) {
        long c_off = 0;
        for (Tensor* gpart : gparts) {
            for (int c = 0; c < gpart->c(); ++c) {
                const float* src =
                    gout.data() + (static_cast<long>(n) * gout.c() + c_off + c) * plane;
                float* dst = gpart->data() + (static_cast<long>(n) * gpart->c() + c) * plane;
                for (long i = 0; i < plane; ++i) dst[i] += src[i];
            }
            c_off += gpart->c();
        }
    }
}

namespace {

// Half-pixel source coordinate and clamped neighbour pair for bilinear maps.
struct LinCoef {
    int lo, hi;
    float frac;
};

LinCoef linear_coef(int dst, int in_dim, double scale) {
    const double src = (dst + 0.5) * scale - 0.5;
    double f = std::floor(src);
    int lo = static_cast<int>(f);
    float frac = static_cast<float>(src - f);
    int hi = lo + 1;
    if (lo < 0) lo = 0;
    if (hi < 0) hi = 0;
    if (lo > in_dim - 1) lo = in_dim - 1;
    if (hi > in_dim - 1) hi = in_dim - 1;
    return {lo, hi, frac};
}

}  // namespace

void resize_bilinear_forward(const Tensor& in, Tensor& out) {
    if (in.h() == out.h() && in.w() == out.w()) {
        std::copy(in.data(), in.data() + in.size(), out.data());
        return;
    }
    const double sh = static_cast<double>(in.h()) / out.h();
    const double sw = static_cast<double>(in.w()) / out.w();
    for (int n = 0; n < in.n(); ++n)
        for (int c = 0; c < in.c(); ++c)
            for (int oh = 0; oh < out.h(); ++oh) {
                const LinCoef y = linear_coef(oh, in.h(), sh);
                for (int ow = 0; ow < out.w(); ++ow) {
                    const LinCoef x = linear_coef(ow, in.w(), sw);
                    const float top = (1.0f - x.frac) * in.at(n, c, y.lo, x.lo) +
                                      x.frac * in.at(n, c, y.lo, x.hi);
                    const float bot = (1.0f - x.frac) * in.at(n, c, y.hi, x.lo) +
                                      x.frac * in.at(n, c, y.hi, x.hi);
                    out.at(n, c, oh, ow) = (1.0f - y.frac) * top + y.frac * bot;
                }
            }
}

void resize_bilinear_backward(const Tensor& gout, Tensor& gin) {
    if (gin.h() == gout.h() && gin.w() == gout.w()) {
        for (long i = 0; i < gin.size(); ++i) gin.data()[i] += gout.data()[i];
        return;
    }
    const double sh = static_cast<double>(gin.h()) / gout.h();
    const double sw = static_cast<double>(gin.w()) / gout.w();
    for (int n = 0; n < gout.n(); ++n)
        for (int c = 0; c < gout.c(); ++c)
            for (int oh = 0; oh < gout.h(); ++oh) {
                const LinCoef y = linear_coef(oh, gin.h(), sh);
                for (int ow = 0; ow < gout.w(); ++ow) {
                    const LinCoef x = linear_coef(ow, gin.w(), sw);
                    const float g = gout.at(n, c, oh, ow);
                    gin.at(n, c, y.lo, x.lo) += (1.0f - y.frac) * (1.0f - x.frac) * g;
                    gin.at(n, c, y.lo, x.hi) += (1.0f - y.frac) * x.frac * g;
                    gin.at(n, c, y.hi, x.lo) += y.frac * (1.0f - x.frac) * g;
                    gin.at(n, c, y.hi, x.hi) += y.frac * x.frac * g;
                }
            }
}

void resize_nearest_forward(const Tensor& in, Tensor& out) {
    const double sh = static_cast<double>(in.h()) / out.h();
    const double sw = static_cast<double>(in.w()) / out.w();
    for (int n = 0; n < in.n(); ++n)
        for (int c = 0; c < in.c(); ++c)
            for (int oh = 0; oh < out.h(); ++oh) {
                const int ih = std::min(in.h() - 1, static_cast<int>((oh + 0.5) * sh));
                for (int ow = 0; ow < out.w(); ++ow) {
                    const int iw = std::min(in.w() - 1, static_cast<int>((ow + 0.5) * sw));
                    out.at(n, c, oh, ow) = in.at(n, c, ih, iw);
                }
            }
}

void maxpool_forward(const Tensor& in, int kernel, int stride, int pad, Tensor& out,
                     std::vector<int>& argmax) {
    const int N = in.n(), C = in.c(), H = in.h(), W = in.w();
    const int OH = out.h(), OW = out.w();
    argmax.assign(static_cast<size_t>(out.size()), -1);
    long o = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow, ++o) {
                    float best = -std::numeric_limits<float>::infinity();
                    int best_idx = -1;
                    for (int kh = 0; kh < kernel; ++kh)
                        for (int kw = 0; kw < kernel; ++kw) {
                            const int ih = oh * stride - pad + kh;
                            const int iw = ow * stride - pad + kw;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            const float v = in.at(n, c, ih, iw);
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<int>(in.index(n, c, ih, iw));
                            }
                        }
                    out.data()[o] = best;
                    argmax[static_cast<size_t>(o)] = best_idx;
                }
}

void maxpool_backward(const Tensor& gout, const std::vector<int>& argmax, Tensor& gin) {
    for (long o = 0; o < gout.size(); ++o) {
        const int idx = argmax[static_cast<size_t>(o)];
        if (idx >= 0) gin.data()[idx] += gout.data()[o];
    }
}

void sgd_momentum_update(Tensor& param, const Tensor& grad, Tensor& velocity, float lr,
                         float momentum, float weight_decay) {
    for (long i = 0; i < param.size(); ++i) {
        const float g = grad.data()[i] + weight_decay * param.data()[i];
        velocity.data()[i] = momentum * velocity.data()[i] + g;
        param.data()[i] -= lr * velocity.data()[i];
    }
}

}  // namespace ref
}  // namespace lc3::kernels
