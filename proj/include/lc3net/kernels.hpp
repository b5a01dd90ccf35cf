#ifndef LC3NET_KERNELS_HPP
#define LC3NET_KERNELS_HPP

#include <vector>

#include "lc3net/tensor.hpp"

// Compute kernels, written twice:
//
//   lc3::kernels::par — OpenMP-parallel implementations used in production.
//   lc3::kernels::ref — straight-line serial implementations kept as the
//                       correctness reference for tests and the benchmark.
//
// The unqualified functions in lc3::kernels dispatch on a process-wide
// backend switch; the ops layer only ever calls these. Both backends are
// deterministic for any thread count: every output element (or per-channel /
// per-plane reduction) is owned by exactly one thread and accumulated in a
// fixed order.
//
// Backward kernels accumulate (+=) into the provided gradient tensors.

namespace lc3::kernels {

enum class Backend { parallel, reference };

Backend backend();
void set_backend(Backend b);

/// RAII scope guard used by tests and the benchmark to force a backend.
struct BackendGuard {
    explicit BackendGuard(Backend b) : prev(backend()) { set_backend(b); }
    ~BackendGuard() { set_backend(prev); }
    Backend prev;
};

struct ConvGeom {
    int stride = 1;
    int pad = 0;
    int dilation = 1;
};

int conv_out_dim(int in, int kernel, const ConvGeom& g);

// ---- dispatching entry points -------------------------------------------

void conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor* bias,
                    const ConvGeom& g, Tensor& out);
void conv2d_backward_input(const Tensor& gout, const Tensor& weight, const ConvGeom& g,
                           Tensor& gin);
void conv2d_backward_weight(const Tensor& in, const Tensor& gout, const ConvGeom& g,
                            Tensor& gweight, Tensor* gbias);

void batchnorm_forward_train(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                             double eps, Tensor& out, Tensor& save_mean, Tensor& save_invstd);
void batchnorm_forward_eval(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                            const Tensor& running_mean, const Tensor& running_var, double eps,
                            Tensor& out);
void batchnorm_backward_train(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                              const Tensor& save_mean, const Tensor& save_invstd, Tensor& gin,
                              Tensor& ggamma, Tensor& gbeta);
void batchnorm_backward_eval(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                             const Tensor& running_mean, const Tensor& running_var, double eps,
                             Tensor& gin, Tensor& ggamma, Tensor& gbeta);

void relu_forward(const Tensor& in, Tensor& out);
void relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin);

void sigmoid_forward(const Tensor& in, Tensor& out);
void sigmoid_backward(const Tensor& y, const Tensor& gout, Tensor& gin);

void add_forward(const Tensor& a, const Tensor& b, Tensor& out);
void mul_forward(const Tensor& a, const Tensor& b, Tensor& out);
/// dst += alpha * src
void axpy(float alpha, const Tensor& src, Tensor& dst);
/// dst += a ⊗ b
void mul_accum(const Tensor& a, const Tensor& b, Tensor& dst);

void concat_channels_forward(const std::vector<const Tensor*>& parts, Tensor& out);
void concat_channels_backward(const Tensor& gout, const std::vector<Tensor*>& gparts);

/// Bilinear interpolation with half-pixel (corner-alignment disabled) mapping.
void resize_bilinear_forward(const Tensor& in, Tensor& out);
void resize_bilinear_backward(const Tensor& gout, Tensor& gin);
void resize_nearest_forward(const Tensor& in, Tensor& out);

void maxpool_forward(const Tensor& in, int kernel, int stride, int pad, Tensor& out,
                     std::vector<int>& argmax);
void maxpool_backward(const Tensor& gout, const std::vector<int>& argmax, Tensor& gin);

/// SGD with momentum: velocity = momentum * velocity + grad (+ wd * param),
/// param -= lr * velocity.
void sgd_momentum_update(Tensor& param, const Tensor& grad, Tensor& velocity, float lr,
                         float momentum, float weight_decay);

// ---- parallel implementations -------------------------------------------

namespace par {
void conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor* bias,
                    const ConvGeom& g, Tensor& out);
void conv2d_backward_input(const Tensor& gout, const Tensor& weight, const ConvGeom& g,
                           Tensor& gin);
void conv2d_backward_weight(const Tensor& in, const Tensor& gout, const ConvGeom& g,
                            Tensor& gweight, Tensor* gbias);
void batchnorm_forward_train(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                             double eps, Tensor& out, Tensor& save_mean, Tensor& save_invstd);
void batchnorm_forward_eval(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                            const Tensor& running_mean, const Tensor& running_var, double eps,
                            Tensor& out);
void batchnorm_backward_train(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                              const Tensor& save_mean, const Tensor& save_invstd, Tensor& gin,
                              Tensor& ggamma, Tensor& gbeta);
void batchnorm_backward_eval(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                             const Tensor& running_mean, const Tensor& running_var, double eps,
                             Tensor& gin, Tensor& ggamma, Tensor& gbeta);
void relu_forward(const Tensor& in, Tensor& out);
void relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin);
void sigmoid_forward(const Tensor& in, Tensor& out);
void sigmoid_backward(const Tensor& y, const Tensor& gout, Tensor& gin);
void add_forward(const Tensor& a, const Tensor& b, Tensor& out);
void mul_forward(const Tensor& a, const Tensor& b, Tensor& out);
void axpy(float alpha, const Tensor& src, Tensor& dst);
void mul_accum(const Tensor& a, const Tensor& b, Tensor& dst);
void concat_channels_forward(const std::vector<const Tensor*>& parts, Tensor& out);
void concat_channels_backward(const Tensor& gout, const std::vector<Tensor*>& gparts);
void resize_bilinear_forward(const Tensor& in, Tensor& out);
void resize_bilinear_backward(const Tensor& gout, Tensor& gin);
void resize_nearest_forward(const Tensor& in, Tensor& out);
void maxpool_forward(const Tensor& in, int kernel, int stride, int pad, Tensor& out,
                     std::vector<int>& argmax);
void maxpool_backward(const Tensor& gout, const std::vector<int>& argmax, Tensor& gin);
void sgd_momentum_update(Tensor& param, const Tensor& grad, Tensor& velocity, float lr,
                         float momentum, float weight_decay);
}  // namespace par

// ---- serial reference implementations -----------------------------------

namespace ref {
void conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor* bias,
                    const ConvGeom& g, Tensor& out);
void conv2d_backward_input(const Tensor& gout, const Tensor& weight, const ConvGeom& g,
                           Tensor& gin);
void conv2d_backward_weight(const Tensor& in, const Tensor& gout, const ConvGeom& g,
                            Tensor& gweight, Tensor* gbias);
void batchnorm_forward_train(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                             double eps, Tensor& out, Tensor& save_mean, Tensor& save_invstd);
void batchnorm_forward_eval(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                            const Tensor& running_mean, const Tensor& running_var, double eps,
                            Tensor& out);
void batchnorm_backward_train(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                              const Tensor& save_mean, const Tensor& save_invstd, Tensor& gin,
                              Tensor& ggamma, Tensor& gbeta);
void batchnorm_backward_eval(const Tensor& in, const Tensor& gout, const Tensor& gamma,
                             const Tensor& running_mean, const Tensor& running_var, double eps,
                             Tensor& gin, Tensor& ggamma, Tensor& gbeta);
void relu_forward(const Tensor& in, Tensor& out);
void relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin);
void sigmoid_forward(const Tensor& in, Tensor& out);
void sigmoid_backward(const Tensor& y, const Tensor& gout, Tensor& gin);
void add_forward(const Tensor& a, const Tensor& b, Tensor& out);
void mul_forward(const Tensor& a, const Tensor& b, Tensor& out);
void axpy(float alpha, const Tensor& src, Tensor& dst);
void mul_accum(const Tensor& a, const Tensor& b, Tensor& dst);
void concat_channels_forward(const std::vector<const Tensor*>& parts, Tensor& out);
void concat_channels_backward(const Tensor& gout, const std::vector<Tensor*>& gparts);
void resize_bilinear_forward(const Tensor& in, Tensor& out);
void resize_bilinear_backward(const Tensor& gout, Tensor& gin);
void resize_nearest_forward(const Tensor& in, Tensor& out);
void maxpool_forward(const Tensor& in, int kernel, int stride, int pad, Tensor& out,
                     std::vector<int>& argmax);
void maxpool_backward(const Tensor& gout, const std::vector<int>& argmax, Tensor& gin);
void sgd_momentum_update(Tensor& param, const Tensor& grad, Tensor& velocity, float lr,
                         float momentum, float weight_decay);
}  // namespace ref

namespace detail {
/// Shape/geometry validation shared by both backends; throws StructureError
/// or ConfigError before any data is touched.
void check_conv_args(const Tensor& in, const Tensor& weight, const Tensor* bias,
                     const ConvGeom& g, const Tensor& out);
void check_bn_args(const Tensor& in, const Tensor& gamma, const Tensor& beta);
}  // namespace detail

}  // namespace lc3::kernels

#endif  // LC3NET_KERNELS_HPP
