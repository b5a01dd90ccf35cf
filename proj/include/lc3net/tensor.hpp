#ifndef LC3NET_TENSOR_HPP
#define LC3NET_TENSOR_HPP

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lc3net/error.hpp"

namespace lc3 {

/// Dense 4-D float tensor in NCHW layout. Lower-rank data (biases, per-channel
/// batch-norm parameters) is stored with the unused dimensions set to 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w);

    static Tensor zeros_like(const Tensor& other);
    static Tensor full(int n, int c, int h, int w, float value);

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::array<int, 4> shape() const { return {n_, c_, h_, w_}; }
    std::string shape_str() const;

    long size() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    long index(int n, int c, int h, int w) const {
        return ((static_cast<long>(n) * c_ + c) * h_ + h) * w_ + w;
    }
    float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    float at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    bool same_shape(const Tensor& other) const {
        return n_ == other.n_ && c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
    }

    void fill(float value);
    void zero() { fill(0.0f); }

    /// Fails with StructureError naming `what` when shapes differ.
    void require_same_shape(const Tensor& other, const char* what) const;

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<float> data_;
};

/// Fill with N(0, stddev) draws; consumes the generator sequentially so results
/// are reproducible for a fixed seed.
void fill_normal(Tensor& t, double stddev, std::mt19937_64& rng);
void fill_uniform(Tensor& t, float lo, float hi, std::mt19937_64& rng);

/// Deterministic sum: per-block partials accumulated in fixed block order, so
/// the result is independent of the OpenMP thread count.
double tensor_sum(const Tensor& t);

bool all_finite(const Tensor& t);
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace lc3

#endif  // LC3NET_TENSOR_HPP
