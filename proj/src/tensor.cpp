#include "lc3net/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lc3 {

Tensor::Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 1 || c < 1 || h < 1 || w < 1) {
        std::ostringstream os;
        os << "tensor dimensions must be positive, got (" << n << ", " << c << ", " << h
           << ", " << w << ")";
        throw StructureError(os.str());
    }
    data_.assign(static_cast<size_t>(n) * c * h * w, 0.0f);
}

Tensor Tensor::zeros_like(const Tensor& other) {
    return Tensor(other.n_, other.c_, other.h_, other.w_);
}

Tensor Tensor::full(int n, int c, int h, int w, float value) {
    Tensor t(n, c, h, w);
    t.fill(value);
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(" << n_ << ", " << c_ << ", " << h_ << ", " << w_ << ")";
    return os.str();
}

void Tensor::fill(float value) {
    std::fill(data_.begin(), data_.end(), value);
}

void Tensor::require_same_shape(const Tensor& other, const char* what) const {
    if (!same_shape(other)) {
        throw StructureError(std::string(what) + ": shape mismatch " + shape_str() + " vs " +
                             other.shape_str());
    }
}

void fill_normal(Tensor& t, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    float* p = t.data();
    for (long i = 0; i < t.size(); ++i) {
        p[i] = static_cast<float>(dist(rng));
    }
}

void fill_uniform(Tensor& t, float lo, float hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> dist(lo, hi);
    float* p = t.data();
    for (long i = 0; i < t.size(); ++i) {
        p[i] = dist(rng);
    }
}

double tensor_sum(const Tensor& t) {
    constexpr long kBlock = 4096;
    const long n = t.size();
    const long blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<size_t>(blocks), 0.0);
    const float* p = t.data();
#pragma omp parallel for schedule(static)
    for (long b = 0; b < blocks; ++b) {
        const long lo = b * kBlock;
        const long hi = std::min(n, lo + kBlock);
        double acc = 0.0;
        for (long i = lo; i < hi; ++i) acc += p[i];
        partial[static_cast<size_t>(b)] = acc;
    }
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

bool all_finite(const Tensor& t) {
    const float* p = t.data();
    for (long i = 0; i < t.size(); ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "max_abs_diff");
    float m = 0.0f;
    const float* pa = a.data();
    const float* pb = b.data();
    for (long i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(pa[i] - pb[i]));
    }
    return m;
}

}  // namespace lc3
