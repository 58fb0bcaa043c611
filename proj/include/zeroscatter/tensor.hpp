#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "zeroscatter/common.hpp"

namespace zs {

/// Dense rank-4 NCHW tensor. Images are (1,3,H,W), masks/depth (1,1,H,W),
/// flow (1,2,H,W), conv weights (cout,cin,kh,kw), scalars (1,1,1,1).
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<real> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, real fill = 0)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    static Tensor scalar(real x) {
        Tensor t(1, 1, 1, 1);
        t.v[0] = x;
        return t;
    }

    int64_t size() const { return static_cast<int64_t>(n) * c * h * w; }
    int64_t plane() const { return static_cast<int64_t>(h) * w; }

    real& at(int i, int j, int y, int x) {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }
    real at(int i, int j, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    bool all_finite() const {
        for (real x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    real min() const {
        real m = v.empty() ? real(0) : v[0];
        for (real x : v) m = x < m ? x : m;
        return m;
    }
    real max() const {
        real m = v.empty() ? real(0) : v[0];
        for (real x : v) m = x > m ? x : m;
        return m;
    }

    /// Mean accumulated in double regardless of the build's scalar type.
    double mean() const {
        double s = 0.0;
        for (real x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }

    double sum() const {
        double s = 0.0;
        for (real x : v) s += x;
        return s;
    }

    void fill(real x) { std::fill(v.begin(), v.end(), x); }

    std::string shape_str() const;
};

/// Stack k same-shape (1,C,H,W) tensors into (k,C,H,W).
Tensor stack_batch(const std::vector<const Tensor*>& items);

}  // namespace zs
