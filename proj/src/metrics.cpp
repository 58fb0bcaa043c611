#include "zeroscatter/metrics.hpp"

#include <array>
#include <cmath>

namespace zs {

double psnr(const Tensor& a, const Tensor& b, double cap) {
    check_data(a.same_shape(b), "psnr: shapes differ, " + a.shape_str() + " vs " + b.shape_str());
    check_data(a.size() > 0, "psnr: empty input");
    double se = 0;
    for (int64_t i = 0; i < a.size(); ++i) {
        double d = (double)a.v[i] - (double)b.v[i];
        se += d * d;
    }
    double mse = se / (double)a.size();
    if (!(mse > 0)) return cap;
    return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Image& a, const Image& b, double cap) { return psnr(a.data, b.data, cap); }

namespace {

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    Plane(int h_, int w_) : h(h_), w(w_), v((size_t)h_ * w_) {}
    double& at(int y, int x) { return v[(size_t)y * w + x]; }
    double at(int y, int x) const { return v[(size_t)y * w + x]; }
};

Plane luminance(const Tensor& t) {
    Plane p(t.h, t.w);
    int64_t pl = t.plane();
    for (int64_t i = 0; i < pl; ++i) {
        p.v[i] = t.c == 1 ? (double)t.v[i]
                          : 0.299 * t.v[i] + 0.587 * t.v[i + pl] + 0.114 * t.v[i + 2 * pl];
    }
    return p;
}

constexpr int kWin = 11;

std::array<double, kWin> gauss_kernel() {
    std::array<double, kWin> k{};
    double s = 0;
    for (int i = 0; i < kWin; ++i) {
        double x = i - kWin / 2;
        k[i] = std::exp(-x * x / (2 * 1.5 * 1.5));
        s += k[i];
    }
    for (double& v : k) v /= s;
    return k;
}

// Separable valid-window filter: output (h-10, w-10).
Plane gauss_valid(const Plane& p) {
    auto k = gauss_kernel();
    Plane tmp(p.h, p.w - kWin + 1);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < tmp.w; ++x) {
            double s = 0;
            for (int i = 0; i < kWin; ++i) s += k[i] * p.at(y, x + i);
            tmp.at(y, x) = s;
        }
    Plane out(p.h - kWin + 1, tmp.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double s = 0;
            for (int i = 0; i < kWin; ++i) s += k[i] * tmp.at(y + i, x);
            out.at(y, x) = s;
        }
    return out;
}

Plane mul(const Plane& a, const Plane& b) {
    Plane out(a.h, a.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    check_data(a.same_shape(b), "ssim: shapes differ, " + a.shape_str() + " vs " + b.shape_str());
    check_data(a.n == 1, "ssim: expected a single sample, got " + a.shape_str());
    check_data(a.c == 1 || a.c == 3, "ssim: expected 1 or 3 channels, got " + a.shape_str());
    check_data(a.h >= kWin && a.w >= kWin,
               "ssim: images must be at least 11x11, got " + a.shape_str());
    Plane la = luminance(a), lb = luminance(b);
    Plane mu_a = gauss_valid(la), mu_b = gauss_valid(lb);
    Plane e_aa = gauss_valid(mul(la, la));
    Plane e_bb = gauss_valid(mul(lb, lb));
    Plane e_ab = gauss_valid(mul(la, lb));
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    for (size_t i = 0; i < mu_a.v.size(); ++i) {
        double ma = mu_a.v[i], mb = mu_b.v[i];
        double va = e_aa.v[i] - ma * ma;
        double vb = e_bb.v[i] - mb * mb;
        double vab = e_ab.v[i] - ma * mb;
        double num = (2 * ma * mb + c1) * (2 * vab + c2);
        double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    return total / (double)mu_a.v.size();
}

double ssim(const Image& a, const Image& b) { return ssim(a.data, b.data); }

}  // namespace zs
