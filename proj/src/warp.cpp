#include "zeroscatter/warp.hpp"

#include <cmath>

namespace zs {

namespace {

void check_flow_shape(const Tensor& src, const Tensor& flow, const char* who) {
    if (flow.c != 2 || flow.h != src.h || flow.w != src.w || (flow.n != 1 && flow.n != src.n))
        fail_data(std::string(who) + ": flow shape " + flow.shape_str() +
                  " does not match source " + src.shape_str());
}

inline bool in_view(double sx, double sy, int w, int h) {
    return sx >= 0.0 && sx <= w - 1.0 && sy >= 0.0 && sy <= h - 1.0;
}

}  // namespace

Tensor warp_gather(const Tensor& src, const Tensor& flow) {
    check_flow_shape(src, flow, "warp");
    Tensor out(src.n, src.c, src.h, src.w);
    for (int n = 0; n < src.n; ++n) {
        int fn = flow.n == 1 ? 0 : n;
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) {
                double sx = x + static_cast<double>(flow.at(fn, 0, y, x));
                double sy = y + static_cast<double>(flow.at(fn, 1, y, x));
                if (!in_view(sx, sy, src.w, src.h)) continue;  // stays 0
                int x0 = static_cast<int>(std::floor(sx));
                int y0 = static_cast<int>(std::floor(sy));
                real tx = static_cast<real>(sx - x0);
                real ty = static_cast<real>(sy - y0);
                int x1 = x0 + 1 > src.w - 1 ? src.w - 1 : x0 + 1;
                int y1 = y0 + 1 > src.h - 1 ? src.h - 1 : y0 + 1;
                if (x0 > src.w - 1) x0 = src.w - 1;
                if (y0 > src.h - 1) y0 = src.h - 1;
                for (int c = 0; c < src.c; ++c) {
                    real a = src.at(n, c, y0, x0), b = src.at(n, c, y0, x1);
                    real r0 = a + tx * (b - a);
                    real a1 = src.at(n, c, y1, x0), b1 = src.at(n, c, y1, x1);
                    real r1 = a1 + tx * (b1 - a1);
                    out.at(n, c, y, x) = r0 + ty * (r1 - r0);
                }
            }
    }
    return out;
}

void warp_gather_vjp(const Tensor& dout, const Tensor& flow, Tensor& dsrc) {
    check_flow_shape(dsrc, flow, "warp_vjp");
    if (!dout.same_shape(dsrc))
        fail_data("warp_vjp: gradient shape " + dout.shape_str() + " vs source " +
                  dsrc.shape_str());
    for (int n = 0; n < dsrc.n; ++n) {
        int fn = flow.n == 1 ? 0 : n;
        for (int y = 0; y < dsrc.h; ++y)
            for (int x = 0; x < dsrc.w; ++x) {
                double sx = x + static_cast<double>(flow.at(fn, 0, y, x));
                double sy = y + static_cast<double>(flow.at(fn, 1, y, x));
                if (!in_view(sx, sy, dsrc.w, dsrc.h)) continue;
                int x0 = static_cast<int>(std::floor(sx));
                int y0 = static_cast<int>(std::floor(sy));
                real tx = static_cast<real>(sx - x0);
                real ty = static_cast<real>(sy - y0);
                int x1 = x0 + 1 > dsrc.w - 1 ? dsrc.w - 1 : x0 + 1;
                int y1 = y0 + 1 > dsrc.h - 1 ? dsrc.h - 1 : y0 + 1;
                if (x0 > dsrc.w - 1) x0 = dsrc.w - 1;
                if (y0 > dsrc.h - 1) y0 = dsrc.h - 1;
                for (int c = 0; c < dsrc.c; ++c) {
                    real g = dout.at(n, c, y, x);
                    dsrc.at(n, c, y0, x0) += g * (1 - ty) * (1 - tx);
                    dsrc.at(n, c, y0, x1) += g * (1 - ty) * tx;
                    dsrc.at(n, c, y1, x0) += g * ty * (1 - tx);
                    dsrc.at(n, c, y1, x1) += g * ty * tx;
                }
            }
    }
    return;
}

Mask inview_mask(const Tensor& flow) {
    if (flow.n != 1 || flow.c != 2)
        fail_data("inview_mask: expected flow shape (1,2,H,W), got " + flow.shape_str());
    Mask m(flow.h, flow.w);
    for (int y = 0; y < flow.h; ++y)
        for (int x = 0; x < flow.w; ++x) {
            double sx = x + static_cast<double>(flow.at(0, 0, y, x));
            double sy = y + static_cast<double>(flow.at(0, 1, y, x));
            m.data.at(0, 0, y, x) = in_view(sx, sy, flow.w, flow.h) ? real(1) : real(0);
        }
    return m;
}

WarpResult backward_warp(const Image& src, const FlowField& flow) {
    WarpResult r;
    r.image = src;
    r.image.data = warp_gather(src.data, flow.data);
    r.validity = inview_mask(flow.data);
    return r;
}

WarpResult stereo_warp(const Image& right, const Tensor& disparity) {
    if (disparity.n != 1 || disparity.c != 1 || disparity.h != right.height() ||
        disparity.w != right.width())
        fail_data("stereo_warp: disparity shape " + disparity.shape_str() +
                  " does not match image " + right.data.shape_str());
    for (real d : disparity.v)
        if (d < 0) fail_data("stereo_warp: negative disparity violates rectified convention");
    FlowField flow(right.height(), right.width());
    for (int y = 0; y < flow.data.h; ++y)
        for (int x = 0; x < flow.data.w; ++x) flow.data.at(0, 0, y, x) = -disparity.at(0, 0, y, x);
    WarpResult r = backward_warp(right, flow);
    r.image.view_tag = ViewTag::Left;
    return r;
}

Image temporal_merge(const WarpResult& warp_prev, const WarpResult& warp_next,
                     const Image& fallback) {
    const Tensor& a = warp_prev.image.data;
    const Tensor& b = warp_next.image.data;
    if (!a.same_shape(b) || !a.same_shape(fallback.data))
        fail_data("temporal_merge: shape mismatch " + a.shape_str() + " vs " + b.shape_str() +
                  " vs " + fallback.data.shape_str());
    Image out = fallback;
    out.time_index = 0;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            bool va = warp_prev.validity.data.at(0, 0, y, x) > real(0.5);
            bool vb = warp_next.validity.data.at(0, 0, y, x) > real(0.5);
            for (int c = 0; c < a.c; ++c) {
                if (va && vb)
                    out.data.at(0, c, y, x) =
                        (a.at(0, c, y, x) + b.at(0, c, y, x)) / real(2);
                else if (va)
                    out.data.at(0, c, y, x) = a.at(0, c, y, x);
                else if (vb)
                    out.data.at(0, c, y, x) = b.at(0, c, y, x);
            }
        }
    return out;
}

Mask temporal_merge_mask(const Mask& valid_prev, const Mask& valid_next) {
    if (!valid_prev.data.same_shape(valid_next.data))
        fail_data("temporal_merge_mask: shape mismatch " + valid_prev.data.shape_str() + " vs " +
                  valid_next.data.shape_str());
    Mask m(valid_prev.data.h, valid_prev.data.w);
    for (int64_t i = 0; i < m.data.size(); ++i)
        m.data.v[i] = std::max(valid_prev.data.v[i], valid_next.data.v[i]);
    return m;
}

Mask stereo_mask(const Image& a, const Image& b, real alpha) {
    if (!a.data.same_shape(b.data))
        fail_data("stereo_mask: shape mismatch " + a.data.shape_str() + " vs " +
                  b.data.shape_str());
    if (!(alpha > 0)) fail_data("stereo_mask: alpha must be positive");
    Mask m(a.data.h, a.data.w);
    for (int y = 0; y < a.data.h; ++y)
        for (int x = 0; x < a.data.w; ++x) {
            double err = 0;
            for (int c = 0; c < a.data.c; ++c)
                err += std::abs(static_cast<double>(a.data.at(0, c, y, x)) -
                                static_cast<double>(b.data.at(0, c, y, x)));
            err /= a.data.c;
            m.data.at(0, 0, y, x) = static_cast<real>(std::exp(-static_cast<double>(alpha) * err));
        }
    return m;
}

Mask flow_consistency_mask(const FlowField& f_ab, const FlowField& f_ba, real tol) {
    const Tensor& fa = f_ab.data;
    const Tensor& fb = f_ba.data;
    if (!fa.same_shape(fb))
        fail_data("flow_consistency_mask: shape mismatch " + fa.shape_str() + " vs " +
                  fb.shape_str());
    Tensor rt = warp_gather(fb, fa);  // f_ba sampled at p + f_ab(p)
    Mask view = inview_mask(fa);
    Mask m(fa.h, fa.w);
    double t2 = static_cast<double>(tol) * tol;
    for (int y = 0; y < fa.h;++y)
        for (int x = 0; x < fa.w; ++x) {
            if (view.data.at(0, 0, y, x) < real(0.5)) continue;
            double rx = fa.at(0, 0, y, x) + rt.at(0, 0, y, x);
            double ry = fa.at(0, 1, y, x) + rt.at(0, 1, y, x);
            m.data.at(0, 0, y, x) = rx * rx + ry * ry <= t2 ? real(1) : real(0);
        }
    return m;
}

Tensor local_entropy(const Tensor& img, int window, int bins) {
    if (img.n != 1 || img.c != 1)
        fail_data("local_entropy: expected (1,1,H,W), got " + img.shape_str());
    if (window < 3 || window % 2 == 0) fail_data("local_entropy: window must be odd and >= 3");
    if (bins < 2) fail_data("local_entropy: bins must be >= 2");
    int h = img.h, w = img.w, r = window / 2;
    // Bin indices once; reflect-101 border handling.
    std::vector<int> bin(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int k = static_cast<int>(static_cast<double>(img.at(0, 0, y, x)) * bins);
            bin[static_cast<size_t>(y) * w + x] = k >= bins ? bins - 1 : (k < 0 ? 0 : k);
        }
    auto reflect = [](int i, int n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
        return i;
    };
    Tensor out(1, 1, h, w);
    std::vector<int> hist(static_cast<size_t>(bins));
    double total = static_cast<double>(window) * window;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::fill(hist.begin(), hist.end(), 0);
            for (int dy = -r; dy <= r; ++dy) {
                int sy = reflect(y + dy, h);
                const int* row = bin.data() + static_cast<size_t>(sy) * w;
                for (int dx = -r; dx <= r; ++dx) ++hist[row[reflect(x + dx, w)]];
            }
            double e = 0;
            for (int k = 0; k < bins; ++k)
                if (hist[k]) {
                    double p = hist[k] / total;
                    e -= p * std::log2(p);
                }
            out.at(0, 0, y, x) = static_cast<real>(e);
        }
    return out;
}

Mask entropy_mask(const GatedImage& gated, int window, int bins, real tau_lo, real tau_hi) {
    Tensor e = local_entropy(gated.data, window, bins);
    Mask m(e.h, e.w);
    for (int64_t i = 0; i < e.size(); ++i)
        m.data.v[i] = (e.v[i] >= tau_lo && e.v[i] <= tau_hi) ? real(1) : real(0);
    return m;
}

}  // namespace zs
