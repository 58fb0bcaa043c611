#include "zeroscatter/weather.hpp"

#include <cmath>

namespace zs {

Mask transmission(const DepthMap& depth, const Tensor& beta_field) {
    depth.validate();
    const Tensor& d = depth.data;
    check_data(beta_field.n == 1 && beta_field.c == 1 && beta_field.h == d.h &&
                   beta_field.w == d.w,
               "transmission: beta_field shape " + beta_field.shape_str() +
                   " does not match depth " + d.shape_str());
    for (real b : beta_field.v)
        check_data(std::isfinite(b) && b >= real(0), "transmission: beta_field must be >= 0");
    Mask t;
    t.data = Tensor(1, 1, d.h, d.w);
    for (size_t i = 0; i < d.v.size(); ++i)
        t.data.v[i] = std::exp(-beta_field.v[i] * d.v[i]);
    return t;
}

namespace {

// Distance from (x,y) to the segment of half-length len/2 through (cx,cy)
// at angle `ang`.
double segment_dist(double x, double y, const ParticleSpec& p) {
    double ux = std::cos((double)p.angle), uy = std::sin((double)p.angle);
    double hl = 0.5 * (double)p.streak_len;
    double rx = x - (double)p.cx, ry = y - (double)p.cy;
    double s = rx * ux + ry * uy;
    s = std::min(std::max(s, -hl), hl);
    double dx = rx - s * ux, dy = ry - s * uy;
    return std::sqrt(dx * dx + dy * dy);
}

constexpr real kParticleColor = real(0.92);

}  // namespace

ScatterFields scatter_fields(const DepthMap& depth, const ScatterParams& params) {
    params.validate();
    Mask t = transmission(depth, params.beta_field);
    const int h = t.data.h, w = t.data.w;
    ScatterFields f;
    f.mult = Tensor(1, 3, h, w);
    f.add = Tensor(1, 3, h, w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                real tv = t.data.at(0, 0, y, x);
                f.mult.at(0, c, y, x) = tv;
                f.add.at(0, c, y, x) = params.airlight[c] * (real(1) - tv);
            }
    // Composite each particle over the haze: out' = out*(1-a) + color*a,
    // which keeps the operator affine in the input image.
    for (const ParticleSpec& p : params.particles) {
        check_data(p.radius > real(0), "scatter_fields: particle radius must be > 0");
        double reach = (double)p.radius + 0.5 * (double)p.streak_len + 1.0;
        int x0 = std::max(0, (int)std::floor((double)p.cx - reach));
        int x1 = std::min(w - 1, (int)std::ceil((double)p.cx + reach));
        int y0 = std::max(0, (int)std::floor((double)p.cy - reach));
        int y1 = std::min(h - 1, (int)std::ceil((double)p.cy + reach));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double cov = 1.0 - segment_dist(x, y, p) / (double)p.radius;
                if (cov <= 0.0) continue;
                real a = p.opacity * (real)std::min(cov, 1.0);
                for (int c = 0; c < 3; ++c) {
                    f.mult.at(0, c, y, x) *= real(1) - a;
                    f.add.at(0, c, y, x) =
                        f.add.at(0, c, y, x) * (real(1) - a) + kParticleColor * a;
                }
            }
    }
    return f;
}

Image apply_scatter(const Image& img, const DepthMap& depth, const ScatterParams& params) {
    img.validate();
    check_data(img.domain_tag != DomainTag::RawScatter,
               "apply_scatter: input is already in the scattered domain");
    check_data(img.data.h == depth.data.h && img.data.w == depth.data.w,
               "apply_scatter: image " + img.data.shape_str() + " vs depth " +
                   depth.data.shape_str());
    // Evaluated through the same elementwise ops the training graph uses, so
    // both paths agree bit for bit.
    ScatterFields f = scatter_fields(depth, params);
    ad::Graph g;
    g.set_grad_enabled(false);
    int y = scatter_graph(g, g.constant(img.data), g.constant(f.mult), g.constant(f.add));
    Image out = img;
    out.data = g.val(y);
    out.domain_tag = DomainTag::RawScatter;
    return out;
}

int scatter_graph(ad::Graph& g, int x, int mult, int add) {
    return g.clamp01(g.add(g.mul(x, mult), add));
}

Intensity intensity_from_string(const std::string& s) {
    if (s == "light") return Intensity::Light;
    if (s == "medium") return Intensity::Medium;
    if (s == "dense") return Intensity::Dense;
    fail_usage("unknown scattering intensity '" + s + "' (light|medium|dense)");
}

const char* to_string(Intensity i) {
    switch (i) {
        case Intensity::Light: return "light";
        case Intensity::Medium: return "medium";
        default: return "dense";
    }
}

std::pair<real, real> intensity_band(Intensity i) {
    switch (i) {
        case Intensity::Light: return {real(0.005), real(0.03)};
        case Intensity::Medium: return {real(0.03), real(0.08)};
        default: return {real(0.08), real(0.15)};
    }
}

Tensor resize_bilinear(const Tensor& t, int oh, int ow) {
    ad::Graph g;
    g.set_grad_enabled(false);
    return g.val(g.resize_bilinear(g.constant(t), oh, ow));
}

ScatterParams sample_scatter_params(uint64_t seed, Intensity intensity, int h, int w) {
    check_data(h > 0 && w > 0, "sample_scatter_params: bad frame size");
    Rng rng(seed_stream(seed, "scatter_params"));
    auto [lo, hi] = intensity_band(intensity);
    real base = rng.uniform(lo, hi);

    // Smooth heterogeneity: a coarse 4x4 grid in [0.5, 1.5] upsampled to the
    // frame, so extinction varies slowly across the image.
    Tensor coarse(1, 1, 4, 4);
    for (real& v : coarse.v) v = rng.uniform(real(0.5), real(1.5));
    Tensor field = resize_bilinear(coarse, h, w);

    ScatterParams p;
    p.beta_field = Tensor(1, 1, h, w);
    for (size_t i = 0; i < field.v.size(); ++i) p.beta_field.v[i] = base * field.v[i];

    real tone = rng.uniform(real(0.7), real(0.9));
    for (int c = 0; c < 3; ++c) {
        real a = tone + rng.uniform(real(-0.03), real(0.03));
        p.airlight[c] = std::min(std::max(a, real(0)), real(1));
    }

    int n_lo = 0, n_hi = 0;
    switch (intensity) {
        case Intensity::Light: n_lo = 0; n_hi = 3; break;
        case Intensity::Medium: n_lo = 2; n_hi = 8; break;
        case Intensity::Dense: n_lo = 6; n_hi = 16; break;
    }
    int count = rng.uniform_int(n_lo, n_hi);
    for (int i = 0; i < count; ++i) {
        ParticleSpec ps;
        ps.cx = rng.uniform(real(0), real(w - 1));
        ps.cy = rng.uniform(real(0), real(h - 1));
        ps.radius = rng.uniform(real(1), real(3));
        ps.opacity = rng.uniform(real(0.4), real(0.9));
        ps.streak_len = rng.uniform(real(0), real(6));
        ps.angle = rng.uniform(real(0), real(2) * real(M_PI));
        p.particles.push_back(ps);
    }
    p.seed = (int64_t)seed;
    p.validate();
    return p;
}

}  // namespace zs
