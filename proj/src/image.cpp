#include "zeroscatter/image.hpp"

#include <cmath>

namespace zs {

const char* to_string(DomainTag t) {
    switch (t) {
        case DomainTag::RawClear: return "raw_clear";
        case DomainTag::RawScatter: return "raw_scatter";
        case DomainTag::Processed: return "processed";
        case DomainTag::Generated: return "generated";
    }
    return "?";
}

namespace {

void check_unit_range(const Tensor& t, const std::string& name) {
    for (real x : t.v) {
        if (!std::isfinite(x)) fail_data(name + ": non-finite value");
        if (x < real(0) || x > real(1)) fail_data(name + ": value outside [0,1]");
    }
}

void check_size_rule(int h, int w, const std::string& name) {
    if (h < 16 || w < 16 || h % 16 != 0 || w % 16 != 0)
        fail_data(name + ": dimensions " + std::to_string(h) + "x" + std::to_string(w) +
                  " must be >= 16 and divisible by 16");
}

}  // namespace

void Image::validate(const std::string& name) const {
    if (data.n != 1 || data.c != 3)
        fail_data(name + ": expected shape (1,3,H,W), got " + data.shape_str());
    check_size_rule(data.h, data.w, name);
    check_unit_range(data, name);
}

void DepthMap::validate(const std::string& name) const {
    if (data.n != 1 || data.c != 1)
        fail_data(name + ": expected shape (1,1,H,W), got " + data.shape_str());
    if (!(max_range > 0)) fail_data(name + ": max_range must be positive");
    for (real x : data.v) {
        if (!std::isfinite(x)) fail_data(name + ": non-finite depth");
        if (x <= real(0)) fail_data(name + ": depth must be strictly positive");
    }
}

void ScatterParams::validate() const {
    if (beta_field.n != 1 || beta_field.c != 1)
        fail_data("scatter params: beta_field expected shape (1,1,H,W), got " +
                  beta_field.shape_str());
    for (real x : beta_field.v) {
        if (!std::isfinite(x)) fail_data("scatter params: non-finite beta_field value");
        if (x < real(0)) fail_data("scatter params: beta_field must be non-negative");
    }
    for (real a : airlight)
        if (!(a >= real(0) && a <= real(1))) fail_data("scatter params: airlight outside [0,1]");
    for (size_t i = 0; i < particles.size(); ++i) {
        const ParticleSpec& p = particles[i];
        std::string who = "scatter params: particle " + std::to_string(i);
        if (!(p.radius > 0)) fail_data(who + ": radius must be positive");
        if (!(p.opacity >= real(0) && p.opacity <= real(1)))
            fail_data(who + ": opacity outside [0,1]");
        if (p.streak_len < 0) fail_data(who + ": streak length must be non-negative");
        if (!std::isfinite(p.cx) || !std::isfinite(p.cy) || !std::isfinite(p.angle))
            fail_data(who + ": non-finite field");
    }
}

void SceneSample::validate() const {
    left_prev.validate("left_prev");
    left_cur.validate("left_cur");
    left_next.validate("left_next");
    right_cur.validate("right_cur");
    clear_reference.validate("clear_ref");
    depth_left.validate("depth");

    int h = left_cur.height(), w = left_cur.width();
    auto want = [&](const Tensor& t, int c, const std::string& name) {
        if (t.n != 1 || t.c != c || t.h != h || t.w != w)
            fail_data("sample: " + name + " has shape " + t.shape_str() + ", expected (1," +
                      std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")");
    };
    want(left_prev.data, 3, "left_prev");
    want(left_next.data, 3, "left_next");
    want(right_cur.data, 3, "right_cur");
    want(clear_reference.data, 3, "clear_ref");
    want(depth_left.data, 1, "depth");
    want(disparity, 1, "disparity");
    want(flow_prev_to_cur.data, 2, "flow_prev");
    want(flow_next_to_cur.data, 2, "flow_next");
    want(gated.data, 1, "gated");

    for (real x : disparity.v) {
        if (!std::isfinite(x)) fail_data("sample: non-finite disparity");
        if (x < real(0)) fail_data("sample: disparity must be non-negative");
    }
    for (real x : flow_prev_to_cur.data.v)
        if (!std::isfinite(x)) fail_data("sample: non-finite flow_prev");
    for (real x : flow_next_to_cur.data.v)
        if (!std::isfinite(x)) fail_data("sample: non-finite flow_next");
    check_unit_range(gated.data, "gated");

    if (left_prev.time_index != -1 || left_cur.time_index != 0 || left_next.time_index != 1 ||
        right_cur.time_index != 0)
        fail_data("sample: frame time indices must be (-1, 0, 1) with right at 0");
    if (right_cur.view_tag != ViewTag::Right || left_cur.view_tag != ViewTag::Left)
        fail_data("sample: view tags must mark right_cur as the right view");
    if (left_prev.domain_tag != left_cur.domain_tag || left_next.domain_tag != left_cur.domain_tag ||
        right_cur.domain_tag != left_cur.domain_tag)
        fail_data("sample: all captured frames must share one domain tag");
    if (clear_reference.domain_tag != DomainTag::RawClear)
        fail_data("sample: clear_ref must be tagged raw_clear");

    if (params) {
        params->validate();
        if (params->beta_field.h != h || params->beta_field.w != w)
            fail_data("sample: beta_field has shape " + params->beta_field.shape_str() +
                      ", expected (1,1," + std::to_string(h) + "," + std::to_string(w) + ")");
        if (left_cur.domain_tag != DomainTag::RawScatter)
            fail_data("sample: scatter params present but frames tagged " +
                      std::string(to_string(left_cur.domain_tag)));
    } else if (left_cur.domain_tag != DomainTag::RawClear) {
        fail_data("sample: clear sample (no params) but frames tagged " +
                  std::string(to_string(left_cur.domain_tag)));
    }
}

real quantize16(real x) {
    real c = x < real(0) ? real(0) : (x > real(1) ? real(1) : x);
    return static_cast<real>(std::lround(static_cast<double>(c) * 65535.0) / 65535.0);
}

void quantize16_inplace(Tensor& t) {
    for (real& x : t.v) x = quantize16(x);
}

}  // namespace zs
