#pragma once

#include <array>
#include <optional>
#include <vector>

#include "zeroscatter/tensor.hpp"

namespace zs {

enum class DomainTag { RawClear, RawScatter, Processed, Generated };
enum class ViewTag { Left, Right };

const char* to_string(DomainTag t);

/// RGB image, unit interval, (1,3,H,W). H and W must be >= 16 and divisible
/// by 16 (the consistency block downsamples four times).
struct Image {
    Tensor data;
    DomainTag domain_tag = DomainTag::RawClear;
    ViewTag view_tag = ViewTag::Left;
    int time_index = 0;

    Image() = default;
    Image(int h, int w, DomainTag tag = DomainTag::RawClear) : data(1, 3, h, w), domain_tag(tag) {}

    int height() const { return data.h; }
    int width() const { return data.w; }

    void validate(const std::string& name = "image") const;
};

struct DepthMap {
    Tensor data;  // (1,1,H,W), meters, strictly positive
    real max_range = 0;

    DepthMap() = default;
    DepthMap(int h, int w, real maxr) : data(1, 1, h, w), max_range(maxr) {}

    void validate(const std::string& name = "depth") const;
};

struct FlowField {
    Tensor data;  // (1,2,H,W), (dx, dy) pixel displacements

    FlowField() = default;
    FlowField(int h, int w) : data(1, 2, h, w) {}
};

/// H x W weights in [0,1]; houses entropy/temporal/stereo/validity masks.
struct Mask {
    Tensor data;  // (1,1,H,W)

    Mask() = default;
    Mask(int h, int w, real fill = 0) : data(1, 1, h, w, fill) {}
};

struct GatedImage {
    Tensor data;  // (1,1,H,W) in [0,1]

    GatedImage() = default;
    GatedImage(int h, int w) : data(1, 1, h, w) {}
};

struct ParticleSpec {
    real cx = 0, cy = 0;     // center, px
    real radius = 1;         // px, > 0
    real opacity = 0.5;      // [0,1]
    real streak_len = 0;     // px
    real angle = 0;          // rad
};

struct ScatterParams {
    Tensor beta_field;  // (1,1,H,W), extinction per meter, >= 0
    std::array<real, 3> airlight{0.8, 0.8, 0.8};
    std::vector<ParticleSpec> particles;
    int64_t seed = 0;

    void validate() const;
};

/// One synthetic training tuple. Stereo pair + three consecutive frames with
/// analytically exact geometry; flows are defined on the current-frame grid
/// and point into the adjacent frame (backward-warp convention).
struct SceneSample {
    Image left_prev, left_cur, left_next, right_cur;
    DepthMap depth_left;
    Tensor disparity;  // (1,1,H,W), px, >= 0
    FlowField flow_prev_to_cur, flow_next_to_cur;
    GatedImage gated;
    Image clear_reference;
    std::optional<ScatterParams> params;

    int height() const { return left_cur.height(); }
    int width() const { return left_cur.width(); }

    void validate() const;
};

/// Quantize to the 16-bit PNG grid (round(x*65535)/65535). Generated images
/// are stored pre-quantized so save/load round-trips are bit-identical.
real quantize16(real x);
void quantize16_inplace(Tensor& t);

}  // namespace zs
