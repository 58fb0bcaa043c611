#pragma once

#include <utility>
#include <vector>

#include "zeroscatter/blocks.hpp"
#include "zeroscatter/image.hpp"

namespace zs {

/// Range-gating geometry of the synthetic gated sensor: a trapezoidal gate
/// that is 1 on [near, far], 0 outside [near-ramp, far+ramp], linear on the
/// ramps, with radiometric falloff (near/d)^falloff_exponent.
struct GateProfile {
    real near_m = real(10);
    real far_m = real(50);
    real ramp_m = real(8);
    real falloff_exponent = real(1);
    void validate() const;
};

real gate_weight(real depth_m, const GateProfile& prof);

/// g(x) = luminance(clear(x)) * w(d(x)) * (near/d(x))^falloff, clipped to
/// [0,1]. Scatter-free by construction: renders from the clear scene only.
GatedImage simulate_gated(const Image& clear, const DepthMap& depth, const GateProfile& prof);

/// Small U-Net (3 downsampling stages) mapping processed RGB to a gated
/// image. Parameters live under prefix "r2g." and stay frozen during main
/// training.
struct R2GMeta {
    int base_width = 16;
    std::map<std::string, std::string> to_map() const;
    static R2GMeta from_map(const std::map<std::string, std::string>& m);
};

void init_rgb2gated(ad::ParamStore& store, const R2GMeta& meta, uint64_t seed);

/// Graph forward on a (N,3,H,W) node; returns a (N,1,H,W) node in [0,1].
int r2g_graph(ad::Graph& g, const ad::Bound& b, const R2GMeta& meta, int x);

GatedImage rgb2gated_forward(const ad::ParamStore& store, const R2GMeta& meta,
                             const Image& img);

struct R2GTrainConfig {
    int steps = 1500;
    int batch_size = 2;
    double learning_rate = 2e-4;
    uint64_t seed = 1;
    double max_train_l1 = 0.05;  // acceptance gate on the final training L1
    R2GMeta meta;
    bool verbose = false;
};

/// Train the RGB-to-gated network on (processed clear RGB, simulated gated)
/// pairs with an L1 + perceptual objective. Rejects scatter-tagged inputs.
/// Returns the parameter store; `final_l1` (if given) receives the mean
/// training L1 of the last 50 steps. Fails with a numeric error when that
/// mean exceeds max_train_l1 (the net is not fit to anchor the gated loss).
ad::ParamStore train_rgb2gated(const std::vector<std::pair<Image, GatedImage>>& corpus,
                               const R2GTrainConfig& cfg, double* final_l1 = nullptr);

}  // namespace zs
