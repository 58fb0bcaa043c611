#pragma once

#include "zeroscatter/autodiff.hpp"
#include "zeroscatter/image.hpp"

namespace zs {

/// Per-pixel transmission t = exp(-beta * d), values in (0,1].
Mask transmission(const DepthMap& depth, const Tensor& beta_field);

/// The scattering operator is affine in the input image: out  =
/// clamp01(img * mult + add). Both fields are (1,3,H,W) and fold the
/// transmission, airlight and every composited particle.
struct ScatterFields {
    Tensor mult, add;
};
ScatterFields scatter_fields(const DepthMap& depth, const ScatterParams& params);

/// Koschmieder scattering I*t + A*(1-t) with a particle overlay, clipped to
/// [0,1]. Defined on clear-domain (or generated) images only.
Image apply_scatter(const Image& img, const DepthMap& depth, const ScatterParams& params);

/// Graph form of apply_scatter for losses that backpropagate through the
/// simulator: clamp01(x * mult + add). `mult`/`add` are constant nodes
/// (stacked per batch item when x is batched).
int scatter_graph(ad::Graph& g, int x, int mult, int add);

enum class Intensity { Light, Medium, Dense };
Intensity intensity_from_string(const std::string& s);
const char* to_string(Intensity i);

/// Band of the base extinction coefficient (per meter).
std::pair<real, real> intensity_band(Intensity i);

/// Draw scattering parameters for an HxW frame: base extinction from the
/// intensity band, modulated by a smooth low-frequency field in [0.5, 1.5];
/// near-achromatic airlight; particle count from the intensity band.
ScatterParams sample_scatter_params(uint64_t seed, Intensity intensity, int h, int w);

/// Plain bilinear resize of a (N,C,H,W) tensor (no graph involved).
Tensor resize_bilinear(const Tensor& t, int oh, int ow);

}  // namespace zs
