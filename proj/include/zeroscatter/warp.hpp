#pragma once

#include "zeroscatter/image.hpp"

namespace zs {

/// Raw bilinear gather kernel shared by the geometry ops and the autodiff
/// warp node. Output pixel p samples src at p + flow(p); interpolation is in
/// lerp form (a + t*(b-a)) so constant regions reproduce exactly. Sample
/// coordinates outside [0,W-1]x[0,H-1] produce 0.
Tensor warp_gather(const Tensor& src, const Tensor& flow);
/// Accumulate d(loss)/d(src) given d(loss)/d(out) under the same sampling.
void warp_gather_vjp(const Tensor& dout, const Tensor& flow, Tensor& dsrc);

/// 1 where the sample coordinate p + flow(p) lies inside [0,W-1]x[0,H-1].
Mask inview_mask(const Tensor& flow);

/// Warped adjacent frame on the current grid plus its in-view validity.
struct WarpResult {
    Image image;
    Mask validity;
};

/// Backward-warp src along a flow field defined on the output grid.
WarpResult backward_warp(const Image& src, const FlowField& flow);

/// Warp the right rectified view onto the left grid: sample at
/// (x - disparity, y). Disparity must be non-negative.
WarpResult stereo_warp(const Image& right, const Tensor& disparity);

/// Merge two warped adjacent frames: average where both are valid, pick the
/// valid one where only one is, fall back to `fallback` (excluded by the
/// merge mask) where neither is.
Image temporal_merge(const WarpResult& warp_prev, const WarpResult& warp_next,
                     const Image& fallback);
/// Union validity of the merge (at least one contributor valid).
Mask temporal_merge_mask(const Mask& valid_prev, const Mask& valid_next);

/// Photometric agreement weight exp(-alpha * mean_c |a - b|) per pixel.
Mask stereo_mask(const Image& a, const Image& b, real alpha = 10);

/// Occlusion test by forward-backward flow agreement: 1 where
/// |f_ab(p) + f_ba(p + f_ab(p))| <= tol px and the round trip stays in view.
Mask flow_consistency_mask(const FlowField& f_ab, const FlowField& f_ba, real tol = 1);

/// Per-pixel Shannon entropy (bits) of the local intensity histogram over an
/// odd square window with uniform bins on [0,1]; reflective border padding.
Tensor local_entropy(const Tensor& img, int window, int bins);

/// Binary informativeness mask of a gated capture: 1 where local entropy
/// lies in [tau_lo, tau_hi] bits (rejects flat or saturated regions and
/// near-uniform noise).
Mask entropy_mask(const GatedImage& gated, int window = 9, int bins = 16, real tau_lo = 0.5,
                  real tau_hi = 3.9);

}  // namespace zs
