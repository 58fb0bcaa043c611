#pragma once

#include <vector>

#include "zeroscatter/image.hpp"

namespace zs {

struct ProcConfig {
    int tile_rows = 8, tile_cols = 8;
    real clip_limit = real(2.0);
    real gamma = real(2.2);
    void validate() const;
};

/// Per-tile luminance lookup tables for contrast-limited equalization.
/// lut[r*cols + c] maps a luminance bin to an output level in (0,1];
/// every table is non-decreasing.
struct TileMaps {
    int rows = 0, cols = 0, tile_h = 0, tile_w = 0, bins = 0;
    std::vector<std::vector<real>> lut;
    const std::vector<real>& at(int r, int c) const { return lut[r * cols + c]; }
};

TileMaps compute_tile_maps(const Tensor& luma, int rows, int cols, real clip_limit,
                           int bins = 256);

/// Fixed (non-learned) post-processing operator: gamma encoding, then
/// contrast-limited adaptive equalization of the luminance channel with
/// bilinear interpolation between tile mappings, chroma preserved.
Image process(const Image& img, const ProcConfig& cfg = {});

}  // namespace zs
