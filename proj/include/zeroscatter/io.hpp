#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zeroscatter/autodiff.hpp"
#include "zeroscatter/image.hpp"

namespace zs::io {

namespace fs = std::filesystem;

/// 16-bit PNG, RGB for C=3 and grayscale for C=1. Values clamped to [0,1].
void write_png16(const fs::path& path, const Tensor& t);
/// 8-bit grayscale PNG (mask debug dumps).
void write_png8_gray(const fs::path& path, const Tensor& t);
/// Reads 8- or 16-bit, gray or RGB(A) PNG into (1,C,H,W) with C in {1,3}.
Tensor read_png(const fs::path& path);

/// PFM, 32-bit little-endian. C=1 -> "Pf", C=3 -> "PF". 2-channel tensors
/// are stored as "PF" with a zero third plane and read back as 2 channels
/// when expect_c == 2.
void write_pfm(const fs::path& path, const Tensor& t);
Tensor read_pfm(const fs::path& path, int expect_c);

std::string params_to_json(const ScatterParams& p);
ScatterParams params_from_json(const std::string& text, const std::string& context);

/// Sample directory layout:
///   left_prev.png left_cur.png left_next.png right_cur.png depth.pfm
///   disparity.pfm flow_prev.pfm flow_next.pfm gated.png clear_ref.png params.json
void save_sample(const SceneSample& s, const fs::path& dir);
SceneSample load_sample(const fs::path& dir);

/// Dataset root holds unpaired `clear/` and `scatter/` subtrees.
struct DatasetIndex {
    std::vector<fs::path> clear_dirs;
    std::vector<fs::path> scatter_dirs;
};
DatasetIndex index_dataset(const fs::path& root);

/// Checkpoint (.zsc): a metadata string map plus every parameter tensor with
/// its Adam moments. Binary little-endian, tied to the build's real width.
void save_checkpoint(const fs::path& path, const ad::ParamStore& store,
                     const std::map<std::string, std::string>& meta);
ad::ParamStore load_checkpoint(const fs::path& path, std::map<std::string, std::string>& meta);

}  // namespace zs::io
