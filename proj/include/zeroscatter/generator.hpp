#pragma once

#include <map>
#include <utility>

#include "zeroscatter/blocks.hpp"
#include "zeroscatter/image.hpp"

namespace zs {

/// Architecture configuration; the parameter set and layer graph are pure
/// functions of this. Stored in every checkpoint's metadata.
struct GenMeta {
    int base_width = 32;
    int dilation = 2;   // dilation rate of the wide translation stream
    int gc_stages = 4;  // downsampling stages of the consistency block

    void validate() const;
    std::map<std::string, std::string> to_map() const;
    static GenMeta from_map(const std::map<std::string, std::string>& m);
};

/// Create all translation-block ("gt.") and consistency-block ("gc.")
/// parameters. The consistency head is zero-initialized so the residual
/// output starts as the identity.
void init_generator(ad::ParamStore& store, const GenMeta& meta, uint64_t seed);

/// Translation block on a (N,3,H,W) node: two parallel full-resolution
/// streams (3x3 and dilated 5x5), concatenated and fused, plus a 4x
/// low-resolution path fused back before the bounded output head.
int translation_graph(ad::Graph& g, const ad::Bound& b, const GenMeta& meta, int x);

/// Consistency block: U-Net with `gc_stages` strided-conv downsampling
/// stages, bilinear-resize upsampling, a skip at every resolution and a
/// residual head: clamp01(x + correction).
int consistency_graph(ad::Graph& g, const ad::Bound& b, const GenMeta& meta, int x);

Image translation_forward(const ad::ParamStore& store, const GenMeta& meta, const Image& img);
Image consistency_forward(const ad::ParamStore& store, const GenMeta& meta, const Image& img);
Image full_forward(const ad::ParamStore& store, const GenMeta& meta, const Image& img,
                   bool use_consistency = true);

/// Final features of the 3x3 stream and the dilated stream at equal depth,
/// for receptive-field probes.
std::pair<Tensor, Tensor> translation_stream_features(const ad::ParamStore& store,
                                                      const GenMeta& meta, const Image& img);

}  // namespace zs
