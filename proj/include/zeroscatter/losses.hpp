#pragma once

#include "zeroscatter/gated.hpp"
#include "zeroscatter/generator.hpp"
#include "zeroscatter/isp.hpp"
#include "zeroscatter/warp.hpp"
#include "zeroscatter/weather.hpp"

namespace zs {

// ---------------------------------------------------------------- elementary

/// Mean |a - b| over all elements.
int l1_graph(ad::Graph& g, int a, int b);

/// Mask-weighted mean: sum(mask * |a-b|) / (C * sum(mask)), mask (N,1,H,W)
/// broadcast over channels. Errors on an all-zero mask.
int masked_l1_graph(ad::Graph& g, int a, int b, const Tensor& mask);

/// Mean absolute difference of forward-difference gradients, x plus y.
int gradient_loss_graph(ad::Graph& g, int a, int b);

struct PerceptualConfig {
    // No pretrained classifier ships with this sandbox; the supported
    // extractor is a fixed randomly initialized conv pyramid with frozen
    // weights. Setting use_fallback = false asks for a pretrained extractor
    // and fails with a pointer here.
    bool use_fallback = true;
    int stages = 3;
    int base_width = 8;
    uint64_t seed = 7313;
};

/// Fixed feature extractor under prefix "perc."; never trained.
ad::ParamStore make_perceptual_extractor(const PerceptualConfig& cfg);

/// Sum over stages of (optionally mask-weighted) L1 between feature maps.
/// The mask is resized to each stage's resolution. Accepts 1- or 3-channel
/// inputs (single channels are replicated).
int perceptual_graph(ad::Graph& g, const ad::Bound& perc, const PerceptualConfig& cfg, int a,
                     int b, const Tensor* mask = nullptr);

real l1_loss(const Image& a, const Image& b, const Mask* weight_mask = nullptr);
real gradient_loss(const Image& a, const Image& b);
real perceptual_loss(const ad::ParamStore& perc, const PerceptualConfig& cfg, const Image& a,
                     const Image& b, const Mask* weight_mask = nullptr);
real perceptual_loss(const ad::ParamStore& perc, const PerceptualConfig& cfg,
                     const GatedImage& a, const GatedImage& b,
                     const Mask* weight_mask = nullptr);

// --------------------------------------------------------------- adversaries

struct DiscMeta {
    int base_width = 16;
    int layers = 5;  // strided conv layers of the patch discriminator
    void validate() const;
};

/// Two independent patch discriminators under "disc.c2c." and "disc.s2s.".
void init_discriminators(ad::ParamStore& store, const DiscMeta& meta, uint64_t seed);

/// Patch logit map for discriminator `which` ("c2c" or "s2s").
int disc_graph(ad::Graph& g, const ad::Bound& b, const DiscMeta& meta, const std::string& which,
               int x);

/// Least-squares GAN objectives over patch logit maps.
int lsgan_disc_loss(ad::Graph& g, int d_real, int d_fake);
int lsgan_gen_loss(ad::Graph& g, int d_fake);

/// Scalar (gen_loss, disc_loss) pair for a real/fake image pair.
std::pair<double, double> adversarial_losses(const ad::ParamStore& disc, const DiscMeta& meta,
                                             const Image& real_side, const Image& fake_side,
                                             const std::string& which);

// ------------------------------------------------------------ composite loss

struct LossWeights {
    real w_model = 1, w_mm = 1, w_cons = 1;
    real c2c_l1 = 1, c2c_perc = 1, c2c_grad = 1, c2c_adv = real(0.1);
    void validate() const;  // all >= 0
};

struct LossConfig {
    LossWeights weights;
    bool enable_multimodal = true;
    bool enable_consistency = true;
    bool enable_gc_block = true;
    // Default routing: translation trains on the model losses, the
    // consistency block only on the consistency losses. When false, the C2C
    // terms run through the full two-block composite instead.
    bool detach_gc_from_model_losses = true;
    real stereo_alpha = real(10);
    PerceptualConfig perceptual;
};

struct LossReport {
    int64_t step = 0;
    double c2c = 0, s2s = 0, multimodal = 0, temporal = 0, stereo = 0, total = 0;
    double disc_c2c = 0, disc_s2s = 0;
    std::map<std::string, double> weights;
    std::string to_json() const;
};

/// Frozen operator bundle consumed by the per-term losses.
struct ModelSet {
    const ad::ParamStore* gen = nullptr;
    const ad::ParamStore* disc = nullptr;
    const ad::ParamStore* r2g = nullptr;
    const ad::ParamStore* perc = nullptr;
    GenMeta gen_meta;
    DiscMeta disc_meta;
    R2GMeta r2g_meta;
    LossConfig cfg;
    ProcConfig proc;
};

/// Per-term evaluations on a single sample (forward only, no gradients).
/// Each returns a report with only its own component and `total` filled.
LossReport c2c_loss(const ModelSet& m, const SceneSample& clear_sample, uint64_t seed);
LossReport s2s_loss(const ModelSet& m, const SceneSample& scatter_sample, uint64_t seed);
LossReport multimodal_loss(const ModelSet& m, const SceneSample& scatter_sample);
LossReport temporal_loss(const ModelSet& m, const SceneSample& sample);
LossReport stereo_loss(const ModelSet& m, const SceneSample& sample);
LossReport total_loss(const ModelSet& m, const std::vector<const SceneSample*>& clear_batch,
                      const std::vector<const SceneSample*>& scatter_batch, uint64_t seed);

/// Everything one optimization step consumes, stacked batch-major. The two
/// populations are unpaired and may have different sizes; either may be empty
/// (its terms are then skipped).
struct GenBatch {
    // clear population: input, processed target, synthetic-scatter fields
    Tensor clear_in, clear_target, clear_mult, clear_add;
    // scatter population
    Tensor scat_in;                // raw scattered capture
    Tensor scat_proc;              // processed capture (adversarial real side)
    Tensor scat_mult, scat_add;    // fresh re-scatter fields
    Tensor gated, ment;            // real gated capture + entropy mask
    Tensor merged, mtemp;          // merged warped adjacent frames + union mask
    Tensor warped_right, mstereo;  // warped right view + stereo weight mask

    int clear_count() const { return clear_in.n; }
    int scatter_count() const { return scat_in.n; }
};

/// Assemble a batch from scene samples: clear samples feed the C2C cycle,
/// scatter samples the S2S / multi-modal / consistency terms. Scatter
/// parameters are sampled fresh from `seed` with mixed intensities.
GenBatch prepare_batch(const std::vector<const SceneSample*>& clear_samples,
                       const std::vector<const SceneSample*>& scatter_samples,
                       const ProcConfig& proc, const LossConfig& cfg, uint64_t seed);

struct TotalLossNodes {
    int total = -1;
    int c2c = -1, s2s = -1, multimodal = -1, temporal = -1, stereo = -1;
    int c2c_l1 = -1, c2c_perc = -1, c2c_grad = -1, c2c_adv = -1;
    // all-zero mask short-circuits: the term was forced to 0
    bool mm_empty_mask = false, temp_empty_mask = false, stereo_empty_mask = false;
};

/// Generator-side training graph. `gen` must be bound trainable; `disc`,
/// `r2g` and `perc` frozen.
TotalLossNodes total_loss_graph(ad::Graph& g, const ad::Bound& gen, const ad::Bound& disc,
                                const ad::Bound& r2g, const ad::Bound& perc, const GenMeta& gmeta,
                                const DiscMeta& dmeta, const R2GMeta& rmeta,
                                const GenBatch& batch, const LossConfig& cfg);

/// Fake images for the discriminator step, computed with the generator
/// frozen: (c2c fake, s2s fake) = (G_T applied to the re-scattered clear
/// input, re-scattered G_T output of the scattered input).
std::pair<Tensor, Tensor> make_disc_fakes(const ad::ParamStore& gen, const GenMeta& gmeta,
                                          const GenBatch& batch, const LossConfig& cfg);

struct DiscLossNodes {
    int total = -1, c2c = -1, s2s = -1;
};

/// Discriminator-side graph on fixed real/fake images.
DiscLossNodes disc_loss_graph(ad::Graph& g, const ad::Bound& disc, const DiscMeta& dmeta,
                              const GenBatch& batch, const Tensor& c2c_fake,
                              const Tensor& s2s_fake);

/// Read component values out of an evaluated generator-side graph.
LossReport report_from_nodes(const ad::Graph& g, const TotalLossNodes& n, const LossWeights& w);

}  // namespace zs
