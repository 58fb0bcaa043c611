#pragma once

#include <filesystem>
#include <iosfwd>

#include "zeroscatter/io.hpp"
#include "zeroscatter/losses.hpp"
#include "zeroscatter/metrics.hpp"
#include "zeroscatter/scene.hpp"

namespace zs {

namespace fs = std::filesystem;

/// Flat `key = value` training configuration; keys are the field names.
struct TrainConfig {
    double learning_rate = 5e-5;
    int batch_size = 2;  // per population (clear and scatter drawn independently)
    int64_t max_steps = 10000;
    double w_model = 1, w_mm = 1, w_cons = 1;
    double c2c_l1 = 1, c2c_perc = 1, c2c_grad = 1, c2c_adv = 0.1;
    bool enable_multimodal = true;
    bool enable_consistency = true;
    bool enable_gc_block = true;
    bool detach_gc_from_model_losses = true;
    uint64_t seed = 1;
    std::string data_root;
    std::string out_root;
    std::string resume;  // checkpoint to continue from
    int64_t checkpoint_every = 1000;
    int gen_base_width = 32;
    int disc_base_width = 16;
    int r2g_base_width = 16;
    int r2g_steps = 1500;
    int log_every = 50;  // stdout cadence; the jsonl log gets every step

    void validate() const;
    LossConfig loss_config() const;
};

TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const fs::path& path);

/// Everything a training run owns: one parameter store holding the
/// translation block ("gt."), consistency block ("gc."), both
/// discriminators ("disc.") and the frozen gated network ("r2g."), plus the
/// regenerated perceptual extractor and optimizer step counters.
struct TrainState {
    ad::ParamStore params;
    ad::ParamStore perc;
    GenMeta gen_meta;
    DiscMeta disc_meta;
    R2GMeta r2g_meta;
    LossConfig loss_cfg;
    ProcConfig proc;
    double learning_rate = 5e-5;
    uint64_t seed = 1;
    int64_t step = 0;
    int64_t gen_t = 0, disc_t = 0;  // Adam bias-correction counters
};

/// Generator and discriminator parameters freshly initialized from the
/// config; the gated network is NOT included (see prepare_rgb2gated).
TrainState init_state(const TrainConfig& cfg);

void save_state(const TrainState& st, const fs::path& path);
TrainState load_state(const fs::path& path);

/// Ensure frozen gated-network parameters exist in the state: load
/// `rgb2gated.zsc` from out_root (then data_root), else train one on the
/// clear split and save it to out_root.
void prepare_rgb2gated(TrainState& st, const TrainConfig& cfg,
                       const std::vector<SceneSample>& clear_samples);

/// One alternating update: discriminator step on both adversaries with the
/// generator frozen, then a generator step on the total loss with the
/// discriminators frozen. Aborts with a numeric error naming the first
/// non-finite loss component.
LossReport train_step(TrainState& st, const std::vector<const SceneSample*>& clear_batch,
                      const std::vector<const SceneSample*>& scatter_batch);

/// Full run: dataset load, gated-network preparation, training loop with
/// per-step jsonl logging and checkpoint cadence. Returns the final state.
TrainState run_training(const TrainConfig& cfg);

struct EvalRow {
    std::string id;
    double psnr_model = 0, ssim_model = 0;
    double psnr_input = 0, ssim_input = 0;
    double psnr_proc = 0, ssim_proc = 0;
};

struct MetricReport {
    std::vector<EvalRow> rows;  // sorted by id
    double psnr_model = 0, ssim_model = 0;  // aggregate means
    double psnr_input = 0, ssim_input = 0;
    double psnr_proc = 0, ssim_proc = 0;
    std::string to_table() const;
    std::string to_json() const;
};

/// Paired evaluation on the scatter split: model output against
/// F_Proc(clear_reference), with raw-input and F_Proc(input) baselines.
/// Errors when the split holds no paired samples.
MetricReport evaluate(const TrainState& st, const std::vector<SceneSample>& scatter_samples,
                      const std::vector<std::string>& ids);
MetricReport evaluate_dataset(const TrainState& st, const fs::path& data_root);

/// Descatter every input image to `<stem>_descattered.png` under out_dir.
/// Images whose dimensions are not divisible by 16 are reflect-padded for
/// the forward pass and cropped back (noted in the log). Logs per-image
/// wall time to `log` when given.
std::vector<fs::path> infer(const TrainState& st, const std::vector<fs::path>& inputs,
                            const fs::path& out_dir, std::ostream* log = nullptr);

int exit_code_for(ErrorKind kind);

}  // namespace zs
