#include "zeroscatter/gated.hpp"

#include <iostream>

#include "zeroscatter/losses.hpp"

namespace zs {

void GateProfile::validate() const {
    if (!(near_m > 0) || !(far_m > near_m)) fail_usage("gate range must satisfy 0 < near < far");
    if (!(ramp_m > 0)) fail_usage("gate ramp must be positive");
    if (!(falloff_exponent >= 0)) fail_usage("gate falloff exponent must be >= 0");
}

real gate_weight(real depth_m, const GateProfile& p) {
    if (depth_m <= p.near_m - p.ramp_m || depth_m >= p.far_m + p.ramp_m) return 0;
    if (depth_m < p.near_m) return (depth_m - (p.near_m - p.ramp_m)) / p.ramp_m;
    if (depth_m <= p.far_m) return 1;
    return (p.far_m + p.ramp_m - depth_m) / p.ramp_m;
}

GatedImage simulate_gated(const Image& clear, const DepthMap& depth, const GateProfile& prof) {
    prof.validate();
    clear.validate("gated input");
    depth.validate("gated depth");
    check_data(clear.height() == depth.data.h && clear.width() == depth.data.w,
               "gated simulation: image and depth dimensions differ");
    if (clear.domain_tag == DomainTag::RawScatter)
        fail_data("gated simulation renders the clear scene; got a scatter-tagged image");
    int h = clear.height(), w = clear.width();
    GatedImage out(h, w);
    const Tensor& im = clear.data;
    for (int64_t i = 0; i < out.data.size(); ++i) {
        real y = real(0.299) * im.v[i] + real(0.587) * im.v[i + im.plane()] +
                 real(0.114) * im.v[i + 2 * im.plane()];
        real d = depth.data.v[i];
        real g = y * gate_weight(d, prof) *
                 static_cast<real>(std::pow(prof.near_m / d, prof.falloff_exponent));
        out.data.v[i] = g < 0 ? real(0) : (g > 1 ? real(1) : g);
    }
    return out;
}

// ----------------------------------------------------------------- RGB2Gated

std::map<std::string, std::string> R2GMeta::to_map() const {
    return {{"r2g_base_width", std::to_string(base_width)}};
}

R2GMeta R2GMeta::from_map(const std::map<std::string, std::string>& m) {
    R2GMeta meta;
    auto it = m.find("r2g_base_width");
    if (it != m.end()) meta.base_width = std::stoi(it->second);
    return meta;
}

void init_rgb2gated(ad::ParamStore& store, const R2GMeta& meta, uint64_t seed) {
    if (meta.base_width < 2) fail_usage("rgb2gated base_width must be >= 2");
    Rng rng(seed_stream(seed, "r2g"));
    int w = meta.base_width;
    auto block = [&](const std::string& name, int cin, int cout) {
        add_conv(store, name, cin, cout, 3, rng);
        add_norm(store, name, cout);
    };
    block("r2g.e0", 3, w);
    block("r2g.e1", w, 2 * w);
    block("r2g.e2", 2 * w, 4 * w);
    block("r2g.e3", 4 * w, 4 * w);
    block("r2g.mid", 4 * w, 4 * w);
    block("r2g.u2", 8 * w, 2 * w);
    block("r2g.u1", 4 * w, w);
    block("r2g.u0", 2 * w, w);
    add_conv(store, "r2g.head", w, 1, 3, rng, 1.0);
}

int r2g_graph(ad::Graph& g, const ad::Bound& b, const R2GMeta& meta, int x) {
    (void)meta;
    const Tensor& xv = g.val(x);
    check_data(xv.c == 3, "rgb2gated expects 3-channel input");
    check_data(xv.h % 8 == 0 && xv.w % 8 == 0,
               "rgb2gated needs dimensions divisible by 8, got " + xv.shape_str());
    BlockOpts down;
    down.stride = 2;
    int x0 = conv_block(g, b, "r2g.e0", x);
    int x1 = conv_block(g, b, "r2g.e1", x0, down);
    int x2 = conv_block(g, b, "r2g.e2", x1, down);
    int x3 = conv_block(g, b, "r2g.e3", x2, down);
    int m = conv_block(g, b, "r2g.mid", x3);
    auto up_to = [&](int t, int skip) {
        const Tensor& sv = g.val(skip);
        return g.concat_c({g.resize_bilinear(t, sv.h, sv.w), skip});
    };
    int u2 = conv_block(g, b, "r2g.u2", up_to(m, x2));
    int u1 = conv_block(g, b, "r2g.u1", up_to(u2, x1));
    int u0 = conv_block(g, b, "r2g.u0", up_to(u1, x0));
    return g.sigmoid(conv_plain(g, b, "r2g.head", u0));
}

GatedImage rgb2gated_forward(const ad::ParamStore& store, const R2GMeta& meta, const Image& img) {
    img.validate("rgb2gated input");
    ad::Graph g;
    g.set_grad_enabled(false);
    ad::Bound b = ad::bind_frozen(g, store, {"r2g."});
    int out = r2g_graph(g, b, meta, g.constant(img.data));
    GatedImage res;
    res.data = g.val(out);
    return res;
}

ad::ParamStore train_rgb2gated(const std::vector<std::pair<Image, GatedImage>>& corpus,
                               const R2GTrainConfig& cfg, double* final_l1) {
    if (corpus.empty()) fail_data("rgb2gated training corpus is empty");
    if (cfg.steps < 1 || cfg.batch_size < 1)
        fail_usage("rgb2gated training needs positive steps and batch size");
    const Tensor& ref = corpus.front().first.data;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const auto& [im, gt] = corpus[i];
        if (im.domain_tag == DomainTag::RawScatter)
            fail_data("rgb2gated corpus item " + std::to_string(i) +
                      " is scatter-tagged; the network must never see scattered frames");
        check_data(im.data.same_shape(ref), "rgb2gated corpus items differ in shape");
        check_data(gt.data.h == im.height() && gt.data.w == im.width(),
                   "rgb2gated corpus pair " + std::to_string(i) + " has mismatched dimensions");
    }

    ad::ParamStore store;
    init_rgb2gated(store, cfg.meta, seed_stream(cfg.seed, "r2g_init"));
    PerceptualConfig pcfg;
    ad::ParamStore perc = make_perceptual_extractor(pcfg);
    ad::AdamConfig acfg;
    acfg.lr = cfg.learning_rate;
    ad::Adam opt(acfg, "r2g.");

    int tail = std::min(50, cfg.steps);
    double l1_acc = 0;
    int l1_cnt = 0;
    for (int step = 0; step < cfg.steps; ++step) {
        Rng rng(seed_stream(cfg.seed, "r2g_batch", step));
        std::vector<const Tensor*> xs, ys;
        for (int k = 0; k < cfg.batch_size; ++k) {
            int idx = rng.uniform_int(0, static_cast<int>(corpus.size()) - 1);
            xs.push_back(&corpus[idx].first.data);
            ys.push_back(&corpus[idx].second.data);
        }
        Tensor xb = stack_batch(xs), yb = stack_batch(ys);

        ad::Graph g;
        ad::Bound b = ad::bind_params(g, store, {"r2g."});
        ad::Bound pb = ad::bind_frozen(g, perc, {"perc."});
        int out = r2g_graph(g, b, cfg.meta, g.constant(xb));
        int tgt = g.constant(yb);
        int l1 = l1_graph(g, out, tgt);
        int loss = g.add(l1, g.mul_scalar(perceptual_graph(g, pb, pcfg, out, tgt), real(0.1)));
        g.check_finite(loss, "rgb2gated loss");
        g.backward(loss);
        opt.step(store, g, b);

        if (step >= cfg.steps - tail) {
            l1_acc += g.scalar(l1);
            ++l1_cnt;
        }
        if (cfg.verbose && (step % 100 == 0 || step + 1 == cfg.steps))
            std::cerr << "[r2g] step " << step << " l1 " << g.scalar(l1) << "\n";
    }
    double mean_l1 = l1_cnt ? l1_acc / l1_cnt : 0.0;
    if (final_l1) *final_l1 = mean_l1;
    if (mean_l1 > cfg.max_train_l1)
        fail_numeric("rgb2gated training L1 " + std::to_string(mean_l1) +
                     " exceeds the acceptance threshold " + std::to_string(cfg.max_train_l1));
    return store;
}

}  // namespace zs
