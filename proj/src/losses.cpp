#include "zeroscatter/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <iostream>

namespace zs {

int l1_graph(ad::Graph& g, int a, int b) { return g.mean_all(g.abs_(g.sub(a, b))); }

int masked_l1_graph(ad::Graph& g, int a, int b, const Tensor& mask) {
    // note: g.val references go stale once ops are added; copy what we need
    int an = g.val(a).n, ac = g.val(a).c;
    check_data(mask.c == 1 && mask.h == g.val(a).h && mask.w == g.val(a).w,
               "weight mask shape does not match the loss operands");
    double ms = mask.sum();
    if (!(ms > 0)) fail_data("weight mask is all-zero: weighted mean is undefined");
    if (mask.n == 1 && an > 1) ms *= an;  // broadcast across the batch
    int m = g.constant(mask);
    int num = g.sum_all(g.mul_bcast(g.abs_(g.sub(a, b)), m));
    return g.mul_scalar(num, static_cast<real>(1.0 / (ms * ac)));
}

int gradient_loss_graph(ad::Graph& g, int a, int b) {
    int gx = g.mean_all(g.abs_(g.sub(g.diff_x(a), g.diff_x(b))));
    int gy = g.mean_all(g.abs_(g.sub(g.diff_y(a), g.diff_y(b))));
    return g.add(gx, gy);
}

// ------------------------------------------------------------------ perceptual

static std::string perc_layer(int i) { return "perc.s" + std::to_string(i); }

ad::ParamStore make_perceptual_extractor(const PerceptualConfig& cfg) {
    if (!cfg.use_fallback)
        fail_usage(
            "no pretrained feature extractor is bundled; enable the fixed random pyramid "
            "(perceptual use_fallback = true)");
    if (cfg.stages < 1 || cfg.stages > 6) fail_usage("perceptual stages must be in [1, 6]");
    if (cfg.base_width < 1) fail_usage("perceptual base_width must be positive");
    ad::ParamStore s;
    Rng rng(seed_stream(cfg.seed, "perceptual"));
    int cin = 3;
    for (int i = 0; i < cfg.stages; ++i) {
        int cout = cfg.base_width << std::min(i, 2);
        add_conv(s, perc_layer(i), cin, cout, 3, rng);
        cin = cout;
    }
    return s;
}

static int to_rgb_width(ad::Graph& g, int x) {
    int c = g.val(x).c;
    if (c == 3) return x;
    if (c == 1) return g.concat_c({x, x, x});
    fail_data("perceptual extractor expects 1- or 3-channel inputs");
}

int perceptual_graph(ad::Graph& g, const ad::Bound& perc, const PerceptualConfig& cfg, int a,
                     int b, const Tensor* mask) {
    check_data(g.val(a).same_shape(g.val(b)), "perceptual loss operands differ in shape");
    int fa = to_rgb_width(g, a);
    int fb = to_rgb_width(g, b);
    int total = -1;
    for (int i = 0; i < cfg.stages; ++i) {
        BlockOpts o;
        o.stride = 2;
        fa = conv_block(g, perc, perc_layer(i), fa, o);
        fb = conv_block(g, perc, perc_layer(i), fb, o);
        int stage;
        if (mask) {
            int fh = g.val(fa).h, fw = g.val(fa).w;
            stage = masked_l1_graph(g, fa, fb, resize_bilinear(*mask, fh, fw));
        } else {
            stage = l1_graph(g, fa, fb);
        }
        total = total < 0 ? stage : g.add(total, stage);
    }
    return total;
}

// --------------------------------------------------------------- value wrappers

real l1_loss(const Image& a, const Image& b, const Mask* weight_mask) {
    check_data(a.data.same_shape(b.data), "l1 loss operands differ in shape");
    ad::Graph g;
    g.set_grad_enabled(false);
    int ia = g.constant(a.data), ib = g.constant(b.data);
    int l = weight_mask ? masked_l1_graph(g, ia, ib, weight_mask->data) : l1_graph(g, ia, ib);
    return static_cast<real>(g.scalar(l));
}

real gradient_loss(const Image& a, const Image& b) {
    check_data(a.data.same_shape(b.data), "gradient loss operands differ in shape");
    ad::Graph g;
    g.set_grad_enabled(false);
    return static_cast<real>(g.scalar(gradient_loss_graph(g, g.constant(a.data), g.constant(b.data))));
}

static real perceptual_value(const ad::ParamStore& perc, const PerceptualConfig& cfg,
                             const Tensor& a, const Tensor& b, const Tensor* mask) {
    ad::Graph g;
    g.set_grad_enabled(false);
    ad::Bound pb = ad::bind_frozen(g, perc, {"perc."});
    int l = perceptual_graph(g, pb, cfg, g.constant(a), g.constant(b), mask);
    return static_cast<real>(g.scalar(l));
}

real perceptual_loss(const ad::ParamStore& perc, const PerceptualConfig& cfg, const Image& a,
                     const Image& b, const Mask* weight_mask) {
    return perceptual_value(perc, cfg, a.data, b.data, weight_mask ? &weight_mask->data : nullptr);
}

real perceptual_loss(const ad::ParamStore& perc, const PerceptualConfig& cfg, const GatedImage& a,
                     const GatedImage& b, const Mask* weight_mask) {
    return perceptual_value(perc, cfg, a.data, b.data, weight_mask ? &weight_mask->data : nullptr);
}

// ---------------------------------------------------------------- adversaries

void DiscMeta::validate() const {
    if (base_width < 2) fail_usage("discriminator base_width must be >= 2");
    if (layers != 5) fail_usage("the patch discriminator is fixed at 5 strided layers");
}

static std::string disc_layer(const std::string& which, int l) {
    return "disc." + which + ".l" + std::to_string(l);
}

void init_discriminators(ad::ParamStore& store, const DiscMeta& meta, uint64_t seed) {
    meta.validate();
    for (const char* which : {"c2c", "s2s"}) {
        Rng rng(seed_stream(seed, std::string("disc.") + which));
        int w = meta.base_width;
        int chans[6] = {3, w, 2 * w, 4 * w, 4 * w, 1};
        for (int l = 0; l < meta.layers; ++l) {
            bool final_layer = l + 1 == meta.layers;
            add_conv(store, disc_layer(which, l), chans[l], chans[l + 1], 3, rng,
                     final_layer ? 1.0 : std::sqrt(2.0));
            // Normalization only where the patch map stays larger than 1x1
            // for every supported input size; border layers run bare.
            if (l == 1 || l == 2) add_norm(store, disc_layer(which, l), chans[l + 1]);
        }
    }
}

int disc_graph(ad::Graph& g, const ad::Bound& b, const DiscMeta& meta, const std::string& which,
               int x) {
    meta.validate();
    if (which != "c2c" && which != "s2s") fail_usage("unknown discriminator '" + which + "'");
    int y = x;
    for (int l = 0; l < meta.layers; ++l) {
        BlockOpts o;
        o.stride = 2;
        o.act = l + 1 < meta.layers;
        y = conv_block(g, b, disc_layer(which, l), y, o);
    }
    return y;
}

int lsgan_disc_loss(ad::Graph& g, int d_real, int d_fake) {
    int lr = g.mean_all(g.square(g.add_scalar(d_real, real(-1))));
    int lf = g.mean_all(g.square(d_fake));
    return g.mul_scalar(g.add(lr, lf), real(0.5));
}

int lsgan_gen_loss(ad::Graph& g, int d_fake) {
    return g.mul_scalar(g.mean_all(g.square(g.add_scalar(d_fake, real(-1)))), real(0.5));
}

std::pair<double, double> adversarial_losses(const ad::ParamStore& disc, const DiscMeta& meta,
                                             const Image& real_side, const Image& fake_side,
                                             const std::string& which) {
    check_data(real_side.data.same_shape(fake_side.data),
               "adversarial loss operands differ in shape");
    ad::Graph g;
    g.set_grad_enabled(false);
    ad::Bound b = ad::bind_frozen(g, disc, {"disc." + which + "."});
    int dr = disc_graph(g, b, meta, which, g.constant(real_side.data));
    int df = disc_graph(g, b, meta, which, g.constant(fake_side.data));
    return {g.scalar(lsgan_gen_loss(g, df)), g.scalar(lsgan_disc_loss(g, dr, df))};
}

// ------------------------------------------------------------ composite loss

void LossWeights::validate() const {
    for (real x : {w_model, w_mm, w_cons, c2c_l1, c2c_perc, c2c_grad, c2c_adv})
        if (!(x >= 0)) fail_usage("loss weights must be non-negative");
}

std::string LossReport::to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["c2c"] = c2c;
    j["s2s"] = s2s;
    j["multimodal"] = multimodal;
    j["temporal"] = temporal;
    j["stereo"] = stereo;
    j["total"] = total;
    j["disc_c2c"] = disc_c2c;
    j["disc_s2s"] = disc_s2s;
    j["weights"] = weights;
    return j.dump();
}

static std::map<std::string, double> weights_map(const LossWeights& w) {
    return {{"w_model", w.w_model},   {"w_mm", w.w_mm},       {"w_cons", w.w_cons},
            {"c2c_l1", w.c2c_l1},     {"c2c_perc", w.c2c_perc}, {"c2c_grad", w.c2c_grad},
            {"c2c_adv", w.c2c_adv}};
}

static LossReport finalize_report(LossReport r, const LossWeights& w) {
    r.weights = weights_map(w);
    r.total = w.w_model * (r.c2c + r.s2s) + w.w_mm * r.multimodal +
              w.w_cons * (r.temporal + r.stereo);
    return r;
}

/// Per-item scatter draw with the intensity itself randomized.
static ScatterParams draw_mixed_params(uint64_t seed, const std::string& label, uint64_t idx,
                                       int h, int w) {
    Rng pick(seed_stream(seed, label + ".intensity", idx));
    auto intensity = static_cast<Intensity>(pick.uniform_int(0, 2));
    return sample_scatter_params(seed_stream(seed, label + ".params", idx), intensity, h, w);
}

static bool composite_c2c(const LossConfig& cfg) {
    return !cfg.detach_gc_from_model_losses && cfg.enable_gc_block;
}

LossReport c2c_loss(const ModelSet& m, const SceneSample& clear_sample, uint64_t seed) {
    m.cfg.weights.validate();
    if (clear_sample.left_cur.domain_tag != DomainTag::RawClear)
        fail_data("c2c loss expects a clear-population sample");
    ScatterParams p =
        draw_mixed_params(seed, "c2c", 0, clear_sample.height(), clear_sample.width());
    Image syn = apply_scatter(clear_sample.left_cur, clear_sample.depth_left, p);
    Image out = composite_c2c(m.cfg) ? full_forward(*m.gen, m.gen_meta, syn)
                                     : translation_forward(*m.gen, m.gen_meta, syn);
    Image target = process(clear_sample.left_cur, m.proc);
    const LossWeights& w = m.cfg.weights;
    LossReport r;
    r.c2c = w.c2c_l1 * l1_loss(out, target) + w.c2c_grad * gradient_loss(out, target) +
            w.c2c_perc * perceptual_loss(*m.perc, m.cfg.perceptual, out, target) +
            w.c2c_adv * adversarial_losses(*m.disc, m.disc_meta, target, out, "c2c").first;
    return finalize_report(r, w);
}

LossReport s2s_loss(const ModelSet& m, const SceneSample& scatter_sample, uint64_t seed) {
    m.cfg.weights.validate();
    if (scatter_sample.left_cur.domain_tag != DomainTag::RawScatter)
        fail_data("s2s loss expects a scatter-population sample");
    Image it = translation_forward(*m.gen, m.gen_meta, scatter_sample.left_cur);
    ScatterParams p =
        draw_mixed_params(seed, "s2s", 0, scatter_sample.height(), scatter_sample.width());
    Image resyn = apply_scatter(it, scatter_sample.depth_left, p);
    Image target = process(scatter_sample.left_cur, m.proc);
    LossReport r;
    r.s2s = adversarial_losses(*m.disc, m.disc_meta, target, resyn, "s2s").first;
    return finalize_report(r, m.cfg.weights);
}

LossReport multimodal_loss(const ModelSet& m, const SceneSample& scatter_sample) {
    m.cfg.weights.validate();
    if (scatter_sample.gated.data.size() == 0)
        fail_data("multi-modal loss needs a sample with a gated capture");
    Image it = translation_forward(*m.gen, m.gen_meta, scatter_sample.left_cur);
    GatedImage synth = rgb2gated_forward(*m.r2g, m.r2g_meta, it);
    Mask ment = entropy_mask(scatter_sample.gated);
    LossReport r;
    if (ment.data.sum() <= 0) {
        std::cerr << "[loss] entropy mask is empty; multi-modal term contributes 0\n";
        r.multimodal = 0;
    } else {
        r.multimodal =
            perceptual_loss(*m.perc, m.cfg.perceptual, scatter_sample.gated, synth, &ment);
    }
    return finalize_report(r, m.cfg.weights);
}

LossReport temporal_loss(const ModelSet& m, const SceneSample& sample) {
    m.cfg.weights.validate();
    WarpResult wp = backward_warp(sample.left_prev, sample.flow_prev_to_cur);
    WarpResult wn = backward_warp(sample.left_next, sample.flow_next_to_cur);
    Image merged = temporal_merge(wp, wn, sample.left_cur);
    Mask mtemp = temporal_merge_mask(wp.validity, wn.validity);
    LossReport r;
    if (mtemp.data.sum() <= 0) return finalize_report(r, m.cfg.weights);
    Image out = full_forward(*m.gen, m.gen_meta, sample.left_cur);
    Image target = translation_forward(*m.gen, m.gen_meta, merged);
    r.temporal = l1_loss(out, target, &mtemp) +
                 perceptual_loss(*m.perc, m.cfg.perceptual, out, target, &mtemp);
    return finalize_report(r, m.cfg.weights);
}

LossReport stereo_loss(const ModelSet& m, const SceneSample& sample) {
    m.cfg.weights.validate();
    WarpResult ws = stereo_warp(sample.right_cur, sample.disparity);
    Mask weight = stereo_mask(sample.left_cur, ws.image, m.cfg.stereo_alpha);
    for (int64_t i = 0; i < weight.data.size(); ++i) weight.data.v[i] *= ws.validity.data.v[i];
    LossReport r;
    if (weight.data.sum() <= 0) return finalize_report(r, m.cfg.weights);
    Image out = full_forward(*m.gen, m.gen_meta, sample.left_cur);
    Image target = translation_forward(*m.gen, m.gen_meta, ws.image);
    r.stereo = l1_loss(out, target, &weight);
    return finalize_report(r, m.cfg.weights);
}

// -------------------------------------------------------------------- batches

GenBatch prepare_batch(const std::vector<const SceneSample*>& clear_samples,
                       const std::vector<const SceneSample*>& scatter_samples,
                       const ProcConfig& proc, const LossConfig& cfg, uint64_t seed) {
    cfg.weights.validate();
    GenBatch out;

    auto stack = [](const std::vector<Tensor>& items) {
        std::vector<const Tensor*> p;
        p.reserve(items.size());
        for (const Tensor& t : items) p.push_back(&t);
        return stack_batch(p);
    };

    if (!clear_samples.empty()) {
        std::vector<Tensor> in, target, mult, add;
        for (size_t i = 0; i < clear_samples.size(); ++i) {
            const SceneSample& s = *clear_samples[i];
            if (s.left_cur.domain_tag != DomainTag::RawClear)
                fail_data("clear population sample " + std::to_string(i) +
                          " is not tagged clear");
            ScatterParams p = draw_mixed_params(seed, "c2c", i, s.height(), s.width());
            ScatterFields f = scatter_fields(s.depth_left, p);
            in.push_back(s.left_cur.data);
            target.push_back(process(s.left_cur, proc).data);
            mult.push_back(std::move(f.mult));
            add.push_back(std::move(f.add));
        }
        out.clear_in = stack(in);
        out.clear_target = stack(target);
        out.clear_mult = stack(mult);
        out.clear_add = stack(add);
    }

    if (!scatter_samples.empty()) {
        std::vector<Tensor> in, proc_t, mult, add, gated, ment, merged, mtemp, wright, mstereo;
        for (size_t i = 0; i < scatter_samples.size(); ++i) {
            const SceneSample& s = *scatter_samples[i];
            if (s.left_cur.domain_tag != DomainTag::RawScatter)
                fail_data("scatter population sample " + std::to_string(i) +
                          " is not tagged scatter");
            in.push_back(s.left_cur.data);
            proc_t.push_back(process(s.left_cur, proc).data);
            ScatterParams p = draw_mixed_params(seed, "s2s", i, s.height(), s.width());
            ScatterFields f = scatter_fields(s.depth_left, p);
            mult.push_back(std::move(f.mult));
            add.push_back(std::move(f.add));

            check_data(s.gated.data.size() > 0, "scatter sample has no gated capture");
            gated.push_back(s.gated.data);
            ment.push_back(entropy_mask(s.gated).data);

            WarpResult wp = backward_warp(s.left_prev, s.flow_prev_to_cur);
            WarpResult wn = backward_warp(s.left_next, s.flow_next_to_cur);
            merged.push_back(temporal_merge(wp, wn, s.left_cur).data);
            mtemp.push_back(temporal_merge_mask(wp.validity, wn.validity).data);

            WarpResult ws = stereo_warp(s.right_cur, s.disparity);
            Mask msk = stereo_mask(s.left_cur, ws.image, cfg.stereo_alpha);
            for (int64_t k = 0; k < msk.data.size(); ++k)
                msk.data.v[k] *= ws.validity.data.v[k];
            wright.push_back(std::move(ws.image.data));
            mstereo.push_back(std::move(msk.data));
        }
        out.scat_in = stack(in);
        out.scat_proc = stack(proc_t);
        out.scat_mult = stack(mult);
        out.scat_add = stack(add);
        out.gated = stack(gated);
        out.ment = stack(ment);
        out.merged = stack(merged);
        out.mtemp = stack(mtemp);
        out.warped_right = stack(wright);
        out.mstereo = stack(mstereo);
    }
    return out;
}

TotalLossNodes total_loss_graph(ad::Graph& g, const ad::Bound& gen, const ad::Bound& disc,
                                const ad::Bound& r2g, const ad::Bound& perc, const GenMeta& gmeta,
                                const DiscMeta& dmeta, const R2GMeta& rmeta,
                                const GenBatch& batch, const LossConfig& cfg) {
    cfg.weights.validate();
    const LossWeights& W = cfg.weights;
    TotalLossNodes n;
    int zero = g.constant(Tensor::scalar(0));
    n.c2c = n.s2s = n.multimodal = n.temporal = n.stereo = zero;

    if (batch.clear_count() > 0) {
        int x = g.constant(batch.clear_in);
        int syn = scatter_graph(g, x, g.constant(batch.clear_mult), g.constant(batch.clear_add));
        int it = translation_graph(g, gen, gmeta, syn);
        int out = composite_c2c(cfg) ? consistency_graph(g, gen, gmeta, it) : it;
        int target = g.constant(batch.clear_target);
        n.c2c_l1 = l1_graph(g, out, target);
        n.c2c_perc = perceptual_graph(g, perc, cfg.perceptual, out, target);
        n.c2c_grad = gradient_loss_graph(g, out, target);
        n.c2c_adv = lsgan_gen_loss(g, disc_graph(g, disc, dmeta, "c2c", out));
        n.c2c = g.add(g.add(g.mul_scalar(n.c2c_l1, W.c2c_l1), g.mul_scalar(n.c2c_perc, W.c2c_perc)),
                      g.add(g.mul_scalar(n.c2c_grad, W.c2c_grad), g.mul_scalar(n.c2c_adv, W.c2c_adv)));
    }

    if (batch.scatter_count() > 0) {
        int it = translation_graph(g, gen, gmeta, g.constant(batch.scat_in));
        int resyn =
            scatter_graph(g, it, g.constant(batch.scat_mult), g.constant(batch.scat_add));
        n.s2s = lsgan_gen_loss(g, disc_graph(g, disc, dmeta, "s2s", resyn));

        if (cfg.enable_multimodal) {
            if (batch.ment.sum() <= 0) {
                n.mm_empty_mask = true;
            } else {
                int synth = r2g_graph(g, r2g, rmeta, it);
                n.multimodal = perceptual_graph(g, perc, cfg.perceptual, g.constant(batch.gated),
                                                synth, &batch.ment);
            }
        }

        if (cfg.enable_consistency && cfg.enable_gc_block) {
            int out_c = consistency_graph(g, gen, gmeta, g.detach(it));
            if (batch.mtemp.sum() <= 0) {
                n.temp_empty_mask = true;
            } else {
                int tgt = g.detach(translation_graph(g, gen, gmeta, g.constant(batch.merged)));
                n.temporal = g.add(masked_l1_graph(g, out_c, tgt, batch.mtemp),
                                   perceptual_graph(g, perc, cfg.perceptual, out_c, tgt,
                                                    &batch.mtemp));
            }
            if (batch.mstereo.sum() <= 0) {
                n.stereo_empty_mask = true;
            } else {
                int tgt =
                    g.detach(translation_graph(g, gen, gmeta, g.constant(batch.warped_right)));
                n.stereo = masked_l1_graph(g, out_c, tgt, batch.mstereo);
            }
        }
    }

    int model = g.add(n.c2c, n.s2s);
    int cons = g.add(n.temporal, n.stereo);
    n.total = g.add(g.add(g.mul_scalar(model, W.w_model), g.mul_scalar(n.multimodal, W.w_mm)),
                    g.mul_scalar(cons, W.w_cons));
    return n;
}

std::pair<Tensor, Tensor> make_disc_fakes(const ad::ParamStore& gen, const GenMeta& gmeta,
                                          const GenBatch& batch, const LossConfig& cfg) {
    ad::Graph g;
    g.set_grad_enabled(false);
    ad::Bound b = ad::bind_frozen(g, gen, {"gt.", "gc."});
    Tensor c2c_fake, s2s_fake;
    if (batch.clear_count() > 0) {
        int syn = scatter_graph(g, g.constant(batch.clear_in), g.constant(batch.clear_mult),
                                g.constant(batch.clear_add));
        int it = translation_graph(g, b, gmeta, syn);
        int out = composite_c2c(cfg) ? consistency_graph(g, b, gmeta, it) : it;
        c2c_fake = g.val(out);
    }
    if (batch.scatter_count() > 0) {
        int it = translation_graph(g, b, gmeta, g.constant(batch.scat_in));
        int resyn =
            scatter_graph(g, it, g.constant(batch.scat_mult), g.constant(batch.scat_add));
        s2s_fake = g.val(resyn);
    }
    return {std::move(c2c_fake), std::move(s2s_fake)};
}

DiscLossNodes disc_loss_graph(ad::Graph& g, const ad::Bound& disc, const DiscMeta& dmeta,
                              const GenBatch& batch, const Tensor& c2c_fake,
                              const Tensor& s2s_fake) {
    DiscLossNodes n;
    int zero = g.constant(Tensor::scalar(0));
    n.c2c = n.s2s = zero;
    if (batch.clear_count() > 0) {
        check_data(c2c_fake.same_shape(batch.clear_target), "c2c fake batch shape mismatch");
        int dr = disc_graph(g, disc, dmeta, "c2c", g.constant(batch.clear_target));
        int df = disc_graph(g, disc, dmeta, "c2c", g.constant(c2c_fake));
        n.c2c = lsgan_disc_loss(g, dr, df);
    }
    if (batch.scatter_count() > 0) {
        check_data(s2s_fake.same_shape(batch.scat_proc), "s2s fake batch shape mismatch");
        int dr = disc_graph(g, disc, dmeta, "s2s", g.constant(batch.scat_proc));
        int df = disc_graph(g, disc, dmeta, "s2s", g.constant(s2s_fake));
        n.s2s = lsgan_disc_loss(g, dr, df);
    }
    n.total = g.add(n.c2c, n.s2s);
    return n;
}

LossReport report_from_nodes(const ad::Graph& g, const TotalLossNodes& n, const LossWeights& w) {
    LossReport r;
    r.c2c = g.scalar(n.c2c);
    r.s2s = g.scalar(n.s2s);
    r.multimodal = g.scalar(n.multimodal);
    r.temporal = g.scalar(n.temporal);
    r.stereo = g.scalar(n.stereo);
    r.total = g.scalar(n.total);
    r.weights = weights_map(w);
    return r;
}

LossReport total_loss(const ModelSet& m, const std::vector<const SceneSample*>& clear_batch,
                      const std::vector<const SceneSample*>& scatter_batch, uint64_t seed) {
    m.cfg.weights.validate();
    if (clear_batch.empty() || scatter_batch.empty())
        fail_data("total loss needs non-empty clear and scatter batches");
    GenBatch batch = prepare_batch(clear_batch, scatter_batch, m.proc, m.cfg, seed);

    ad::Graph g;
    g.set_grad_enabled(false);
    ad::Bound gen = ad::bind_frozen(g, *m.gen, {"gt.", "gc."});
    ad::Bound disc = ad::bind_frozen(g, *m.disc, {"disc."});
    ad::Bound r2g = ad::bind_frozen(g, *m.r2g, {"r2g."});
    ad::Bound perc = ad::bind_frozen(g, *m.perc, {"perc."});
    TotalLossNodes n = total_loss_graph(g, gen, disc, r2g, perc, m.gen_meta, m.disc_meta,
                                        m.r2g_meta, batch, m.cfg);
    LossReport r = report_from_nodes(g, n, m.cfg.weights);

    auto [c2c_fake, s2s_fake] = make_disc_fakes(*m.gen, m.gen_meta, batch, m.cfg);
    ad::Graph gd;
    gd.set_grad_enabled(false);
    ad::Bound discd = ad::bind_frozen(gd, *m.disc, {"disc."});
    DiscLossNodes dn = disc_loss_graph(gd, discd, m.disc_meta, batch, c2c_fake, s2s_fake);
    r.disc_c2c = gd.scalar(dn.c2c);
    r.disc_s2s = gd.scalar(dn.s2s);
    return r;
}

}  // namespace zs
