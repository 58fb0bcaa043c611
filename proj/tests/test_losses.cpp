#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "zeroscatter/losses.hpp"
#include "zeroscatter/scene.hpp"

using namespace zs;

namespace {

Image const_image(int h, int w, real r, real gc, real b) {
    Image img(h, w);
    for (int64_t i = 0; i < img.data.plane(); ++i) {
        img.data.v[i] = r;
        img.data.v[img.data.plane() + i] = gc;
        img.data.v[2 * img.data.plane() + i] = b;
    }
    return img;
}

Image noise_image(int h, int w, uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (real& x : img.data.v) x = static_cast<real>(rng.uniform(0.05, 0.95));
    return img;
}

// 3x3 binomial blur; its modes all shrink toward DC, so repeated passes are
// strictly larger perturbations.
Image soft_blur(const Image& src, int passes) {
    static const double k[3] = {0.25, 0.5, 0.25};
    Image out = src;
    for (int p = 0; p < passes; ++p) {
        Image tmp = out;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < src.height(); ++y)
                for (int x = 0; x < src.width(); ++x) {
                    double s = 0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            int yy = std::clamp(y + dy, 0, src.height() - 1);
                            int xx = std::clamp(x + dx, 0, src.width() - 1);
                            s += k[dy + 1] * k[dx + 1] * tmp.data.at(0, c, yy, xx);
                        }
                    out.data.at(0, c, y, x) = static_cast<real>(s);
                }
    }
    return out;
}

SceneConfig toy_scene_cfg(int hw = 32) {
    SceneConfig cfg;
    cfg.height = hw;
    cfg.width = hw;
    cfg.primitive_count = 6;
    return cfg;
}

struct Toy {
    ad::ParamStore gen, disc, r2g, perc;
    ModelSet m;

    explicit Toy(uint64_t seed = 99) {
        m.gen_meta.base_width = 4;
        m.disc_meta.base_width = 4;
        m.r2g_meta.base_width = 4;
        m.cfg.perceptual.base_width = 4;
        init_generator(gen, m.gen_meta, seed);
        init_discriminators(disc, m.disc_meta, seed + 1);
        init_rgb2gated(r2g, m.r2g_meta, seed + 2);
        perc = make_perceptual_extractor(m.cfg.perceptual);
        m.gen = &gen;
        m.disc = &disc;
        m.r2g = &r2g;
        m.perc = &perc;
    }
};

}  // namespace

TEST_CASE("l1 loss matches its closed forms") {
    Image a = const_image(16, 16, real(0.3), real(0.3), real(0.3));
    Image b = const_image(16, 16, real(0.7), real(0.7), real(0.7));
    CHECK(l1_loss(a, a) == real(0));
    CHECK(l1_loss(a, b) == doctest::Approx(0.4));

    // mask covers the left half, |a-b| = 0.2 there
    Image c = a;
    Image d = const_image(16, 16, real(0.5), real(0.5), real(0.5));
    Mask half(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 8; ++x) half.data.at(0, 0, y, x) = 1;
    CHECK(l1_loss(c, d, &half) == doctest::Approx(0.2));

    Mask empty(16, 16);
    CHECK_THROWS_AS(l1_loss(c, d, &empty), Error);
}

TEST_CASE("gradient loss sees ramps, ignores constant offsets") {
    Image a = const_image(16, 16, real(0.2), real(0.2), real(0.2));
    Image b = const_image(16, 16, real(0.9), real(0.9), real(0.9));
    CHECK(gradient_loss(a, a) == real(0));
    CHECK(gradient_loss(a, b) == real(0));  // constants have no gradient

    Image ramp(16, 16);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) ramp.data.at(0, c, y, x) = real(x) / 16;
    CHECK(gradient_loss(ramp, a) == real(1.0 / 16));
}

TEST_CASE("perceptual loss is symmetric, zero on identity, monotone in blur") {
    PerceptualConfig cfg;
    cfg.base_width = 4;
    ad::ParamStore perc = make_perceptual_extractor(cfg);

    int heavier = 0;
    for (int i = 0; i < 20; ++i) {
        Image a = noise_image(32, 32, 500 + i);
        CHECK(perceptual_loss(perc, cfg, a, a) == real(0));
        Image light = soft_blur(a, 1);
        Image heavy = soft_blur(a, 5);
        real dl = perceptual_loss(perc, cfg, a, light);
        real dh = perceptual_loss(perc, cfg, a, heavy);
        CHECK(perceptual_loss(perc, cfg, a, light) == perceptual_loss(perc, cfg, light, a));
        CHECK(dl > 0);
        if (dh > dl) ++heavier;
    }
    CHECK(heavier == 20);

    PerceptualConfig wants_pretrained;
    wants_pretrained.use_fallback = false;
    CHECK_THROWS_AS(make_perceptual_extractor(wants_pretrained), Error);
}

TEST_CASE("least-squares adversarial objectives match constant-output closed forms") {
    ad::Graph g;
    Tensor ones(1, 1, 4, 4, real(1));
    Tensor zeros(1, 1, 4, 4, real(0));
    int d1 = g.constant(ones);
    int d0 = g.constant(zeros);

    CHECK(g.scalar(lsgan_disc_loss(g, d1, d1)) == doctest::Approx(0.5));  // fake term only
    CHECK(g.scalar(lsgan_gen_loss(g, d1)) == doctest::Approx(0.0));
    CHECK(g.scalar(lsgan_gen_loss(g, d0)) == doctest::Approx(0.5));
    CHECK(g.scalar(lsgan_disc_loss(g, d0, d0)) == doctest::Approx(0.5));  // real term only

    Toy toy;
    Image real_side = noise_image(32, 32, 1);
    Image fake_side = noise_image(32, 32, 2);
    auto [gen_l, disc_l] = adversarial_losses(toy.disc, toy.m.disc_meta, real_side, fake_side,
                                              "c2c");
    CHECK(std::isfinite(gen_l));
    CHECK(std::isfinite(disc_l));
    CHECK(gen_l >= 0);
    CHECK(disc_l >= 0);
}

TEST_CASE("loss fragments enforce population tags") {
    Toy toy;
    SceneConfig sc = toy_scene_cfg();
    SceneSample clear = generate_scene(3, sc);
    SceneSample scat = generate_scatter_scene(4, sc, Intensity::Medium);

    CHECK_THROWS_AS(c2c_loss(toy.m, scat, 1), Error);
    CHECK_THROWS_AS(s2s_loss(toy.m, clear, 1), Error);

    LossReport rc = c2c_loss(toy.m, clear, 1);
    CHECK(std::isfinite(rc.c2c));
    CHECK(rc.s2s == 0);
    CHECK(rc.multimodal == 0);
    CHECK(rc.temporal == 0);
    CHECK(rc.stereo == 0);

    LossReport rs = s2s_loss(toy.m, scat, 1);
    CHECK(std::isfinite(rs.s2s));
    CHECK(rs.c2c == 0);  // no L1/grad/perceptual components in this cycle
    CHECK(rs.multimodal == 0);
    CHECK(rs.temporal == 0);
    CHECK(rs.stereo == 0);
}

TEST_CASE("multi-modal loss is zero under an empty entropy mask") {
    Toy toy;
    SceneSample scat = generate_scatter_scene(5, toy_scene_cfg(), Intensity::Light);
    LossReport r = multimodal_loss(toy.m, scat);
    CHECK(std::isfinite(r.multimodal));
    CHECK(r.multimodal >= 0);

    // a constant gated capture carries no structure: mask empties, term drops
    SceneSample flat = scat;
    for (real& v : flat.gated.data.v) v = real(0.5);
    LossReport rz = multimodal_loss(toy.m, flat);
    CHECK(rz.multimodal == 0);
}

TEST_CASE("consistency losses vanish on static geometry at identity init") {
    Toy toy;
    SceneConfig sc = toy_scene_cfg();
    sc.ego_x = sc.ego_y = sc.ego_z = 0;  // zero flow: merged frame equals the input
    sc.baseline_m = 0;                   // zero disparity: warped right equals left
    SceneSample s = generate_scene(8, sc);

    LossReport rt = temporal_loss(toy.m, s);
    CHECK(rt.temporal == 0);
    LossReport rs = stereo_loss(toy.m, s);
    CHECK(rs.stereo == 0);

    // flows pointing far out of view empty the union mask
    SceneSample off = generate_scene(9, toy_scene_cfg());
    for (real& v : off.flow_prev_to_cur.data.v) v = real(1000);
    for (real& v : off.flow_next_to_cur.data.v) v = real(1000);
    CHECK(temporal_loss(toy.m, off).temporal == 0);
}

TEST_CASE("consistency losses move off zero on real motion") {
    Toy toy;
    SceneSample s = generate_scene(12, toy_scene_cfg());
    // identity G_C against a moving scene: loss reflects merge imperfection,
    // and must stay finite and non-negative
    LossReport rt = temporal_loss(toy.m, s);
    CHECK(std::isfinite(rt.temporal));
    CHECK(rt.temporal >= 0);
    LossReport rs = stereo_loss(toy.m, s);
    CHECK(std::isfinite(rs.stereo));
    CHECK(rs.stereo >= 0);
}

TEST_CASE("gradient routing separates the two generator blocks") {
    Toy toy;
    SceneConfig sc = toy_scene_cfg();
    SceneSample clear = generate_scene(21, sc);
    SceneSample scat = generate_scatter_scene(22, sc, Intensity::Medium);

    auto run = [&](const LossConfig& cfg) {
        GenBatch batch = prepare_batch({&clear}, {&scat}, toy.m.proc, cfg, 7);
        ad::Graph g;
        ad::Bound bg = ad::bind_params(g, toy.gen, {"gt.", "gc."});
        ad::Bound bd = ad::bind_frozen(g, toy.disc);
        ad::Bound br = ad::bind_frozen(g, toy.r2g);
        ad::Bound bp = ad::bind_frozen(g, toy.perc);
        TotalLossNodes n = total_loss_graph(g, bg, bd, br, bp, toy.m.gen_meta, toy.m.disc_meta,
                                            toy.m.r2g_meta, batch, cfg);
        g.backward(n.total);
        return std::pair<double, double>(grad_norm_sq(g, bg, "gt."), grad_norm_sq(g, bg, "gc."));
    };

    LossConfig model_only;
    model_only.perceptual.base_width = 4;
    model_only.enable_consistency = false;
    auto [gt_m, gc_m] = run(model_only);
    CHECK(gt_m > 0);
    CHECK(gc_m == 0.0);  // default routing detaches the consistency block

    LossConfig composite = model_only;
    composite.detach_gc_from_model_losses = false;
    auto [gt_c, gc_c] = run(composite);
    CHECK(gt_c > 0);
    CHECK(gc_c > 0);  // reconstruction cycle now runs through both blocks

    LossConfig cons_only;
    cons_only.perceptual.base_width = 4;
    cons_only.weights.w_model = 0;
    cons_only.enable_multimodal = false;
    auto [gt_k, gc_k] = run(cons_only);
    CHECK(gt_k == 0.0);  // consistency targets and inputs are detached
    CHECK(gc_k > 0);
}

TEST_CASE("total loss composes the recorded weights and rejects bad input") {
    Toy toy;
    SceneConfig sc = toy_scene_cfg();
    SceneSample clear = generate_scene(31, sc);
    SceneSample scat = generate_scatter_scene(32, sc, Intensity::Dense);

    LossReport r = total_loss(toy.m, {&clear}, {&scat}, 13);
    const auto& w = r.weights;
    double expect = w.at("w_model") * (r.c2c + r.s2s) + w.at("w_mm") * r.multimodal +
                    w.at("w_cons") * (r.temporal + r.stereo);
    CHECK(r.total == doctest::Approx(expect).epsilon(1e-5));
    CHECK(std::isfinite(r.disc_c2c));
    CHECK(std::isfinite(r.disc_s2s));

    // single-sample fragments agree with the batched composite
    CHECK(c2c_loss(toy.m, clear, 13).c2c == doctest::Approx(r.c2c).epsilon(1e-5));
    CHECK(s2s_loss(toy.m, scat, 13).s2s == doctest::Approx(r.s2s).epsilon(1e-5));
    CHECK(multimodal_loss(toy.m, scat).multimodal == doctest::Approx(r.multimodal).epsilon(1e-5));

    CHECK_THROWS_AS(total_loss(toy.m, {}, {&scat}, 13), Error);
    CHECK_THROWS_AS(total_loss(toy.m, {&clear}, {}, 13), Error);

    Toy bad;
    bad.m.cfg.weights.w_mm = -1;
    CHECK_THROWS_AS(total_loss(bad.m, {&clear}, {&scat}, 13), Error);
}

TEST_CASE("ablation weights reproduce the reduced configurations") {
    Toy toy;
    SceneConfig sc = toy_scene_cfg();
    SceneSample clear = generate_scene(41, sc);
    SceneSample scat = generate_scatter_scene(42, sc, Intensity::Medium);

    Toy no_cons;
    no_cons.m.cfg.enable_consistency = false;
    LossReport r1 = total_loss(no_cons.m, {&clear}, {&scat}, 5);
    CHECK(r1.temporal == 0);
    CHECK(r1.stereo == 0);
    CHECK(r1.multimodal > 0);

    Toy model_cue;
    model_cue.m.cfg.enable_consistency = false;
    model_cue.m.cfg.enable_multimodal = false;
    LossReport r2 = total_loss(model_cue.m, {&clear}, {&scat}, 5);
    CHECK(r2.multimodal == 0);
    CHECK(r2.temporal == 0);
    CHECK(r2.total == doctest::Approx(r2.c2c + r2.s2s).epsilon(1e-5));
}

TEST_CASE("loss report serializes every field") {
    LossReport r;
    r.step = 12;
    r.c2c = 0.5;
    r.total = 1.25;
    r.weights = {{"w_model", 1.0}, {"w_mm", 1.0}, {"w_cons", 1.0}};
    auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["step"] == 12);
    CHECK(j["c2c"] == doctest::Approx(0.5));
    CHECK(j["total"] == doctest::Approx(1.25));
    CHECK(j["weights"]["w_model"] == doctest::Approx(1.0));
    CHECK(j.contains("disc_c2c"));
    CHECK(j.contains("s2s"));
    CHECK(j.contains("temporal"));
    CHECK(j.contains("stereo"));
    CHECK(j.contains("multimodal"));
}

TEST_CASE("one optimization step reduces the reconstruction objective") {
    Toy toy;
    SceneConfig sc = toy_scene_cfg();
    SceneSample clear = generate_scene(51, sc);
    SceneSample scat = generate_scatter_scene(52, sc, Intensity::Light);

    LossConfig cfg;
    cfg.perceptual.base_width = 4;
    cfg.enable_consistency = false;
    cfg.enable_multimodal = false;
    cfg.weights.c2c_adv = 0;  // non-adversarial reconstruction terms only
    GenBatch batch = prepare_batch({&clear}, {&scat}, toy.m.proc, cfg, 3);

    auto eval_c2c = [&](bool update) {
        ad::Graph g;
        ad::Bound bg = ad::bind_params(g, toy.gen, {"gt.", "gc."});
        ad::Bound bd = ad::bind_frozen(g, toy.disc);
        ad::Bound br = ad::bind_frozen(g, toy.r2g);
        ad::Bound bp = ad::bind_frozen(g, toy.perc);
        TotalLossNodes n = total_loss_graph(g, bg, bd, br, bp, toy.m.gen_meta, toy.m.disc_meta,
                                            toy.m.r2g_meta, batch, cfg);
        double v = g.scalar(n.c2c);
        if (update) {
            g.backward(n.total);
            ad::Adam opt({.lr = 1e-3}, "gt.");
            opt.step(toy.gen, g, bg);
        }
        return v;
    };

    double before = eval_c2c(true);
    double after = eval_c2c(false);
    CHECK(std::isfinite(before));
    CHECK(after < before);
}

TEST_CASE("translation block overfits the multi-modal objective alone") {
    Toy toy;
    toy.m.gen_meta.base_width = 8;   // needs fitting capacity
    toy.m.r2g_meta.base_width = 8;   // and a sharp anchor
    toy.gen = ad::ParamStore();
    init_generator(toy.gen, toy.m.gen_meta, 99);
    SceneConfig sc = toy_scene_cfg(64);
    sc.primitive_count = 2;
    SceneSample clear = generate_scene(61, sc);
    SceneSample scat = generate_scatter_scene(62, sc, Intensity::Dense);

    // anchor the gated branch with a trained surrogate; an untrained random
    // net has no reachable target and the loss floors early
    std::vector<std::pair<Image, GatedImage>> corpus;
    for (uint64_t i = 0; i < 6; ++i) {
        SceneSample t = generate_scene(70 + i, sc);
        corpus.emplace_back(process(t.left_cur, toy.m.proc), t.gated);
    }
    SceneSample twin = generate_scene(62, sc);  // scatter sample's geometry
    corpus.emplace_back(process(twin.left_cur, toy.m.proc), twin.gated);
    R2GTrainConfig rt;
    rt.steps = 2500;
    rt.learning_rate = 1e-3;
    rt.meta = toy.m.r2g_meta;
    rt.max_train_l1 = 1.0;  // toy net, not held to the production gate
    toy.r2g = train_rgb2gated(corpus, rt);

    LossConfig cfg;
    cfg.perceptual.base_width = 4;
    cfg.enable_consistency = false;
    cfg.weights.w_model = 0;  // multi-modal term only
    GenBatch batch = prepare_batch({&clear}, {&scat}, toy.m.proc, cfg, 17);

    ad::Adam opt({.lr = 3e-3}, "gt.");
    double first = -1, last = -1;
    for (int step = 0; step < 500; ++step) {
        ad::Graph g;
        ad::Bound bg = ad::bind_params(g, toy.gen, {"gt."});
        ad::Bound bd = ad::bind_frozen(g, toy.disc);
        ad::Bound br = ad::bind_frozen(g, toy.r2g);
        ad::Bound bp = ad::bind_frozen(g, toy.perc);
        TotalLossNodes n = total_loss_graph(g, bg, bd, br, bp, toy.m.gen_meta, toy.m.disc_meta,
                                            toy.m.r2g_meta, batch, cfg);
        double v = g.scalar(n.multimodal);
        if (step == 0) first = v;
        last = v;
        REQUIRE(std::isfinite(v));
        g.backward(n.total);
        opt.step(toy.gen, g, bg);
    }
    CHECK(first > 0);
    CHECK(last < 0.1 * first);
}
