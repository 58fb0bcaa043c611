// Finite-difference gradient checks. This binary links against the
// double-precision build of the core so central differences with h ~ 1e-6
// resolve well below the comparison tolerances.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "zeroscatter/autodiff.hpp"
#include "zeroscatter/generator.hpp"
#include "zeroscatter/losses.hpp"
#include "zeroscatter/scene.hpp"
#include "zeroscatter/warp.hpp"
#include "zeroscatter/weather.hpp"

using namespace zs;
using ad::Graph;

static_assert(sizeof(real) == 8, "FD checks require the double-precision core");

namespace {

Tensor rnd(int n, int c, int h, int w, uint64_t seed, double lo = -1, double hi = 1) {
    Tensor t(n, c, h, w);
    Rng rng(seed);
    for (real& x : t.v) x = static_cast<real>(rng.uniform(lo, hi));
    return t;
}

// Max relative error between the analytic gradient of `build` w.r.t. its
// tensor argument and central differences. Probes every element, or a fixed
// random subset of `probes` elements when the graph is expensive.
double fd_check(Tensor x0, const std::function<int(Graph&, int)>& build, double h = 1e-6,
                int probes = -1) {
    Graph g;
    int x = g.leaf(x0);
    int loss = build(g, x);
    g.backward(loss);
    Tensor analytic = g.grad(x);
    if (analytic.v.empty()) analytic = Tensor(x0.n, x0.c, x0.h, x0.w);

    std::vector<int64_t> idx;
    if (probes > 0) {
        Rng rng(424242);
        for (int k = 0; k < probes; ++k) idx.push_back(rng.uniform_int(0, x0.size() - 1));
    } else {
        for (int64_t i = 0; i < x0.size(); ++i) idx.push_back(i);
    }

    double worst = 0;
    for (int64_t i : idx) {
        auto eval = [&](double delta) {
            Tensor xp = x0;
            xp.v[i] += delta;
            Graph gg;
            gg.set_grad_enabled(false);
            return gg.scalar(build(gg, gg.constant(xp)));
        };
        double fd = (eval(h) - eval(-h)) / (2 * h);
        double a = analytic.v[i];
        double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace

TEST_CASE("fd: elementwise chain") {
    auto build = [](Graph& g, int x) {
        int y = g.mul_scalar(g.add_scalar(x, real(0.3)), real(1.7));
        return g.mean_all(g.square(y));
    };
    CHECK(fd_check(rnd(1, 2, 4, 4, 1), build) < 1e-7);
}

TEST_CASE("fd: abs away from the kink") {
    auto build = [](Graph& g, int x) { return g.mean_all(g.abs_(x)); };
    Tensor x = rnd(1, 1, 4, 4, 2);
    for (real& v : x.v) v += (v >= 0 ? real(0.1) : real(-0.1));  // keep clear of 0
    CHECK(fd_check(x, build) < 1e-7);
}

TEST_CASE("fd: sigmoid and leaky_relu") {
    auto build = [](Graph& g, int x) {
        return g.mean_all(g.sigmoid(g.leaky_relu(x, real(0.2))));
    };
    Tensor x = rnd(1, 2, 3, 3, 3);
    for (real& v : x.v) v += (v >= 0 ? real(0.05) : real(-0.05));
    CHECK(fd_check(x, build) < 1e-7);
}

TEST_CASE("fd: conv2d input, weight and bias") {
    Tensor x0 = rnd(2, 3, 6, 6, 4);
    Tensor w0 = rnd(4, 3, 3, 3, 5);
    Tensor b0 = rnd(1, 4, 1, 1, 6);
    auto via_x = [&](Graph& g, int x) {
        int w = g.constant(w0);
        int b = g.constant(b0);
        return g.mean_all(g.square(g.conv2d(x, w, b, 1, 1)));
    };
    CHECK(fd_check(x0, via_x) < 1e-6);
    auto via_w = [&](Graph& g, int w) {
        int x = g.constant(x0);
        int b = g.constant(b0);
        return g.mean_all(g.square(g.conv2d(x, w, b, 2, 1)));
    };
    CHECK(fd_check(w0, via_w) < 1e-6);
    auto via_b = [&](Graph& g, int b) {
        int x = g.constant(x0);
        int w = g.constant(w0);
        return g.mean_all(g.square(g.conv2d(x, w, b, 1, 2, 2)));
    };
    CHECK(fd_check(b0, via_b) < 1e-6);
}

TEST_CASE("fd: instance_norm input and affine") {
    Tensor x0 = rnd(2, 2, 5, 5, 7, 0, 4);
    Tensor g0 = rnd(1, 2, 1, 1, 8, 0.5, 1.5);
    Tensor b0 = rnd(1, 2, 1, 1, 9);
    // A plain mean-square of the normalized output has an eps-scale input
    // gradient (normalization invariance), so weight it elementwise to give
    // FD an O(1) signal.
    Tensor w0 = rnd(2, 2, 5, 5, 99, 0.2, 1.0);
    auto via_x = [&](Graph& g, int x) {
        int ga = g.constant(g0);
        int be = g.constant(b0);
        int y = g.instance_norm(x, ga, be);
        return g.mean_all(g.square(g.mul(y, g.constant(w0))));
    };
    CHECK(fd_check(x0, via_x, 1e-5) < 1e-5);
    auto via_gamma = [&](Graph& g, int ga) {
        int x = g.constant(x0);
        int be = g.constant(b0);
        return g.mean_all(g.square(g.instance_norm(x, ga, be)));
    };
    CHECK(fd_check(g0, via_gamma) < 1e-6);
}

TEST_CASE("fd: resize both directions") {
    auto up = [](Graph& g, int x) { return g.mean_all(g.square(g.resize_bilinear(x, 9, 7))); };
    CHECK(fd_check(rnd(1, 2, 5, 4, 10), up) < 1e-7);
    auto down = [](Graph& g, int x) { return g.mean_all(g.square(g.resize_bilinear(x, 3, 2))); };
    CHECK(fd_check(rnd(1, 2, 6, 5, 11), down) < 1e-7);
}

TEST_CASE("fd: concat diff mul_bcast composite") {
    Tensor m0 = rnd(1, 1, 4, 4, 12, 0, 1);
    auto build = [&](Graph& g, int x) {
        int m = g.constant(m0);
        int cat = g.concat_c({x, g.square(x)});
        int dd = g.add(g.mean_all(g.abs_(g.diff_x(cat))), g.mean_all(g.abs_(g.diff_y(cat))));
        int masked = g.mean_all(g.mul_bcast(g.square(x), m));
        return g.add(dd, masked);
    };
    Tensor x = rnd(1, 2, 4, 4, 13, 0.2, 0.9);
    CHECK(fd_check(x, build) < 1e-6);
}

TEST_CASE("fd: warp gradient w.r.t. source") {
    Tensor flow = rnd(1, 2, 6, 6, 14, -2, 2);
    auto build = [&](Graph& g, int x) { return g.mean_all(g.square(g.warp(x, flow))); };
    CHECK(fd_check(rnd(1, 3, 6, 6, 15, 0, 1), build) < 1e-6);
}

TEST_CASE("fd: scattering operator w.r.t. the input image") {
    DepthMap d;
    d.data = rnd(1, 1, 32, 32, 40, 5, 100);
    d.max_range = 100;
    ScatterParams p = sample_scatter_params(41, Intensity::Medium, 32, 32);
    ScatterFields f = scatter_fields(d, p);
    // Inside near-opaque particles the multiplicative field (and with it the
    // true gradient) is ~1e-2, so FD roundoff caps the achievable relative
    // agreement around 1e-5 on a 32x32 probe.
    auto build = [&](Graph& g, int x) {
        int y = scatter_graph(g, x, g.constant(f.mult), g.constant(f.add));
        return g.mean_all(g.square(y));
    };
    CHECK(fd_check(rnd(1, 3, 32, 32, 42, 0.05, 0.95), build) < 1e-4);
}

TEST_CASE("fd: instance_norm + conv + sigmoid tower") {
    Tensor w1 = rnd(4, 2, 3, 3, 16);
    Tensor w2 = rnd(1, 4, 3, 3, 17);
    Tensor ga = rnd(1, 4, 1, 1, 18, 0.5, 1.5);
    Tensor be = rnd(1, 4, 1, 1, 19);
    auto build = [&](Graph& g, int x) {
        int h = g.conv2d(x, g.constant(w1), -1, 1, 1);
        h = g.instance_norm(h, g.constant(ga), g.constant(be));
        h = g.leaky_relu(h, real(0.2));
        h = g.conv2d(h, g.constant(w2), -1, 1, 1);
        return g.mean_all(g.square(g.sigmoid(h)));
    };
    CHECK(fd_check(rnd(1, 2, 6, 6, 20, 0, 1), build, 1e-5) < 1e-5);
}

TEST_CASE("fd: lsgan generator loss w.r.t. the fake image") {
    DiscMeta meta;
    meta.base_width = 8;
    ad::ParamStore store;
    init_discriminators(store, meta, 50);
    auto build = [&](Graph& g, int x) {
        ad::Bound b = ad::bind_frozen(g, store, {"disc."});
        return lsgan_gen_loss(g, disc_graph(g, b, meta, "c2c", x));
    };
    CHECK(fd_check(rnd(1, 3, 32, 32, 51, 0.05, 0.95), build, 1e-5, 40) < 1e-3);
}

// Parameter-space check of the full composite training objective: both model
// and consistency paths, adversaries, gated term and warp masks in one
// graph. Gradients below 1e-6 count as numerically zero in the relative
// error (central differences cannot resolve them against roundoff).
TEST_CASE("fd: total training loss w.r.t. generator parameters") {
    SceneConfig sc;
    sc.height = sc.width = 16;
    sc.primitive_count = 3;
    SceneSample clear = generate_scene(81, sc);
    SceneSample scat = generate_scatter_scene(82, sc, Intensity::Medium);

    GenMeta gmeta;
    gmeta.base_width = 4;
    DiscMeta dmeta;
    dmeta.base_width = 4;
    R2GMeta rmeta;
    rmeta.base_width = 4;
    LossConfig cfg;
    cfg.perceptual.base_width = 4;

    ad::ParamStore gen, disc, r2g, perc;
    init_generator(gen, gmeta, 83);
    {
        Rng rng(84);
        gen.get("gc.head.w") = ad::conv_init(3, gmeta.base_width, 3, 3, rng, 0.05);
    }
    init_discriminators(disc, dmeta, 85);
    init_rgb2gated(r2g, rmeta, 86);
    perc = make_perceptual_extractor(cfg.perceptual);

    GenBatch batch = prepare_batch({&clear}, {&scat}, {}, cfg, 87);

    Graph g;
    auto gb = ad::bind_params(g, gen, {"gt.", "gc."});
    auto db = ad::bind_frozen(g, disc, {"disc."});
    auto rb = ad::bind_frozen(g, r2g, {"r2g."});
    auto pb = ad::bind_frozen(g, perc, {"perc."});
    TotalLossNodes nodes = total_loss_graph(g, gb, db, rb, pb, gmeta, dmeta, rmeta, batch, cfg);
    g.backward(nodes.total);
    CHECK(std::isfinite(g.scalar(nodes.total)));

    auto eval = [&](const ad::ParamStore& gs) {
        Graph gg;
        gg.set_grad_enabled(false);
        auto b1 = ad::bind_frozen(gg, gs, {"gt.", "gc."});
        auto b2 = ad::bind_frozen(gg, disc, {"disc."});
        auto b3 = ad::bind_frozen(gg, r2g, {"r2g."});
        auto b4 = ad::bind_frozen(gg, perc, {"perc."});
        return gg.scalar(
            total_loss_graph(gg, b1, b2, b3, b4, gmeta, dmeta, rmeta, batch, cfg).total);
    };

    std::vector<std::pair<std::string, int64_t>> sites;
    for (const auto& [name, e] : gen.entries)
        if (name.rfind("gt.", 0) == 0 || name.rfind("gc.", 0) == 0)
            for (int64_t j = 0; j < e.value.size(); ++j) sites.emplace_back(name, j);
    REQUIRE(sites.size() > 100);

    Rng pick(88);
    double h = 1e-5, worst = 0;
    for (int k = 0; k < 30; ++k) {
        const auto& [name, j] = sites[(size_t)pick.uniform_int(0, (int64_t)sites.size() - 1)];
        const Tensor& ag = g.grad(gb.at(name));
        double a = ag.v.empty() ? 0.0 : (double)ag.v[j];
        ad::ParamStore mod = gen;
        mod.get(name).v[j] += (real)h;
        double up = eval(mod);
        mod.get(name).v[j] -= (real)(2 * h);
        double dn = eval(mod);
        double fd = (up - dn) / (2 * h);
        worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("fd: consistency block input gradient") {
    GenMeta meta;
    meta.base_width = 8;
    ad::ParamStore store;
    init_generator(store, meta, 30);
    // the head is zero-initialized (identity residual); give it small random
    // weights so the probe exercises the whole U-Net, while keeping the
    // residual away from the clamp boundaries
    Rng rng(31);
    store.get("gc.head.w") = ad::conv_init(3, meta.base_width, 3, 3, rng, 0.05);

    auto build = [&](Graph& g, int x) {
        ad::Bound b = ad::bind_frozen(g, store, {"gc."});
        return g.sum_all(g.square(consistency_graph(g, b, meta, x)));
    };
    CHECK(fd_check(rnd(1, 3, 32, 32, 32, 0.1, 0.9), build, 1e-5, 40) < 1e-3);
}
