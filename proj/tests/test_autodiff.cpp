#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "zeroscatter/autodiff.hpp"

using namespace zs;
using ad::Graph;

namespace {

Tensor rnd(int n, int c, int h, int w, uint64_t seed, double lo = -1, double hi = 1) {
    Tensor t(n, c, h, w);
    Rng rng(seed);
    for (real& x : t.v) x = static_cast<real>(rng.uniform(lo, hi));
    return t;
}

// Direct 6-loop convolution oracle.
Tensor conv_ref(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad, int dil) {
    int oh = (x.h + 2 * pad - (dil * (w.h - 1) + 1)) / stride + 1;
    int ow = (x.w + 2 * pad - (dil * (w.w - 1) + 1)) / stride + 1;
    Tensor out(x.n, w.n, oh, ow);
    for (int n = 0; n < x.n; ++n)
        for (int co = 0; co < w.n; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double s = b ? b->v[co] : 0.0;
                    for (int ci = 0; ci < x.c; ++ci)
                        for (int ky = 0; ky < w.h; ++ky)
                            for (int kx = 0; kx < w.w; ++kx) {
                                int iy = oy * stride - pad + ky * dil;
                                int ix = ox * stride - pad + kx * dil;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                s += static_cast<double>(x.at(n, ci, iy, ix)) *
                                     w.at(co, ci, ky, kx);
                            }
                    out.at(n, co, oy, ox) = static_cast<real>(s);
                }
    return out;
}

}  // namespace

TEST_CASE("elementwise ops and reductions") {
    Graph g;
    int a = g.constant(rnd(1, 2, 3, 4, 1));
    int b = g.constant(rnd(1, 2, 3, 4, 2));
    int s = g.add(a, b);
    for (int64_t i = 0; i < g.val(s).size(); ++i)
        CHECK(g.val(s).v[i] == g.val(a).v[i] + g.val(b).v[i]);
    int d = g.sub(a, b);
    int m = g.mul(a, b);
    for (int64_t i = 0; i < g.val(m).size(); ++i) {
        CHECK(g.val(d).v[i] == g.val(a).v[i] - g.val(b).v[i]);
        CHECK(g.val(m).v[i] == g.val(a).v[i] * g.val(b).v[i]);
    }
    int sc = g.mul_scalar(g.add_scalar(a, real(1)), real(2));
    CHECK(g.val(sc).v[0] == doctest::Approx(2 * (g.val(a).v[0] + 1)));
    int mn = g.mean_all(a);
    CHECK(g.scalar(mn) == doctest::Approx(g.val(a).mean()));
    int sm = g.sum_all(a);
    CHECK(g.scalar(sm) == doctest::Approx(g.val(a).sum()));
}

TEST_CASE("activations clamp and bound") {
    Graph g;
    int x = g.constant(rnd(1, 1, 4, 4, 7, -3, 3));
    Tensor xr = g.val(x);  // copy: node storage may move as ops are added
    int r = g.relu(x);
    int l = g.leaky_relu(x, real(0.2));
    int sgm = g.sigmoid(x);
    int cl = g.clamp01(x);
    for (int64_t i = 0; i < xr.size(); ++i) {
        CHECK(g.val(r).v[i] == (xr.v[i] > 0 ? xr.v[i] : real(0)));
        CHECK(g.val(l).v[i] == doctest::Approx(xr.v[i] > 0 ? xr.v[i] : real(0.2) * xr.v[i]));
        CHECK(g.val(sgm).v[i] > 0);
        CHECK(g.val(sgm).v[i] < 1);
        CHECK(g.val(cl).v[i] >= 0);
        CHECK(g.val(cl).v[i] <= 1);
    }
}

TEST_CASE("conv2d matches the direct oracle") {
    struct Cfg {
        int n, ci, h, w, co, k, stride, pad, dil;
    };
    for (Cfg c : {Cfg{2, 3, 9, 11, 4, 3, 1, 1, 1}, Cfg{1, 2, 8, 8, 5, 3, 2, 1, 1},
                  Cfg{1, 3, 12, 12, 2, 5, 1, 4, 2}, Cfg{2, 4, 7, 7, 3, 1, 1, 0, 1}}) {
        Graph g;
        int x = g.constant(rnd(c.n, c.ci, c.h, c.w, 11));
        int w = g.constant(rnd(c.co, c.ci, c.k, c.k, 12));
        int b = g.constant(rnd(1, c.co, 1, 1, 13));
        int y = g.conv2d(x, w, b, c.stride, c.pad, c.dil);
        Tensor ref = conv_ref(g.val(x), g.val(w), &g.val(b), c.stride, c.pad, c.dil);
        REQUIRE(g.val(y).same_shape(ref));
        for (int64_t i = 0; i < ref.size(); ++i)
            CHECK(g.val(y).v[i] == doctest::Approx(ref.v[i]).epsilon(1e-4));
    }
}

TEST_CASE("instance_norm normalizes each plane") {
    Graph g;
    int x = g.constant(rnd(2, 3, 8, 8, 21, 0, 10));
    int ga = g.constant(Tensor(1, 3, 1, 1, real(1)));
    int be = g.constant(Tensor(1, 3, 1, 1, real(0)));
    int y = g.instance_norm(x, ga, be);
    const Tensor& yv = g.val(y);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c) {
            double mu = 0, var = 0;
            for (int i = 0; i < 64; ++i) mu += yv.v[((n * 3 + c) * 8 * 8) + i];
            mu /= 64;
            for (int i = 0; i < 64; ++i) {
                double d = yv.v[((n * 3 + c) * 64) + i] - mu;
                var += d * d;
            }
            var /= 64;
            CHECK(mu == doctest::Approx(0.0).epsilon(1e-4));
            CHECK(var == doctest::Approx(1.0).epsilon(1e-2));
        }
}

TEST_CASE("resize_bilinear is exact on constants and reversible in shape") {
    Graph g;
    int c = g.constant(Tensor(1, 2, 6, 6, real(0.37)));
    int up = g.resize_bilinear(c, 12, 12);
    for (real v : g.val(up).v) CHECK(v == real(0.37));
    int down = g.resize_bilinear(c, 3, 3);
    for (real v : g.val(down).v) CHECK(v == real(0.37));
    int x = g.constant(rnd(1, 3, 8, 8, 31, 0, 1));
    int same = g.resize_bilinear(x, 8, 8);
    for (int64_t i = 0; i < g.val(x).size(); ++i) CHECK(g.val(same).v[i] == g.val(x).v[i]);
}

TEST_CASE("concat and diff shapes and values") {
    Graph g;
    int a = g.constant(rnd(1, 2, 4, 4, 41));
    int b = g.constant(rnd(1, 3, 4, 4, 42));
    int cc = g.concat_c({a, b});
    CHECK(g.val(cc).c == 5);
    CHECK(g.val(cc).at(0, 0, 1, 1) == g.val(a).at(0, 0, 1, 1));
    CHECK(g.val(cc).at(0, 2, 1, 1) == g.val(b).at(0, 0, 1, 1));

    Tensor ramp(1, 1, 2, 5);
    for (int x = 0; x < 5; ++x) {
        ramp.at(0, 0, 0, x) = real(0.1) * x;
        ramp.at(0, 0, 1, x) = real(0.1) * x;
    }
    int r = g.constant(ramp);
    int dx = g.diff_x(r);
    CHECK(g.val(dx).w == 4);
    for (real v : g.val(dx).v) CHECK(v == doctest::Approx(0.1));
    int dy = g.diff_y(r);
    for (real v : g.val(dy).v) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("backward accumulates simple chain gradients") {
    Graph g;
    int x = g.leaf(rnd(1, 1, 2, 2, 51));
    int y = g.mean_all(g.mul_scalar(x, real(3)));
    g.backward(y);
    for (real v : g.grad(x).v) CHECK(v == doctest::Approx(3.0 / 4.0));

    Graph g2;
    int a = g2.leaf(rnd(1, 1, 2, 2, 52));
    int b = g2.leaf(rnd(1, 1, 2, 2, 53));
    int s = g2.sum_all(g2.mul(a, b));
    g2.backward(s);
    for (int64_t i = 0; i < 4; ++i) {
        CHECK(g2.grad(a).v[i] == doctest::Approx(g2.val(b).v[i]));
        CHECK(g2.grad(b).v[i] == doctest::Approx(g2.val(a).v[i]));
    }
}

TEST_CASE("detach blocks gradients") {
    Graph g;
    int x = g.leaf(rnd(1, 1, 2, 2, 61));
    int d = g.detach(g.mul_scalar(x, real(2)));
    int y = g.mean_all(d);
    g.backward(y);
    CHECK(g.grad(x).v.empty());
    CHECK_FALSE(g.requires_grad(d));
}

TEST_CASE("grad disabled mode records nothing") {
    Graph g;
    g.set_grad_enabled(false);
    int x = g.leaf(rnd(1, 1, 4, 4, 71));
    int y = g.mean_all(g.relu(x));
    CHECK_FALSE(g.requires_grad(y));
    g.trim({y});
    CHECK(g.val(x).v.empty());
    CHECK_FALSE(g.val(y).v.empty());
}

TEST_CASE("mul_bcast broadcasts masks over channels") {
    Graph g;
    int x = g.leaf(rnd(2, 3, 4, 4, 81));
    Tensor mask(1, 1, 4, 4);
    for (int i = 0; i < 16; ++i) mask.v[i] = i % 2 ? real(1) : real(0);
    int m = g.constant(mask);
    int y = g.mul_bcast(x, m);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 16; ++i)
                CHECK(g.val(y).v[(n * 3 + c) * 16 + i] ==
                      g.val(x).v[(n * 3 + c) * 16 + i] * mask.v[i]);
    int s = g.sum_all(y);
    g.backward(s);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 16; ++i) CHECK(g.grad(x).v[(n * 3 + c) * 16 + i] == mask.v[i]);
}

TEST_CASE("param store, binding and adam") {
    ad::ParamStore store;
    store.add("gen/w", Tensor(1, 1, 1, 1, real(1)));
    store.add("disc/w", Tensor(1, 1, 1, 1, real(2)));
    CHECK(store.count_params("gen/") == 1);
    CHECK(store.count_params("") == 2);
    uint64_t c0 = store.checksum("gen/");
    store.get("disc/w").v[0] = real(5);
    CHECK(store.checksum("gen/") == c0);  // other group untouched

    Graph g;
    ad::Bound b = ad::bind_params(g, store, {"gen/"});
    CHECK(b.ids.count("gen/w") == 1);
    CHECK(b.ids.count("disc/w") == 0);
    int loss = g.mul_scalar(g.mean_all(b.at("gen/w")), real(4));
    g.backward(loss);
    CHECK(ad::grad_norm_sq(g, b, "gen/") == doctest::Approx(16.0));

    ad::Adam opt(ad::AdamConfig{0.01, 0.9, 0.999, 1e-8}, "gen/");
    real before = store.get("gen/w").v[0];
    opt.step(store, g, b);
    // First Adam step moves by ~lr against the gradient sign.
    CHECK(store.get("gen/w").v[0] == doctest::Approx(before - 0.01).epsilon(1e-3));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("archive round-trip preserves values moments and meta") {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / "zs_archive_test.zsc";
    ad::ParamStore store;
    store.add("a/w", rnd(2, 3, 2, 2, 91));
    store.add("b/w", rnd(1, 1, 3, 3, 92));
    store.entries["a/w"].m = rnd(2, 3, 2, 2, 93);
    store.entries["a/w"].v = rnd(2, 3, 2, 2, 94, 0, 1);
    ad::save_archive(p, store, {{"step", "42"}, {"note", "x"}});

    ad::ParamStore loaded;
    auto meta = ad::load_archive(p, loaded);
    CHECK(meta.at("step") == "42");
    REQUIRE(loaded.has("a/w"));
    REQUIRE(loaded.has("b/w"));
    CHECK(loaded.checksum("") == store.checksum(""));
    for (int64_t i = 0; i < store.get("a/w").size(); ++i) {
        CHECK(loaded.get("a/w").v[i] == store.get("a/w").v[i]);
        CHECK(loaded.entries["a/w"].m.v[i] == store.entries["a/w"].m.v[i]);
    }
    CHECK(loaded.entries["b/w"].m.v.empty());
    fs::remove(p);
    CHECK_THROWS_AS(ad::load_archive(p, loaded), Error);
}

TEST_CASE("finite check raises numeric errors") {
    Graph g;
    Tensor bad(1, 1, 1, 2, real(1));
    bad.v[1] = std::numeric_limits<real>::quiet_NaN();
    int x = g.constant(bad);
    CHECK_THROWS_AS(g.check_finite(x, "loss"), Error);
    try {
        g.check_finite(x, "c2c term");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("c2c term") != std::string::npos);
    }
}
