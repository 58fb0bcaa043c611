#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "zeroscatter/isp.hpp"

using namespace zs;

namespace {

Image rnd_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Image img;
    img.data = Tensor(1, 3, h, w);
    for (real& v : img.data.v) v = rng.uniform(real(0), real(1));
    img.domain_tag = DomainTag::RawClear;
    return img;
}

Tensor luminance(const Tensor& rgb) {
    Tensor y(1, 1, rgb.h, rgb.w);
    for (int i = 0; i < rgb.h; ++i)
        for (int j = 0; j < rgb.w; ++j)
            y.at(0, 0, i, j) = real(0.299) * rgb.at(0, 0, i, j) +
                               real(0.587) * rgb.at(0, 1, i, j) +
                               real(0.114) * rgb.at(0, 2, i, j);
    return y;
}

// 256-bin histogram entropy in bits.
double hist_entropy(const Tensor& plane) {
    std::vector<double> hist(256, 0.0);
    for (real v : plane.v) {
        int b = std::min(255, std::max(0, (int)(v * 256)));
        hist[b] += 1.0;
    }
    double n = (double)plane.v.size(), ent = 0.0;
    for (double c : hist)
        if (c > 0) {
            double p = c / n;
            ent -= p * std::log2(p);
        }
    return ent;
}

}  // namespace

TEST_CASE("constant input stays exactly uniform") {
    Image img;
    img.data = Tensor(1, 3, 32, 32);
    img.data.fill(real(0.5));
    img.domain_tag = DomainTag::RawClear;
    Image out = process(img);
    CHECK(out.domain_tag == DomainTag::Processed);
    for (int c = 0; c < 3; ++c) {
        real first = out.data.at(0, c, 0, 0);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) CHECK(out.data.at(0, c, y, x) == first);
        CHECK(first >= real(0));
        CHECK(first <= real(1));
    }
}

TEST_CASE("checkerboard stays two-level with order preserved") {
    Image img;
    img.data = Tensor(1, 3, 64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            real v = ((y / 2 + x / 2) % 2) ? real(1) : real(0);
            for (int c = 0; c < 3; ++c) img.data.at(0, c, y, x) = v;
        }
    img.domain_tag = DomainTag::RawClear;
    Image out = process(img);

    for (int c = 0; c < 3; ++c) {
        std::set<real> levels;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) levels.insert(out.data.at(0, c, y, x));
        CHECK(levels.size() == 2);
    }
    // order: a white input square maps above a black one
    CHECK(out.data.at(0, 0, 0, 2) > out.data.at(0, 0, 0, 0));
}

TEST_CASE("equalization does not lose luminance histogram entropy") {
    ProcConfig cfg;
    cfg.tile_rows = 4;
    cfg.tile_cols = 4;
    cfg.clip_limit = real(2.0);
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        Image img = rnd_image(64, 64, seed);
        Image out = process(img, cfg);
        double ein = hist_entropy(luminance(img.data));
        double eout = hist_entropy(luminance(out.data));
        CHECK(eout >= ein - 1e-9);
    }
}

TEST_CASE("per-tile mappings are non-decreasing") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Image img = rnd_image(48, 48, 100 + seed);
        Tensor y = luminance(img.data);
        TileMaps m = compute_tile_maps(y, 6, 6, real(2.0));
        for (const auto& lut : m.lut) {
            REQUIRE(lut.size() == 256);
            for (size_t i = 1; i < lut.size(); ++i) CHECK(lut[i] >= lut[i - 1]);
            CHECK(lut.back() <= real(1) + real(1e-6));
            CHECK(lut.front() >= real(0));
        }
    }
}

TEST_CASE("range containment and finiteness at the extremes") {
    for (real fillv : {real(0), real(1)}) {
        Image img;
        img.data = Tensor(1, 3, 32, 32);
        img.data.fill(fillv);
        img.domain_tag = DomainTag::RawScatter;
        Image out = process(img);
        CHECK(out.data.all_finite());
        CHECK(out.data.min() >= real(0));
        CHECK(out.data.max() <= real(1));
    }
    Image img = rnd_image(32, 48, 7);
    Image out = process(img);
    CHECK(out.data.all_finite());
    CHECK(out.data.min() >= real(0));
    CHECK(out.data.max() <= real(1));
    // applying the operator to its own output keeps the tag
    CHECK(process(out).domain_tag == DomainTag::Processed);
}

TEST_CASE("chroma offsets survive equalization") {
    Image img = rnd_image(32, 32, 9);
    for (real& v : img.data.v) v = real(0.3) + real(0.4) * v;  // keep clear of clamps
    Image out = process(img);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            auto enc = [&](real v) { return std::pow((double)v, 1.0 / 2.2); };
            double r = enc(img.data.at(0, 0, y, x));
            double g = enc(img.data.at(0, 1, y, x));
            double b = enc(img.data.at(0, 2, y, x));
            double yy = 0.299 * r + 0.587 * g + 0.114 * b;
            double cb_in = (b - yy) / 1.772;

            double ro = out.data.at(0, 0, y, x), go = out.data.at(0, 1, y, x),
                   bo = out.data.at(0, 2, y, x);
            double yo = 0.299 * ro + 0.587 * go + 0.114 * bo;
            double cb_out = (bo - yo) / 1.772;
            if (ro > 0.01 && ro < 0.99 && go > 0.01 && go < 0.99 && bo > 0.01 && bo < 0.99)
                CHECK(std::abs(cb_out - cb_in) < 1e-5);
        }
}

TEST_CASE("configuration validation") {
    Image img = rnd_image(32, 32, 11);
    ProcConfig bad;
    bad.clip_limit = real(0.5);
    CHECK_THROWS_AS(process(img, bad), Error);
    bad = ProcConfig{};
    bad.tile_rows = 0;
    CHECK_THROWS_AS(process(img, bad), Error);
    bad = ProcConfig{};
    bad.gamma = real(0);
    CHECK_THROWS_AS(process(img, bad), Error);
}
