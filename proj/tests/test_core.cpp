#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "zeroscatter/image.hpp"
#include "zeroscatter/io.hpp"

using namespace zs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("zs_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Tensor random_unit_tensor(int c, int h, int w, uint64_t seed) {
    Tensor t(1, c, h, w);
    Rng rng(seed);
    for (real& x : t.v) x = static_cast<real>(rng.uniform());
    return t;
}

SceneSample make_sample(int h, int w, bool scatter, uint64_t seed) {
    SceneSample s;
    auto img = [&](uint64_t k) {
        Image im(h, w, scatter ? DomainTag::RawScatter : DomainTag::RawClear);
        im.data = random_unit_tensor(3, h, w, seed + k);
        quantize16_inplace(im.data);
        im.domain_tag = scatter ? DomainTag::RawScatter : DomainTag::RawClear;
        return im;
    };
    s.left_prev = img(1);
    s.left_prev.time_index = -1;
    s.left_cur = img(2);
    s.left_next = img(3);
    s.left_next.time_index = 1;
    s.right_cur = img(4);
    s.right_cur.view_tag = ViewTag::Right;
    s.depth_left = DepthMap(h, w, 100);
    Rng rng(seed + 9);
    for (real& x : s.depth_left.data.v) x = static_cast<real>(rng.uniform(5.0, 100.0));
    s.depth_left.max_range = s.depth_left.data.max();
    s.disparity = Tensor(1, 1, h, w);
    for (real& x : s.disparity.v) x = static_cast<real>(rng.uniform(0.0, 8.0));
    s.flow_prev_to_cur = FlowField(h, w);
    s.flow_next_to_cur = FlowField(h, w);
    for (real& x : s.flow_prev_to_cur.data.v) x = static_cast<real>(rng.uniform(-3.0, 3.0));
    for (real& x : s.flow_next_to_cur.data.v) x = static_cast<real>(rng.uniform(-3.0, 3.0));
    s.gated.data = random_unit_tensor(1, h, w, seed + 5);
    quantize16_inplace(s.gated.data);
    s.clear_reference = img(6);
    s.clear_reference.domain_tag = DomainTag::RawClear;
    if (scatter) {
        ScatterParams p;
        p.beta_field = Tensor(1, 1, h, w, real(0.05));
        p.airlight = {real(0.8), real(0.75), real(0.82)};
        p.particles.push_back({real(4.5), real(6.0), real(2.0), real(0.7), real(3.0), real(0.4)});
        p.seed = 1234;
        s.params = p;
    }
    return s;
}

}  // namespace

TEST_CASE("rng determinism and ranges") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
        int k = c.uniform_int(2, 5);
        CHECK(k >= 2);
        CHECK(k <= 5);
    }
    double m = 0;
    Rng d(11);
    const int n = 20000;
    for (int i = 0; i < n; ++i) m += d.normal();
    CHECK(std::abs(m / n) < 0.05);
}

TEST_CASE("rng state round-trip") {
    Rng a(3);
    for (int i = 0; i < 17; ++i) a.normal();
    std::string st = a.state();
    Rng b(0);
    b.set_state(st);
    for (int i = 0; i < 50; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("seed_stream separates labels and indices") {
    uint64_t a = seed_stream(1, "batch", 0, 0);
    CHECK(a == seed_stream(1, "batch", 0, 0));
    CHECK(a != seed_stream(1, "batch", 1, 0));
    CHECK(a != seed_stream(1, "params", 0, 0));
    CHECK(a != seed_stream(2, "batch", 0, 0));
}

TEST_CASE("tensor basics") {
    Tensor t(2, 3, 4, 5, real(1));
    CHECK(t.size() == 120);
    CHECK(t.mean() == doctest::Approx(1.0));
    t.at(1, 2, 3, 4) = real(7);
    CHECK(t.max() == real(7));
    CHECK(t.shape_str() == "(2,3,4,5)");
    Tensor a(1, 1, 2, 2, real(1)), b(1, 1, 2, 2, real(2));
    Tensor s = stack_batch({&a, &b});
    CHECK(s.n == 2);
    CHECK(s.at(1, 0, 0, 0) == real(2));
    Tensor c(1, 1, 2, 3);
    CHECK_THROWS_AS(stack_batch({&a, &c}), Error);
}

TEST_CASE("image validate catches bad shapes and ranges") {
    Image im(16, 32);
    CHECK_NOTHROW(im.validate());
    im.data.at(0, 0, 0, 0) = real(1.5);
    CHECK_THROWS_AS(im.validate(), Error);
    Image odd;
    odd.data = Tensor(1, 3, 17, 16);
    CHECK_THROWS_AS(odd.validate(), Error);
    DepthMap d(16, 16, 10);
    CHECK_THROWS_AS(d.validate(), Error);  // zeros are not positive depth
    d.data.fill(real(5));
    CHECK_NOTHROW(d.validate());
}

TEST_CASE("quantize16 grid") {
    CHECK(quantize16(real(0)) == real(0));
    CHECK(quantize16(real(1)) == real(1));
    CHECK(quantize16(real(-0.5)) == real(0));
    real q = quantize16(real(0.3));
    CHECK(quantize16(q) == q);
    CHECK(std::abs(double(q) - 0.3) < 1.0 / 65535.0);
}

TEST_CASE("png16 round-trip is exact on the quantized grid") {
    TempDir td("png");
    Tensor t = random_unit_tensor(3, 20, 24, 99);
    quantize16_inplace(t);
    io::write_png16(td.path / "a.png", t);
    Tensor r = io::read_png(td.path / "a.png");
    REQUIRE(r.same_shape(t));
    for (int64_t i = 0; i < t.size(); ++i) CHECK(r.v[i] == doctest::Approx(t.v[i]).epsilon(1e-6));

    Tensor g = random_unit_tensor(1, 16, 16, 5);
    quantize16_inplace(g);
    io::write_png16(td.path / "g.png", g);
    Tensor rg = io::read_png(td.path / "g.png");
    REQUIRE(rg.c == 1);
    for (int64_t i = 0; i < g.size(); ++i) CHECK(rg.v[i] == doctest::Approx(g.v[i]).epsilon(1e-6));

    CHECK_THROWS_AS(io::read_png(td.path / "missing.png"), Error);
    std::ofstream bad(td.path / "bad.png");
    bad << "not a png";
    bad.close();
    CHECK_THROWS_AS(io::read_png(td.path / "bad.png"), Error);
}

TEST_CASE("pfm round-trip bit-exact") {
    TempDir td("pfm");
    Tensor d(1, 1, 8, 6);
    Rng rng(3);
    for (real& x : d.v) x = static_cast<real>(rng.uniform(-100.0, 100.0));
    io::write_pfm(td.path / "d.pfm", d);
    Tensor r = io::read_pfm(td.path / "d.pfm", 1);
    REQUIRE(r.same_shape(d));
    for (int64_t i = 0; i < d.size(); ++i)
        CHECK(static_cast<float>(r.v[i]) == static_cast<float>(d.v[i]));

    Tensor f(1, 2, 5, 7);
    for (real& x : f.v) x = static_cast<real>(rng.uniform(-4.0, 4.0));
    io::write_pfm(td.path / "f.pfm", f);
    Tensor rf = io::read_pfm(td.path / "f.pfm", 2);
    REQUIRE(rf.same_shape(f));
    for (int64_t i = 0; i < f.size(); ++i)
        CHECK(static_cast<float>(rf.v[i]) == static_cast<float>(f.v[i]));

    CHECK_THROWS_AS(io::read_pfm(td.path / "d.pfm", 2), Error);  // channel mismatch
}

TEST_CASE("scatter params json round-trip") {
    ScatterParams p;
    p.beta_field = Tensor(1, 1, 4, 4);
    Rng rng(8);
    for (real& x : p.beta_field.v) x = static_cast<real>(rng.uniform(0.0, 0.2));
    p.airlight = {real(0.7), real(0.8), real(0.9)};
    p.particles.push_back({real(1.5), real(2.5), real(3.0), real(0.5), real(4.0), real(1.1)});
    p.seed = -77;
    std::string text = io::params_to_json(p);
    ScatterParams q = io::params_from_json(text, "test");
    CHECK(q.beta_field.same_shape(p.beta_field));
    for (int64_t i = 0; i < p.beta_field.size(); ++i) CHECK(q.beta_field.v[i] == p.beta_field.v[i]);
    for (int i = 0; i < 3; ++i) CHECK(q.airlight[i] == p.airlight[i]);
    REQUIRE(q.particles.size() == 1);
    CHECK(q.particles[0].streak_len == p.particles[0].streak_len);
    CHECK(q.seed == -77);

    CHECK_THROWS_WITH_AS(io::params_from_json("{}", "ctx"), "ctx: missing field 'beta_field'",
                         Error);
    CHECK_THROWS_AS(io::params_from_json("[1,2]", "ctx"), Error);
}

TEST_CASE("sample save/load round-trip") {
    TempDir td("sample");
    for (bool scatter : {false, true}) {
        SceneSample s = make_sample(16, 32, scatter, scatter ? 100 : 200);
        fs::path dir = td.path / (scatter ? "s" : "c");
        io::save_sample(s, dir);
        SceneSample r = io::load_sample(dir);
        CHECK(r.left_cur.domain_tag == s.left_cur.domain_tag);
        CHECK(r.right_cur.view_tag == ViewTag::Right);
        for (int64_t i = 0; i < s.left_cur.data.size(); ++i)
            CHECK(static_cast<float>(r.left_cur.data.v[i]) ==
                  static_cast<float>(s.left_cur.data.v[i]));
        for (int64_t i = 0; i < s.flow_prev_to_cur.data.size(); ++i)
            CHECK(static_cast<float>(r.flow_prev_to_cur.data.v[i]) ==
                  static_cast<float>(s.flow_prev_to_cur.data.v[i]));
        for (int64_t i = 0; i < s.gated.data.size(); ++i)
            CHECK(static_cast<float>(r.gated.data.v[i]) == static_cast<float>(s.gated.data.v[i]));
        CHECK(r.params.has_value() == scatter);
        if (scatter) {
            CHECK(r.params->seed == s.params->seed);
            REQUIRE(r.params->particles.size() == 1);
        }
    }
}

TEST_CASE("load_sample names what is wrong") {
    TempDir td("badsample");
    SceneSample s = make_sample(16, 16, false, 300);
    fs::path dir = td.path / "x";
    io::save_sample(s, dir);
    fs::remove(dir / "depth.pfm");
    CHECK_THROWS_WITH_AS(io::load_sample(dir),
                         ("load_sample: " + dir.string() + ": missing 'depth.pfm'").c_str(),
                         Error);
    io::write_pfm(dir / "depth.pfm", Tensor(1, 1, 8, 8, real(5)));
    try {
        io::load_sample(dir);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("depth.pfm") != std::string::npos);
        CHECK(e.kind() == ErrorKind::Data);
    }
}

TEST_CASE("dataset index finds both populations") {
    TempDir td("root");
    io::save_sample(make_sample(16, 16, false, 1), td.path / "clear" / "000");
    io::save_sample(make_sample(16, 16, false, 2), td.path / "clear" / "001");
    io::save_sample(make_sample(16, 16, true, 3), td.path / "scatter" / "000");
    io::DatasetIndex idx = io::index_dataset(td.path);
    CHECK(idx.clear_dirs.size() == 2);
    CHECK(idx.scatter_dirs.size() == 1);
    CHECK_THROWS_AS(io::index_dataset(td.path / "nope"), Error);
}
