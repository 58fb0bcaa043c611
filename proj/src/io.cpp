#include "zeroscatter/io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace zs::io {

using nlohmann::json;

namespace {

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

uint16_t to_u16(real x) {
    double c = std::max(0.0, std::min(1.0, static_cast<double>(x)));
    return static_cast<uint16_t>(std::lround(c * 65535.0));
}

void write_png_impl(const fs::path& path, const Tensor& t, int bit_depth) {
    if (t.n != 1 || (t.c != 1 && t.c != 3))
        fail_data("write_png: expected shape (1,1,H,W) or (1,3,H,W), got " + t.shape_str() +
                  " for " + path.string());
    PngWriter g;
    g.fp = std::fopen(path.string().c_str(), "wb");
    if (!g.fp) fail_data("write_png: cannot open " + path.string());
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) fail_data("write_png: png_create_write_struct failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info) fail_data("write_png: png_create_info_struct failed");

    std::vector<uint8_t> row(static_cast<size_t>(t.w) * t.c * (bit_depth / 8));
    if (setjmp(png_jmpbuf(g.png)))
        fail_data("write_png: libpng error writing " + path.string());

    png_init_io(g.png, g.fp);
    int color = t.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(g.png, g.info, static_cast<png_uint_32>(t.w), static_cast<png_uint_32>(t.h),
                 bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    for (int y = 0; y < t.h; ++y) {
        for (int x = 0; x < t.w; ++x) {
            for (int ch = 0; ch < t.c; ++ch) {
                uint16_t u = to_u16(t.at(0, ch, y, x));
                size_t i = (static_cast<size_t>(x) * t.c + ch) * (bit_depth / 8);
                if (bit_depth == 16) {
                    row[i] = static_cast<uint8_t>(u >> 8);  // PNG samples are big-endian
                    row[i + 1] = static_cast<uint8_t>(u & 0xff);
                } else {
                    row[i] = static_cast<uint8_t>(u >> 8);
                }
            }
        }
        png_write_row(g.png, row.data());
    }
    png_write_end(g.png, nullptr);
}

}  // namespace

void write_png16(const fs::path& path, const Tensor& t) { write_png_impl(path, t, 16); }

void write_png8_gray(const fs::path& path, const Tensor& t) {
    if (t.c != 1) fail_data("write_png8_gray: expected 1 channel, got " + t.shape_str());
    write_png_impl(path, t, 8);
}

Tensor read_png(const fs::path& path) {
    PngReader g;
    g.fp = std::fopen(path.string().c_str(), "rb");
    if (!g.fp) fail_data("read_png: cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, g.fp) != 8 || png_sig_cmp(sig, 0, 8))
        fail_data("read_png: " + path.string() + " is not a PNG file");
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) fail_data("read_png: png_create_read_struct failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info) fail_data("read_png: png_create_info_struct failed");

    std::vector<uint8_t> row;
    Tensor t;
    if (setjmp(png_jmpbuf(g.png)))
        fail_data("read_png: libpng error reading " + path.string());

    png_init_io(g.png, g.fp);
    png_set_sig_bytes(g.png, 8);
    png_read_info(g.png, g.info);

    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color = 0;
    png_get_IHDR(g.png, g.info, &w, &h, &bit_depth, &color, nullptr, nullptr, nullptr);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
    if (png_get_valid(g.png, g.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(g.png);
    png_set_strip_alpha(g.png);
    png_read_update_info(g.png, g.info);

    int channels = png_get_channels(g.png, g.info);
    bit_depth = png_get_bit_depth(g.png, g.info);
    if (channels != 1 && channels != 3)
        fail_data("read_png: " + path.string() + " has unsupported channel count " +
                  std::to_string(channels));
    if (bit_depth != 8 && bit_depth != 16)
        fail_data("read_png: " + path.string() + " has unsupported bit depth " +
                  std::to_string(bit_depth));

    t = Tensor(1, channels, static_cast<int>(h), static_cast<int>(w));
    row.resize(png_get_rowbytes(g.png, g.info));
    double scale = bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (int y = 0; y < static_cast<int>(h); ++y) {
        png_read_row(g.png, row.data(), nullptr);
        for (int x = 0; x < static_cast<int>(w); ++x) {
            for (int ch = 0; ch < channels; ++ch) {
                size_t i = (static_cast<size_t>(x) * channels + ch) * (bit_depth / 8);
                uint32_t u = bit_depth == 16
                                 ? (static_cast<uint32_t>(row[i]) << 8) | row[i + 1]
                                 : row[i];
                t.at(0, ch, y, x) = static_cast<real>(u * scale);
            }
        }
    }
    png_read_end(g.png, nullptr);
    return t;
}

void write_pfm(const fs::path& path, const Tensor& t) {
    if (t.n != 1 || t.c < 1 || t.c > 3)
        fail_data("write_pfm: expected 1-3 channels, got " + t.shape_str() + " for " +
                  path.string());
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_data("write_pfm: cannot open " + path.string());
    int oc = t.c == 1 ? 1 : 3;
    f << (oc == 1 ? "Pf" : "PF") << "\n" << t.w << " " << t.h << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(t.w) * oc, 0.f);
    for (int y = t.h - 1; y >= 0; --y) {  // PFM rows run bottom to top
        for (int x = 0; x < t.w; ++x)
            for (int ch = 0; ch < oc; ++ch)
                row[static_cast<size_t>(x) * oc + ch] =
                    ch < t.c ? static_cast<float>(t.at(0, ch, y, x)) : 0.f;
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!f) fail_data("write_pfm: write failed for " + path.string());
}

Tensor read_pfm(const fs::path& path, int expect_c) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("read_pfm: cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    f >> magic >> w >> h >> scale;
    if (!f || (magic != "PF" && magic != "Pf"))
        fail_data("read_pfm: " + path.string() + " has a malformed header");
    f.get();  // single whitespace separating header from data
    int fc = magic == "PF" ? 3 : 1;
    if (w <= 0 || h <= 0 || scale == 0.0)
        fail_data("read_pfm: " + path.string() + " has a malformed header");
    if ((expect_c == 1 && fc != 1) || (expect_c != 1 && fc != 3))
        fail_data("read_pfm: " + path.string() + " holds " + std::to_string(fc) +
                  " channels, expected " + std::to_string(expect_c));

    std::vector<float> raw(static_cast<size_t>(w) * h * fc);
    f.read(reinterpret_cast<char*>(raw.data()),
           static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!f) fail_data("read_pfm: " + path.string() + " is truncated");
    if (scale > 0) {  // positive scale marks big-endian data
        for (float& x : raw) {
            uint32_t u;
            std::memcpy(&u, &x, 4);
            u = __builtin_bswap32(u);
            std::memcpy(&x, &u, 4);
        }
    }
    Tensor t(1, expect_c, h, w);
    for (int y = 0; y < h; ++y) {
        const float* src = raw.data() + static_cast<size_t>(h - 1 - y) * w * fc;
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < expect_c; ++ch)
                t.at(0, ch, y, x) = static_cast<real>(src[static_cast<size_t>(x) * fc + ch]);
    }
    return t;
}

std::string params_to_json(const ScatterParams& p) {
    json j;
    j["beta_field"] = {{"h", p.beta_field.h}, {"w", p.beta_field.w}, {"data", p.beta_field.v}};
    j["airlight"] = {p.airlight[0], p.airlight[1], p.airlight[2]};
    j["particles"] = json::array();
    for (const ParticleSpec& q : p.particles)
        j["particles"].push_back({{"center", {q.cx, q.cy}},
                                  {"radius", q.radius},
                                  {"opacity", q.opacity},
                                  {"streak_length", q.streak_len},
                                  {"angle", q.angle}});
    j["seed"] = p.seed;
    return j.dump(1);
}

ScatterParams params_from_json(const std::string& text, const std::string& context) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail_data(context + ": invalid JSON");
    if (!j.is_object()) fail_data(context + ": expected a JSON object");
    auto need = [&](const json& o, const char* key) -> const json& {
        auto it = o.find(key);
        if (it == o.end()) fail_data(context + ": missing field '" + key + "'");
        return *it;
    };
    ScatterParams p;
    try {
        const json& bf = need(j, "beta_field");
        int bh = need(bf, "h").get<int>();
        int bw = need(bf, "w").get<int>();
        const json& data = need(bf, "data");
        if (bh <= 0 || bw <= 0 || !data.is_array() ||
            data.size() != static_cast<size_t>(bh) * bw)
            fail_data(context + ": beta_field data does not match its h*w");
        p.beta_field = Tensor(1, 1, bh, bw);
        for (size_t i = 0; i < data.size(); ++i) p.beta_field.v[i] = data[i].get<real>();

        const json& air = need(j, "airlight");
        if (!air.is_array() || air.size() != 3)
            fail_data(context + ": airlight must hold 3 values");
        for (int i = 0; i < 3; ++i) p.airlight[i] = air[i].get<real>();

        const json& parts = need(j, "particles");
        if (!parts.is_array()) fail_data(context + ": particles must be an array");
        for (const json& q : parts) {
            ParticleSpec s;
            const json& ctr = need(q, "center");
            if (!ctr.is_array() || ctr.size() != 2)
                fail_data(context + ": particle center must hold 2 values");
            s.cx = ctr[0].get<real>();
            s.cy = ctr[1].get<real>();
            s.radius = need(q, "radius").get<real>();
            s.opacity = need(q, "opacity").get<real>();
            s.streak_len = need(q, "streak_length").get<real>();
            s.angle = need(q, "angle").get<real>();
            p.particles.push_back(s);
        }
        p.seed = need(j, "seed").get<int64_t>();
    } catch (const json::exception& e) {
        fail_data(context + ": " + e.what());
    }
    p.validate();
    return p;
}

void save_sample(const SceneSample& s, const fs::path& dir) {
    s.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail_data("save_sample: cannot create " + dir.string() + ": " + ec.message());
    write_png16(dir / "left_prev.png", s.left_prev.data);
    write_png16(dir / "left_cur.png", s.left_cur.data);
    write_png16(dir / "left_next.png", s.left_next.data);
    write_png16(dir / "right_cur.png", s.right_cur.data);
    write_pfm(dir / "depth.pfm", s.depth_left.data);
    write_pfm(dir / "disparity.pfm", s.disparity);
    write_pfm(dir / "flow_prev.pfm", s.flow_prev_to_cur.data);
    write_pfm(dir / "flow_next.pfm", s.flow_next_to_cur.data);
    write_png16(dir / "gated.png", s.gated.data);
    write_png16(dir / "clear_ref.png", s.clear_reference.data);
    std::ofstream f(dir / "params.json");
    f << (s.params ? params_to_json(*s.params) : std::string("null")) << "\n";
    if (!f) fail_data("save_sample: cannot write " + (dir / "params.json").string());
}

SceneSample load_sample(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail_data("load_sample: no sample directory at " + dir.string());
    auto need = [&](const char* name) {
        fs::path p = dir / name;
        if (!fs::exists(p)) fail_data("load_sample: " + dir.string() + ": missing '" + name + "'");
        return p;
    };
    SceneSample s;
    auto load_rgb = [&](const char* name, Image& img) {
        Tensor t = read_png(need(name));
        if (t.c != 3)
            fail_data("load_sample: " + dir.string() + ": '" + name + "' must be 3-channel");
        img.data = std::move(t);
    };
    load_rgb("left_prev.png", s.left_prev);
    load_rgb("left_cur.png", s.left_cur);
    load_rgb("left_next.png", s.left_next);
    load_rgb("right_cur.png", s.right_cur);
    load_rgb("clear_ref.png", s.clear_reference);
    s.left_prev.time_index = -1;
    s.left_next.time_index = 1;
    s.right_cur.view_tag = ViewTag::Right;
    s.clear_reference.domain_tag = DomainTag::RawClear;

    s.depth_left.data = read_pfm(need("depth.pfm"), 1);
    s.depth_left.max_range = s.depth_left.data.max();
    s.disparity = read_pfm(need("disparity.pfm"), 1);
    s.flow_prev_to_cur.data = read_pfm(need("flow_prev.pfm"), 2);
    s.flow_next_to_cur.data = read_pfm(need("flow_next.pfm"), 2);
    Tensor gated = read_png(need("gated.png"));
    if (gated.c != 1)
        fail_data("load_sample: " + dir.string() + ": 'gated.png' must be single-channel");
    s.gated.data = std::move(gated);

    int h = s.left_cur.height(), w = s.left_cur.width();
    auto match = [&](const Tensor& t, const char* name) {
        if (t.h != h || t.w != w)
            fail_data("load_sample: " + dir.string() + ": '" + name + "' is " +
                      std::to_string(t.w) + "x" + std::to_string(t.h) + ", expected " +
                      std::to_string(w) + "x" + std::to_string(h));
    };
    match(s.left_prev.data, "left_prev.png");
    match(s.left_next.data, "left_next.png");
    match(s.right_cur.data, "right_cur.png");
    match(s.clear_reference.data, "clear_ref.png");
    match(s.depth_left.data, "depth.pfm");
    match(s.disparity, "disparity.pfm");
    match(s.flow_prev_to_cur.data, "flow_prev.pfm");
    match(s.flow_next_to_cur.data, "flow_next.pfm");
    match(s.gated.data, "gated.png");

    std::ifstream pf(need("params.json"));
    std::string text((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
    json probe = json::parse(text, nullptr, false);
    if (probe.is_discarded())
        fail_data("load_sample: " + dir.string() + ": params.json is invalid JSON");
    DomainTag tag;
    if (probe.is_null()) {
        s.params.reset();
        tag = DomainTag::RawClear;
    } else {
        s.params = params_from_json(text, "load_sample: " + dir.string() + ": params.json");
        if (s.params->beta_field.h != h || s.params->beta_field.w != w)
            fail_data("load_sample: " + dir.string() + ": beta_field is " +
                      std::to_string(s.params->beta_field.w) + "x" +
                      std::to_string(s.params->beta_field.h) + ", expected " + std::to_string(w) +
                      "x" + std::to_string(h));
        tag = DomainTag::RawScatter;
    }
    s.left_prev.domain_tag = tag;
    s.left_cur.domain_tag = tag;
    s.left_next.domain_tag = tag;
    s.right_cur.domain_tag = tag;

    s.validate();
    return s;
}

namespace {

void put_str(std::ofstream& f, const std::string& s) {
    uint32_t n = (uint32_t)s.size();
    f.write(reinterpret_cast<const char*>(&n), 4);
    f.write(s.data(), n);
}

std::string get_str(std::ifstream& f, const fs::path& path) {
    uint32_t n = 0;
    f.read(reinterpret_cast<char*>(&n), 4);
    if (!f || n > (1u << 24)) fail_data("corrupt checkpoint: " + path.string());
    std::string s(n, '\0');
    f.read(s.data(), n);
    if (!f) fail_data("corrupt checkpoint: " + path.string());
    return s;
}

void put_tensor_data(std::ofstream& f, const Tensor& t, int64_t expect) {
    if (t.v.empty()) {
        std::vector<real> zero((size_t)expect, real(0));
        f.write(reinterpret_cast<const char*>(zero.data()), expect * (int64_t)sizeof(real));
    } else {
        f.write(reinterpret_cast<const char*>(t.v.data()), expect * (int64_t)sizeof(real));
    }
}

}  // namespace

void save_checkpoint(const fs::path& path, const ad::ParamStore& store,
                     const std::map<std::string, std::string>& meta) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_data("cannot write checkpoint: " + path.string());
    f.write("ZSCK", 4);
    uint32_t version = 1, rwidth = sizeof(real);
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&rwidth), 4);
    uint32_t mcount = (uint32_t)meta.size();
    f.write(reinterpret_cast<const char*>(&mcount), 4);
    for (const auto& [k, v] : meta) {
        put_str(f, k);
        put_str(f, v);
    }
    uint64_t pcount = store.entries.size();
    f.write(reinterpret_cast<const char*>(&pcount), 8);
    for (const auto& [name, e] : store.entries) {
        put_str(f, name);
        int32_t dims[4] = {e.value.n, e.value.c, e.value.h, e.value.w};
        f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
        put_tensor_data(f, e.value, e.value.size());
        put_tensor_data(f, e.m, e.value.size());
        put_tensor_data(f, e.v, e.value.size());
    }
    if (!f) fail_data("short write saving checkpoint: " + path.string());
}

ad::ParamStore load_checkpoint(const fs::path& path, std::map<std::string, std::string>& meta) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("checkpoint not found: " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "ZSCK", 4) != 0)
        fail_data("not a checkpoint file: " + path.string());
    uint32_t version = 0, rwidth = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&rwidth), 4);
    if (version != 1) fail_data("unsupported checkpoint version in " + path.string());
    if (rwidth != sizeof(real))
        fail_data("checkpoint " + path.string() + " was written with a " +
                  std::to_string(rwidth * 8) + "-bit build; this build is " +
                  std::to_string(sizeof(real) * 8) + "-bit");
    uint32_t mcount = 0;
    f.read(reinterpret_cast<char*>(&mcount), 4);
    meta.clear();
    for (uint32_t i = 0; i < mcount && f; ++i) {
        std::string k = get_str(f, path);
        meta[k] = get_str(f, path);
    }
    uint64_t pcount = 0;
    f.read(reinterpret_cast<char*>(&pcount), 8);
    if (!f || pcount > (1u << 20)) fail_data("corrupt checkpoint: " + path.string());
    ad::ParamStore store;
    for (uint64_t i = 0; i < pcount; ++i) {
        std::string name = get_str(f, path);
        int32_t dims[4];
        f.read(reinterpret_cast<char*>(dims), sizeof(dims));
        if (!f || dims[0] < 1 || dims[1] < 1 || dims[2] < 1 || dims[3] < 1)
            fail_data("corrupt checkpoint tensor header: " + path.string());
        auto& e = store.entries[name];
        e.value = Tensor(dims[0], dims[1], dims[2], dims[3]);
        e.m = Tensor(dims[0], dims[1], dims[2], dims[3]);
        e.v = Tensor(dims[0], dims[1], dims[2], dims[3]);
        int64_t sz = e.value.size() * (int64_t)sizeof(real);
        f.read(reinterpret_cast<char*>(e.value.v.data()), sz);
        f.read(reinterpret_cast<char*>(e.m.v.data()), sz);
        f.read(reinterpret_cast<char*>(e.v.v.data()), sz);
        if (!f) fail_data("truncated checkpoint: " + path.string());
    }
    return store;
}

DatasetIndex index_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) fail_data("dataset root not found: " + root.string());
    auto collect = [&](const char* sub) {
        std::vector<fs::path> out;
        fs::path p = root / sub;
        if (!fs::is_directory(p)) return out;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory() && fs::exists(e.path() / "left_cur.png")) out.push_back(e.path());
        std::sort(out.begin(), out.end());
        return out;
    };
    DatasetIndex idx;
    idx.clear_dirs = collect("clear");
    idx.scatter_dirs = collect("scatter");
    return idx;
}

}  // namespace zs::io
