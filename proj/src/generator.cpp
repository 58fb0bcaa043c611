#include "zeroscatter/generator.hpp"

namespace zs {

void GenMeta::validate() const {
    check_data(base_width >= 4, "GenMeta: base_width must be >= 4");
    check_data(dilation >= 2, "GenMeta: dilation must be >= 2");
    check_data(gc_stages == 4, "GenMeta: the consistency block has exactly 4 stages");
}

std::map<std::string, std::string> GenMeta::to_map() const {
    return {{"base_width", std::to_string(base_width)},
            {"dilation", std::to_string(dilation)},
            {"gc_stages", std::to_string(gc_stages)}};
}

GenMeta GenMeta::from_map(const std::map<std::string, std::string>& m) {
    GenMeta g;
    auto get = [&](const char* k, int fallback) {
        auto it = m.find(k);
        return it == m.end() ? fallback : std::stoi(it->second);
    };
    g.base_width = get("base_width", g.base_width);
    g.dilation = get("dilation", g.dilation);
    g.gc_stages = get("gc_stages", g.gc_stages);
    g.validate();
    return g;
}

void init_generator(ad::ParamStore& s, const GenMeta& meta, uint64_t seed) {
    meta.validate();
    const int w = meta.base_width;
    Rng rng(seed_stream(seed, "generator_init"));

    auto block = [&](const std::string& name, int cin, int cout, int k, bool norm) {
        add_conv(s, name, cin, cout, k, rng);
        if (norm) add_norm(s, name, cout);
    };

    block("gt.a1", 3, w, 3, true);
    block("gt.a2", w, w, 3, true);
    block("gt.b1", 3, w, 5, true);
    block("gt.b2", w, w, 5, true);
    block("gt.fuse1", 2 * w, w, 1, false);
    block("gt.l1", 3, w, 3, true);
    block("gt.l2", w, w, 3, true);
    block("gt.fuse2", 2 * w, w, 1, false);
    // modest head gain keeps initial outputs away from the sigmoid tails
    add_conv(s, "gt.head", w, 3, 3, rng, 0.1);

    block("gc.e0", 3, w, 3, true);
    block("gc.e1", w, 2 * w, 3, true);
    block("gc.e2", 2 * w, 4 * w, 3, true);
    block("gc.e3", 4 * w, 4 * w, 3, true);
    block("gc.e4", 4 * w, 4 * w, 3, true);
    block("gc.mid", 4 * w, 4 * w, 3, true);
    block("gc.u3", 8 * w, 4 * w, 3, true);
    block("gc.u2", 8 * w, 2 * w, 3, true);
    block("gc.u1", 4 * w, w, 3, true);
    block("gc.u0", 2 * w, w, 3, true);
    s.add("gc.head.w", ad::zeros(3, w, 3, 3));
    s.add("gc.head.b", ad::zeros(1, 3, 1, 1));
}

int translation_graph(ad::Graph& g, const ad::Bound& b, const GenMeta& meta, int x) {
    const Tensor& xv = g.val(x);
    check_data(xv.h % 16 == 0 && xv.w % 16 == 0,
               "translation_graph: dimensions must be divisible by 16, got " + xv.shape_str());
    const int h = xv.h, w = xv.w;

    int a = conv_block(g, b, "gt.a1", x);
    a = conv_block(g, b, "gt.a2", a);
    int d = conv_block(g, b, "gt.b1", x, {.dilation = meta.dilation});
    d = conv_block(g, b, "gt.b2", d, {.dilation = meta.dilation});
    int full = conv_block(g, b, "gt.fuse1", g.concat_c({a, d}));

    int lo = g.resize_bilinear(x, h / 4, w / 4);
    lo = conv_block(g, b, "gt.l1", lo);
    lo = conv_block(g, b, "gt.l2", lo);
    lo = g.resize_bilinear(lo, h, w);

    int fused = conv_block(g, b, "gt.fuse2", g.concat_c({full, lo}));
    return g.sigmoid(conv_plain(g, b, "gt.head", fused));
}

int consistency_graph(ad::Graph& g, const ad::Bound& b, const GenMeta& meta, int x) {
    const Tensor& xv = g.val(x);
    check_data(xv.h % 16 == 0 && xv.w % 16 == 0,
               "consistency_graph: dimensions must be divisible by 16, got " + xv.shape_str());

    int e0 = conv_block(g, b, "gc.e0", x);
    int e1 = conv_block(g, b, "gc.e1", e0, {.stride = 2});
    int e2 = conv_block(g, b, "gc.e2", e1, {.stride = 2});
    int e3 = conv_block(g, b, "gc.e3", e2, {.stride = 2});
    int e4 = conv_block(g, b, "gc.e4", e3, {.stride = 2});
    int m = conv_block(g, b, "gc.mid", e4);

    auto up_to = [&](int t, int ref) {
        const Tensor& r = g.val(ref);
        return g.resize_bilinear(t, r.h, r.w);
    };
    int u3 = conv_block(g, b, "gc.u3", g.concat_c({up_to(m, e3), e3}));
    int u2 = conv_block(g, b, "gc.u2", g.concat_c({up_to(u3, e2), e2}));
    int u1 = conv_block(g, b, "gc.u1", g.concat_c({up_to(u2, e1), e1}));
    int u0 = conv_block(g, b, "gc.u0", g.concat_c({up_to(u1, e0), e0}));

    int delta = conv_plain(g, b, "gc.head", u0);
    return g.clamp01(g.add(x, delta));
}

namespace {

Image run_block(const ad::ParamStore& store, const GenMeta& meta, const Image& img,
                bool trans, bool cons) {
    img.validate();
    ad::Graph g;
    g.set_grad_enabled(false);
    ad::Bound b = ad::bind_frozen(g, store, {"gt.", "gc."});
    int y = g.constant(img.data);
    if (trans) y = translation_graph(g, b, meta, y);
    if (cons) y = consistency_graph(g, b, meta, y);
    Image out = img;
    out.data = g.val(y);
    out.domain_tag = DomainTag::Generated;
    return out;
}

}  // namespace

Image translation_forward(const ad::ParamStore& store, const GenMeta& meta, const Image& img) {
    return run_block(store, meta, img, true, false);
}

Image consistency_forward(const ad::ParamStore& store, const GenMeta& meta, const Image& img) {
    return run_block(store, meta, img, false, true);
}

Image full_forward(const ad::ParamStore& store, const GenMeta& meta, const Image& img,
                   bool use_consistency) {
    return run_block(store, meta, img, true, use_consistency);
}

std::pair<Tensor, Tensor> translation_stream_features(const ad::ParamStore& store,
                                                      const GenMeta& meta, const Image& img) {
    img.validate();
    ad::Graph g;
    g.set_grad_enabled(false);
    ad::Bound b = ad::bind_frozen(g, store, {"gt."});
    int x = g.constant(img.data);
    int a = conv_block(g, b, "gt.a1", x);
    a = conv_block(g, b, "gt.a2", a);
    int d = conv_block(g, b, "gt.b1", x, {.dilation = meta.dilation});
    d = conv_block(g, b, "gt.b2", d, {.dilation = meta.dilation});
    return {g.val(a), g.val(d)};
}

}  // namespace zs
