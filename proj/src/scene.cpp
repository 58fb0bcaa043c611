#include "zeroscatter/scene.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "zeroscatter/io.hpp"

namespace zs {

void SceneConfig::validate() const {
    if (height < 16 || width < 16 || height % 16 != 0 || width % 16 != 0)
        fail_usage("scene resolution must be >= 16 and divisible by 16, got " +
                   std::to_string(width) + "x" + std::to_string(height));
    if (!(d_min > 0)) fail_usage("scene d_min must be positive");
    if (!(d_max > d_min)) fail_usage("scene d_max must exceed d_min");
    if (!(focal_px > 0)) fail_usage("scene focal length must be positive");
    if (baseline_m < 0) fail_usage("scene baseline must be non-negative");
    if (std::abs(ego_z) >= d_min)
        fail_usage("per-frame ego z-motion must stay below d_min (depth would cross zero)");
    if (primitive_count < 0) fail_usage("scene primitive count must be non-negative");
    if (sky_bands < 1) fail_usage("scene needs at least one sky band");
    gate.validate();
}

namespace {

struct Cam {
    real x = 0, y = 0, z = 0;
};

struct Prim {
    bool disk = false;
    real z = 0, x = 0, y = 0;  // world center
    real hw = 0, hh = 0;       // half extents (disk: hw = radius)
    std::array<real, 3> col{};
};

struct Geom {
    std::vector<Prim> prims;  // ascending z
    std::vector<std::array<real, 3>> bands;
    real sky_z = 0, band_y0 = 0, band_h = 1;
};

struct Frame {
    Tensor img, depth;
    std::vector<int> id;
};

Geom sample_geom(uint64_t seed, const SceneConfig& cfg) {
    Rng rng(seed_stream(seed, "scene"));
    Geom g;
    g.sky_z = cfg.d_max;
    real yspan = real(1.3) * cfg.height * cfg.d_max / cfg.focal_px;
    g.band_y0 = -yspan / 2;
    g.band_h = yspan / cfg.sky_bands;
    g.bands.resize(cfg.sky_bands);
    for (auto& b : g.bands)
        for (real& c : b) c = quantize16(static_cast<real>(rng.uniform(0.15, 0.95)));
    g.prims.resize(cfg.primitive_count);
    int side = std::min(cfg.height, cfg.width);
    for (Prim& p : g.prims) {
        p.z = static_cast<real>(rng.uniform(cfg.d_min, 0.9 * cfg.d_max));
        p.disk = rng.uniform() < 0.5;
        real px_half = static_cast<real>(rng.uniform(0.08, 0.28)) * side;
        p.hw = px_half * p.z / cfg.focal_px;
        p.hh = p.disk ? p.hw : p.hw * static_cast<real>(rng.uniform(0.5, 2.0));
        p.x = static_cast<real>(rng.uniform(-0.55, 0.55)) * cfg.width * p.z / cfg.focal_px;
        p.y = static_cast<real>(rng.uniform(-0.55, 0.55)) * cfg.height * p.z / cfg.focal_px;
        for (real& c : p.col) c = quantize16(static_cast<real>(rng.uniform(0.05, 0.95)));
    }
    std::stable_sort(g.prims.begin(), g.prims.end(),
                     [](const Prim& a, const Prim& b) { return a.z < b.z; });
    return g;
}

Frame render(const Geom& g, const SceneConfig& cfg, const Cam& cam) {
    int H = cfg.height, W = cfg.width;
    Frame f;
    f.img = Tensor(1, 3, H, W);
    f.depth = Tensor(1, 1, H, W);
    f.id.assign(static_cast<size_t>(H) * W, -1);
    real cx = real(W - 1) / 2, cy = real(H - 1) / 2;
    int P = static_cast<int>(g.prims.size());
    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            int hit = -1;
            real hz = 0;
            const std::array<real, 3>* col = nullptr;
            for (int i = 0; i < P; ++i) {
                const Prim& p = g.prims[i];
                real zr = p.z - cam.z;
                real X = cam.x + (px - cx) * zr / cfg.focal_px;
                real Y = cam.y + (py - cy) * zr / cfg.focal_px;
                real dx = X - p.x, dy = Y - p.y;
                bool in = p.disk ? dx * dx + dy * dy <= p.hw * p.hw
                                 : std::abs(dx) <= p.hw && std::abs(dy) <= p.hh;
                if (in) {
                    hit = i;
                    hz = zr;
                    col = &p.col;
                    break;
                }
            }
            if (hit < 0) {
                real zr = g.sky_z - cam.z;
                real Y = cam.y + (py - cy) * zr / cfg.focal_px;
                int b = static_cast<int>(std::floor((Y - g.band_y0) / g.band_h));
                b = std::clamp(b, 0, static_cast<int>(g.bands.size()) - 1);
                hit = P + b;
                hz = zr;
                col = &g.bands[b];
            }
            size_t at = static_cast<size_t>(py) * W + px;
            for (int c = 0; c < 3; ++c) f.img.v[c * f.img.plane() + at] = (*col)[c];
            f.depth.v[at] = hz;
            f.id[at] = hit;
        }
    }
    return f;
}

/// Reproject every current-frame pixel into the `target` camera; the stored
/// displacement is what backward_warp adds to the output grid coordinate.
FlowField flow_into(const Frame& cur, const SceneConfig& cfg, const Cam& target) {
    int H = cfg.height, W = cfg.width;
    FlowField fl(H, W);
    if (target.x == 0 && target.y == 0 && target.z == 0) return fl;  // identity, exactly zero
    real cx = real(W - 1) / 2, cy = real(H - 1) / 2;
    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            size_t at = static_cast<size_t>(py) * W + px;
            real zr = cur.depth.v[at];  // current camera sits at the origin
            real X = (px - cx) * zr / cfg.focal_px;
            real Y = (py - cy) * zr / cfg.focal_px;
            real zt = zr - target.z;
            real qx = cx + cfg.focal_px * (X - target.x) / zt;
            real qy = cy + cfg.focal_px * (Y - target.y) / zt;
            fl.data.v[at] = qx - px;
            fl.data.v[fl.data.plane() + at] = qy - py;
        }
    }
    return fl;
}

/// Pixels where bilinear reproduction is exact: the sample stays in view and
/// every source neighbor with nonzero weight lies on the target's surface.
/// Coordinate arithmetic mirrors warp_gather (double coords, real fracs) so a
/// frac that rounds to zero drops its neighbor here too.
Mask exact_set(const Tensor& flow, const std::vector<int>& id_src, const std::vector<int>& id_cur,
               int H, int W) {
    Mask m(H, W);
    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            size_t at = static_cast<size_t>(py) * W + px;
            double qx = px + static_cast<double>(flow.v[at]);
            double qy = py + static_cast<double>(flow.v[flow.plane() + at]);
            if (!(qx >= 0.0 && qx <= W - 1.0 && qy >= 0.0 && qy <= H - 1.0)) continue;
            int x0 = static_cast<int>(std::floor(qx));
            int y0 = static_cast<int>(std::floor(qy));
            bool fx = static_cast<real>(qx - x0) != 0;
            bool fy = static_cast<real>(qy - y0) != 0;
            int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            int s = id_cur[at];
            auto same = [&](int yy, int xx) {
                return id_src[static_cast<size_t>(yy) * W + xx] == s;
            };
            bool ok = same(y0, x0) && (!fx || same(y0, x1)) && (!fy || same(y1, x0)) &&
                      (!(fx && fy) || same(y1, x1));
            m.data.v[at] = ok ? 1 : 0;
        }
    }
    return m;
}

Image frame_image(const Frame& f, ViewTag view, int t) {
    Image img;
    img.data = f.img;
    img.domain_tag = DomainTag::RawClear;
    img.view_tag = view;
    img.time_index = t;
    return img;
}

SceneSample assemble(uint64_t seed, const SceneConfig& cfg, const Intensity* intensity,
                     SceneAux* aux) {
    cfg.validate();
    int H = cfg.height, W = cfg.width;
    Geom geom = sample_geom(seed, cfg);
    Cam cam_prev{-cfg.ego_x, -cfg.ego_y, -cfg.ego_z};
    Cam cam_next{cfg.ego_x, cfg.ego_y, cfg.ego_z};
    Cam cam_right{cfg.baseline_m, 0, 0};
    Frame cur = render(geom, cfg, {});
    Frame prev = render(geom, cfg, cam_prev);
    Frame next = render(geom, cfg, cam_next);
    Frame right = render(geom, cfg, cam_right);

    SceneSample s;
    s.left_cur = frame_image(cur, ViewTag::Left, 0);
    s.left_prev = frame_image(prev, ViewTag::Left, -1);
    s.left_next = frame_image(next, ViewTag::Left, 1);
    s.right_cur = frame_image(right, ViewTag::Right, 0);
    s.clear_reference = s.left_cur;
    s.depth_left.data = cur.depth;
    s.depth_left.max_range = cfg.d_max;
    s.flow_prev_to_cur = flow_into(cur, cfg, cam_prev);
    s.flow_next_to_cur = flow_into(cur, cfg, cam_next);
    s.disparity = Tensor(1, 1, H, W);
    for (int64_t i = 0; i < s.disparity.size(); ++i)
        s.disparity.v[i] = cfg.focal_px * cfg.baseline_m / cur.depth.v[i];
    s.gated = simulate_gated(s.left_cur, s.depth_left, cfg.gate);
    quantize16_inplace(s.gated.data);

    if (aux) {
        aux->height = H;
        aux->width = W;
        aux->id_cur = cur.id;
        aux->id_prev = prev.id;
        aux->id_next = next.id;
        aux->id_right = right.id;
        aux->exact_prev = exact_set(s.flow_prev_to_cur.data, prev.id, cur.id, H, W);
        aux->exact_next = exact_set(s.flow_next_to_cur.data, next.id, cur.id, H, W);
        Tensor sflow(1, 2, H, W);
        for (int64_t i = 0; i < s.disparity.size(); ++i) sflow.v[i] = -s.disparity.v[i];
        aux->exact_right = exact_set(sflow, right.id, cur.id, H, W);
    }

    if (intensity) {
        ScatterParams base = sample_scatter_params(seed_stream(seed, "weather", 0), *intensity,
                                                   H, W);
        auto scatter = [&](Image& img, const Tensor& depth, uint64_t frame_idx) {
            ScatterParams p = base;
            if (frame_idx > 0) {
                // Stable weather across the tuple, transient particles.
                ScatterParams fresh = sample_scatter_params(
                    seed_stream(seed, "weather", frame_idx), *intensity, H, W);
                p.particles = std::move(fresh.particles);
            }
            DepthMap dm;
            dm.data = depth;
            dm.max_range = cfg.d_max + std::abs(cfg.ego_z);
            img = apply_scatter(img, dm, p);
            quantize16_inplace(img.data);
        };
        scatter(s.left_cur, cur.depth, 0);
        scatter(s.left_prev, prev.depth, 1);
        scatter(s.left_next, next.depth, 2);
        scatter(s.right_cur, right.depth, 3);
        s.params = std::move(base);
    }

    s.validate();
    return s;
}

}  // namespace

SceneSample generate_scene(uint64_t seed, const SceneConfig& cfg, SceneAux* aux) {
    return assemble(seed, cfg, nullptr, aux);
}

SceneSample generate_scatter_scene(uint64_t seed, const SceneConfig& cfg, Intensity intensity,
                                   SceneAux* aux) {
    return assemble(seed, cfg, &intensity, aux);
}

void gen_dataset(const GenDataConfig& cfg) {
    if (cfg.count < 1) fail_usage("gen-data count must be positive");
    bool mixed = cfg.scatter == "mixed";
    Intensity fixed = Intensity::Medium;
    if (!mixed) fixed = intensity_from_string(cfg.scatter);
    int n_clear, n_scatter;
    if (cfg.population == "both") {
        n_clear = (cfg.count + 1) / 2;
        n_scatter = cfg.count / 2;
    } else if (cfg.population == "clear") {
        n_clear = cfg.count;
        n_scatter = 0;
    } else if (cfg.population == "scatter") {
        n_clear = 0;
        n_scatter = cfg.count;
    } else {
        fail_usage("population must be both, clear or scatter; got '" + cfg.population + "'");
    }
    cfg.scene.validate();

    char name[16];
    for (int i = 0; i < n_clear; ++i) {
        SceneSample s = generate_scene(seed_stream(cfg.seed, "clear-scene", i), cfg.scene);
        std::snprintf(name, sizeof(name), "%05d", i);
        io::save_sample(s, cfg.out_root / "clear" / name);
    }
    for (int i = 0; i < n_scatter; ++i) {
        Intensity in = fixed;
        if (mixed)
            in = static_cast<Intensity>(
                Rng(seed_stream(cfg.seed, "scatter-intensity", i)).uniform_int(0, 2));
        SceneSample s =
            generate_scatter_scene(seed_stream(cfg.seed, "scatter-scene", i), cfg.scene, in);
        std::snprintf(name, sizeof(name), "%05d", i);
        io::save_sample(s, cfg.out_root / "scatter" / name);
    }
}

}  // namespace zs
