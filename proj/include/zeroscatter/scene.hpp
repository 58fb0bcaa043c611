#pragma once

#include <filesystem>

#include "zeroscatter/gated.hpp"
#include "zeroscatter/weather.hpp"

namespace zs {

/// Procedural stereo-video scene generator. The world is a stack of
/// fronto-parallel solid-color primitives (rectangles and disks) at fixed
/// metric depths in front of a banded sky plane; the camera translates by a
/// fixed offset per frame. Flow, disparity and occlusion are closed-form, so
/// warp equalities can be asserted as binary comparisons.
struct SceneConfig {
    int height = 128, width = 128;
    real d_min = 5, d_max = 100;  // primitive depth range, meters
    real focal_px = 160;
    real baseline_m = real(0.3);
    real ego_x = real(0.05), ego_y = 0, ego_z = real(0.4);  // camera motion per frame, meters
    int primitive_count = 24;
    int sky_bands = 24;
    GateProfile gate;
    void validate() const;
};

/// Ground-truth byproducts for oracle tests: per-pixel surface ids of every
/// rendered frame and the pixel sets where warp reproduction is exact
/// (sample in view and every bilinear source neighbor lies on the same
/// surface as the target pixel).
struct SceneAux {
    int height = 0, width = 0;
    std::vector<int> id_cur, id_prev, id_next, id_right;
    Mask exact_prev, exact_next, exact_right;
};

/// Render one clear scene. Deterministic per (seed, cfg).
SceneSample generate_scene(uint64_t seed, const SceneConfig& cfg, SceneAux* aux = nullptr);

/// Same geometry pass, then all four frames pass through the scattering
/// simulator: one weather draw (extinction field, airlight) shared by the
/// whole scene, particles re-drawn per frame. The gated capture and
/// clear_reference stay scatter-free.
SceneSample generate_scatter_scene(uint64_t seed, const SceneConfig& cfg, Intensity intensity,
                                   SceneAux* aux = nullptr);

struct GenDataConfig {
    std::filesystem::path out_root;
    int count = 100;                  // total sample directories written
    uint64_t seed = 1;
    std::string scatter = "mixed";    // light | medium | dense | mixed
    std::string population = "both";  // both | clear | scatter
    SceneConfig scene;
};

/// Write a dataset tree: `clear/NNNNN` and `scatter/NNNNN` sample
/// directories. With population "both" the count splits evenly (clear gets
/// the odd remainder).
void gen_dataset(const GenDataConfig& cfg);

}  // namespace zs
