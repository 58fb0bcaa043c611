#include "zeroscatter/isp.hpp"

#include <algorithm>
#include <cmath>

namespace zs {

void ProcConfig::validate() const {
    check_data(tile_rows >= 1 && tile_cols >= 1, "ProcConfig: tile grid must be positive");
    check_data(clip_limit >= real(1), "ProcConfig: clip_limit must be >= 1");
    check_data(gamma > real(0), "ProcConfig: gamma must be > 0");
}

TileMaps compute_tile_maps(const Tensor& luma, int rows, int cols, real clip_limit,
                           int bins) {
    check_data(luma.n == 1 && luma.c == 1, "compute_tile_maps: expected a (1,1,H,W) plane");
    check_data(bins >= 2, "compute_tile_maps: need at least 2 bins");
    TileMaps m;
    m.rows = rows;
    m.cols = cols;
    m.bins = bins;
    // Tiles cover the image exactly; edge tiles read clamped pixels when the
    // grid does not divide the image.
    m.tile_h = (luma.h + rows - 1) / rows;
    m.tile_w = (luma.w + cols - 1) / cols;
    const double tile_px = (double)m.tile_h * m.tile_w;
    const double limit = std::max(1.0, (double)clip_limit * tile_px / bins);

    m.lut.resize((size_t)rows * cols);
    std::vector<double> hist(bins);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            std::fill(hist.begin(), hist.end(), 0.0);
            for (int dy = 0; dy < m.tile_h; ++dy)
                for (int dx = 0; dx < m.tile_w; ++dx) {
                    int y = std::min(r * m.tile_h + dy, luma.h - 1);
                    int x = std::min(c * m.tile_w + dx, luma.w - 1);
                    real v = luma.at(0, 0, y, x);
                    int b = std::min(bins - 1, std::max(0, (int)(v * bins)));
                    hist[b] += 1.0;
                }
            double excess = 0.0;
            for (double& hb : hist)
                if (hb > limit) {
                    excess += hb - limit;
                    hb = limit;
                }
            double share = excess / bins;
            double cdf = 0.0;
            std::vector<real>& lut = m.lut[(size_t)r * cols + c];
            lut.resize(bins);
            for (int b = 0; b < bins; ++b) {
                cdf += hist[b] + share;
                lut[b] = (real)(cdf / tile_px);
            }
        }
    return m;
}

namespace {

real lut_lookup(const TileMaps& m, int r, int c, int bin) { return m.at(r, c)[bin]; }

}  // namespace

Image process(const Image& img, const ProcConfig& cfg) {
    img.validate();
    cfg.validate();
    const int h = img.data.h, w = img.data.w;

    // Gamma encoding, then a luminance/chroma split so equalization cannot
    // shift hue. The chroma transform is chosen exactly invertible.
    Tensor ych(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double r = std::pow((double)img.data.at(0, 0, y, x), 1.0 / (double)cfg.gamma);
            double g = std::pow((double)img.data.at(0, 1, y, x), 1.0 / (double)cfg.gamma);
            double b = std::pow((double)img.data.at(0, 2, y, x), 1.0 / (double)cfg.gamma);
            double yy = 0.299 * r + 0.587 * g + 0.114 * b;
            ych.at(0, 0, y, x) = (real)yy;
            ych.at(0, 1, y, x) = (real)((b - yy) / 1.772);
            ych.at(0, 2, y, x) = (real)((r - yy) / 1.402);
        }

    Tensor luma(1, 1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            luma.at(0, 0, y, x) = std::min(real(1), std::max(real(0), ych.at(0, 0, y, x)));

    TileMaps maps = compute_tile_maps(luma, cfg.tile_rows, cfg.tile_cols, cfg.clip_limit);

    Image out = img;
    out.domain_tag = DomainTag::Processed;
    for (int y = 0; y < h; ++y) {
        double gy = ((double)y + 0.5) / maps.tile_h - 0.5;
        gy = std::min(std::max(gy, 0.0), (double)maps.rows - 1);
        int r0 = (int)gy;
        int r1 = std::min(r0 + 1, maps.rows - 1);
        double fy = gy - r0;
        for (int x = 0; x < w; ++x) {
            double gx = ((double)x + 0.5) / maps.tile_w - 0.5;
            gx = std::min(std::max(gx, 0.0), (double)maps.cols - 1);
            int c0 = (int)gx;
            int c1 = std::min(c0 + 1, maps.cols - 1);
            double fx = gx - c0;

            int bin = std::min(maps.bins - 1,
                               std::max(0, (int)(luma.at(0, 0, y, x) * maps.bins)));
            // Lerp form so identical tile maps reproduce their value exactly.
            double v00 = lut_lookup(maps, r0, c0, bin), v01 = lut_lookup(maps, r0, c1, bin);
            double v10 = lut_lookup(maps, r1, c0, bin), v11 = lut_lookup(maps, r1, c1, bin);
            double top = v00 + fx * (v01 - v00);
            double bot = v10 + fx * (v11 - v10);
            double yy = top + fy * (bot - top);

            double cb = ych.at(0, 1, y, x), cr = ych.at(0, 2, y, x);
            double rr = yy + 1.402 * cr;
            double bb = yy + 1.772 * cb;
            double gg = (yy - 0.299 * rr - 0.114 * bb) / 0.587;
            out.data.at(0, 0, y, x) = (real)std::min(1.0, std::max(0.0, rr));
            out.data.at(0, 1, y, x) = (real)std::min(1.0, std::max(0.0, gg));
            out.data.at(0, 2, y, x) = (real)std::min(1.0, std::max(0.0, bb));
        }
    }
    return out;
}

}  // namespace zs
