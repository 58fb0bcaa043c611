#pragma once

#include <cmath>
#include <string>

#include "zeroscatter/autodiff.hpp"

namespace zs {

/// Register a conv layer `name` (weight "<name>.w", bias "<name>.b").
inline void add_conv(ad::ParamStore& s, const std::string& name, int cin, int cout, int k,
                     Rng& rng, double gain = std::sqrt(2.0), bool bias = true) {
    s.add(name + ".w", ad::conv_init(cout, cin, k, k, rng, gain));
    if (bias) s.add(name + ".b", ad::zeros(1, cout, 1, 1));
}

/// Register instance-norm scale/shift for `name` ("<name>.g" / "<name>.s").
inline void add_norm(ad::ParamStore& s, const std::string& name, int c) {
    s.add(name + ".g", ad::full(1, c, 1, 1, real(1)));
    s.add(name + ".s", ad::zeros(1, c, 1, 1));
}

struct BlockOpts {
    int stride = 1;
    int dilation = 1;
    real slope = real(0.2);
    bool act = true;
};

/// conv (same-padded for its kernel size and dilation) + instance norm when
/// the layer has norm parameters + leaky relu.
inline int conv_block(ad::Graph& g, const ad::Bound& b, const std::string& name, int x,
                      BlockOpts o = {}) {
    int w = b.at(name + ".w");
    int k = g.val(w).h;
    int pad = o.dilation * (k - 1) / 2;
    int bias = b.ids.count(name + ".b") ? b.at(name + ".b") : -1;
    int y = g.conv2d(x, w, bias, o.stride, pad, o.dilation);
    if (b.ids.count(name + ".g")) y = g.instance_norm(y, b.at(name + ".g"), b.at(name + ".s"));
    if (o.act) y = g.leaky_relu(y, o.slope);
    return y;
}

/// Bare same-padded conv (output heads).
inline int conv_plain(ad::Graph& g, const ad::Bound& b, const std::string& name, int x,
                      int dilation = 1) {
    int w = b.at(name + ".w");
    int k = g.val(w).h;
    int bias = b.ids.count(name + ".b") ? b.at(name + ".b") : -1;
    return g.conv2d(x, w, bias, 1, dilation * (k - 1) / 2, dilation);
}

}  // namespace zs
