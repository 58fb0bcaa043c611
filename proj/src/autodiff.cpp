#include "zeroscatter/autodiff.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "zeroscatter/warp.hpp"

namespace zs::ad {

using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using MapCM = Eigen::Map<const Mat>;

int Graph::push(Tensor val, bool requires_grad, std::function<void(Graph&)> back) {
    Node n;
    n.val = std::move(val);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(int id) {
    Node& n = nodes_[id];
    if (n.grad.v.empty()) n.grad = Tensor(n.val.n, n.val.c, n.val.h, n.val.w);
    return n.grad;
}

int Graph::constant(Tensor t) { return push(std::move(t), false, nullptr); }

int Graph::leaf(Tensor t) { return push(std::move(t), true, nullptr); }

int Graph::add(int a, int b) {
    const Tensor& x = nodes_[a].val;
    const Tensor& y = nodes_[b].val;
    if (!x.same_shape(y))
        fail_data("graph add: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out.v[i] += y.v[i];
    bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
    int id = push(std::move(out), rg, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, a, b](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            if (g.nodes_[a].requires_grad) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < gy.size(); ++i) ga.v[i] += gy.v[i];
            }
            if (g.nodes_[b].requires_grad) {
                Tensor& gb = g.grad_buf(b);
                for (int64_t i = 0; i < gy.size(); ++i) gb.v[i] += gy.v[i];
            }
        };
    return id;
}

int Graph::sub(int a, int b) {
    const Tensor& x = nodes_[a].val;
    const Tensor& y = nodes_[b].val;
    if (!x.same_shape(y))
        fail_data("graph sub: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out.v[i] -= y.v[i];
    bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
    int id = push(std::move(out), rg, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, a, b](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            if (g.nodes_[a].requires_grad) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < gy.size(); ++i) ga.v[i] += gy.v[i];
            }
            if (g.nodes_[b].requires_grad) {
                Tensor& gb = g.grad_buf(b);
                for (int64_t i = 0; i < gy.size(); ++i) gb.v[i] -= gy.v[i];
            }
        };
    return id;
}

int Graph::mul(int a, int b) {
    const Tensor& x = nodes_[a].val;
    const Tensor& y = nodes_[b].val;
    if (!x.same_shape(y))
        fail_data("graph mul: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out.v[i] *= y.v[i];
    bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
    int id = push(std::move(out), rg, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, a, b](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv = g.nodes_[a].val;
            const Tensor& yv = g.nodes_[b].val;
            if (g.nodes_[a].requires_grad) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < gy.size(); ++i) ga.v[i] += gy.v[i] * yv.v[i];
            }
            if (g.nodes_[b].requires_grad) {
                Tensor& gb = g.grad_buf(b);
                for (int64_t i = 0; i < gy.size(); ++i) gb.v[i] += gy.v[i] * xv.v[i];
            }
        };
    return id;
}

int Graph::add_scalar(int a, real s) {
    Tensor out = nodes_[a].val;
    for (real& x : out.v) x += s;
    int id = push(std::move(out), nodes_[a].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, a](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < gy.size(); ++i) ga.v[i] += gy.v[i];
        };
    return id;
}

int Graph::mul_scalar(int a, real s) {
    Tensor out = nodes_[a].val;
    for (real& x : out.v) x *= s;
    int id = push(std::move(out), nodes_[a].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, a, s](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < gy.size(); ++i) ga.v[i] += gy.v[i] * s;
        };
    return id;
}

int Graph::mul_bcast(int x, int m) {
    const Tensor& xv = nodes_[x].val;
    const Tensor& mv = nodes_[m].val;
    if (mv.c != 1 || mv.h != xv.h || mv.w != xv.w || (mv.n != 1 && mv.n != xv.n))
        fail_data("graph mul_bcast: mask shape " + mv.shape_str() + " does not broadcast over " +
                  xv.shape_str());
    Tensor out = xv;
    int64_t plane = xv.plane();
    for (int n = 0; n < xv.n; ++n) {
        const real* mp = mv.v.data() + (mv.n == 1 ? 0 : n * plane);
        for (int c = 0; c < xv.c; ++c) {
            real* op = out.v.data() + (static_cast<int64_t>(n) * xv.c + c) * plane;
            for (int64_t i = 0; i < plane; ++i) op[i] *= mp[i];
        }
    }
    bool rg = nodes_[x].requires_grad || nodes_[m].requires_grad;
    int id = push(std::move(out), rg, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x, m](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv2 = g.nodes_[x].val;
            const Tensor& mv2 = g.nodes_[m].val;
            int64_t plane = xv2.plane();
            if (g.nodes_[x].requires_grad) {
                Tensor& gx = g.grad_buf(x);
                for (int n = 0; n < xv2.n; ++n) {
                    const real* mp = mv2.v.data() + (mv2.n == 1 ? 0 : n * plane);
                    for (int c = 0; c < xv2.c; ++c) {
                        int64_t off = (static_cast<int64_t>(n) * xv2.c + c) * plane;
                        for (int64_t i = 0; i < plane; ++i) gx.v[off + i] += gy.v[off + i] * mp[i];
                    }
                }
            }
            if (g.nodes_[m].requires_grad) {
                Tensor& gm = g.grad_buf(m);
                for (int n = 0; n < xv2.n; ++n) {
                    real* mp = gm.v.data() + (mv2.n == 1 ? 0 : n * plane);
                    for (int c = 0; c < xv2.c; ++c) {
                        int64_t off = (static_cast<int64_t>(n) * xv2.c + c) * plane;
                        for (int64_t i = 0; i < plane; ++i) mp[i] += gy.v[off + i] * xv2.v[off + i];
                    }
                }
            }
        };
    return id;
}

int Graph::abs_(int x) {
    Tensor out = nodes_[x].val;
    for (real& v : out.v) v = std::abs(v);
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv = g.nodes_[x].val;
            Tensor& gx = g.grad_buf(x);
            for (int64_t i = 0; i < gy.size(); ++i) {
                real s = xv.v[i] > 0 ? real(1) : (xv.v[i] < 0 ? real(-1) : real(0));
                gx.v[i] += gy.v[i] * s;
            }
        };
    return id;
}

int Graph::square(int x) {
    Tensor out = nodes_[x].val;
    for (real& v : out.v) v *= v;
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv = g.nodes_[x].val;
            Tensor& gx = g.grad_buf(x);
            for (int64_t i = 0; i < gy.size(); ++i) gx.v[i] += gy.v[i] * 2 * xv.v[i];
        };
    return id;
}

int Graph::relu(int x) {
    Tensor out = nodes_[x].val;
    for (real& v : out.v) v = v > 0 ? v : real(0);
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv = g.nodes_[x].val;
            Tensor& gx = g.grad_buf(x);
            for (int64_t i = 0; i < gy.size(); ++i)
                if (xv.v[i] > 0) gx.v[i] += gy.v[i];
        };
    return id;
}

int Graph::leaky_relu(int x, real slope) {
    Tensor out = nodes_[x].val;
    for (real& v : out.v) v = v > 0 ? v : slope * v;
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x, slope](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv = g.nodes_[x].val;
            Tensor& gx = g.grad_buf(x);
            for (int64_t i = 0; i < gy.size(); ++i)
                gx.v[i] += gy.v[i] * (xv.v[i] > 0 ? real(1) : slope);
        };
    return id;
}

int Graph::sigmoid(int x) {
    Tensor out = nodes_[x].val;
    for (real& v : out.v) v = real(1) / (real(1) + std::exp(-v));
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& yv = g.nodes_[id].val;
            Tensor& gx = g.grad_buf(x);
            for (int64_t i = 0; i < gy.size(); ++i)
                gx.v[i] += gy.v[i] * yv.v[i] * (real(1) - yv.v[i]);
        };
    return id;
}

int Graph::clamp01(int x) {
    Tensor out = nodes_[x].val;
    for (real& v : out.v) v = v < real(0) ? real(0) : (v > real(1) ? real(1) : v);
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv = g.nodes_[x].val;
            Tensor& gx = g.grad_buf(x);
            for (int64_t i = 0; i < gy.size(); ++i)
                if (xv.v[i] >= real(0) && xv.v[i] <= real(1)) gx.v[i] += gy.v[i];
        };
    return id;
}

int Graph::concat_c(const std::vector<int>& xs) {
    if (xs.empty()) fail_data("graph concat: empty input list");
    const Tensor& x0 = nodes_[xs[0]].val;
    int ctotal = 0;
    bool rg = false;
    for (int x : xs) {
        const Tensor& t = nodes_[x].val;
        if (t.n != x0.n || t.h != x0.h || t.w != x0.w)
            fail_data("graph concat: incompatible shape " + t.shape_str() + " vs " +
                      x0.shape_str());
        ctotal += t.c;
        rg = rg || nodes_[x].requires_grad;
    }
    Tensor out(x0.n, ctotal, x0.h, x0.w);
    int64_t plane = x0.plane();
    for (int n = 0; n < x0.n; ++n) {
        int co = 0;
        for (int x : xs) {
            const Tensor& t = nodes_[x].val;
            std::memcpy(out.v.data() + (static_cast<int64_t>(n) * ctotal + co) * plane,
                        t.v.data() + static_cast<int64_t>(n) * t.c * plane,
                        static_cast<size_t>(t.c) * plane * sizeof(real));
            co += t.c;
        }
    }
    int id = push(std::move(out), rg, nullptr);
    if (nodes_[id].requires_grad) {
        std::vector<int> deps = xs;
        nodes_[id].back = [id, deps](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            int64_t plane = gy.plane();
            for (int n = 0; n < gy.n; ++n) {
                int co = 0;
                for (int x : deps) {
                    const Tensor& t = g.nodes_[x].val;
                    if (g.nodes_[x].requires_grad) {
                        Tensor& gx = g.grad_buf(x);
                        const real* src =
                            gy.v.data() + (static_cast<int64_t>(n) * gy.c + co) * plane;
                        real* dst = gx.v.data() + static_cast<int64_t>(n) * t.c * plane;
                        for (int64_t i = 0; i < static_cast<int64_t>(t.c) * plane; ++i)
                            dst[i] += src[i];
                    }
                    co += t.c;
                }
            }
        };
    }
    return id;
}

int Graph::detach(int x) { return push(nodes_[x].val, false, nullptr); }

int Graph::diff_x(int x) {
    const Tensor& xv = nodes_[x].val;
    if (xv.w < 2) fail_data("graph diff_x: width < 2");
    Tensor out(xv.n, xv.c, xv.h, xv.w - 1);
    for (int n = 0; n < xv.n; ++n)
        for (int c = 0; c < xv.c; ++c)
            for (int y = 0; y < xv.h; ++y)
                for (int i = 0; i < xv.w - 1; ++i)
                    out.at(n, c, y, i) = xv.at(n, c, y, i + 1) - xv.at(n, c, y, i);
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            Tensor& gx = g.grad_buf(x);
            for (int n = 0; n < gy.n; ++n)
                for (int c = 0; c < gy.c; ++c)
                    for (int y = 0; y < gy.h; ++y)
                        for (int i = 0; i < gy.w; ++i) {
                            real v = gy.at(n, c, y, i);
                            gx.at(n, c, y, i + 1) += v;
                            gx.at(n, c, y, i) -= v;
                        }
        };
    return id;
}

int Graph::diff_y(int x) {
    const Tensor& xv = nodes_[x].val;
    if (xv.h < 2) fail_data("graph diff_y: height < 2");
    Tensor out(xv.n, xv.c, xv.h - 1, xv.w);
    for (int n = 0; n < xv.n; ++n)
        for (int c = 0; c < xv.c; ++c)
            for (int y = 0; y < xv.h - 1; ++y)
                for (int i = 0; i < xv.w; ++i)
                    out.at(n, c, y, i) = xv.at(n, c, y + 1, i) - xv.at(n, c, y, i);
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            Tensor& gx = g.grad_buf(x);
            for (int n = 0; n < gy.n; ++n)
                for (int c = 0; c < gy.c; ++c)
                    for (int y = 0; y < gy.h; ++y)
                        for (int i = 0; i < gy.w; ++i) {
                            real v = gy.at(n, c, y, i);
                            gx.at(n, c, y + 1, i) += v;
                            gx.at(n, c, y, i) -= v;
                        }
        };
    return id;
}

int Graph::mean_all(int x) {
    const Tensor& xv = nodes_[x].val;
    int id = push(Tensor::scalar(static_cast<real>(xv.mean())), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            real gy = g.nodes_[id].grad.v[0];
            Tensor& gx = g.grad_buf(x);
            real k = gy / static_cast<real>(gx.size());
            for (real& v : gx.v) v += k;
        };
    return id;
}

int Graph::sum_all(int x) {
    const Tensor& xv = nodes_[x].val;
    int id = push(Tensor::scalar(static_cast<real>(xv.sum())), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x](Graph& g) {
            real gy = g.nodes_[id].grad.v[0];
            Tensor& gx = g.grad_buf(x);
            for (real& v : gx.v) v += gy;
        };
    return id;
}

namespace {

struct ConvDims {
    int oh, ow, ckk;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad, int dilation) {
    int eff_kh = dilation * (w.h - 1) + 1;
    int eff_kw = dilation * (w.w - 1) + 1;
    ConvDims d;
    d.oh = (x.h + 2 * pad - eff_kh) / stride + 1;
    d.ow = (x.w + 2 * pad - eff_kw) / stride + 1;
    d.ckk = w.c * w.h * w.w;
    if (d.oh <= 0 || d.ow <= 0) fail_data("conv2d: kernel larger than padded input");
    return d;
}

void im2col(const Tensor& x, int n, const Tensor& w, int stride, int pad, int dilation,
            const ConvDims& d, real* cols) {
    // cols is (ckk) x (oh*ow), row-major
    int64_t ospatial = static_cast<int64_t>(d.oh) * d.ow;
    for (int c = 0; c < w.c; ++c) {
        for (int ky = 0; ky < w.h; ++ky) {
            for (int kx = 0; kx < w.w; ++kx) {
                real* row = cols + (static_cast<int64_t>(c) * w.h * w.w + ky * w.w + kx) * ospatial;
                for (int oy = 0; oy < d.oh; ++oy) {
                    int iy = oy * stride - pad + ky * dilation;
                    if (iy < 0 || iy >= x.h) {
                        std::fill(row + static_cast<int64_t>(oy) * d.ow,
                                  row + static_cast<int64_t>(oy + 1) * d.ow, real(0));
                        continue;
                    }
                    const real* src = &x.v[((static_cast<size_t>(n) * x.c + c) * x.h + iy) * x.w];
                    for (int ox = 0; ox < d.ow; ++ox) {
                        int ix = ox * stride - pad + kx * dilation;
                        row[static_cast<int64_t>(oy) * d.ow + ox] =
                            (ix < 0 || ix >= x.w) ? real(0) : src[ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const real* cols, int n, const Tensor& w, int stride, int pad, int dilation,
                const ConvDims& d, Tensor& dx) {
    int64_t ospatial = static_cast<int64_t>(d.oh) * d.ow;
    for (int c = 0; c < w.c; ++c) {
        for (int ky = 0; ky < w.h; ++ky) {
            for (int kx = 0; kx < w.w; ++kx) {
                const real* row =
                    cols + (static_cast<int64_t>(c) * w.h * w.w + ky * w.w + kx) * ospatial;
                for (int oy = 0; oy < d.oh; ++oy) {
                    int iy = oy * stride - pad + ky * dilation;
                    if (iy < 0 || iy >= dx.h) continue;
                    for (int ox = 0; ox < d.ow; ++ox) {
                        int ix = ox * stride - pad + kx * dilation;
                        if (ix < 0 || ix >= dx.w) continue;
                        dx.at(n, c, iy, ix) += row[static_cast<int64_t>(oy) * d.ow + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

int Graph::conv2d(int x, int w, int b, int stride, int pad, int dilation) {
    const Tensor& xv = nodes_[x].val;
    const Tensor& wv = nodes_[w].val;
    if (xv.c != wv.c)
        fail_data("conv2d: input channels " + xv.shape_str() + " vs kernel " + wv.shape_str());
    if (b >= 0) {
        const Tensor& bv = nodes_[b].val;
        if (bv.n != 1 || bv.c != wv.n || bv.h != 1 || bv.w != 1)
            fail_data("conv2d: bias shape " + bv.shape_str() + " does not match " +
                      std::to_string(wv.n) + " output channels");
    }
    ConvDims d = conv_dims(xv, wv, stride, pad, dilation);
    int64_t ospatial = static_cast<int64_t>(d.oh) * d.ow;
    Tensor out(xv.n, wv.n, d.oh, d.ow);
    std::vector<real> cols(static_cast<size_t>(d.ckk) * ospatial);
    MapCM wmat(wv.v.data(), wv.n, d.ckk);
    for (int n = 0; n < xv.n; ++n) {
        im2col(xv, n, wv, stride, pad, dilation, d, cols.data());
        MapCM cmat(cols.data(), d.ckk, ospatial);
        MapM omat(out.v.data() + static_cast<int64_t>(n) * wv.n * ospatial, wv.n, ospatial);
        omat.noalias() = wmat * cmat;
    }
    if (b >= 0) {
        const Tensor& bv = nodes_[b].val;
        for (int n = 0; n < out.n; ++n)
            for (int c = 0; c < out.c; ++c) {
                real bias = bv.v[c];
                real* p = out.v.data() + (static_cast<int64_t>(n) * out.c + c) * ospatial;
                for (int64_t i = 0; i < ospatial; ++i) p[i] += bias;
            }
    }
    bool rg = nodes_[x].requires_grad || nodes_[w].requires_grad ||
              (b >= 0 && nodes_[b].requires_grad);
    int id = push(std::move(out), rg, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x, w, b, stride, pad, dilation, d](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv2 = g.nodes_[x].val;
            const Tensor& wv2 = g.nodes_[w].val;
            int64_t ospatial = static_cast<int64_t>(d.oh) * d.ow;
            bool need_x = g.nodes_[x].requires_grad;
            bool need_w = g.nodes_[w].requires_grad;
            bool need_b = b >= 0 && g.nodes_[b].requires_grad;
            std::vector<real> cols(static_cast<size_t>(d.ckk) * ospatial);
            std::vector<real> dcols(need_x ? cols.size() : 0);
            MapCM wmat(wv2.v.data(), wv2.n, d.ckk);
            for (int n = 0; n < xv2.n; ++n) {
                MapCM gmat(gy.v.data() + static_cast<int64_t>(n) * wv2.n * ospatial, wv2.n,
                           ospatial);
                if (need_w) {
                    im2col(xv2, n, wv2, stride, pad, dilation, d, cols.data());
                    MapCM cmat(cols.data(), d.ckk, ospatial);
                    MapM gw(g.grad_buf(w).v.data(), wv2.n, d.ckk);
                    gw.noalias() += gmat * cmat.transpose();
                }
                if (need_x) {
                    MapM dc(dcols.data(), d.ckk, ospatial);
                    dc.noalias() = wmat.transpose() * gmat;
                    col2im_add(dcols.data(), n, wv2, stride, pad, dilation, d, g.grad_buf(x));
                }
                if (need_b) {
                    Tensor& gb = g.grad_buf(b);
                    for (int c = 0; c < wv2.n; ++c) {
                        const real* p = gy.v.data() + (static_cast<int64_t>(n) * wv2.n + c) * ospatial;
                        double s = 0;
                        for (int64_t i = 0; i < ospatial; ++i) s += p[i];
                        gb.v[c] += static_cast<real>(s);
                    }
                }
            }
        };
    return id;
}

int Graph::instance_norm(int x, int gamma, int beta) {
    const Tensor& xv = nodes_[x].val;
    const Tensor& gv = nodes_[gamma].val;
    const Tensor& bv = nodes_[beta].val;
    if (gv.n != 1 || gv.c != xv.c || gv.h != 1 || gv.w != 1 || !gv.same_shape(bv))
        fail_data("instance_norm: affine shape " + gv.shape_str() + " does not match input " +
                  xv.shape_str());
    const double eps = 1e-5;
    int64_t plane = xv.plane();
    Tensor out(xv.n, xv.c, xv.h, xv.w);
    std::vector<real> mean(static_cast<size_t>(xv.n) * xv.c), inv(mean.size());
    for (int n = 0; n < xv.n; ++n)
        for (int c = 0; c < xv.c; ++c) {
            const real* p = xv.v.data() + (static_cast<int64_t>(n) * xv.c + c) * plane;
            double mu = 0;
            for (int64_t i = 0; i < plane; ++i) mu += p[i];
            mu /= static_cast<double>(plane);
            double var = 0;
            for (int64_t i = 0; i < plane; ++i) {
                double dd = p[i] - mu;
                var += dd * dd;
            }
            var /= static_cast<double>(plane);
            double iv = 1.0 / std::sqrt(var + eps);
            size_t k = static_cast<size_t>(n) * xv.c + c;
            mean[k] = static_cast<real>(mu);
            inv[k] = static_cast<real>(iv);
            real* o = out.v.data() + (static_cast<int64_t>(n) * xv.c + c) * plane;
            real ga = gv.v[c], be = bv.v[c];
            for (int64_t i = 0; i < plane; ++i)
                o[i] = ga * static_cast<real>((p[i] - mu) * iv) + be;
        }
    bool rg = nodes_[x].requires_grad || nodes_[gamma].requires_grad || nodes_[beta].requires_grad;
    int id = push(std::move(out), rg, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x, gamma, beta, mean, inv](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            const Tensor& xv2 = g.nodes_[x].val;
            const Tensor& gv2 = g.nodes_[gamma].val;
            int64_t plane = xv2.plane();
            for (int n = 0; n < xv2.n; ++n)
                for (int c = 0; c < xv2.c; ++c) {
                    size_t k = static_cast<size_t>(n) * xv2.c + c;
                    int64_t off = (static_cast<int64_t>(n) * xv2.c + c) * plane;
                    const real* xp = xv2.v.data() + off;
                    const real* gp = gy.v.data() + off;
                    real mu = mean[k], iv = inv[k];
                    double sg = 0, sgx = 0;
                    for (int64_t i = 0; i < plane; ++i) {
                        double xh = (xp[i] - mu) * iv;
                        sg += gp[i];
                        sgx += gp[i] * xh;
                    }
                    if (g.nodes_[beta].requires_grad)
                        g.grad_buf(beta).v[c] += static_cast<real>(sg);
                    if (g.nodes_[gamma].requires_grad)
                        g.grad_buf(gamma).v[c] += static_cast<real>(sgx);
                    if (g.nodes_[x].requires_grad) {
                        Tensor& gx = g.grad_buf(x);
                        real* dxp = gx.v.data() + off;
                        double mg = sg / static_cast<double>(plane);
                        double mgx = sgx / static_cast<double>(plane);
                        real ga = gv2.v[c];
                        for (int64_t i = 0; i < plane; ++i) {
                            double xh = (xp[i] - mu) * iv;
                            dxp[i] += static_cast<real>(ga * iv * (gp[i] - mg - xh * mgx));
                        }
                    }
                }
        };
    return id;
}

namespace {

struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<real> t;
};

LerpAxis make_axis(int in, int out) {
    LerpAxis a;
    a.i0.resize(out);
    a.i1.resize(out);
    a.t.resize(out);
    double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        double f = std::floor(s);
        int i0 = static_cast<int>(f);
        real t = static_cast<real>(s - f);
        if (i0 < 0) {
            i0 = 0;
            t = 0;
        }
        int i1 = i0 + 1;
        if (i1 > in - 1) {
            i1 = in - 1;
            if (i0 > in - 1) i0 = in - 1;
            t = 0;
        }
        a.i0[o] = i0;
        a.i1[o] = i1;
        a.t[o] = t;
    }
    return a;
}

}  // namespace

int Graph::resize_bilinear(int x, int oh, int ow) {
    const Tensor& xv = nodes_[x].val;
    if (oh <= 0 || ow <= 0) fail_data("resize_bilinear: non-positive output size");
    LerpAxis ay = make_axis(xv.h, oh), ax = make_axis(xv.w, ow);
    Tensor out(xv.n, xv.c, oh, ow);
    for (int n = 0; n < xv.n; ++n)
        for (int c = 0; c < xv.c; ++c)
            for (int oy = 0; oy < oh; ++oy) {
                const real* base = xv.v.data() + (static_cast<int64_t>(n) * xv.c + c) * xv.plane();
                const real* r0 = base + static_cast<int64_t>(ay.i0[oy]) * xv.w;
                const real* r1 = base + static_cast<int64_t>(ay.i1[oy]) * xv.w;
                real ty = ay.t[oy];
                real* op = &out.at(n, c, oy, 0);
                for (int ox = 0; ox < ow; ++ox) {
                    real tx = ax.t[ox];
                    real a = r0[ax.i0[ox]], b = r0[ax.i1[ox]];
                    real c0 = a + tx * (b - a);
                    real a1 = r1[ax.i0[ox]], b1 = r1[ax.i1[ox]];
                    real c1 = a1 + tx * (b1 - a1);
                    op[ox] = c0 + ty * (c1 - c0);
                }
            }
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [id, x, ay, ax](Graph& g) {
            const Tensor& gy = g.nodes_[id].grad;
            Tensor& gx = g.grad_buf(x);
            for (int n = 0; n < gy.n; ++n)
                for (int c = 0; c < gy.c; ++c)
                    for (int oy = 0; oy < gy.h; ++oy) {
                        real ty = ay.t[oy];
                        for (int ox = 0; ox < gy.w; ++ox) {
                            real tx = ax.t[ox];
                            real v = gy.at(n, c, oy, ox);
                            gx.at(n, c, ay.i0[oy], ax.i0[ox]) += v * (1 - ty) * (1 - tx);
                            gx.at(n, c, ay.i0[oy], ax.i1[ox]) += v * (1 - ty) * tx;
                            gx.at(n, c, ay.i1[oy], ax.i0[ox]) += v * ty * (1 - tx);
                            gx.at(n, c, ay.i1[oy], ax.i1[ox]) += v * ty * tx;
                        }
                    }
        };
    return id;
}

int Graph::warp(int x, const Tensor& flow) {
    Tensor out = warp_gather(nodes_[x].val, flow);
    int id = push(std::move(out), nodes_[x].requires_grad, nullptr);
    if (nodes_[id].requires_grad) {
        Tensor flow_copy = flow;
        nodes_[id].back = [id, x, flow_copy](Graph& g) {
            warp_gather_vjp(g.nodes_[id].grad, flow_copy, g.grad_buf(x));
        };
    }
    return id;
}

void Graph::backward(int id) {
    if (nodes_[id].val.size() != 1)
        throw Error(ErrorKind::Internal, "backward: target must be scalar");
    if (!nodes_[id].requires_grad) return;
    grad_buf(id).v[0] = 1;
    for (int i = id; i >= 0; --i)
        if (nodes_[i].back && !nodes_[i].grad.v.empty()) nodes_[i].back(*this);
}

void Graph::trim(const std::vector<int>& keep) {
    std::vector<bool> k(nodes_.size(), false);
    for (int id : keep) k[id] = true;
    for (size_t i = 0; i < nodes_.size(); ++i)
        if (!k[i]) {
            nodes_[i].val.v.clear();
            nodes_[i].val.v.shrink_to_fit();
        }
}

void Graph::check_finite(int id, const std::string& what) const {
    if (!nodes_[id].val.all_finite()) fail_numeric(what + ": non-finite value");
}

double Graph::scalar(int id) const {
    if (nodes_[id].val.size() != 1)
        throw Error(ErrorKind::Internal, "scalar: node is not scalar");
    return static_cast<double>(nodes_[id].val.v[0]);
}

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    auto [it, fresh] = entries.try_emplace(name);
    if (!fresh) throw Error(ErrorKind::Internal, "parameter already exists: " + name);
    it->second.value = std::move(init);
    return it->second.value;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) throw Error(ErrorKind::Internal, "no such parameter: " + name);
    return it->second.value;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw Error(ErrorKind::Internal, "no such parameter: " + name);
    return it->second.value;
}

uint64_t ParamStore::checksum(const std::string& prefix) const {
    uint64_t h = 1469598103934665603ull;
    for (const auto& [name, e] : entries) {
        if (name.rfind(prefix, 0) != 0) continue;
        h ^= bytes_checksum(name.data(), name.size());
        h *= 1099511628211ull;
        h ^= bytes_checksum(e.value.v.data(), e.value.v.size() * sizeof(real));
        h *= 1099511628211ull;
    }
    return h;
}

int64_t ParamStore::count_params(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& [name, e] : entries)
        if (name.rfind(prefix, 0) == 0) n += e.value.size();
    return n;
}

int Bound::at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw Error(ErrorKind::Internal, "parameter not bound: " + name);
    return it->second;
}

Bound bind_params(Graph& g, const ParamStore& store, const std::vector<std::string>& prefixes) {
    Bound b;
    for (const auto& [name, e] : store.entries) {
        bool match = prefixes.empty();
        for (const auto& p : prefixes)
            if (name.rfind(p, 0) == 0) match = true;
        if (match) b.ids[name] = g.leaf(e.value);
    }
    return b;
}

Bound bind_frozen(Graph& g, const ParamStore& store, const std::vector<std::string>& prefixes) {
    Bound b;
    for (const auto& [name, e] : store.entries) {
        bool match = prefixes.empty();
        for (const auto& p : prefixes)
            if (name.rfind(p, 0) == 0) match = true;
        if (match) b.ids[name] = g.constant(e.value);
    }
    return b;
}

double grad_norm_sq(const Graph& g, const Bound& b, const std::string& prefix) {
    double s = 0;
    for (const auto& [name, id] : b.ids) {
        if (name.rfind(prefix, 0) != 0) continue;
        const Tensor& gr = g.grad(id);
        for (real x : gr.v) s += static_cast<double>(x) * x;
    }
    return s;
}

void Adam::step(ParamStore& store, const Graph& g, const Bound& b) {
    ++t_;
    double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, e] : store.entries) {
        if (name.rfind(prefix_, 0) != 0) continue;
        auto it = b.ids.find(name);
        if (it == b.ids.end()) continue;
        const Tensor& gr = g.grad(it->second);
        if (e.m.v.empty()) {
            e.m = Tensor(e.value.n, e.value.c, e.value.h, e.value.w);
            e.v = Tensor(e.value.n, e.value.c, e.value.h, e.value.w);
        }
        for (int64_t i = 0; i < e.value.size(); ++i) {
            double gi = gr.v.empty() ? 0.0 : static_cast<double>(gr.v[i]);
            double m = cfg_.beta1 * e.m.v[i] + (1.0 - cfg_.beta1) * gi;
            double v = cfg_.beta2 * e.v.v[i] + (1.0 - cfg_.beta2) * gi * gi;
            e.m.v[i] = static_cast<real>(m);
            e.v.v[i] = static_cast<real>(v);
            e.value.v[i] -=
                static_cast<real>(cfg_.lr * (m / c1) / (std::sqrt(v / c2) + cfg_.eps));
        }
    }
}

Tensor conv_init(int cout, int cin, int kh, int kw, Rng& rng, double gain) {
    Tensor t(cout, cin, kh, kw);
    double std = gain / std::sqrt(static_cast<double>(cin) * kh * kw);
    for (real& x : t.v) x = static_cast<real>(rng.normal() * std);
    return t;
}

Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }

Tensor full(int n, int c, int h, int w, real x) { return Tensor(n, c, h, w, x); }

namespace {
namespace fs = std::filesystem;
using nlohmann::json;
}  // namespace

void save_archive(const fs::path& path, const ParamStore& store,
                  const std::map<std::string, std::string>& meta) {
    json header;
    header["dtype"] = sizeof(real) == 8 ? "f64" : "f32";
    header["meta"] = meta;
    header["tensors"] = json::array();
    for (const auto& [name, e] : store.entries) {
        header["tensors"].push_back({{"name", name},
                                     {"shape", {e.value.n, e.value.c, e.value.h, e.value.w}},
                                     {"moments", !e.m.v.empty()}});
    }
    std::string htext = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_data("save archive: cannot open " + path.string());
    f.write("ZSC1", 4);
    uint32_t hlen = static_cast<uint32_t>(htext.size());
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    auto dump = [&](const Tensor& t) {
        f.write(reinterpret_cast<const char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(real)));
    };
    for (const auto& [name, e] : store.entries) {
        dump(e.value);
        if (!e.m.v.empty()) {
            dump(e.m);
            dump(e.v);
        }
    }
    if (!f) fail_data("save archive: write failed for " + path.string());
}

std::map<std::string, std::string> load_archive(const fs::path& path, ParamStore& store) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("load archive: cannot open " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "ZSC1", 4) != 0)
        fail_data("load archive: " + path.string() + " is not a parameter archive");
    uint32_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 4);
    std::string htext(hlen, '\0');
    f.read(htext.data(), hlen);
    if (!f) fail_data("load archive: " + path.string() + " is truncated");
    json header = json::parse(htext, nullptr, false);
    if (header.is_discarded()) fail_data("load archive: " + path.string() + " has a bad header");
    std::string dtype = header.value("dtype", "f32");
    size_t esize = dtype == "f64" ? 8 : 4;
    std::map<std::string, std::string> meta;
    if (header.contains("meta"))
        for (auto& [k, v] : header["meta"].items()) meta[k] = v.get<std::string>();

    auto read_tensor = [&](Tensor& t) {
        std::vector<char> buf(t.v.size() * esize);
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) fail_data("load archive: " + path.string() + " is truncated");
        if (esize == 8) {
            const double* p = reinterpret_cast<const double*>(buf.data());
            for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<real>(p[i]);
        } else {
            const float* p = reinterpret_cast<const float*>(buf.data());
            for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<real>(p[i]);
        }
    };
    for (const json& tj : header["tensors"]) {
        std::string name = tj.at("name").get<std::string>();
        auto sh = tj.at("shape");
        Tensor value(sh[0].get<int>(), sh[1].get<int>(), sh[2].get<int>(), sh[3].get<int>());
        ParamStore::Entry e;
        e.value = std::move(value);
        read_tensor(e.value);
        if (tj.value("moments", false)) {
            e.m = Tensor(e.value.n, e.value.c, e.value.h, e.value.w);
            e.v = Tensor(e.value.n, e.value.c, e.value.h, e.value.w);
            read_tensor(e.m);
            read_tensor(e.v);
        }
        store.entries[name] = std::move(e);
    }
    return meta;
}

}  // namespace zs::ad
