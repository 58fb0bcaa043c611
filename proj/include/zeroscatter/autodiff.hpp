#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "zeroscatter/tensor.hpp"

namespace zs::ad {

/// Define-by-run reverse-mode tape over rank-4 tensors. A Graph is built
/// fresh for every forward pass; node ids are creation-ordered, so a single
/// reverse sweep over ids is a valid topological order. Not movable: backward
/// closures capture `this`.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// When disabled, ops record no backward closures (inference mode).
    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    int constant(Tensor t);
    int leaf(Tensor t);  // differentiable input (parameters)

    const Tensor& val(int id) const { return nodes_[id].val; }
    /// Gradient accumulated by backward(); empty tensor if none reached it.
    const Tensor& grad(int id) const { return nodes_[id].grad; }
    bool requires_grad(int id) const { return nodes_[id].requires_grad; }
    int count() const { return static_cast<int>(nodes_.size()); }

    // Elementwise / arithmetic
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int add_scalar(int a, real s);
    int mul_scalar(int a, real s);
    /// x:(N,C,H,W) * m:(1|N,1,H,W), mask broadcast across channels (and batch).
    int mul_bcast(int x, int m);
    int abs_(int x);
    int square(int x);
    int relu(int x);
    int leaky_relu(int x, real slope);
    int sigmoid(int x);
    int clamp01(int x);  // zero gradient where clipped

    // Structure
    int concat_c(const std::vector<int>& xs);
    int detach(int x);
    int diff_x(int x);  // forward differences, (N,C,H,W-1)
    int diff_y(int x);  // (N,C,H-1,W)

    // Reductions to (1,1,1,1)
    int mean_all(int x);
    int sum_all(int x);

    // Neural ops
    int conv2d(int x, int w, int b, int stride, int pad, int dilation = 1);
    int instance_norm(int x, int gamma, int beta);
    int resize_bilinear(int x, int oh, int ow);
    /// Backward-warp x by a fixed (non-differentiated) flow; samples falling
    /// outside the view read as zero.
    int warp(int x, const Tensor& flow);

    /// Reverse sweep from a scalar node.
    void backward(int id);

    /// Drop value storage of every node except `keep` (inference memory).
    void trim(const std::vector<int>& keep);

    /// Throw a numeric error naming `what` if the node value is not finite.
    void check_finite(int id, const std::string& what) const;

    double scalar(int id) const;  // value of a (1,1,1,1) node

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Graph&)> back;
    };

    int push(Tensor val, bool requires_grad, std::function<void(Graph&)> back);
    Tensor& grad_buf(int id);

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
};

/// Named parameter tensors plus their Adam moments. Iteration order is the
/// lexicographic name order (std::map), which fixes serialization layout.
struct ParamStore {
    struct Entry {
        Tensor value, m, v;
    };
    std::map<std::string, Entry> entries;

    Tensor& add(const std::string& name, Tensor init);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return entries.count(name) != 0; }
    /// Checksum over all values with a given name prefix (freeze checks).
    uint64_t checksum(const std::string& prefix = "") const;
    int64_t count_params(const std::string& prefix = "") const;
};

/// Per-graph binding of parameter names to leaf node ids.
struct Bound {
    std::map<std::string, int> ids;
    int at(const std::string& name) const;
};

/// Create a leaf for every parameter whose name starts with one of the
/// prefixes (all parameters if empty).
Bound bind_params(Graph& g, const ParamStore& store, const std::vector<std::string>& prefixes = {});

/// Same selection, but bound as constants: gradients flow through the ops
/// that use them while the parameters themselves receive none (frozen
/// groups, e.g. the discriminator during a generator step).
Bound bind_frozen(Graph& g, const ParamStore& store, const std::vector<std::string>& prefixes = {});

/// Sum of squared gradients over bound parameters with the given prefix.
double grad_norm_sq(const Graph& g, const Bound& b, const std::string& prefix);

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over a name-prefixed parameter group. Moments live in the store;
/// the step counter lives here and is serialized in checkpoint metadata.
class Adam {
public:
    Adam(AdamConfig cfg, std::string prefix) : cfg_(cfg), prefix_(std::move(prefix)) {}

    /// Apply one update from the gradients recorded in the graph for every
    /// bound parameter matching the group prefix.
    void step(ParamStore& store, const Graph& g, const Bound& b);

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    const std::string& prefix() const { return prefix_; }

private:
    AdamConfig cfg_;
    std::string prefix_;
    int64_t t_ = 0;
};

// Initializers
Tensor conv_init(int cout, int cin, int kh, int kw, Rng& rng, double gain);
Tensor zeros(int n, int c, int h, int w);
Tensor full(int n, int c, int h, int w, real x);

/// Single-file parameter archive: magic "ZSC1", little-endian u32 header
/// length, JSON header (dtype, tensor table, string metadata), raw blob of
/// value+moment data in table order.
void save_archive(const std::filesystem::path& path, const ParamStore& store,
                  const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> load_archive(const std::filesystem::path& path,
                                                ParamStore& store);

}  // namespace zs::ad
