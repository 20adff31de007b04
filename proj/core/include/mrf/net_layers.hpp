#pragma once

// Building blocks of the 1D regression network. Each layer is stateless
// apart from its shape and the offsets of its parameters inside a flat
// parameter vector; forward passes optionally fill a cache consumed by the
// matching backward pass, which accumulates into a flat gradient vector.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrf/types.hpp"

namespace mrf::nn {

/// Channels x (batch * steps); sample s occupies columns [s*steps, (s+1)*steps).
struct FeatureMap {
    RowMatrixXd v;
    Index batch = 0;
    Index steps = 0;

    Index channels() const { return v.rows(); }
    auto sample(Index s) { return v.middleCols(s * steps, steps); }
    auto sample(Index s) const { return v.middleCols(s * steps, steps); }
};

struct ParamSpec {
    std::string name;
    std::size_t offset = 0;
    std::vector<Index> shape;
    /// Weight tensors are He-initialised and max-norm constrained per output
    /// unit (first dimension); biases start at zero and are unconstrained.
    bool is_weight = false;
    Index fan_in = 0;

    std::size_t size() const;
    Index rows() const { return shape.front(); }
    Index row_length() const { return static_cast<Index>(size()) / shape.front(); }
};

class ParamRegistry {
public:
    std::size_t add(std::string name, std::vector<Index> shape, bool is_weight, Index fan_in = 0);
    const std::vector<ParamSpec> &specs() const { return specs_; }
    std::size_t total() const { return total_; }

private:
    std::vector<ParamSpec> specs_;
    std::size_t total_ = 0;
};

using Params = std::span<const double>;
using Grads = std::span<double>;

/// Same-length 1D convolution with symmetric zero padding (odd kernel).
/// Weights are laid out [out][in][tap].
class Conv1d {
public:
    struct Cache {
        RowMatrixXd cols;  ///< im2col of the input (input itself for 1x1)
    };

    Conv1d() = default;
    Conv1d(ParamRegistry &reg, const std::string &name, Index in_channels, Index out_channels, Index kernel);

    FeatureMap forward(const FeatureMap &x, Params p, Cache *cache) const;
    FeatureMap backward(const FeatureMap &dy, Params p, const Cache &cache, Grads g) const;

    Index in_channels() const { return cin_; }
    Index out_channels() const { return cout_; }
    Index kernel() const { return k_; }

private:
    RowMatrixXd im2col(const FeatureMap &x) const;
    FeatureMap col2im(const RowMatrixXd &cols, Index batch, Index steps) const;

    Index cin_ = 0, cout_ = 0, k_ = 1;
    std::size_t w_ = 0, b_ = 0;
};

struct ReluCache {
    RowMatrixXd out;
};
FeatureMap relu_forward(FeatureMap x, ReluCache *cache);
FeatureMap relu_backward(FeatureMap dy, const ReluCache &cache);

/// Max pooling with window 2 and stride 2; an odd trailing step is dropped.
struct PoolCache {
    std::vector<std::uint8_t> pick;  ///< 0 = left, 1 = right, per output element
    Index in_steps = 0;
};
FeatureMap maxpool_forward(const FeatureMap &x, PoolCache *cache);
FeatureMap maxpool_backward(const FeatureMap &dy, const PoolCache &cache);

/// Embedded-Gaussian nonlocal block with an output projection and identity
/// residual: y = W_o (softmax(theta^T phi) applied to g) + x.
class NonLocal {
public:
    struct Cache {
        FeatureMap x;
        Conv1d::Cache theta_c, phi_c, g_c, out_c;
        FeatureMap theta, phi, g, y;
        std::vector<MatrixXd> attention;  ///< per sample, steps x steps, rows sum to one
    };

    NonLocal() = default;
    NonLocal(ParamRegistry &reg, const std::string &name, Index channels);

    FeatureMap forward(const FeatureMap &x, Params p, Cache *cache) const;
    FeatureMap backward(const FeatureMap &dy, Params p, const Cache &cache, Grads g) const;

    Index channels() const { return c_; }
    Index inner() const { return inner_; }

private:
    Index c_ = 0, inner_ = 0;
    Conv1d theta_, phi_, g_, out_;
};

/// Channels x batch means over time.
MatrixXd gap_forward(const FeatureMap &x);
FeatureMap gap_backward(const MatrixXd &dy, Index steps);

/// Fully connected layer on column vectors: y = W x + b.
class Dense {
public:
    Dense() = default;
    Dense(ParamRegistry &reg, const std::string &name, Index in, Index out);

    MatrixXd forward(const MatrixXd &x, Params p) const;
    MatrixXd backward(const MatrixXd &dy, const MatrixXd &x, Params p, Grads g) const;

    Index in() const { return in_; }
    Index out() const { return out_; }

private:
    Index in_ = 0, out_ = 0;
    std::size_t w_ = 0, b_ = 0;
};

/// sqrt(mean((pred - target)^2)) over every element, and its gradient.
double rmse_loss(const MatrixXd &pred, const MatrixXd &target, MatrixXd *grad);

} // namespace mrf::nn
