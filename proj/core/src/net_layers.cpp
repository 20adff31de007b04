#include "mrf/net_layers.hpp"

#include <cmath>
#include <numeric>

#include "mrf/error.hpp"

namespace mrf::nn {

namespace {

using ConstMap = Eigen::Map<const RowMatrixXd>;
using MutMap = Eigen::Map<RowMatrixXd>;
using ConstVec = Eigen::Map<const VectorXd>;
using MutVec = Eigen::Map<VectorXd>;

} // namespace

std::size_t ParamSpec::size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, Index b) { return a * static_cast<std::size_t>(b); });
}

std::size_t ParamRegistry::add(std::string name, std::vector<Index> shape, bool is_weight, Index fan_in) {
    ParamSpec spec{std::move(name), total_, std::move(shape), is_weight, fan_in};
    total_ += spec.size();
    specs_.push_back(std::move(spec));
    return specs_.back().offset;
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(ParamRegistry &reg, const std::string &name, Index in_channels, Index out_channels, Index kernel)
    : cin_(in_channels), cout_(out_channels), k_(kernel) {
    if (kernel < 1 || kernel % 2 == 0)
        throw ParameterError("net", "convolution kernel must be odd");
    w_ = reg.add(name + ".weight", {cout_, cin_, k_}, true, cin_ * k_);
    b_ = reg.add(name + ".bias", {cout_}, false);
}

RowMatrixXd Conv1d::im2col(const FeatureMap &x) const {
    const Index T = x.steps, half = k_ / 2;
    RowMatrixXd cols = RowMatrixXd::Zero(cin_ * k_, x.batch * T);
    for (Index c = 0; c < cin_; ++c) {
        for (Index t = 0; t < k_; ++t) {
            const Index shift = t - half;
            const Index lo = std::max<Index>(0, -shift), hi = std::min(T, T - shift);
            if (hi <= lo)
                continue;
            for (Index s = 0; s < x.batch; ++s)
                cols.row(c * k_ + t).segment(s * T + lo, hi - lo) = x.v.row(c).segment(s * T + lo + shift, hi - lo);
        }
    }
    return cols;
}

FeatureMap Conv1d::col2im(const RowMatrixXd &cols, Index batch, Index steps) const {
    const Index T = steps, half = k_ / 2;
    FeatureMap dx{RowMatrixXd::Zero(cin_, batch * T), batch, T};
    for (Index c = 0; c < cin_; ++c) {
        for (Index t = 0; t < k_; ++t) {
            const Index shift = t - half;
            const Index lo = std::max<Index>(0, -shift), hi = std::min(T, T - shift);
            if (hi <= lo)
                continue;
            for (Index s = 0; s < batch; ++s)
                dx.v.row(c).segment(s * T + lo + shift, hi - lo) += cols.row(c * k_ + t).segment(s * T + lo, hi - lo);
        }
    }
    return dx;
}

FeatureMap Conv1d::forward(const FeatureMap &x, Params p, Cache *cache) const {
    if (x.channels() != cin_)
        throw ParameterError("net", "convolution expected " + std::to_string(cin_) + " channels, got " +
                                        std::to_string(x.channels()));
    const ConstMap w(p.data() + w_, cout_, cin_ * k_);
    const ConstVec b(p.data() + b_, cout_);
    FeatureMap y{RowMatrixXd(cout_, x.batch * x.steps), x.batch, x.steps};
    if (k_ == 1) {
        y.v.noalias() = w * x.v;
        if (cache)
            cache->cols = x.v;
    } else {
        RowMatrixXd cols = im2col(x);
        y.v.noalias() = w * cols;
        if (cache)
            cache->cols = std::move(cols);
    }
    y.v.colwise() += b;
    return y;
}

FeatureMap Conv1d::backward(const FeatureMap &dy, Params p, const Cache &cache, Grads g) const {
    const ConstMap w(p.data() + w_, cout_, cin_ * k_);
    MutMap dw(g.data() + w_, cout_, cin_ * k_);
    MutVec db(g.data() + b_, cout_);
    dw.noalias() += dy.v * cache.cols.transpose();
    db += dy.v.rowwise().sum();
    RowMatrixXd dcols = w.transpose() * dy.v;
    if (k_ == 1)
        return {std::move(dcols), dy.batch, dy.steps};
    return col2im(dcols, dy.batch, dy.steps);
}

// ---------------------------------------------------------------- ReLU / pooling

FeatureMap relu_forward(FeatureMap x, ReluCache *cache) {
    x.v = x.v.cwiseMax(0.0);
    if (cache)
        cache->out = x.v;
    return x;
}

FeatureMap relu_backward(FeatureMap dy, const ReluCache &cache) {
    dy.v = (cache.out.array() > 0.0).select(dy.v, 0.0);
    return dy;
}

FeatureMap maxpool_forward(const FeatureMap &x, PoolCache *cache) {
    const Index T = x.steps, To = T / 2;
    if (To < 1)
        throw ParameterError("net", "max pooling needs at least two steps");
    FeatureMap y{RowMatrixXd(x.channels(), x.batch * To), x.batch, To};
    if (cache) {
        cache->pick.assign(static_cast<std::size_t>(y.v.size()), 0);
        cache->in_steps = T;
    }
    for (Index c = 0; c < x.channels(); ++c) {
        for (Index s = 0; s < x.batch; ++s) {
            for (Index t = 0; t < To; ++t) {
                const double a = x.v(c, s * T + 2 * t), b = x.v(c, s * T + 2 * t + 1);
                const bool right = b > a;
                y.v(c, s * To + t) = right ? b : a;
                if (cache)
                    cache->pick[static_cast<std::size_t>(c * y.v.cols() + s * To + t)] = right ? 1 : 0;
            }
        }
    }
    return y;
}

FeatureMap maxpool_backward(const FeatureMap &dy, const PoolCache &cache) {
    const Index T = cache.in_steps, To = dy.steps;
    FeatureMap dx{RowMatrixXd::Zero(dy.channels(), dy.batch * T), dy.batch, T};
    for (Index c = 0; c < dy.channels(); ++c)
        for (Index s = 0; s < dy.batch; ++s)
            for (Index t = 0; t < To; ++t) {
                const auto pick = cache.pick[static_cast<std::size_t>(c * dy.v.cols() + s * To + t)];
                dx.v(c, s * T + 2 * t + pick) = dy.v(c, s * To + t);
            }
    return dx;
}

// ---------------------------------------------------------------- NonLocal

NonLocal::NonLocal(ParamRegistry &reg, const std::string &name, Index channels)
    : c_(channels), inner_(std::max<Index>(1, channels / 2)), theta_(reg, name + ".theta", channels, inner_, 1),
      phi_(reg, name + ".phi", channels, inner_, 1), g_(reg, name + ".g", channels, inner_, 1),
      out_(reg, name + ".out", inner_, channels, 1) {}

FeatureMap NonLocal::forward(const FeatureMap &x, Params p, Cache *cache) const {
    FeatureMap theta = theta_.forward(x, p, cache ? &cache->theta_c : nullptr);
    FeatureMap phi = phi_.forward(x, p, cache ? &cache->phi_c : nullptr);
    FeatureMap g = g_.forward(x, p, cache ? &cache->g_c : nullptr);

    FeatureMap y{RowMatrixXd(inner_, x.batch * x.steps), x.batch, x.steps};
    if (cache)
        cache->attention.resize(static_cast<std::size_t>(x.batch));
    for (Index s = 0; s < x.batch; ++s) {
        // a(i, j) = theta_i . phi_j; softmax over j.
        MatrixXd a = theta.sample(s).transpose() * phi.sample(s);
        for (Index i = 0; i < a.rows(); ++i) {
            const double m = a.row(i).maxCoeff();
            a.row(i) = (a.row(i).array() - m).exp();
            a.row(i) /= a.row(i).sum();
        }
        y.sample(s).noalias() = g.sample(s) * a.transpose();
        if (cache)
            cache->attention[static_cast<std::size_t>(s)] = std::move(a);
    }
    FeatureMap out = out_.forward(y, p, cache ? &cache->out_c : nullptr);
    out.v += x.v;
    if (cache) {
        cache->x = x;
        cache->theta = std::move(theta);
        cache->phi = std::move(phi);
        cache->g = std::move(g);
        cache->y = std::move(y);
    }
    return out;
}

FeatureMap NonLocal::backward(const FeatureMap &dy, Params p, const Cache &cache, Grads g) const {
    const FeatureMap dyy = out_.backward(dy, p, cache.out_c, g);
    const Index T = dy.steps;
    FeatureMap dtheta{RowMatrixXd(inner_, dy.batch * T), dy.batch, T};
    FeatureMap dphi = dtheta, dg = dtheta;
    for (Index s = 0; s < dy.batch; ++s) {
        const MatrixXd &att = cache.attention[static_cast<std::size_t>(s)];
        dg.sample(s).noalias() = dyy.sample(s) * att;
        const MatrixXd datt = dyy.sample(s).transpose() * cache.g.sample(s);
        MatrixXd da = att.cwiseProduct(datt);
        const VectorXd rows = da.rowwise().sum();
        da -= att.cwiseProduct(rows.replicate(1, T));
        dtheta.sample(s).noalias() = cache.phi.sample(s) * da.transpose();
        dphi.sample(s).noalias() = cache.theta.sample(s) * da;
    }
    FeatureMap dx = dy;  // identity path
    dx.v += theta_.backward(dtheta, p, cache.theta_c, g).v;
    dx.v += phi_.backward(dphi, p, cache.phi_c, g).v;
    dx.v += g_.backward(dg, p, cache.g_c, g).v;
    return dx;
}

// ---------------------------------------------------------------- pooling head

MatrixXd gap_forward(const FeatureMap &x) {
    MatrixXd y(x.channels(), x.batch);
    for (Index s = 0; s < x.batch; ++s)
        y.col(s) = x.sample(s).rowwise().mean();
    return y;
}

FeatureMap gap_backward(const MatrixXd &dy, Index steps) {
    FeatureMap dx{RowMatrixXd(dy.rows(), dy.cols() * steps), dy.cols(), steps};
    for (Index s = 0; s < dy.cols(); ++s)
        dx.sample(s) = (dy.col(s) / static_cast<double>(steps)).replicate(1, steps);
    return dx;
}

Dense::Dense(ParamRegistry &reg, const std::string &name, Index in, Index out) : in_(in), out_(out) {
    w_ = reg.add(name + ".weight", {out, in}, true, in);
    b_ = reg.add(name + ".bias", {out}, false);
}

MatrixXd Dense::forward(const MatrixXd &x, Params p) const {
    const ConstMap w(p.data() + w_, out_, in_);
    const ConstVec b(p.data() + b_, out_);
    MatrixXd y = w * x;
    y.colwise() += b;
    return y;
}

MatrixXd Dense::backward(const MatrixXd &dy, const MatrixXd &x, Params p, Grads g) const {
    const ConstMap w(p.data() + w_, out_, in_);
    MutMap dw(g.data() + w_, out_, in_);
    MutVec db(g.data() + b_, out_);
    dw.noalias() += dy * x.transpose();
    db += dy.rowwise().sum();
    return w.transpose() * dy;
}

double rmse_loss(const MatrixXd &pred, const MatrixXd &target, MatrixXd *grad) {
    const auto n = static_cast<double>(pred.size());
    const MatrixXd diff = pred - target;
    const double loss = std::sqrt(diff.squaredNorm() / n);
    if (grad)
        *grad = loss > 0.0 ? MatrixXd(diff / (n * loss)) : MatrixXd::Zero(pred.rows(), pred.cols());
    return loss;
}

} // namespace mrf::nn
