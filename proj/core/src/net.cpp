#include "mrf/net.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "mrf/error.hpp"
#include "mrf/io.hpp"
#include "mrf/parallel.hpp"
#include "mrf/random.hpp"

namespace mrf {

namespace {

constexpr const char *kModule = "net";
constexpr Index kChunk = 16;
constexpr Index kForwardChunk = 64;
constexpr std::uint32_t kCheckpointVersion = 1;

void reject_unknown(const nlohmann::json &j, std::initializer_list<const char *> known, const char *what) {
    if (!j.is_object())
        throw ParameterError(kModule, std::string(what) + " must be a JSON object");
    std::set<std::string> allowed(known.begin(), known.end());
    for (const auto &[key, _] : j.items())
        if (!allowed.count(key))
            throw ParameterError(kModule, std::string("unknown ") + what + " key '" + key + "'");
}

template <class T>
void read_opt(const nlohmann::json &j, const char *key, T &out) {
    if (j.contains(key))
        out = j.at(key).get<T>();
}

} // namespace

// ---------------------------------------------------------------- configuration

std::string to_string(NetInput mode) {
    switch (mode) {
    case NetInput::Magnitude:
        return "mag";
    case NetInput::Real:
        return "real";
    case NetInput::RealImag:
        return "realimag2ch";
    }
    return "mag";
}

NetInput parse_net_input(const std::string &name) {
    if (name == "mag")
        return NetInput::Magnitude;
    if (name == "real")
        return NetInput::Real;
    if (name == "realimag2ch")
        return NetInput::RealImag;
    throw ParameterError(kModule, "unknown network input mode '" + name + "' (mag, real, realimag2ch)");
}

std::vector<Index> NetConfig::block_channels() const {
    std::vector<Index> out;
    Index c = base_channels;
    for (Index i = 0; i < n_blocks; ++i) {
        c = std::min(c * 2, max_channels);
        out.push_back(c);
    }
    return out;
}

void NetConfig::check() const {
    if (input_length < 1)
        throw ParameterError(kModule, "input_length must be >= 1");
    if (base_channels < 1 || max_channels < 1)
        throw ParameterError(kModule, "channel counts must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ParameterError(kModule, "kernel_size must be odd");
    if (n_blocks < 1)
        throw ParameterError(kModule, "n_blocks must be >= 1");
    if (n_blocks >= 62 || (input_length >> n_blocks) < 1)
        throw ParameterError(kModule, "input_length / 2^n_blocks must be >= 1");
    if (!(maxnorm_c > 0) || !std::isfinite(maxnorm_c))
        throw ParameterError(kModule, "maxnorm_c must be positive");
    if (!(t1_scale > 0) || !(t2_scale > 0) || !std::isfinite(t1_scale) || !std::isfinite(t2_scale))
        throw ParameterError(kModule, "target scales must be positive");
}

void to_json(nlohmann::json &j, const NetConfig &c) {
    j = nlohmann::json{{"input_length", c.input_length},   {"base_channels", c.base_channels},
                       {"n_blocks", c.n_blocks},           {"kernel_size", c.kernel_size},
                       {"nonlocal_enabled", c.nonlocal_enabled}, {"max_channels", c.max_channels},
                       {"maxnorm_c", c.maxnorm_c},         {"t1_scale", c.t1_scale},
                       {"t2_scale", c.t2_scale},           {"input", to_string(c.input)}};
}

void from_json(const nlohmann::json &j, NetConfig &c) {
    reject_unknown(j,
                   {"input_length", "base_channels", "n_blocks", "kernel_size", "nonlocal_enabled", "max_channels",
                    "maxnorm_c", "t1_scale", "t2_scale", "input"},
                   "network config");
    read_opt(j, "input_length", c.input_length);
    read_opt(j, "base_channels", c.base_channels);
    read_opt(j, "n_blocks", c.n_blocks);
    read_opt(j, "kernel_size", c.kernel_size);
    read_opt(j, "nonlocal_enabled", c.nonlocal_enabled);
    read_opt(j, "max_channels", c.max_channels);
    read_opt(j, "maxnorm_c", c.maxnorm_c);
    read_opt(j, "t1_scale", c.t1_scale);
    read_opt(j, "t2_scale", c.t2_scale);
    if (j.contains("input"))
        c.input = parse_net_input(j.at("input").get<std::string>());
}

void TrainConfig::check() const {
    if (epochs < 0)
        throw ParameterError(kModule, "epochs must be >= 0");
    if (batch_size < 1)
        throw ParameterError(kModule, "batch_size must be >= 1");
    if (!(validation_fraction > 0 && validation_fraction < 1))
        throw ParameterError(kModule, "validation_fraction must lie in (0, 1)");
    if (!(lr_initial >= 0) || !(lr_decay > 0) || lr_decay_every < 1 || !(lr_floor >= 0))
        throw ParameterError(kModule, "invalid learning-rate schedule");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0))
        throw ParameterError(kModule, "invalid Adam hyperparameters");
}

void to_json(nlohmann::json &j, const TrainConfig &c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"lr_initial", c.lr_initial},
                       {"lr_decay", c.lr_decay},
                       {"lr_decay_every", c.lr_decay_every},
                       {"lr_floor", c.lr_floor},
                       {"validation_fraction", c.validation_fraction},
                       {"seed", c.seed},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"eps", c.eps}};
}

void from_json(const nlohmann::json &j, TrainConfig &c) {
    reject_unknown(j,
                   {"epochs", "batch_size", "lr_initial", "lr_decay", "lr_decay_every", "lr_floor",
                    "validation_fraction", "seed", "beta1", "beta2", "eps"},
                   "training config");
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "lr_initial", c.lr_initial);
    read_opt(j, "lr_decay", c.lr_decay);
    read_opt(j, "lr_decay_every", c.lr_decay_every);
    read_opt(j, "lr_floor", c.lr_floor);
    read_opt(j, "validation_fraction", c.validation_fraction);
    read_opt(j, "seed", c.seed);
    read_opt(j, "beta1", c.beta1);
    read_opt(j, "beta2", c.beta2);
    read_opt(j, "eps", c.eps);
}

double scheduled_lr(const TrainConfig &cfg, Index epoch) {
    const double lr = cfg.lr_initial * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_every));
    return std::max(lr, std::min(cfg.lr_floor, cfg.lr_initial));
}

// ---------------------------------------------------------------- topology

Network::Network(const NetConfig &cfg) : cfg_(cfg) {
    cfg_.check();
    const Index k = cfg_.kernel_size;
    stem1_ = nn::Conv1d(reg_, "stem.conv1", cfg_.input_channels(), cfg_.base_channels, k);
    stem2_ = nn::Conv1d(reg_, "stem.conv2", cfg_.base_channels, cfg_.base_channels, k);
    Index c = cfg_.base_channels;
    const auto plan = cfg_.block_channels();
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const std::string name = "block" + std::to_string(i);
        const Index out = plan[i];
        Block blk;
        blk.a = nn::Conv1d(reg_, name + ".conv_a", c, out, k);
        blk.b = nn::Conv1d(reg_, name + ".conv_b", out, out, k);
        blk.has_shortcut = c != out;
        if (blk.has_shortcut)
            blk.shortcut = nn::Conv1d(reg_, name + ".shortcut", c, out, 1);
        blk.has_nonlocal = cfg_.nonlocal_enabled;
        if (blk.has_nonlocal)
            blk.nonlocal = nn::NonLocal(reg_, name + ".nonlocal", out);
        blocks_.push_back(std::move(blk));
        c = out;
    }
    head_ = nn::Dense(reg_, "head", c, NetConfig::output_dim);
}

MatrixXd Network::forward(const MatrixXd &x, nn::Params p, Trace *trace) const {
    const Index B = x.rows(), C = cfg_.input_channels(), L = cfg_.input_length;
    if (x.cols() != C * L)
        throw ParameterError(kModule, "input length mismatch: network expects " + std::to_string(C * L) +
                                          " values per row, got " + std::to_string(x.cols()));
    if (p.size() != reg_.total())
        throw ParameterError(kModule, "parameter vector has wrong size");

    nn::FeatureMap h{RowMatrixXd(C, B * L), B, L};
    for (Index s = 0; s < B; ++s)
        for (Index c = 0; c < C; ++c)
            h.v.row(c).segment(s * L, L) = x.row(s).segment(c * L, L);

    if (trace)
        trace->blocks.resize(blocks_.size());
    h = nn::relu_forward(stem1_.forward(h, p, trace ? &trace->stem1 : nullptr), trace ? &trace->relu1 : nullptr);
    h = nn::relu_forward(stem2_.forward(h, p, trace ? &trace->stem2 : nullptr), trace ? &trace->relu2 : nullptr);

    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const Block &blk = blocks_[i];
        BlockTrace *bt = trace ? &trace->blocks[i] : nullptr;
        const nn::FeatureMap pooled = nn::maxpool_forward(h, bt ? &bt->pool : nullptr);
        const nn::FeatureMap a =
            nn::relu_forward(blk.a.forward(pooled, p, bt ? &bt->a : nullptr), bt ? &bt->relu_a : nullptr);
        nn::FeatureMap sum = blk.b.forward(a, p, bt ? &bt->b : nullptr);
        if (blk.has_shortcut)
            sum.v += blk.shortcut.forward(pooled, p, bt ? &bt->shortcut : nullptr).v;
        else
            sum.v += pooled.v;
        h = nn::relu_forward(std::move(sum), bt ? &bt->relu_out : nullptr);
        if (blk.has_nonlocal)
            h = blk.nonlocal.forward(h, p, bt ? &bt->nonlocal : nullptr);
    }

    MatrixXd pooled = nn::gap_forward(h);
    MatrixXd out = head_.forward(pooled, p);
    if (trace) {
        trace->final_steps = h.steps;
        trace->pooled = std::move(pooled);
    }
    return out.transpose();
}

void Network::backward(const MatrixXd &dout, nn::Params p, const Trace &trace, nn::Grads g) const {
    const MatrixXd dpooled = head_.backward(dout.transpose(), trace.pooled, p, g);
    nn::FeatureMap dh = nn::gap_backward(dpooled, trace.final_steps);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
        const Block &blk = blocks_[i];
        const BlockTrace &bt = trace.blocks[i];
        if (blk.has_nonlocal)
            dh = blk.nonlocal.backward(dh, p, bt.nonlocal, g);
        dh = nn::relu_backward(std::move(dh), bt.relu_out);
        nn::FeatureMap dpool = blk.has_shortcut ? blk.shortcut.backward(dh, p, bt.shortcut, g) : dh;
        nn::FeatureMap da = nn::relu_backward(blk.b.backward(dh, p, bt.b, g), bt.relu_a);
        dpool.v += blk.a.backward(da, p, bt.a, g).v;
        dh = nn::maxpool_backward(dpool, bt.pool);
    }
    dh = nn::relu_backward(std::move(dh), trace.relu2);
    dh = stem2_.backward(dh, p, trace.stem2, g);
    dh = nn::relu_backward(std::move(dh), trace.relu1);
    stem1_.backward(dh, p, trace.stem1, g);
}

std::vector<double> Network::initial_params(std::uint64_t seed) const {
    std::vector<double> p(reg_.total(), 0.0);
    Rng rng(seed);
    for (const auto &spec : reg_.specs()) {
        if (!spec.is_weight)
            continue;
        const double sd = std::sqrt(2.0 / static_cast<double>(spec.fan_in));
        for (std::size_t i = 0; i < spec.size(); ++i)
            p[spec.offset + i] = sd * rng.normal();
    }
    apply_maxnorm(p);
    return p;
}

void Network::apply_maxnorm(std::span<double> p) const {
    const double c = cfg_.maxnorm_c;
    // Rows already projected onto the ball may sit a rounding error above c;
    // the slack keeps repeated projections from perturbing them again.
    const double limit = c * (1.0 + 1e-12);
    for (const auto &spec : reg_.specs()) {
        if (!spec.is_weight)
            continue;
        Eigen::Map<RowMatrixXd> w(p.data() + spec.offset, spec.rows(), spec.row_length());
        for (Index r = 0; r < w.rows(); ++r) {
            const double n = w.row(r).norm();
            if (n > limit)
                w.row(r) *= c / n;
        }
    }
}

ModelCheckpoint build(const NetConfig &cfg, std::uint64_t seed) {
    const Network net(cfg);
    ModelCheckpoint m;
    m.config = cfg;
    m.params = net.initial_params(seed);
    m.adam_m.assign(m.params.size(), 0.0);
    m.adam_v.assign(m.params.size(), 0.0);
    return m;
}

// ---------------------------------------------------------------- inference

VectorXd preprocess(const VectorXcd &signature, NetInput mode) {
    VectorXd out;
    switch (mode) {
    case NetInput::Magnitude:
        out = signature.cwiseAbs();
        break;
    case NetInput::Real:
        out = signature.real();
        break;
    case NetInput::RealImag:
        out.resize(2 * signature.size());
        out << signature.real(), signature.imag();
        break;
    }
    const double n = out.norm();
    if (!(n > 0) || !std::isfinite(n))
        throw ParameterError(kModule, "cannot normalise a zero or non-finite signature");
    return out / n;
}

MatrixXd preprocess(const MatrixXcd &signatures, NetInput mode) {
    const Index width = mode == NetInput::RealImag ? 2 * signatures.cols() : signatures.cols();
    MatrixXd out(signatures.rows(), width);
    for (Index j = 0; j < signatures.rows(); ++j) {
        try {
            out.row(j) = preprocess(VectorXcd(signatures.row(j).transpose()), mode).transpose();
        } catch (const ParameterError &e) {
            throw ParameterError(kModule, "row " + std::to_string(j) + ": cannot normalise a zero or non-finite signature");
        }
    }
    return out;
}

MatrixXd forward(const ModelCheckpoint &model, const MatrixXd &inputs) {
    const Network net(model.config);
    MatrixXd out(inputs.rows(), NetConfig::output_dim);
    const Index chunks = (inputs.rows() + kForwardChunk - 1) / kForwardChunk;
    parallel_for(chunks, [&](std::ptrdiff_t c) {
        const Index r0 = c * kForwardChunk, n = std::min(kForwardChunk, inputs.rows() - r0);
        out.middleRows(r0, n) = net.forward(inputs.middleRows(r0, n), model.params);
    });
    return out;
}

MatrixXd predict(const ModelCheckpoint &model, const MatrixXcd &signatures) {
    const auto &cfg = model.config;
    if (signatures.cols() != cfg.input_length)
        throw ParameterError(kModule, "length mismatch: model expects " + std::to_string(cfg.input_length) +
                                          " frames, got " + std::to_string(signatures.cols()));
    MatrixXd out = forward(model, preprocess(signatures, cfg.input));
    const std::array<double, 2> scale{cfg.t1_scale, cfg.t2_scale};
    for (Index c = 0; c < 2; ++c)
        out.col(c) = (out.col(c) * scale[c]).cwiseMax(0.0).cwiseMin(1.5 * scale[c]);
    return out;
}

MatrixXd predict(const ModelCheckpoint &model, const ContrastStack &stack) {
    stack.check();
    return predict(model, stack.data);
}

// ---------------------------------------------------------------- training

double loss_and_gradient(const Network &net, nn::Params p, const MatrixXd &inputs, const MatrixXd &targets,
                         std::vector<double> &grad) {
    const Index B = inputs.rows();
    if (targets.rows() != B || targets.cols() != NetConfig::output_dim)
        throw ParameterError(kModule, "targets must be B x 2 matching the inputs");
    if (B == 0)
        throw ParameterError(kModule, "empty batch");
    const std::size_t P = net.param_count();
    grad.assign(P, 0.0);

    const Index chunks = (B + kChunk - 1) / kChunk;
    const Index wave = std::min<Index>(std::max(1, thread_count()), chunks);
    std::vector<std::vector<double>> buffers(static_cast<std::size_t>(wave), std::vector<double>(P));
    std::vector<double> sq(static_cast<std::size_t>(chunks), 0.0);

    for (Index w0 = 0; w0 < chunks; w0 += wave) {
        const Index n = std::min(wave, chunks - w0);
        parallel_for(n, [&](std::ptrdiff_t j) {
            auto &buf = buffers[static_cast<std::size_t>(j)];
            std::fill(buf.begin(), buf.end(), 0.0);
            const Index c = w0 + j;
            const Index r0 = c * kChunk, rows = std::min(kChunk, B - r0);
            Network::Trace trace;
            const MatrixXd out = net.forward(inputs.middleRows(r0, rows), p, &trace);
            const MatrixXd diff = out - targets.middleRows(r0, rows);
            sq[static_cast<std::size_t>(c)] = diff.squaredNorm();
            net.backward(diff, p, trace, buf);
        });
        for (Index j = 0; j < n; ++j) {
            const auto &buf = buffers[static_cast<std::size_t>(j)];
            for (std::size_t i = 0; i < P; ++i)
                grad[i] += buf[i];
        }
    }

    const double count = static_cast<double>(B * NetConfig::output_dim);
    const double loss = std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / count);
    const double scale = loss > 0 ? 1.0 / (count * loss) : 0.0;
    for (double &g : grad)
        g *= scale;
    return loss;
}

double backward_and_step(ModelCheckpoint &model, const MatrixXd &inputs, const MatrixXd &targets,
                         const TrainConfig &cfg, double lr) {
    const Network net(model.config);
    const std::size_t P = net.param_count();
    if (model.params.size() != P || model.adam_m.size() != P || model.adam_v.size() != P)
        throw ParameterError(kModule, "checkpoint state does not match its configuration");

    std::vector<double> grad;
    const double loss = loss_and_gradient(net, model.params, inputs, targets, grad);
    if (!std::isfinite(loss))
        throw NumericalError(kModule, "non-finite loss at Adam step " + std::to_string(model.adam_step + 1) +
                                          " (batch of " + std::to_string(inputs.rows()) + ")");

    ++model.adam_step;
    const double t = static_cast<double>(model.adam_step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < P; ++i) {
        const double g = grad[i];
        model.adam_m[i] = cfg.beta1 * model.adam_m[i] + (1.0 - cfg.beta1) * g;
        model.adam_v[i] = cfg.beta2 * model.adam_v[i] + (1.0 - cfg.beta2) * g * g;
        model.params[i] -= lr * (model.adam_m[i] / bc1) / (std::sqrt(model.adam_v[i] / bc2) + cfg.eps);
    }
    net.apply_maxnorm(model.params);
    return loss;
}

namespace {

MatrixXd gather_rows(const MatrixXd &m, const std::vector<Index> &rows, std::size_t first, std::size_t count) {
    MatrixXd out(static_cast<Index>(count), m.cols());
    for (std::size_t i = 0; i < count; ++i)
        out.row(static_cast<Index>(i)) = m.row(rows[first + i]);
    return out;
}

} // namespace

ModelCheckpoint train(ModelCheckpoint model, const MatrixXd &inputs, const MatrixXd &targets, const TrainConfig &cfg,
                      const EpochCallback &on_epoch) {
    cfg.check();
    if (cfg.epochs == 0)
        return model;
    const Index N = inputs.rows();
    if (N < 2)
        throw ParameterError(kModule, "training needs at least two samples");
    if (targets.rows() != N || targets.cols() != NetConfig::output_dim)
        throw ParameterError(kModule, "targets must be N x 2 matching the inputs");

    std::vector<Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Index{0});
    Rng split_rng(substream_seed(cfg.seed, 0));
    shuffle(order.begin(), order.end(), split_rng);
    const auto n_val = static_cast<std::size_t>(
        std::clamp<Index>(std::llround(cfg.validation_fraction * static_cast<double>(N)), 1, N - 1));
    const MatrixXd val_x = gather_rows(inputs, order, 0, n_val);
    const MatrixXd val_t = gather_rows(targets, order, 0, n_val);
    std::vector<Index> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    ModelCheckpoint best = model;
    double best_val = std::numeric_limits<double>::infinity();
    const Index start = model.epoch;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (Index e = 0; e < cfg.epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        const Index epoch = start + e;
        const double lr = scheduled_lr(cfg, epoch);
        Rng rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
        shuffle(train_rows.begin(), train_rows.end(), rng);

        double sum_sq = 0, count = 0;
        for (std::size_t b0 = 0; b0 < train_rows.size(); b0 += batch) {
            const std::size_t nb = std::min(batch, train_rows.size() - b0);
            const double loss = backward_and_step(model, gather_rows(inputs, train_rows, b0, nb),
                                                  gather_rows(targets, train_rows, b0, nb), cfg, lr);
            sum_sq += loss * loss * static_cast<double>(2 * nb);
            count += static_cast<double>(2 * nb);
        }

        const MatrixXd val_pred = forward(model, val_x);
        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.lr = lr;
        rec.train_rmse = std::sqrt(sum_sq / count);
        rec.val_rmse = std::sqrt((val_pred - val_t).squaredNorm() / static_cast<double>(val_t.size()));
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(rec.val_rmse))
            throw NumericalError(kModule, "non-finite validation loss at epoch " + std::to_string(rec.epoch));
        model.epoch = rec.epoch;
        model.history.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
        if (rec.val_rmse < best_val) {
            best_val = rec.val_rmse;
            best = model;
        }
    }
    best.history = model.history;
    return best;
}

ModelCheckpoint train(ModelCheckpoint model, const Dictionary &dict, const TrainConfig &cfg,
                      const EpochCallback &on_epoch) {
    if (dict.size() == 0)
        throw ParameterError(kModule, "dictionary is empty");
    const auto &c = model.config;
    if (dict.length() != c.input_length)
        throw ParameterError(kModule, "length mismatch: model expects " + std::to_string(c.input_length) +
                                          " frames, dictionary has " + std::to_string(dict.length()));
    const MatrixXd inputs = preprocess(dict.signatures(), c.input);
    MatrixXd targets(dict.size(), 2);
    for (Index k = 0; k < dict.size(); ++k) {
        targets(k, 0) = dict.lut()[k].t1_ms / c.t1_scale;
        targets(k, 1) = dict.lut()[k].t2_ms / c.t2_scale;
    }
    return train(std::move(model), inputs, targets, cfg, on_epoch);
}

// ---------------------------------------------------------------- persistence

namespace {

void put_le(std::ostream &os, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i)
        os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::istream &is, int bytes, const std::string &source) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof())
            throw IoError(kModule, "truncated checkpoint " + source);
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

nlohmann::json history_json(const std::vector<EpochRecord> &h) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &r : h)
        arr.push_back({{"epoch", r.epoch},
                       {"lr", r.lr},
                       {"train_rmse", r.train_rmse},
                       {"val_rmse", r.val_rmse},
                       {"seconds", r.seconds}});
    return arr;
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, const ModelCheckpoint &model) {
    const Network net(model.config);
    const std::size_t P = net.param_count();
    if (model.params.size() != P || model.adam_m.size() != P || model.adam_v.size() != P)
        throw ParameterError(kModule, "checkpoint state does not match its configuration");

    nlohmann::json sections = nlohmann::json::array();
    for (const auto &spec : net.specs())
        sections.push_back({{"name", spec.name}, {"shape", spec.shape}});
    sections.push_back({{"name", "adam.m"}, {"shape", {P}}});
    sections.push_back({{"name", "adam.v"}, {"shape", {P}}});
    const nlohmann::json header{{"config", model.config},
                                {"epoch", model.epoch},
                                {"adam_step", model.adam_step},
                                {"history", history_json(model.history)},
                                {"sections", sections}};
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError(kModule, "cannot open " + path.string() + " for writing");
    os.write("HYCK", 4);
    put_le(os, kCheckpointVersion, 4);
    put_le(os, text.size(), 8);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));

    auto write_section = [&](std::span<const double> values, std::vector<Index> shape) {
        Tensor t;
        for (Index d : shape)
            t.dims.push_back(static_cast<std::uint64_t>(d));
        t.values = std::vector<double>(values.begin(), values.end());
        write_tensor(os, t);
    };
    for (const auto &spec : net.specs())
        write_section(std::span<const double>(model.params).subspan(spec.offset, spec.size()), spec.shape);
    write_section(model.adam_m, {static_cast<Index>(P)});
    write_section(model.adam_v, {static_cast<Index>(P)});
    if (!os)
        throw IoError(kModule, "write failed for " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path &path) {
    const std::string source = path.string();
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError(kModule, "cannot open " + source);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "HYCK")
        throw IoError(kModule, source + " is not a checkpoint (bad magic)");
    const auto version = get_le(is, 4, source);
    if (version != kCheckpointVersion)
        throw IoError(kModule, "unsupported checkpoint version " + std::to_string(version));
    const auto hlen = get_le(is, 8, source);
    if (hlen > (std::uint64_t{1} << 32))
        throw IoError(kModule, "implausible checkpoint header length in " + source);
    std::string text(static_cast<std::size_t>(hlen), '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(hlen)))
        throw IoError(kModule, "truncated checkpoint " + source);

    ModelCheckpoint m;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        m.config = header.at("config").get<NetConfig>();
        m.epoch = header.at("epoch").get<Index>();
        m.adam_step = header.at("adam_step").get<std::int64_t>();
        for (const auto &r : header.at("history"))
            m.history.push_back({r.at("epoch").get<Index>(), r.at("lr").get<double>(),
                                 r.at("train_rmse").get<double>(), r.at("val_rmse").get<double>(),
                                 r.at("seconds").get<double>()});
    } catch (const nlohmann::json::exception &e) {
        throw IoError(kModule, "malformed checkpoint header in " + source + ": " + e.what());
    } catch (const ParameterError &e) {
        throw IoError(kModule, "invalid configuration in " + source + ": " + e.what());
    }

    const Network net(m.config);
    const std::size_t P = net.param_count();
    const auto &sections = header.at("sections");
    if (sections.size() != net.specs().size() + 2)
        throw IoError(kModule, "section count does not match the configured topology in " + source);

    m.params.resize(P);
    auto read_section = [&](const std::string &name, const std::vector<Index> &shape, std::span<double> dst,
                            std::size_t idx) {
        const auto &sec = sections.at(idx);
        if (sec.at("name").get<std::string>() != name || sec.at("shape").get<std::vector<Index>>() != shape)
            throw IoError(kModule, "section " + std::to_string(idx) + " does not match '" + name + "' in " + source);
        const Tensor t = read_tensor(is, source);
        if (t.dtype() != DType::Real64 || t.element_count() != dst.size())
            throw IoError(kModule, "section '" + name + "' has the wrong size in " + source);
        const auto &v = std::get<0>(t.values);
        for (double x : v)
            if (!std::isfinite(x))
                throw IoError(kModule, "section '" + name + "' contains non-finite values in " + source);
        std::copy(v.begin(), v.end(), dst.begin());
    };
    std::size_t idx = 0;
    for (const auto &spec : net.specs()) {
        read_section(spec.name, spec.shape, std::span<double>(m.params).subspan(spec.offset, spec.size()), idx);
        ++idx;
    }
    m.adam_m.resize(P);
    m.adam_v.resize(P);
    read_section("adam.m", {static_cast<Index>(P)}, m.adam_m, idx++);
    read_section("adam.v", {static_cast<Index>(P)}, m.adam_v, idx++);
    return m;
}

void write_training_log(const std::filesystem::path &path, const std::vector<EpochRecord> &history) {
    std::ostringstream os;
    os << "epoch,lr,train_rmse,val_rmse,seconds\n";
    char line[256];
    for (const auto &r : history) {
        std::snprintf(line, sizeof line, "%lld,%.10g,%.10g,%.10g,%.6f\n", static_cast<long long>(r.epoch), r.lr,
                      r.train_rmse, r.val_rmse, r.seconds);
        os << line;
    }
    write_text(path, os.str());
}

} // namespace mrf
