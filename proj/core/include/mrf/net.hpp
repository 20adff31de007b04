#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrf/dictionary.hpp"
#include "mrf/net_layers.hpp"
#include "mrf/types.hpp"

namespace mrf {

/// How a complex signature is turned into network input channels.
enum class NetInput {
    Magnitude,  ///< |x|, one channel
    Real,       ///< Re x, one channel
    RealImag,   ///< Re x and Im x as two channels
};

std::string to_string(NetInput mode);
NetInput parse_net_input(const std::string &name);  ///< "mag", "real", "realimag2ch"

struct NetConfig {
    Index input_length = 200;
    Index base_channels = 16;
    Index n_blocks = 4;
    Index kernel_size = 21;
    bool nonlocal_enabled = true;
    Index max_channels = 128;
    double maxnorm_c = 2.0;
    double t1_scale = 5000;
    double t2_scale = 2000;
    NetInput input = NetInput::Magnitude;

    static constexpr Index output_dim = 2;

    Index input_channels() const { return input == NetInput::RealImag ? 2 : 1; }
    /// Output channels of each residual block: min(base * 2^(i+1), max_channels).
    std::vector<Index> block_channels() const;
    void check() const;

    friend bool operator==(const NetConfig &, const NetConfig &) = default;
};

void to_json(nlohmann::json &j, const NetConfig &c);
void from_json(const nlohmann::json &j, NetConfig &c);

struct TrainConfig {
    Index epochs = 50;
    Index batch_size = 256;
    double lr_initial = 1e-2;
    double lr_decay = 0.1;
    Index lr_decay_every = 10;
    double lr_floor = 1e-6;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void check() const;
};

void to_json(nlohmann::json &j, const TrainConfig &c);
void from_json(const nlohmann::json &j, TrainConfig &c);

/// lr_initial * lr_decay^floor(epoch / lr_decay_every), never below
/// min(lr_floor, lr_initial).
double scheduled_lr(const TrainConfig &cfg, Index epoch);

struct EpochRecord {
    Index epoch = 0;
    double lr = 0;
    double train_rmse = 0;
    double val_rmse = 0;
    double seconds = 0;
};

/// Trained (or freshly initialised) model state.
struct ModelCheckpoint {
    NetConfig config;
    std::vector<double> params;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::int64_t adam_step = 0;
    Index epoch = 0;  ///< completed epochs represented by these weights
    std::vector<EpochRecord> history;
};

/// Fixed topology for a NetConfig: stem of two convolutions, residual
/// blocks each optionally followed by a nonlocal block, global average
/// pooling and a dense head.
class Network {
public:
    struct Block {
        nn::Conv1d a, b, shortcut;
        bool has_shortcut = false;
        nn::NonLocal nonlocal;
        bool has_nonlocal = false;
    };

    struct BlockTrace {
        nn::PoolCache pool;
        nn::Conv1d::Cache a, b, shortcut;
        nn::ReluCache relu_a, relu_out;
        nn::NonLocal::Cache nonlocal;
    };

    struct Trace {
        nn::Conv1d::Cache stem1, stem2;
        nn::ReluCache relu1, relu2;
        std::vector<BlockTrace> blocks;
        Index final_steps = 0;
        MatrixXd pooled;  ///< channels x batch after global average pooling
    };

    explicit Network(const NetConfig &cfg);

    const NetConfig &config() const { return cfg_; }
    const std::vector<nn::ParamSpec> &specs() const { return reg_.specs(); }
    std::size_t param_count() const { return reg_.total(); }

    /// x is B x (channels * L), channel-major per row; returns B x 2.
    MatrixXd forward(const MatrixXd &x, nn::Params p, Trace *trace = nullptr) const;
    /// Accumulates dLoss/dparams into g given dLoss/doutput (B x 2).
    void backward(const MatrixXd &dout, nn::Params p, const Trace &trace, nn::Grads g) const;

    /// He-normal weights, zero biases, then the max-norm projection.
    std::vector<double> initial_params(std::uint64_t seed) const;
    /// Rescales every weight row (one output unit) whose norm exceeds maxnorm_c.
    void apply_maxnorm(std::span<double> p) const;

private:
    NetConfig cfg_;
    nn::ParamRegistry reg_;
    nn::Conv1d stem1_, stem2_;
    std::vector<Block> blocks_;
    nn::Dense head_;
};

ModelCheckpoint build(const NetConfig &cfg, std::uint64_t seed);

/// Row-wise conversion of complex signatures to unit-norm network input.
MatrixXd preprocess(const MatrixXcd &signatures, NetInput mode = NetInput::Magnitude);
VectorXd preprocess(const VectorXcd &signature, NetInput mode = NetInput::Magnitude);

/// Network output in scaled units (B x 2) for preprocessed input.
MatrixXd forward(const ModelCheckpoint &model, const MatrixXd &inputs);

/// RMSE over all B*2 outputs and its gradient with respect to every
/// parameter. Samples are processed in fixed chunks whose gradients are
/// summed in chunk order, so the result does not depend on the thread count.
double loss_and_gradient(const Network &net, nn::Params p, const MatrixXd &inputs, const MatrixXd &targets,
                         std::vector<double> &grad);

/// One Adam step at the given learning rate followed by max-norm projection.
/// Returns the loss before the update.
double backward_and_step(ModelCheckpoint &model, const MatrixXd &inputs, const MatrixXd &targets,
                         const TrainConfig &cfg, double lr);

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Trains on preprocessed inputs and scaled targets; returns the weights
/// with the lowest validation RMSE together with the full history.
ModelCheckpoint train(ModelCheckpoint model, const MatrixXd &inputs, const MatrixXd &targets,
                      const TrainConfig &cfg, const EpochCallback &on_epoch = {});
/// Dictionary signatures as inputs, lookup-table entries as targets.
ModelCheckpoint train(ModelCheckpoint model, const Dictionary &dict, const TrainConfig &cfg,
                      const EpochCallback &on_epoch = {});

/// N x 2 (T1, T2) in milliseconds, clamped to [0, 1.5 * scale].
MatrixXd predict(const ModelCheckpoint &model, const MatrixXcd &signatures);
MatrixXd predict(const ModelCheckpoint &model, const ContrastStack &stack);

/// "HYCK", u32 version, u64 header length, JSON header, then one tensor per
/// named section in header order.
void save_checkpoint(const std::filesystem::path &path, const ModelCheckpoint &model);
ModelCheckpoint load_checkpoint(const std::filesystem::path &path);

void write_training_log(const std::filesystem::path &path, const std::vector<EpochRecord> &history);

} // namespace mrf
