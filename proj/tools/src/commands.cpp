#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "artifacts.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/epg.hpp"
#include "mrf/error.hpp"
#include "mrf/eval.hpp"
#include "mrf/io.hpp"
#include "mrf/kspace.hpp"
#include "mrf/lowrank.hpp"
#include "mrf/net.hpp"
#include "mrf/parallel.hpp"
#include "mrf/random.hpp"
#include "mrf/sequence.hpp"

namespace mrf::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char *kModule = "cli";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- config -> module parameters

SequenceParams sequence_from(const RunConfig &cfg) {
    if (auto p = cfg.path("sequence.path"))
        return load_sequence(*p);
    FispOptions o;
    o.length = cfg.integer("sequence.length");
    o.seed = cfg.seed("sequence.seed");
    o.fa_amplitude_deg = cfg.number("sequence.fa_amplitude_deg");
    o.fa_period = cfg.integer("sequence.fa_period");
    o.tr_center_ms = cfg.number("sequence.tr_center_ms");
    o.tr_halfspan_ms = cfg.number("sequence.tr_halfspan_ms");
    o.te_ms = cfg.number("sequence.te_ms");
    o.inversion = cfg.flag("sequence.inversion");
    o.ti_ms = cfg.number("sequence.ti_ms");
    o.noise_spacing = cfg.integer("sequence.noise_spacing");
    return generate_fisp(o);
}

LookupTable lut_from(const RunConfig &cfg) {
    return build_lut({cfg.number("grid.t1_min"), cfg.number("grid.t1_max"), cfg.number("grid.t1_step")},
                     {cfg.number("grid.t2_min"), cfg.number("grid.t2_max"), cfg.number("grid.t2_step")});
}

MatchNorm match_norm_from(const RunConfig &cfg) {
    const std::string s = cfg.text("dict.match_norm");
    if (s == "unit")
        return MatchNorm::Unit;
    if (s == "sq")
        return MatchNorm::Squared;
    throw ParameterError(kModule, "dict.match_norm must be 'unit' or 'sq'");
}

SnrConvention snr_convention_from(const RunConfig &cfg) {
    const std::string s = cfg.text("eval.snr_convention");
    if (s == "energy")
        return SnrConvention::Energy;
    if (s == "standard")
        return SnrConvention::Standard;
    throw ParameterError(kModule, "eval.snr_convention must be 'energy' or 'standard'");
}

NetConfig net_config_from(const RunConfig &cfg, Index input_length) {
    NetConfig c;
    c.input_length = input_length;
    c.base_channels = cfg.integer("net.base_channels");
    c.n_blocks = cfg.integer("net.n_blocks");
    c.kernel_size = cfg.integer("net.kernel_size");
    c.nonlocal_enabled = cfg.flag("net.nonlocal_enabled");
    c.max_channels = cfg.integer("net.max_channels");
    c.maxnorm_c = cfg.number("net.maxnorm_c");
    c.t1_scale = cfg.number("net.t1_scale");
    c.t2_scale = cfg.number("net.t2_scale");
    c.input = parse_net_input(cfg.text("net.input"));
    c.check();
    return c;
}

TrainConfig train_config_from(const RunConfig &cfg) {
    TrainConfig t;
    t.epochs = cfg.integer("train.epochs");
    t.batch_size = cfg.integer("train.batch_size");
    t.lr_initial = cfg.number("train.lr_initial");
    t.lr_decay = cfg.number("train.lr_decay");
    t.lr_decay_every = cfg.integer("train.lr_decay_every");
    t.lr_floor = cfg.number("train.lr_floor");
    t.validation_fraction = cfg.number("train.validation_fraction");
    t.beta1 = cfg.number("train.beta1");
    t.beta2 = cfg.number("train.beta2");
    t.eps = cfg.number("train.eps");
    t.seed = cfg.seed("train.seed");
    t.check();
    return t;
}

RestoreConfig restore_config_from(const RunConfig &cfg) {
    RestoreConfig r;
    r.mu = cfg.number("restore.mu");
    r.lambda = cfg.number("restore.lambda");
    r.tol = cfg.number("restore.tol");
    r.max_iters = static_cast<int>(cfg.integer("restore.max_iters"));
    r.check();
    return r;
}

PhantomSpec phantom_from(const RunConfig &cfg) {
    const std::string kind = cfg.text("phantom.kind");
    if (kind != "desk")
        throw ParameterError(kModule, "phantom.kind must be 'desk'");
    return PhantomSpec::desk();
}

Dictionary dictionary_from(const RunConfig &cfg, const SequenceParams &seq, std::ostream &log) {
    if (auto p = cfg.path("paths.dictionary")) {
        Dictionary d = load_dictionary(*p);
        log << "loaded dictionary " << p->string() << " (K=" << d.size() << ")\n";
        return d;
    }
    const auto t0 = Clock::now();
    Dictionary d = build_dictionary(lut_from(cfg), seq);
    log << "built dictionary K=" << d.size() << " L=" << d.length() << " in " << seconds_since(t0) << " s\n";
    return d;
}

ModelCheckpoint checkpoint_from(const RunConfig &cfg) {
    auto p = cfg.path("paths.checkpoint");
    if (!p)
        throw ParameterError(kModule, "paths.checkpoint is required");
    return load_checkpoint(*p);
}

// ---------------------------------------------------------------- signature sources

/// Either an image stack (maps are produced) or a list of probe tissues.
struct Signatures {
    MatrixXcd data;
    Index height = 0, width = 0;  ///< zero for probe lists
    std::optional<ParameterMaps> reference;
    std::vector<TissueParams> probes;
};

Signatures signatures_from(const RunConfig &cfg, const SequenceParams &seq) {
    Signatures s;
    if (auto p = cfg.path("paths.probes")) {
        s.probes = load_lut(*p).entries;
        s.data = simulate_batch(s.probes, seq);
        return s;
    }
    ContrastStack stack;
    if (auto p = cfg.path("paths.stack")) {
        stack = load_stack(*p);
    } else {
        ParameterMaps maps = make_phantom(phantom_from(cfg));
        stack = phantom_to_stack(maps, seq);
        s.reference = std::move(maps);
    }
    auto r1 = cfg.path("paths.reference_t1"), r2 = cfg.path("paths.reference_t2");
    if (r1 && r2)
        s.reference = ParameterMaps{load_map(*r1), load_map(*r2)};
    s.data = std::move(stack.data);
    s.height = stack.height;
    s.width = stack.width;
    return s;
}

std::optional<ParameterMaps> reference_from(const RunConfig &cfg) {
    auto r1 = cfg.path("paths.reference_t1"), r2 = cfg.path("paths.reference_t2");
    if (r1.has_value() != r2.has_value())
        throw ParameterError(kModule, "paths.reference_t1 and paths.reference_t2 must be given together");
    if (!r1)
        return std::nullopt;
    return ParameterMaps{load_map(*r1), load_map(*r2)};
}

MetricsReport metrics_for(const ParameterMaps &truth, const ParameterMaps &estimate, SnrConvention conv) {
    if (truth.t1.rows() != estimate.t1.rows() || truth.t1.cols() != estimate.t1.cols())
        throw ParameterError(kModule, "reference and estimate maps differ in shape");
    MetricsReport r;
    r.maps["t1"] = evaluate_map(truth.t1, estimate.t1, conv);
    r.maps["t2"] = evaluate_map(truth.t2, estimate.t2, conv);
    return r;
}

/// Writes maps (image input) or estimates.csv (probe input) plus metrics.
void emit_estimates(const RunConfig &cfg, const fs::path &out, const Signatures &sig, const MatrixXd &est,
                    MetricsReport report, std::ostream &log) {
    const auto conv = snr_convention_from(cfg);
    if (!sig.probes.empty()) {
        std::ostringstream os;
        os << "t1_ms,t2_ms,t1_est_ms,t2_est_ms\n";
        char line[160];
        MatrixXd truth(est.rows(), 2);
        for (Index j = 0; j < est.rows(); ++j) {
            const auto &p = sig.probes[static_cast<std::size_t>(j)];
            truth(j, 0) = p.t1_ms;
            truth(j, 1) = p.t2_ms;
            std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g,%.10g\n", p.t1_ms, p.t2_ms, est(j, 0), est(j, 1));
            os << line;
        }
        write_text(out / "estimates.csv", os.str());
        const auto m = metrics_for({truth.col(0), truth.col(1)}, {est.col(0), est.col(1)}, conv);
        report.maps = m.maps;
    } else {
        const ParameterMaps maps = to_maps(est, sig.height, sig.width);
        save_maps(out, maps, cfg.number("output.t1_display_max"), cfg.number("output.t2_display_max"));
        if (sig.reference)
            report.maps = metrics_for(*sig.reference, maps, conv).maps;
    }
    save_metrics(out, report);
    for (const auto &[name, m] : report.maps)
        log << name << ": rmse " << m.rmse_ms << " ms, psnr " << m.psnr_db << " dB\n";
}

// ---------------------------------------------------------------- subcommands

void cmd_seq_gen(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const SequenceParams seq = sequence_from(cfg);
    save_sequence(out / "sequence.csv", seq);
    log << "sequence L=" << seq.length() << " fingerprint " << fingerprint(seq) << "\n";
}

void cmd_dict_build(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const SequenceParams seq = sequence_from(cfg);
    const auto t0 = Clock::now();
    const Dictionary d = build_dictionary(lut_from(cfg), seq);
    log << "built dictionary K=" << d.size() << " L=" << d.length() << " in " << seconds_since(t0) << " s\n";
    save_dictionary(out, d);
    save_sequence(out / "sequence.csv", seq);
}

void cmd_dict_match(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const SequenceParams seq = sequence_from(cfg);
    const Dictionary dict = dictionary_from(cfg, seq, log);
    const Signatures sig = signatures_from(cfg, seq);
    MetricsReport report;
    const auto t0 = Clock::now();
    const MatrixXd est = match_batch(dict, sig.data, match_norm_from(cfg));
    report.timings_s["match"] = seconds_since(t0);
    emit_estimates(cfg, out, sig, est, report, log);
}

void cmd_train(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const SequenceParams seq = sequence_from(cfg);
    const Dictionary dict = dictionary_from(cfg, seq, log);
    const NetConfig nc = net_config_from(cfg, dict.length());
    const TrainConfig tc = train_config_from(cfg);
    ModelCheckpoint model = build(nc, cfg.seed("net.seed"));
    log << "network parameters: " << model.params.size() << "\n";
    model = train(std::move(model), dict, tc, [&](const EpochRecord &r) {
        log << "epoch " << r.epoch << " lr " << r.lr << " train " << r.train_rmse << " val " << r.val_rmse << " ("
            << r.seconds << " s)\n";
    });
    save_checkpoint(out / "model.ckpt", model);
    write_training_log(out / "training_log.csv", model.history);
    save_sequence(out / "sequence.csv", seq);
}

void cmd_predict(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const SequenceParams seq = sequence_from(cfg);
    const ModelCheckpoint model = checkpoint_from(cfg);
    const Signatures sig = signatures_from(cfg, seq);
    MetricsReport report;
    const auto t0 = Clock::now();
    const MatrixXd est = predict(model, sig.data);
    report.timings_s["predict"] = seconds_since(t0);
    emit_estimates(cfg, out, sig, est, report, log);
}

void cmd_subsample(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const SequenceParams seq = sequence_from(cfg);
    ContrastStack stack;
    if (auto p = cfg.path("paths.stack")) {
        stack = load_stack(*p);
    } else {
        const ParameterMaps maps = make_phantom(phantom_from(cfg));
        stack = phantom_to_stack(maps, seq);
        save_map(out / "reference_t1.hyt", maps.t1);
        save_map(out / "reference_t2.hyt", maps.t2);
    }
    MaskSettings ms{cfg.number("mask.beta"), cfg.number("mask.sigma_frac"), cfg.seed("mask.seed")};
    const auto masks = make_gaussian_masks(stack.height, stack.width, stack.frames(), ms.beta, ms.sigma_frac, ms.seed);
    const KSpaceData y = subsample_stack(stack, masks);
    save_kspace(out / "kspace", y, ms);
    save_stack(out / "stack.hyt", stack);
    save_sequence(out / "sequence.csv", seq);
    log << "subsampled " << stack.height << "x" << stack.width << "x" << stack.frames() << ", " << masks.front().count()
        << " cells per frame\n";
}

RestoreResult restore_from(const RunConfig &cfg, const KSpaceData &y, std::ostream &log) {
    RestoreConfig rc = restore_config_from(cfg);
    if (cfg.flag("restore.project_dictionary")) {
        const SequenceParams seq = sequence_from(cfg);
        rc.projector = dictionary_projector(dictionary_from(cfg, seq, log).signatures());
    }
    RestoreResult r = restore(y, rc);
    log << "restore: " << r.iterations() << " iterations, final relative change " << r.final_rel_change()
        << (r.converged ? " (converged)\n" : " (iteration cap reached)\n");
    return r;
}

KSpaceData kspace_from(const RunConfig &cfg) {
    auto p = cfg.path("paths.kspace");
    if (!p)
        throw ParameterError(kModule, "paths.kspace is required");
    return load_kspace(*p);
}

void cmd_restore(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const RestoreResult r = restore_from(cfg, kspace_from(cfg), log);
    save_stack(out / "stack.hyt", r.stack);
    write_iteration_log(out / "iteration_log.csv", r.log);
}

void cmd_reconstruct(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const KSpaceData y = kspace_from(cfg);
    MetricsReport report;
    auto t0 = Clock::now();
    const RestoreResult r = restore_from(cfg, y, log);
    report.timings_s["restore"] = seconds_since(t0);
    save_stack(out / "stack.hyt", r.stack);
    write_iteration_log(out / "iteration_log.csv", r.log);

    const std::string mapper = cfg.text("reconstruct.mapper");
    MatrixXd est;
    t0 = Clock::now();
    if (mapper == "net") {
        est = predict(checkpoint_from(cfg), r.stack);
        report.timings_s["predict"] = seconds_since(t0);
    } else if (mapper == "dm") {
        const Dictionary dict = dictionary_from(cfg, sequence_from(cfg), log);
        t0 = Clock::now();
        est = match_batch(dict, r.stack, match_norm_from(cfg));
        report.timings_s["match"] = seconds_since(t0);
    } else {
        throw ParameterError(kModule, "reconstruct.mapper must be 'net' or 'dm'");
    }
    Signatures sig;
    sig.height = r.stack.height;
    sig.width = r.stack.width;
    sig.reference = reference_from(cfg);
    emit_estimates(cfg, out, sig, est, report, log);
}

void cmd_eval(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const auto truth = reference_from(cfg);
    auto e1 = cfg.path("paths.estimate_t1"), e2 = cfg.path("paths.estimate_t2");
    if (!truth || !e1 || !e2)
        throw ParameterError(kModule, "eval needs paths.reference_t1/t2 and paths.estimate_t1/t2");
    const MetricsReport report = metrics_for(*truth, {load_map(*e1), load_map(*e2)}, snr_convention_from(cfg));
    save_metrics(out, report);
    for (const auto &[name, m] : report.maps)
        log << name << ": rmse " << m.rmse_ms << " ms, snr " << m.snr_db << " dB, psnr " << m.psnr_db << " dB\n";
}

template <class F>
double best_time(int repeats, F &&f) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

void cmd_bench(const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const SequenceParams seq = sequence_from(cfg);
    const LookupTable full = lut_from(cfg);
    const auto ks = cfg.raw("bench.k_values").get<std::vector<Index>>();
    const Index queries = cfg.integer("bench.queries");
    const int repeats = static_cast<int>(std::max<std::int64_t>(1, cfg.integer("bench.repeats")));
    if (ks.empty())
        throw ParameterError(kModule, "bench.k_values must not be empty");
    const Index kmax = *std::max_element(ks.begin(), ks.end());
    if (kmax > full.size() || *std::min_element(ks.begin(), ks.end()) < 1)
        throw ParameterError(kModule, "bench.k_values must lie in [1, " + std::to_string(full.size()) +
                                          "] for the configured grid");

    const Dictionary big = build_dictionary(
        LookupTable{{full.entries.begin(), full.entries.begin() + static_cast<std::ptrdiff_t>(kmax)}, {}}, seq);
    const MatrixXcd all = big.signatures();
    Rng rng(cfg.seed("mask.seed"));
    MatrixXcd q(queries, seq.length());
    for (Index j = 0; j < queries; ++j)
        q.row(j) = all.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(kmax))));

    const ModelCheckpoint model = cfg.path("paths.checkpoint") ? checkpoint_from(cfg)
                                                                : build(net_config_from(cfg, seq.length()),
                                                                        cfg.seed("net.seed"));
    const MatchNorm norm = match_norm_from(cfg);

    std::ostringstream csv;
    csv << "k,match_s,predict_s\n";
    nlohmann::json rows = nlohmann::json::array();
    for (Index k : ks) {
        LookupTable lut{{big.lut().entries.begin(), big.lut().entries.begin() + static_cast<std::ptrdiff_t>(k)}, {}};
        const Dictionary d(RowMatrixXcd(all.topRows(k)), std::move(lut), fingerprint(seq));
        const double tm = best_time(repeats, [&] { (void)match_batch(d, q, norm); });
        const double tp = best_time(repeats, [&] { (void)predict(model, q); });
        csv << k << ',' << tm << ',' << tp << '\n';
        rows.push_back({{"k", k}, {"match_s", tm}, {"predict_s", tp}});
        log << "K=" << k << ": match " << tm << " s, predict " << tp << " s\n";
    }
    write_text(out / "bench.csv", csv.str());
    write_text(out / "bench.json", rows.dump(2) + "\n");
}

using Handler = std::function<void(const RunConfig &, const fs::path &, std::ostream &)>;

const std::map<std::string, Handler> &handlers() {
    static const std::map<std::string, Handler> h = {
        {"seq gen", cmd_seq_gen},         {"dict build", cmd_dict_build}, {"dict match", cmd_dict_match},
        {"train", cmd_train},             {"predict", cmd_predict},       {"subsample", cmd_subsample},
        {"restore", cmd_restore},         {"reconstruct", cmd_reconstruct}, {"eval", cmd_eval},
        {"bench", cmd_bench},
    };
    return h;
}

} // namespace

const std::vector<std::string> &command_names() {
    static const std::vector<std::string> names = {"seq gen", "dict build",  "dict match", "train", "predict",
                                                   "subsample", "restore", "reconstruct", "eval",  "bench"};
    return names;
}

void run_command(const std::string &name, const RunConfig &cfg, const fs::path &out, std::ostream &log) {
    const auto it = handlers().find(name);
    if (it == handlers().end())
        throw ParameterError(kModule, "unknown command '" + name + "'");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
        throw IoError(kModule, "cannot create output directory " + out.string() + ": " + ec.message());
    if (cfg.integer("threads") > 0)
        set_thread_count(static_cast<int>(cfg.integer("threads")));
    write_text(out / "config.used.json", cfg.values().dump(2) + "\n");
    it->second(cfg, out, log);
}

} // namespace mrf::cli
