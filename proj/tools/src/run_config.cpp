#include "run_config.hpp"

#include <limits>

#include "mrf/error.hpp"
#include "mrf/io.hpp"
#include "mrf/random.hpp"

namespace mrf::cli {

namespace {

constexpr const char *kModule = "config";

using json = nlohmann::json;

void flatten(const json &node, const std::string &prefix, json &out) {
    for (const auto &[key, value] : node.items()) {
        const std::string name = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object())
            flatten(value, name, out);
        else
            out[name] = value;
    }
}

// Derived seeds are independent substreams of the master seed.
struct DerivedSeed {
    const char *key;
    std::uint64_t stream;
};
constexpr DerivedSeed kDerived[] = {
    {"sequence.seed", 1},
    {"mask.seed", 2},
    {"net.seed", 3},
    {"train.seed", 4},
};

} // namespace

const json &config_schema() {
    static const json schema = {
        {"seed", nullptr},
        {"threads", 0},

        {"sequence.path", ""},
        {"sequence.length", 200},
        {"sequence.seed", nullptr},
        {"sequence.fa_amplitude_deg", 70.0},
        {"sequence.fa_period", 500},
        {"sequence.tr_center_ms", 13.0},
        {"sequence.tr_halfspan_ms", 1.5},
        {"sequence.te_ms", 2.0},
        {"sequence.inversion", true},
        {"sequence.ti_ms", 20.0},
        {"sequence.noise_spacing", 32},

        {"grid.t1_min", 1.0},
        {"grid.t1_max", 5000.0},
        {"grid.t1_step", 10.0},
        {"grid.t2_min", 1.0},
        {"grid.t2_max", 2000.0},
        {"grid.t2_step", 10.0},

        {"dict.match_norm", "unit"},

        {"mask.beta", 0.15},
        {"mask.sigma_frac", 0.25},
        {"mask.seed", nullptr},

        {"phantom.kind", "desk"},

        {"restore.mu", 1.0},
        {"restore.lambda", 5.0},
        {"restore.tol", 1e-4},
        {"restore.max_iters", 200},
        {"restore.project_dictionary", false},

        {"net.base_channels", 16},
        {"net.n_blocks", 4},
        {"net.kernel_size", 21},
        {"net.nonlocal_enabled", true},
        {"net.max_channels", 128},
        {"net.maxnorm_c", 2.0},
        {"net.t1_scale", 5000.0},
        {"net.t2_scale", 2000.0},
        {"net.input", "mag"},
        {"net.seed", nullptr},

        {"train.epochs", 50},
        {"train.batch_size", 256},
        {"train.lr_initial", 1e-2},
        {"train.lr_decay", 0.1},
        {"train.lr_decay_every", 10},
        {"train.lr_floor", 1e-6},
        {"train.validation_fraction", 0.2},
        {"train.beta1", 0.9},
        {"train.beta2", 0.999},
        {"train.eps", 1e-8},
        {"train.seed", nullptr},

        {"reconstruct.mapper", "net"},
        {"eval.snr_convention", "energy"},
        {"output.t1_display_max", 3000.0},
        {"output.t2_display_max", 400.0},

        {"paths.dictionary", ""},
        {"paths.checkpoint", ""},
        {"paths.kspace", ""},
        {"paths.stack", ""},
        {"paths.probes", ""},
        {"paths.reference_t1", ""},
        {"paths.reference_t2", ""},
        {"paths.estimate_t1", ""},
        {"paths.estimate_t2", ""},

        {"bench.k_values", json::array({10000, 20000})},
        {"bench.queries", 256},
        {"bench.repeats", 3},
    };
    return schema;
}

RunConfig::RunConfig() : values_(config_schema()) {}

RunConfig RunConfig::from_json(const json &doc) {
    if (!doc.is_object())
        throw ParameterError(kModule, "run configuration must be a JSON object");
    json flat = json::object();
    flatten(doc, "", flat);
    RunConfig cfg;
    for (const auto &[key, value] : flat.items())
        cfg.set(key, value);
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path &path) {
    const std::string text = read_text(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ParameterError(kModule, path.string() + ": " + e.what());
    }
    return from_json(doc);
}

void RunConfig::set(const std::string &key, json value) {
    const auto &schema = config_schema();
    if (!schema.contains(key))
        throw ParameterError(kModule, "unknown key '" + key + "'");
    const json &def = schema.at(key);
    bool ok = false;
    if (def.is_null())
        ok = value.is_null() || value.is_number_unsigned() ||
             (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    else if (def.is_boolean())
        ok = value.is_boolean();
    else if (def.is_number_integer())
        ok = value.is_number_integer();
    else if (def.is_number())
        ok = value.is_number();
    else if (def.is_string())
        ok = value.is_string();
    else if (def.is_array())
        ok = value.is_array();
    if (!ok)
        throw ParameterError(kModule, "key '" + key + "' has the wrong type (expected " +
                                          std::string(def.is_null() ? "non-negative integer" : def.type_name()) + ")");
    values_[key] = std::move(value);
}

void RunConfig::finalize() {
    if (values_.at("seed").is_null())
        throw ParameterError(kModule, "'seed' is required (config file or --seed)");
    const auto master = values_.at("seed").get<std::uint64_t>();
    for (const auto &d : kDerived)
        if (values_.at(d.key).is_null())
            values_[d.key] = substream_seed(master, d.stream);
}

bool RunConfig::has(const std::string &key) const {
    return values_.contains(key) && !values_.at(key).is_null();
}

const json &RunConfig::raw(const std::string &key) const {
    if (!values_.contains(key))
        throw ParameterError(kModule, "unknown key '" + key + "'");
    return values_.at(key);
}

double RunConfig::number(const std::string &key) const { return raw(key).get<double>(); }

std::int64_t RunConfig::integer(const std::string &key) const { return raw(key).get<std::int64_t>(); }

std::uint64_t RunConfig::seed(const std::string &key) const {
    const json &v = raw(key);
    if (v.is_null())
        throw ParameterError(kModule, "'" + key + "' is unset; finalize() derives it from 'seed'");
    return v.get<std::uint64_t>();
}

bool RunConfig::flag(const std::string &key) const { return raw(key).get<bool>(); }

std::string RunConfig::text(const std::string &key) const { return raw(key).get<std::string>(); }

std::optional<std::filesystem::path> RunConfig::path(const std::string &key) const {
    const std::string s = text(key);
    if (s.empty())
        return std::nullopt;
    return std::filesystem::path(s);
}

} // namespace mrf::cli
