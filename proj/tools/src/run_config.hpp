#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace mrf::cli {

/// Flat key/value run configuration. Keys use dotted names
/// ("restore.lambda"); nested JSON objects are flattened on load. Every key
/// has a registered default, unknown keys are rejected, and `seed` must be
/// given either in the file or on the command line.
class RunConfig {
public:
    /// Defaults only; `seed` unset.
    RunConfig();

    static RunConfig from_file(const std::filesystem::path &path);
    static RunConfig from_json(const nlohmann::json &doc);

    /// Command-line value for a key; takes precedence over the file.
    void set(const std::string &key, nlohmann::json value);

    /// Fills derived per-module seeds from the master seed and checks that
    /// the master seed exists. Call once after all overrides.
    void finalize();

    bool has(const std::string &key) const;
    const nlohmann::json &raw(const std::string &key) const;

    double number(const std::string &key) const;
    std::int64_t integer(const std::string &key) const;
    std::uint64_t seed(const std::string &key) const;
    bool flag(const std::string &key) const;
    std::string text(const std::string &key) const;
    /// Empty string means "not set".
    std::optional<std::filesystem::path> path(const std::string &key) const;

    /// Fully resolved document (every key, derived seeds included).
    const nlohmann::json &values() const { return values_; }

private:
    nlohmann::json values_;
};

/// Default value of every accepted key.
const nlohmann::json &config_schema();

} // namespace mrf::cli
