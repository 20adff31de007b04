#include <iostream>
#include <new>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mrf/error.hpp"

namespace mrf::cli {

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out = "out";
};

void add_common(CLI::App *cmd, Options &o) {
    cmd->add_option("--config", o.config, "run configuration (JSON)")->required();
    cmd->add_option("--seed", o.seed, "master seed; overrides the config");
    cmd->add_option("--threads", o.threads, "worker threads; 1 gives bitwise-reproducible runs");
    cmd->add_option("--out", o.out, "output directory");
}

} // namespace

int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Magnetic resonance fingerprinting reconstruction toolkit", "mrf"};
    app.require_subcommand(1);
    Options opts;
    std::map<CLI::App *, std::string> leaves;
    std::map<std::string, CLI::App *> groups;
    for (const auto &name : command_names()) {
        const auto space = name.find(' ');
        CLI::App *leaf;
        if (space == std::string::npos) {
            leaf = app.add_subcommand(name);
        } else {
            const std::string group = name.substr(0, space);
            auto it = groups.find(group);
            if (it == groups.end()) {
                it = groups.emplace(group, app.add_subcommand(group)).first;
                it->second->require_subcommand(1);
            }
            leaf = it->second->add_subcommand(name.substr(space + 1));
        }
        add_common(leaf, opts);
        leaves[leaf] = name;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    std::string command;
    for (const auto &[leaf, name] : leaves)
        if (leaf->parsed())
            command = name;

    try {
        RunConfig cfg = RunConfig::from_file(opts.config);
        if (opts.seed)
            cfg.set("seed", *opts.seed);
        if (opts.threads)
            cfg.set("threads", *opts.threads);
        cfg.finalize();
        run_command(command, cfg, opts.out, out);
        return kOk;
    } catch (const IoError &e) {
        err << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const NumericalError &e) {
        err << "error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const ParameterError &e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const nlohmann::json::exception &e) {
        err << "error: [config] " << e.what() << "\n";
        return kConfigError;
    } catch (const std::bad_alloc &) {
        err << "error: [" << command << "] out of memory\n";
        return kNumericalError;
    } catch (const std::exception &e) {
        err << "error: [" << command << "] " << e.what() << "\n";
        return kNumericalError;
    }
}

} // namespace mrf::cli
