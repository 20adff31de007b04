#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "artifacts.hpp"
#include "commands.hpp"
#include "mrf/io.hpp"
#include "mrf/random.hpp"
#include "test_util.hpp"

using namespace mrf;
using nlohmann::json;

namespace {

struct CliResult {
    int code = 0;
    std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mrf");
    std::vector<const char *> argv;
    for (const auto &a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path write_config(const mrf::test::TempDir &dir, const std::string &name, const json &doc) {
    const auto p = dir / name;
    write_text(p, doc.dump(2));
    return p;
}

/// Small desk run: short sequence, coarse grid containing every phantom tissue.
json desk_config() {
    return json{{"seed", 7},
                {"sequence", {{"length", 40}, {"fa_period", 40}}},
                {"grid",
                 {{"t1_min", 300.0}, {"t1_max", 2200.0}, {"t1_step", 100.0}, {"t2_min", 20.0}, {"t2_max", 300.0},
                  {"t2_step", 10.0}}},
                {"net",
                 {{"base_channels", 2}, {"n_blocks", 1}, {"kernel_size", 3}, {"max_channels", 4},
                  {"t1_scale", 2200.0}, {"t2_scale", 300.0}}},
                {"train", {{"epochs", 1}, {"batch_size", 32}, {"lr_initial", 1e-3}}}};
}

std::string file_text(const std::filesystem::path &p) { return read_text(p); }

} // namespace

TEST(Cli, UnknownKeyIsConfigError) {
    mrf::test::TempDir dir;
    auto doc = desk_config();
    doc["restore"]["lamda"] = 1.0;
    const auto r = run_cli({"seq", "gen", "--config", write_config(dir, "c.json", doc).string(), "--out",
                            (dir / "o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("restore.lamda"), std::string::npos) << r.err;
}

TEST(Cli, WrongTypeIsConfigError) {
    mrf::test::TempDir dir;
    auto doc = desk_config();
    doc["restore"]["lambda"] = "big";
    EXPECT_EQ(run_cli({"seq", "gen", "--config", write_config(dir, "c.json", doc).string(), "--out",
                       (dir / "o").string()})
                  .code,
              2);
}

TEST(Cli, MissingSeedIsConfigError) {
    mrf::test::TempDir dir;
    auto doc = desk_config();
    doc.erase("seed");
    const auto cfg = write_config(dir, "c.json", doc).string();
    EXPECT_EQ(run_cli({"seq", "gen", "--config", cfg, "--out", (dir / "o").string()}).code, 2);
    EXPECT_EQ(run_cli({"seq", "gen", "--config", cfg, "--seed", "3", "--out", (dir / "o").string()}).code, 0);
}

TEST(Cli, ParseErrorsAreConfigErrors) {
    EXPECT_EQ(run_cli({"bogus"}).code, 2);
    EXPECT_EQ(run_cli({"seq", "gen"}).code, 2);
    EXPECT_EQ(run_cli({"dict"}).code, 2);
}

TEST(Cli, MissingInputFileIsIoError) {
    mrf::test::TempDir dir;
    EXPECT_EQ(run_cli({"seq", "gen", "--config", (dir / "absent.json").string()}).code, 4);
    auto doc = desk_config();
    doc["paths"]["kspace"] = (dir / "nowhere").string();
    const auto r = run_cli({"restore", "--config", write_config(dir, "c.json", doc).string(), "--out",
                            (dir / "o").string()});
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(r.err.rfind("error: [", 0), 0u) << r.err;
}

TEST(Cli, ConfigUsedRecordsDerivedSeedsAndOverrides) {
    mrf::test::TempDir dir;
    const auto cfg = write_config(dir, "c.json", desk_config()).string();
    ASSERT_EQ(run_cli({"seq", "gen", "--config", cfg, "--seed", "11", "--out", (dir / "o").string()}).code, 0);
    const auto used = json::parse(file_text(dir / "o" / "config.used.json"));
    EXPECT_EQ(used["seed"], 11);
    EXPECT_EQ(used["sequence.seed"].get<std::uint64_t>(), substream_seed(11, 1));
    EXPECT_EQ(used["mask.seed"].get<std::uint64_t>(), substream_seed(11, 2));
    EXPECT_EQ(used["net.seed"].get<std::uint64_t>(), substream_seed(11, 3));
    EXPECT_EQ(used["train.seed"].get<std::uint64_t>(), substream_seed(11, 4));
    EXPECT_EQ(used["sequence.length"], 40);
    EXPECT_TRUE(std::filesystem::exists(dir / "o" / "sequence.csv"));
}

TEST(Cli, ExplicitSubSeedIsKept) {
    mrf::test::TempDir dir;
    auto doc = desk_config();
    doc["sequence"]["seed"] = 99;
    ASSERT_EQ(run_cli({"seq", "gen", "--config", write_config(dir, "c.json", doc).string(), "--out",
                       (dir / "o").string()})
                  .code,
              0);
    EXPECT_EQ(json::parse(file_text(dir / "o" / "config.used.json"))["sequence.seed"], 99);
}

TEST(Cli, SameSeedReproducesSequence) {
    mrf::test::TempDir dir;
    const auto cfg = write_config(dir, "c.json", desk_config()).string();
    ASSERT_EQ(run_cli({"seq", "gen", "--config", cfg, "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(run_cli({"seq", "gen", "--config", cfg, "--out", (dir / "b").string()}).code, 0);
    ASSERT_EQ(run_cli({"seq", "gen", "--config", cfg, "--seed", "8", "--out", (dir / "c").string()}).code, 0);
    EXPECT_EQ(file_text(dir / "a" / "sequence.csv"), file_text(dir / "b" / "sequence.csv"));
    EXPECT_NE(file_text(dir / "a" / "sequence.csv"), file_text(dir / "c" / "sequence.csv"));
}

TEST(Cli, DictMatchRecoversProbesOnAndOffGrid) {
    mrf::test::TempDir dir;
    auto doc = desk_config();
    const auto cfg = write_config(dir, "c.json", doc).string();
    ASSERT_EQ(run_cli({"dict", "build", "--config", cfg, "--out", (dir / "dict").string()}).code, 0);
    write_text(dir / "probes.csv", "t1_ms,t2_ms\n800,80\n1200,110\n2000,300\n");
    doc["paths"]["dictionary"] = (dir / "dict").string();
    doc["paths"]["probes"] = (dir / "probes.csv").string();
    ASSERT_EQ(run_cli({"dict", "match", "--config", write_config(dir, "m.json", doc).string(), "--out",
                       (dir / "m").string()})
                  .code,
              0);
    EXPECT_EQ(file_text(dir / "m" / "estimates.csv"),
              "t1_ms,t2_ms,t1_est_ms,t2_est_ms\n800,80,800,80\n1200,110,1200,110\n2000,300,2000,300\n");
    const auto metrics = json::parse(file_text(dir / "m" / "metrics.json"));
    EXPECT_EQ(metrics["maps"]["t1"]["rmse_ms"], 0.0);

    write_text(dir / "probes.csv", "t1_ms,t2_ms\n1010,100\n");
    ASSERT_EQ(run_cli({"dict", "match", "--config", write_config(dir, "m.json", doc).string(), "--out",
                       (dir / "m2").string()})
                  .code,
              0);
    const auto est = file_text(dir / "m2" / "estimates.csv");
    EXPECT_NE(est.find("\n1010,100,1000,100\n"), std::string::npos) << est;
}

TEST(Cli, EvalOfIdenticalMapsIsExact) {
    mrf::test::TempDir dir;
    MatrixXd t1(2, 2), t2(2, 2);
    t1 << 800, 900, 1000, 1100;
    t2 << 80, 90, 100, 110;
    cli::save_map(dir / "t1.hyt", t1);
    cli::save_map(dir / "t2.hyt", t2);
    auto doc = desk_config();
    doc["paths"] = {{"reference_t1", (dir / "t1.hyt").string()}, {"reference_t2", (dir / "t2.hyt").string()},
                    {"estimate_t1", (dir / "t1.hyt").string()},  {"estimate_t2", (dir / "t2.hyt").string()}};
    ASSERT_EQ(run_cli({"eval", "--config", write_config(dir, "c.json", doc).string(), "--out",
                       (dir / "o").string()})
                  .code,
              0);
    const auto m = json::parse(file_text(dir / "o" / "metrics.json"));
    EXPECT_EQ(m["maps"]["t1"]["rmse_ms"], 0.0);
    EXPECT_EQ(m["maps"]["t2"]["rmse_ms"], 0.0);
    EXPECT_NEAR(m["maps"]["t2"]["corrcoef"].get<double>(), 1.0, 1e-12);
    EXPECT_TRUE(std::filesystem::exists(dir / "o" / "metrics.csv"));
}

TEST(Cli, FullySampledReconstructionMatchesDirectMapping) {
    mrf::test::TempDir dir;
    auto doc = desk_config();
    doc["mask"]["beta"] = 1.0;
    doc["restore"]["lambda"] = 0.0;
    const auto cfg = write_config(dir, "c.json", doc).string();
    ASSERT_EQ(run_cli({"subsample", "--config", cfg, "--out", (dir / "s").string()}).code, 0);
    ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", (dir / "t").string()}).code, 0);
    ASSERT_TRUE(std::filesystem::exists(dir / "t" / "training_log.csv"));

    doc["paths"] = {{"checkpoint", (dir / "t" / "model.ckpt").string()},
                    {"kspace", (dir / "s" / "kspace").string()},
                    {"reference_t1", (dir / "s" / "reference_t1.hyt").string()},
                    {"reference_t2", (dir / "s" / "reference_t2.hyt").string()}};
    const auto cfg2 = write_config(dir, "r.json", doc).string();
    ASSERT_EQ(run_cli({"reconstruct", "--config", cfg2, "--out", (dir / "r").string()}).code, 0);
    ASSERT_EQ(run_cli({"predict", "--config", cfg2, "--out", (dir / "p").string()}).code, 0);
    for (const char *map : {"t1_map.hyt", "t2_map.hyt"}) {
        const MatrixXd a = cli::load_map(dir / "r" / map), b = cli::load_map(dir / "p" / map);
        ASSERT_EQ(a.rows(), 32);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6 * b.cwiseAbs().maxCoeff()) << map;
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "r" / "iteration_log.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "r" / "t1_map.pgm"));

    doc["reconstruct"]["mapper"] = "dm";
    ASSERT_EQ(run_cli({"reconstruct", "--config", write_config(dir, "d.json", doc).string(), "--out",
                       (dir / "d").string()})
                  .code,
              0);
    const auto m = json::parse(file_text(dir / "d" / "metrics.json"));
    // Phantom tissue 1200/110 lies on the grid, so matching is exact.
    EXPECT_EQ(m["maps"]["t1"]["rmse_ms"], 0.0);
    EXPECT_TRUE(m["timings_s"].contains("restore"));
}

TEST(Cli, BenchWritesTimings) {
    mrf::test::TempDir dir;
    auto doc = desk_config();
    doc["bench"] = {{"k_values", {50, 100}}, {"queries", 8}, {"repeats", 1}};
    ASSERT_EQ(run_cli({"bench", "--config", write_config(dir, "c.json", doc).string(), "--out",
                       (dir / "o").string()})
                  .code,
              0);
    const auto csv = file_text(dir / "o" / "bench.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,match_s,predict_s");
    EXPECT_EQ(json::parse(file_text(dir / "o" / "bench.json")).size(), 2u);
    doc["bench"]["k_values"] = {100000};
    EXPECT_EQ(run_cli({"bench", "--config", write_config(dir, "c2.json", doc).string(), "--out",
                       (dir / "o2").string()})
                  .code,
              2);
}

TEST(Cli, CommandNamesAreStable) {
    EXPECT_EQ(cli::command_names().size(), 10u);
    EXPECT_EQ(cli::command_names().front(), "seq gen");
}
