#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bandit_pca/cli.hpp"

using namespace bandit_pca;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "bandit_pca_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

int run(std::vector<std::string> args) {
    std::vector<const char*> argv{"bandit_pca_cli"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

// Splits a CSV data line on commas.
std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
}

struct SeedGuard {
    SeedGuard() { unsetenv("BANDIT_PCA_SEED"); }
    ~SeedGuard() { unsetenv("BANDIT_PCA_SEED"); }
};

}  // namespace

TEST_CASE("parse_args: well-formed sparse run") {
    SeedGuard guard;
    const ExperimentSpec s = parse_args(std::vector<std::string>{"--scheme", "sparse", "--env", "rank1", "--d", "8",
                                                                 "--T", "10000", "--tune", "sparse", "--r", "1",
                                                                 "--seed", "7", "--out", "run.csv"});
    CHECK(s.scheme == Scheme::Sparse);
    CHECK(s.env.kind == EnvKind::RankOneStream);
    CHECK(s.dim == 8);
    CHECK(s.horizon == 10000);
    CHECK(s.tuning == TuningMode::Sparse);
    CHECK(*s.r_bound == 1.0);
    CHECK(s.seed == 7);
    CHECK(s.out == "run.csv");
    const Tuning t = resolve_tuning(s, 8, 10000);
    CHECK(t.gamma == 8.0 * t.eta);
}

TEST_CASE("parse_args: validation errors") {
    SeedGuard guard;
    using V = std::vector<std::string>;
    CHECK_THROWS_AS(parse_args(V{"--scheme", "dense", "--gamma", "0.5", "--d", "4", "--T", "10"}), UsageError);
    CHECK_THROWS_WITH_AS(parse_args(V{"--env", "spiked", "--d", "4", "--T", "10"}), doctest::Contains("spectral"),
                         UsageError);
    CHECK_NOTHROW(parse_args(V{"--env", "spiked", "--allow-unbounded", "--d", "4", "--T", "10"}));
    CHECK_THROWS_AS(parse_args(V{"--d", "4"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--T", "4"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--d", "4", "--T", "10", "--bogus"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--d", "4", "--T", "10", "--tune", "sparse", "--eta", "0.1"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--d", "4", "--T", "10", "--tune", "worstcase", "--r", "1"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--d", "4", "--T", "10", "--tune", "firstorder"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--d", "4", "--T", "10", "--eta", "-1"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--d", "1", "--T", "10"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--sweep", "4x0"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--sweep", "4by10"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--scheme", "both", "--d", "4", "--T", "10"}), UsageError);
    CHECK_THROWS_AS(parse_args(V{"--d", "4", "--T", "10", "--epsilon", "0.1"}), UsageError);
}

TEST_CASE("parse_args: manual tuning, sweeps and presets") {
    SeedGuard guard;
    using V = std::vector<std::string>;
    const ExperimentSpec m = parse_args(V{"--scheme", "dense", "--eta", "0.02", "--gamma", "0.1", "--d", "4", "--T", "9"});
    CHECK(m.tuning == TuningMode::Manual);
    const Tuning t = resolve_tuning(m, 4, 9);
    CHECK(t.eta == 0.02);
    CHECK(t.gamma == 0.1);

    const ExperimentSpec s = parse_args(V{"--sweep", "4x100,8x200", "--sweep", "3x50"});
    CHECK(s.sweep == std::vector<SweepEntry>{{4, 100}, {8, 200}, {3, 50}});
    CHECK(sweep_cells(s).size() == 3);

    const ExperimentSpec r = parse_args(V{"--preset", "regret-sweep", "--d", "5"});
    REQUIRE(r.sweep.size() == 9);
    CHECK(r.sweep.front() == SweepEntry{5, 256});
    CHECK(r.sweep.back() == SweepEntry{5, 65536});

    const ExperimentSpec tm = parse_args(V{"--preset", "timing", "--scheme", "sparse"});
    CHECK(tm.timing);
    CHECK_FALSE(tm.track_regret);
    CHECK(tm.sweep.back() == SweepEntry{1024, 1000});

    CHECK(sweep_output_path("out/run.csv", {4, 100}) == std::filesystem::path("out/run_d4_T100.csv"));
}

TEST_CASE("BANDIT_PCA_SEED overrides --seed") {
    SeedGuard guard;
    setenv("BANDIT_PCA_SEED", "1234", 1);
    CHECK(parse_args(std::vector<std::string>{"--d", "3", "--T", "5", "--seed", "9"}).seed == 1234);
    setenv("BANDIT_PCA_SEED", "abc", 1);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"--d", "3", "--T", "5"}), UsageError);
}

TEST_CASE("emit_csv: header, round trip and summary") {
    SeedGuard guard;
    const auto path = scratch("roundtrip.csv");
    REQUIRE(run({"--scheme", "sparse", "--env", "rank1", "--d", "4", "--T", "50", "--seed", "3", "--probe-variance",
                 "--out", path.string()}) == 0);
    const ExperimentSpec spec = parse_args(std::vector<std::string>{"--scheme", "sparse", "--env", "rank1", "--d", "4",
                                                                    "--T", "50", "--seed", "3", "--probe-variance"});
    const RunResult result = run_experiment(spec, 4, 50);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,loss,cum_loss,branch,eta,gamma,update_ns,mh_term,logdet_term");
    std::size_t row = 0;
    std::vector<std::string> summary;
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) == 0) {
            summary.push_back(line);
            continue;
        }
        const auto f = fields(line);
        REQUIRE(f.size() == 9);
        const TrialRecord& rec = result.records.at(row++);
        CHECK(std::stoull(f[0]) == rec.t);
        CHECK(std::strtod(f[1].c_str(), nullptr) == rec.loss);
        CHECK(f[3] == rec.branch);
        CHECK(std::strtod(f[4].c_str(), nullptr) == rec.eta);
        CHECK(std::strtod(f[5].c_str(), nullptr) == rec.gamma);
        CHECK(std::strtod(f[7].c_str(), nullptr) == *rec.mh_term);
        CHECK(std::strtod(f[8].c_str(), nullptr) == *rec.logdet_term);
    }
    CHECK(row == 50);
    REQUIRE(summary.size() == 4);
    CHECK(summary[0].rfind("# regret_realized=", 0) == 0);
    CHECK(std::strtod(summary[1].substr(summary[1].find('=') + 1).c_str(), nullptr) == *result.regret.pseudo);
    CHECK(summary[2].rfind("# comparator=", 0) == 0);
    CHECK(summary[3] == "# total_runtime_ns=0");
}

TEST_CASE("emit_csv: empty run and I/O failure") {
    SeedGuard guard;
    const ExperimentSpec spec = parse_args(std::vector<std::string>{"--d", "3", "--T", "0"});
    const RunResult r = run_experiment(spec, 3, 0);
    std::ostringstream os;
    write_csv(r, os);
    CHECK(os.str() ==
          "t,loss,cum_loss,branch,eta,gamma,update_ns\n# regret_realized=0\n# regret_pseudo=0\n# comparator=0\n"
          "# total_runtime_ns=0\n");
    CHECK_THROWS_WITH_AS(emit_csv(r, "/nonexistent-dir/x.csv"), doctest::Contains("/nonexistent-dir/x.csv"),
                         std::runtime_error);
}

TEST_CASE("run_cli: determinism, sweeps and exit codes") {
    SeedGuard guard;
    const auto a = scratch("det_a.csv");
    const auto b = scratch("det_b.csv");
    for (const auto& p : {a, b})
        REQUIRE(run({"--scheme", "dense", "--env", "psd", "--rank", "2", "--d", "4", "--T", "200", "--seed", "5",
                     "--out", p.string()}) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK_FALSE(slurp(a).empty());

    const auto base = scratch("sweep.csv");
    REQUIRE(run({"--sweep", "3x20,4x30", "--jobs", "2", "--out", base.string()}) == 0);
    CHECK(std::filesystem::exists(scratch("sweep_d3_T20.csv")));
    CHECK(std::filesystem::exists(scratch("sweep_d4_T30.csv")));

    CHECK(run({"--d", "3"}) == 2);
    CHECK(run({"--d", "3", "--T", "5", "--out", "/nonexistent-dir/x.csv"}) == 1);
    CHECK(run({"--help"}) == 0);
}

TEST_CASE("run_cli: static environment with and without a matrix file") {
    SeedGuard guard;
    const auto m = scratch("matrix.txt");
    std::ofstream(m) << "-1 0\n0 1\n";
    const auto out = scratch("static.csv");
    REQUIRE(run({"--env", "static", "--matrix", m.string(), "--d", "2", "--T", "100", "--out", out.string()}) == 0);
    CHECK(slurp(out).find("# comparator=-100\n") != std::string::npos);
    REQUIRE(run({"--env", "static", "--d", "5", "--T", "10", "--out", out.string()}) == 0);
    CHECK(run({"--env", "static", "--matrix", m.string(), "--d", "3", "--T", "10", "--out", out.string()}) == 1);
}
