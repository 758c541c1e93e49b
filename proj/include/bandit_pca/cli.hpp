#pragma once

// Command-line front end: flag parsing, experiment execution, CSV output.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bandit_pca/environments.hpp"
#include "bandit_pca/harness.hpp"

namespace bandit_pca {

/// Invalid or contradictory command-line input.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class TuningMode { WorstCase, Sparse, FirstOrder, Manual };

struct SweepEntry {
    std::size_t dim;
    std::size_t horizon;

    bool operator==(const SweepEntry&) const = default;
};

struct ExperimentSpec {
    Scheme scheme = Scheme::Sparse;
    EnvConfig env;
    std::size_t dim = 0;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;

    TuningMode tuning = TuningMode::WorstCase;
    std::optional<double> r_bound;
    std::optional<double> lstar_bound;
    std::optional<double> eta;
    std::optional<double> gamma;

    std::vector<SweepEntry> sweep;
    std::optional<std::string> preset;
    std::filesystem::path out = "bandit_pca.csv";

    bool allow_unbounded = false;
    bool probe_variance = false;
    bool timing = false;
    bool track_regret = true;
    std::size_t jobs = 1;
    std::size_t reorthogonalize_every = 1000;
};

/// Parses argv (argv[0] is the program name). Applies BANDIT_PCA_SEED when set.
/// Throws UsageError on any invalid input.
ExperimentSpec parse_args(int argc, const char* const* argv);
ExperimentSpec parse_args(const std::vector<std::string>& args);

/// Learning rate and exploration for one (d, T) cell of the spec.
Tuning resolve_tuning(const ExperimentSpec& spec, std::size_t dim, std::size_t horizon);

/// Builds the environment and plays one run at (d, T).
RunResult run_experiment(const ExperimentSpec& spec, std::size_t dim, std::size_t horizon);

/// Sweep cells (the single (d, T) pair when no sweep is configured).
std::vector<SweepEntry> sweep_cells(const ExperimentSpec& spec);

/// `out` with `_d{d}_T{T}` inserted before the extension.
std::filesystem::path sweep_output_path(const std::filesystem::path& out, SweepEntry cell);

/// Header `t,loss,cum_loss,branch,eta,gamma,update_ns[,mh_term,logdet_term]`, one row per
/// trial with round-trip precision, then '#'-prefixed summary lines.
void write_csv(const RunResult& result, std::ostream& os);
/// Throws std::runtime_error naming the path when the file cannot be written.
void emit_csv(const RunResult& result, const std::filesystem::path& path);

/// Full command: parse, run every cell (in `jobs` worker threads), write CSVs. Returns
/// the process exit code; failures print one `error kind=... message="..."` line.
int run_cli(int argc, const char* const* argv);

}  // namespace bandit_pca
