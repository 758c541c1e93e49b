#include "bandit_pca/cli.hpp"

#include <atomic>
#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

namespace bandit_pca {

namespace {

/// --help was given; carries the rendered help text.
class HelpRequested : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RawArgs {
    std::string scheme = "sparse";
    std::string env = "rank1";
    std::optional<std::size_t> dim;
    std::optional<std::size_t> horizon;
    std::uint64_t seed = 0;
    std::optional<std::string> tune;
    std::optional<double> r;
    std::optional<double> lstar;
    std::optional<double> eta;
    std::optional<double> gamma;
    std::optional<double> epsilon;
    std::optional<std::size_t> rank;
    std::optional<std::string> input;
    std::optional<std::string> matrix;
    std::vector<std::string> sweep;
    std::optional<std::string> preset;
    std::string out = "bandit_pca.csv";
    bool allow_unbounded = false;
    bool probe_variance = false;
    bool timing = false;
    bool no_regret = false;
    std::size_t jobs = 1;
    std::size_t reorth_every = 1000;
};

void configure(CLI::App& app, RawArgs& raw) {
    app.add_option("--scheme", raw.scheme, "Sampling scheme")->check(CLI::IsMember({"dense", "sparse"}));
    app.add_option("--env", raw.env, "Environment")->check(CLI::IsMember({"rank1", "psd", "spiked", "static"}));
    app.add_option("--d", raw.dim, "Dimension");
    app.add_option("--T", raw.horizon, "Number of trials");
    app.add_option("--seed", raw.seed, "Seed (BANDIT_PCA_SEED overrides)");
    app.add_option("--tune", raw.tune, "Tuning rule")
        ->check(CLI::IsMember({"worstcase", "sparse", "firstorder", "manual"}));
    app.add_option("--r", raw.r, "Bound on the average squared Frobenius norm (sparse tuning)");
    app.add_option("--lstar", raw.lstar, "Bound on the best cumulative loss (first-order tuning)");
    app.add_option("--eta", raw.eta, "Learning rate (manual tuning)");
    app.add_option("--gamma", raw.gamma, "Exploration rate (manual tuning)");
    app.add_option("--epsilon", raw.epsilon, "Spike strength for --env spiked (default d/(4 sqrt T))");
    app.add_option("--rank", raw.rank, "Loss rank for --env psd");
    app.add_option("--input", raw.input, "Rank-one stream file (one vector per line)");
    app.add_option("--matrix", raw.matrix, "Loss matrix file for --env static (default: seeded random full-rank matrix)");
    app.add_option("--sweep", raw.sweep, "Sweep cells as DxT, comma separated")->delimiter(',');
    app.add_option("--preset", raw.preset, "Preset experiment")->check(CLI::IsMember({"regret-sweep", "timing"}));
    app.add_option("--out", raw.out, "Output CSV path");
    app.add_flag("--allow-unbounded", raw.allow_unbounded, "Accept environments without a spectral bound");
    app.add_flag("--probe-variance", raw.probe_variance, "Record variance-probe terms per trial");
    app.add_flag("--timing", raw.timing, "Record learner wall-clock time (output is then not reproducible)");
    app.add_flag("--no-regret", raw.no_regret, "Skip regret bookkeeping");
    app.add_option("--jobs", raw.jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--reorth-every", raw.reorth_every, "Trials between Gram-Schmidt passes (0 disables)");
}

SweepEntry parse_sweep_cell(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw UsageError("--sweep entry '" + text + "' is not of the form DxT");
    auto parse_positive = [&](const std::string& part) -> std::size_t {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != part.size() || part.empty() || v == 0 || part[0] == '-')
            throw UsageError("--sweep entry '" + text + "' needs positive integers");
        return static_cast<std::size_t>(v);
    };
    return {parse_positive(text.substr(0, x)), parse_positive(text.substr(x + 1))};
}

ExperimentSpec validate(const RawArgs& raw) {
    ExperimentSpec spec;
    spec.scheme = raw.scheme == "dense" ? Scheme::Dense : Scheme::Sparse;
    spec.env.kind = *parse_env_kind(raw.env);
    spec.seed = raw.seed;
    if (const char* env_seed = std::getenv("BANDIT_PCA_SEED"); env_seed != nullptr && *env_seed != '\0') {
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(env_seed, &end, 10);
        if (errno != 0 || end == nullptr || *end != '\0' || env_seed[0] == '-')
            throw UsageError(std::string("BANDIT_PCA_SEED is not an unsigned integer: ") + env_seed);
        spec.seed = v;
    }
    spec.preset = raw.preset;
    spec.out = raw.out;
    spec.allow_unbounded = raw.allow_unbounded;
    spec.probe_variance = raw.probe_variance;
    spec.timing = raw.timing;
    spec.track_regret = !raw.no_regret;
    spec.jobs = raw.jobs;
    spec.reorthogonalize_every = raw.reorth_every;

    // Tuning flags.
    const bool manual_values = raw.eta || raw.gamma;
    if (raw.tune) {
        const std::string& t = *raw.tune;
        spec.tuning = t == "worstcase" ? TuningMode::WorstCase
                      : t == "sparse"  ? TuningMode::Sparse
                      : t == "firstorder" ? TuningMode::FirstOrder
                                          : TuningMode::Manual;
        if (manual_values && spec.tuning != TuningMode::Manual)
            throw UsageError("--eta/--gamma contradict --tune " + t);
    } else if (manual_values) {
        spec.tuning = TuningMode::Manual;
    } else {
        spec.tuning = spec.scheme == Scheme::Dense ? TuningMode::WorstCase : TuningMode::Sparse;
    }
    if (raw.r && spec.tuning != TuningMode::Sparse) throw UsageError("--r only applies to --tune sparse");
    if (raw.lstar && spec.tuning != TuningMode::FirstOrder)
        throw UsageError("--lstar only applies to --tune firstorder");
    if (spec.tuning == TuningMode::Manual) {
        if (!raw.eta) throw UsageError("manual tuning needs --eta");
        if (!(*raw.eta > 0.0)) throw UsageError("--eta must be positive");
        if (raw.gamma && !(*raw.gamma >= 0.0 && *raw.gamma <= 1.0)) throw UsageError("--gamma must lie in [0, 1]");
    }
    if (spec.tuning == TuningMode::FirstOrder) {
        if (!raw.lstar) throw UsageError("--tune firstorder needs --lstar");
        if (!(*raw.lstar > 0.0)) throw UsageError("--lstar must be positive");
    }
    if (raw.r && !(*raw.r > 0.0)) throw UsageError("--r must be positive");
    spec.r_bound = raw.r;
    spec.lstar_bound = raw.lstar;
    spec.eta = raw.eta;
    spec.gamma = raw.gamma;

    // Environment flags.
    if (spec.env.kind == EnvKind::SpikedGaussian && !spec.allow_unbounded)
        throw UsageError(
            "--env spiked has Gaussian losses without the spectral-norm bound ||L_t|| <= 1; pass --allow-unbounded");
    if (raw.epsilon) {
        if (spec.env.kind != EnvKind::SpikedGaussian) throw UsageError("--epsilon only applies to --env spiked");
        if (!(*raw.epsilon >= 0.0 && *raw.epsilon <= 1.0)) throw UsageError("--epsilon must lie in [0, 1]");
        spec.env.epsilon = raw.epsilon;
    }
    if (raw.rank) {
        if (spec.env.kind != EnvKind::PsdStream) throw UsageError("--rank only applies to --env psd");
        if (*raw.rank == 0) throw UsageError("--rank must be positive");
        spec.env.rank = *raw.rank;
    }
    if (raw.input) {
        if (spec.env.kind != EnvKind::RankOneStream) throw UsageError("--input only applies to --env rank1");
        spec.env.input = *raw.input;
    }
    if (raw.matrix) {
        if (spec.env.kind != EnvKind::StaticMatrix) throw UsageError("--matrix only applies to --env static");
        spec.env.matrix = *raw.matrix;
    }

    // Dimensions and sweeps.
    for (const auto& cell : raw.sweep) spec.sweep.push_back(parse_sweep_cell(cell));
    if (spec.preset && !spec.sweep.empty()) throw UsageError("--preset and --sweep are mutually exclusive");
    if (spec.preset == "regret-sweep") {
        if (!raw.dim) throw UsageError("--preset regret-sweep needs --d");
        if (raw.horizon) throw UsageError("--preset regret-sweep chooses T itself; drop --T");
        for (int k = 8; k <= 16; ++k) spec.sweep.push_back({*raw.dim, std::size_t{1} << k});
    } else if (spec.preset == "timing") {
        if (raw.dim) throw UsageError("--preset timing chooses d itself; drop --d");
        const std::size_t T = raw.horizon.value_or(1000);
        for (std::size_t d : {64, 128, 256, 512, 1024}) spec.sweep.push_back({d, T});
        spec.timing = true;
        spec.track_regret = false;
    } else if (spec.sweep.empty()) {
        if (!raw.dim) throw UsageError("missing required --d");
        if (!raw.horizon) throw UsageError("missing required --T");
    } else if (raw.dim || raw.horizon) {
        throw UsageError("--sweep sets d and T; drop --d/--T");
    }
    if (raw.dim) {
        if (*raw.dim < 2) throw UsageError("--d must be at least 2");
        spec.dim = *raw.dim;
    }
    if (raw.horizon) spec.horizon = *raw.horizon;
    for (const auto& cell : spec.sweep)
        if (cell.dim < 2) throw UsageError("sweep dimensions must be at least 2");
    if (raw.input && !spec.sweep.empty()) {
        for (const auto& cell : spec.sweep)
            if (cell.dim != spec.sweep.front().dim) throw UsageError("--input fixes d; sweep cells must share it");
    }
    return spec;
}

void append_number(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

std::string format_optional(const std::optional<double>& v) {
    if (!v) return "na";
    std::string s;
    append_number(s, *v);
    return s;
}

void print_error(std::string_view kind, std::string_view message) {
    std::string escaped;
    for (char c : message) {
        if (c == '"' || c == '\\') escaped += '\\';
        escaped += c == '\n' ? ' ' : c;
    }
    std::cerr << "error kind=" << kind << " message=\"" << escaped << "\"\n";
}

}  // namespace

ExperimentSpec parse_args(int argc, const char* const* argv) {
    CLI::App app{"Bandit PCA with log-determinant online mirror descent", "bandit_pca_cli"};
    RawArgs raw;
    configure(app, raw);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    return validate(raw);
}

ExperimentSpec parse_args(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("bandit_pca_cli");
    for (const auto& a : args) argv.push_back(a.c_str());
    return parse_args(static_cast<int>(argv.size()), argv.data());
}

Tuning resolve_tuning(const ExperimentSpec& spec, std::size_t dim, std::size_t horizon) {
    switch (spec.tuning) {
        case TuningMode::WorstCase: return tune_eta_worstcase(dim, horizon);
        case TuningMode::FirstOrder: return tune_eta_firstorder(dim, horizon, *spec.lstar_bound);
        case TuningMode::Manual: return {*spec.eta, spec.gamma.value_or(0.0)};
        case TuningMode::Sparse: {
            double r = static_cast<double>(dim);
            if (spec.r_bound)
                r = *spec.r_bound;
            else if (spec.env.kind == EnvKind::RankOneStream)
                r = 1.0;
            else if (spec.env.kind == EnvKind::PsdStream)
                r = static_cast<double>(spec.env.rank);
            return tune_eta_sparse(dim, horizon, r);
        }
    }
    throw std::logic_error("unknown tuning mode");
}

RunResult run_experiment(const ExperimentSpec& spec, std::size_t dim, std::size_t horizon) {
    EnvConfig env = spec.env;
    env.dim = dim;
    env.horizon = std::max<std::size_t>(horizon, 1);
    env.seed = spec.seed;
    auto oracle = make_oracle(env);

    // Tuning formulas need T ≥ 2; degenerate horizons play nothing anyway.
    const Tuning tuning = resolve_tuning(spec, dim, std::max<std::size_t>(horizon, 2));
    RunOptions options;
    options.scheme = spec.scheme;
    options.learner.eta = tuning.eta;
    options.learner.gamma = tuning.gamma;
    options.learner.dim = dim;
    options.learner.seed = spec.seed;
    options.learner.reorthogonalize_every = spec.reorthogonalize_every;
    options.allow_unbounded = spec.allow_unbounded;
    options.probe_variance = spec.probe_variance;
    options.timing = spec.timing;
    options.track_regret = spec.track_regret;
    return run_game(options, *oracle, horizon);
}

std::vector<SweepEntry> sweep_cells(const ExperimentSpec& spec) {
    if (!spec.sweep.empty()) return spec.sweep;
    return {{spec.dim, spec.horizon}};
}

std::filesystem::path sweep_output_path(const std::filesystem::path& out, SweepEntry cell) {
    std::filesystem::path p = out;
    const std::string stem = out.stem().string();
    const std::string ext = out.extension().string();
    p.replace_filename(stem + "_d" + std::to_string(cell.dim) + "_T" + std::to_string(cell.horizon) + ext);
    return p;
}

void write_csv(const RunResult& result, std::ostream& os) {
    const bool probe = result.options.probe_variance;
    os << "t,loss,cum_loss,branch,eta,gamma,update_ns" << (probe ? ",mh_term,logdet_term" : "") << '\n';
    std::string line;
    double cumulative = 0.0;
    for (const auto& rec : result.records) {
        cumulative += rec.loss;
        line.clear();
        line += std::to_string(rec.t);
        line += ',';
        append_number(line, rec.loss);
        line += ',';
        append_number(line, cumulative);
        line += ',';
        line += rec.branch;
        line += ',';
        append_number(line, rec.eta);
        line += ',';
        append_number(line, rec.gamma);
        line += ',';
        line += std::to_string(rec.update_ns);
        if (probe) {
            line += ',';
            line += format_optional(rec.mh_term);
            line += ',';
            line += format_optional(rec.logdet_term);
        }
        line += '\n';
        os << line;
    }
    os << "# regret_realized=" << format_optional(result.regret.realized) << '\n';
    os << "# regret_pseudo=" << format_optional(result.regret.pseudo) << '\n';
    os << "# comparator=" << format_optional(result.comparator()) << '\n';
    os << "# total_runtime_ns=" << result.total_runtime_ns << '\n';
}

void emit_csv(const RunResult& result, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing: " + std::strerror(errno));
    write_csv(result, os);
    os.flush();
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

int run_cli(int argc, const char* const* argv) {
    ExperimentSpec spec;
    try {
        spec = parse_args(argc, argv);
    } catch (const HelpRequested& help) {
        std::cout << help.what();
        return 0;
    } catch (const std::exception& e) {
        print_error("usage", e.what());
        return 2;
    }

    const auto cells = sweep_cells(spec);
    const bool single = spec.sweep.empty();
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::optional<std::string> first_error;

    auto worker = [&] {
        for (std::size_t k = next++; k < cells.size(); k = next++) {
            try {
                const RunResult result = run_experiment(spec, cells[k].dim, cells[k].horizon);
                emit_csv(result, single ? spec.out : sweep_output_path(spec.out, cells[k]));
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (!first_error) {
                    std::ostringstream msg;
                    msg << "d=" << cells[k].dim << " T=" << cells[k].horizon << ": " << e.what();
                    first_error = msg.str();
                }
            }
        }
    };
    const std::size_t workers = std::min(spec.jobs, cells.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    if (first_error) {
        print_error("run", *first_error);
        return 1;
    }
    return 0;
}

}  // namespace bandit_pca
