#pragma once

// Game loop and accounting.
//
// Each trial: mix weights → sample w_t → observe ℓ_t → build L̃_t → fast update →
// project. Regret is measured against the best fixed unit vector, whose loss is
// λ_min of the cumulative (realized or expected) loss matrix.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bandit_pca/environments.hpp"
#include "bandit_pca/mirror_descent.hpp"
#include "bandit_pca/samplers.hpp"

namespace bandit_pca {

struct Tuning {
    double eta;
    double gamma;
};

/// η = min{√(ln T/(dT)), 1/(2d)}, γ = 0. Natural log throughout.
Tuning tune_eta_worstcase(std::size_t d, std::size_t horizon);
/// η = min{√(ln T/(d L*)), 1/(4d²)}, γ = 0. Meant for PSD losses with a known bound L* on
/// the best fixed cumulative loss.
Tuning tune_eta_firstorder(std::size_t d, std::size_t horizon, double lstar_bound);
/// η = min{√(ln T/(rT)), 1/(2d)}, γ = dη, where r bounds the average ‖L_t‖_F².
Tuning tune_eta_sparse(std::size_t d, std::size_t horizon, double r_bound);

struct TrialRecord {
    std::size_t t = 0;
    double loss = 0.0;
    /// ⟨E_t[w wᵀ], M_t⟩ with M_t = E[L_t] when the environment has one, else L_t.
    std::optional<double> mean_loss;
    std::string branch;
    double eta = 0.0;
    double gamma = 0.0;
    std::int64_t update_ns = 0;
    std::optional<double> mh_term;
    std::optional<double> logdet_term;
};

struct RunOptions {
    Scheme scheme = Scheme::Sparse;
    LearnerConfig learner;
    bool allow_unbounded = false;
    bool probe_variance = false;
    /// Wall-clock the learner update; off keeps records bitwise reproducible.
    bool timing = false;
    /// Per-trial mean-loss bookkeeping and the final comparator solve.
    bool track_regret = true;
};

struct RegretReport {
    std::optional<double> comparator_realized;
    std::optional<double> comparator_expected;
    std::optional<double> realized;
    std::optional<double> pseudo;
};

struct RunResult {
    std::vector<TrialRecord> records;
    double cumulative_loss = 0.0;
    std::optional<double> cumulative_mean_loss;
    RegretReport regret;
    RunOptions options;
    std::string environment;
    std::size_t horizon = 0;
    std::int64_t total_runtime_ns = 0;
    /// Largest η|b| seen on the diagonal and rank-two fast paths.
    double max_eta_b = 0.0;
    std::size_t reorthogonalizations = 0;
    DensityState final_state;

    /// Pseudo-regret when available, else realized.
    std::optional<double> headline_regret() const { return regret.pseudo ? regret.pseudo : regret.realized; }
    std::optional<double> comparator() const {
        return regret.comparator_expected ? regret.comparator_expected : regret.comparator_realized;
    }
};

/// Plays `horizon` trials. Throws std::invalid_argument for inconsistent dimensions or
/// an unbounded oracle without allow_unbounded, and std::runtime_error naming the
/// trial when any step fails mid-run.
RunResult run_game(const RunOptions& options, LossOracle& oracle, std::size_t horizon);

/// realized = Σ ℓ_t − λ_min(Σ L_t);  pseudo = Σ mean_loss_t − λ_min(Σ M_t).
/// Views the oracle cannot provide are left empty.
RegretReport compute_regret(const RunResult& result, const LossOracle& oracle);

struct VarianceTerms {
    double mh_term;      // tr(W L̃²)
    double logdet_term;  // tr((W^{1/2} L̃ W^{1/2})²)
};

/// Both traces evaluated in the state's eigenbasis, so W is diagonal there.
VarianceTerms probe_variance_terms(const DensityState& state, const LossEstimate& estimate);

}  // namespace bandit_pca
