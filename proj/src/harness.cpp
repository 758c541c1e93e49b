#include "bandit_pca/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bandit_pca/rng.hpp"

namespace bandit_pca {

namespace {

void require_tuning_inputs(std::size_t d, std::size_t horizon) {
    if (d < 2) throw std::invalid_argument("tuning: d must be at least 2");
    if (horizon < 2) throw std::invalid_argument("tuning: T must be at least 2");
}

}  // namespace

Tuning tune_eta_worstcase(std::size_t d, std::size_t horizon) {
    require_tuning_inputs(d, horizon);
    const double dd = static_cast<double>(d);
    const double T = static_cast<double>(horizon);
    return {std::min(std::sqrt(std::log(T) / (dd * T)), 1.0 / (2.0 * dd)), 0.0};
}

Tuning tune_eta_firstorder(std::size_t d, std::size_t horizon, double lstar_bound) {
    require_tuning_inputs(d, horizon);
    if (!(lstar_bound > 0.0)) throw std::invalid_argument("tuning: L* bound must be positive");
    const double dd = static_cast<double>(d);
    const double T = static_cast<double>(horizon);
    return {std::min(std::sqrt(std::log(T) / (dd * lstar_bound)), 1.0 / (4.0 * dd * dd)), 0.0};
}

Tuning tune_eta_sparse(std::size_t d, std::size_t horizon, double r_bound) {
    require_tuning_inputs(d, horizon);
    const double dd = static_cast<double>(d);
    if (!(r_bound > 0.0 && r_bound <= dd)) throw std::invalid_argument("tuning: r must lie in (0, d]");
    const double T = static_cast<double>(horizon);
    const double eta = std::min(std::sqrt(std::log(T) / (r_bound * T)), 1.0 / (2.0 * dd));
    const double gamma = dd * eta;
    if (gamma > 1.0) throw std::invalid_argument("tuning: gamma = d*eta exceeds 1");
    return {eta, gamma};
}

// ---------------------------------------------------------------------------

VarianceTerms probe_variance_terms(const DensityState& state, const LossEstimate& estimate) {
    const auto& mu = state.es.values;
    double mh = 0.0;
    double logdet = 0.0;
    if (estimate.has_dense_part()) {
        // tr(W M²) = Σ_ij μ_i M_ij²,  tr((W^½ M W^½)²) = Σ_ij μ_i μ_j M_ij²
        const SymMatrix m = estimate.in_basis();
        for (std::size_t i = 0; i < m.dim(); ++i)
            for (std::size_t j = 0; j < m.dim(); ++j) {
                const double e2 = m(i, j) * m(i, j);
                mh += mu[i] * e2;
                logdet += mu[i] * mu[j] * e2;
            }
        return {mh, logdet};
    }
    // Collect the (few) nonzero entries of the in-basis matrix.
    struct Entry {
        std::size_t i, j;
        double v;
    };
    std::vector<Entry> entries;
    auto add = [&](std::size_t i, std::size_t j, double v) {
        for (auto& e : entries)
            if (e.i == i && e.j == j) {
                e.v += v;
                return;
            }
        entries.push_back({i, j, v});
    };
    for (const auto& term : estimate.terms) {
        add(term.i, term.j, term.coeff);
        if (!term.diagonal()) add(term.j, term.i, term.coeff);
    }
    for (const auto& e : entries) {
        const double e2 = e.v * e.v;
        mh += mu[e.i] * e2;
        logdet += mu[e.i] * mu[e.j] * e2;
    }
    return {mh, logdet};
}

// ---------------------------------------------------------------------------

RegretReport compute_regret(const RunResult& result, const LossOracle& oracle) {
    RegretReport report;
    const std::size_t T = result.horizon;
    if (T == 0) {
        report.comparator_realized = 0.0;
        report.realized = 0.0;
        report.comparator_expected = 0.0;
        report.pseudo = 0.0;
        return report;
    }
    if (oracle.reveal_matrix(1)) {
        report.comparator_realized = best_fixed_comparator(oracle, T, MatrixView::Realized).value;
        report.realized = result.cumulative_loss - *report.comparator_realized;
    }
    const MatrixView pseudo_view = oracle.expected_matrix(1) ? MatrixView::Expected : MatrixView::Realized;
    if (result.cumulative_mean_loss && (pseudo_view == MatrixView::Expected || report.comparator_realized)) {
        const double comparator = pseudo_view == MatrixView::Expected
                                      ? best_fixed_comparator(oracle, T, MatrixView::Expected).value
                                      : *report.comparator_realized;
        report.comparator_expected = comparator;
        report.pseudo = *result.cumulative_mean_loss - comparator;
    }
    return report;
}

RunResult run_game(const RunOptions& options, LossOracle& oracle, std::size_t horizon) {
    options.learner.validate();
    const std::size_t d = options.learner.dim;
    if (oracle.dim() != d) {
        std::ostringstream msg;
        msg << "run_game: learner dimension " << d << " differs from environment dimension " << oracle.dim();
        throw std::invalid_argument(msg.str());
    }
    if (!oracle.bounded() && !options.allow_unbounded)
        throw std::invalid_argument(
            "run_game: environment losses are not bounded in spectral norm by 1; opt in with allow_unbounded");
    if (auto limit = oracle.horizon_limit(); limit && horizon > *limit) {
        std::ostringstream msg;
        msg << "run_game: horizon " << horizon << " exceeds the environment's " << *limit << " trials";
        throw std::invalid_argument(msg.str());
    }

    using Clock = std::chrono::steady_clock;
    const auto run_start = Clock::now();

    RunResult result;
    result.options = options;
    result.environment = std::string(oracle.name());
    result.horizon = horizon;
    result.records.reserve(horizon);

    Learner learner(options.learner);
    std::vector<Interaction> history;
    const bool keep_history = oracle.needs_history();
    const MatrixView accounting_view = MatrixView::Expected;
    const bool accounting = options.track_regret;
    double mean_total = 0.0;
    bool mean_available = accounting;

    for (std::size_t t = 1; t <= horizon; ++t) {
        try {
            oracle.prepare(t, history);

            std::int64_t elapsed = 0;
            auto tick = Clock::now();
            auto lap = [&] {
                if (!options.timing) return;
                const auto now = Clock::now();
                elapsed += std::chrono::duration_cast<std::chrono::nanoseconds>(now - tick).count();
                tick = now;
            };
            auto resume = [&] {
                if (options.timing) tick = Clock::now();
            };

            if (options.timing) tick = Clock::now();
            const MixedWeights weights = learner.weights();
            CounterRng rng(options.learner.seed, StreamId::Learner, t);
            Action action = sample(options.scheme, weights, learner.state().es.vectors, rng);
            lap();

            const double loss = oracle.query(action.w, t);
            TrialRecord rec;
            rec.t = t;
            rec.loss = loss;
            rec.branch = std::string(branch_tag(action.branch));
            rec.eta = options.learner.eta;
            rec.gamma = options.learner.gamma;
            if (accounting && mean_available) {
                auto m = oracle.mean_loss(weights.lambda, learner.state().es.vectors, t, accounting_view);
                if (!m) m = oracle.mean_loss(weights.lambda, learner.state().es.vectors, t, MatrixView::Realized);
                if (m) {
                    rec.mean_loss = *m;
                    mean_total += *m;
                } else {
                    mean_available = false;
                }
            }

            resume();
            const LossEstimate est = estimate(options.scheme, action, loss, weights);
            lap();
            if (options.probe_variance) {
                const VarianceTerms v = probe_variance_terms(learner.state(), est);
                rec.mh_term = v.mh_term;
                rec.logdet_term = v.logdet_term;
            }

            resume();
            const UpdateReport upd = learner.apply(est);
            lap();
            if (!std::isnan(upd.eta_b)) result.max_eta_b = std::max(result.max_eta_b, upd.eta_b);
            rec.update_ns = elapsed;

            result.cumulative_loss += loss;
            if (keep_history) history.push_back({std::move(action.w), loss});
            result.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "trial " << t << ": " << e.what();
            throw std::runtime_error(msg.str());
        }
    }

    result.final_state = learner.state();
    result.reorthogonalizations = learner.reorthogonalizations();
    if (accounting && mean_available) result.cumulative_mean_loss = mean_total;
    if (accounting) result.regret = compute_regret(result, oracle);
    if (options.timing)
        result.total_runtime_ns =
            std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - run_start).count();
    return result;
}

}  // namespace bandit_pca
