#include "bandit_pca/mirror_descent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bandit_pca {

void LearnerConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("learner: eta must be > 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("learner: gamma must lie in [0, 1]");
    if (dim < 2) throw std::invalid_argument("learner: dimension must be at least 2");
    if (!(floor >= 0.0)) throw std::invalid_argument("learner: eigenvalue floor must be non-negative");
}

// ---------------------------------------------------------------------------
// DensityState

DensityState DensityState::uniform(std::size_t dim, double floor) {
    return {EigenSystem{Vector(dim, 1.0 / static_cast<double>(dim)), Matrix::identity(dim)}, floor};
}

DensityState DensityState::from_eigensystem(EigenSystem es, double floor) {
    for (std::size_t k = 0; k < es.dim(); ++k) {
        if (!(es.values[k] > 0.0)) {
            std::ostringstream msg;
            msg << "DensityState: eigenvalue " << k << " = " << es.values[k] << " is not positive";
            throw std::invalid_argument(msg.str());
        }
    }
    return {std::move(es), floor};
}

DensityState DensityState::from_matrix(const SymMatrix& m, double floor) {
    return from_eigensystem(full_eigendecompose(m), floor);
}

double DensityState::trace() const noexcept {
    return std::accumulate(es.values.begin(), es.values.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Fast updates

void update_sparse_diag(DensityState& state, std::size_t idx, double coeff, double eta) {
    if (idx >= state.dim()) throw std::out_of_range("update_sparse_diag: index out of range");
    double& mu = state.es.values[idx];
    const double denom = 1.0 + eta * coeff * mu;
    if (!(denom > 0.0)) {
        std::ostringstream msg;
        msg << "update_sparse_diag: 1 + eta*c*mu = " << denom << " is not positive (step size too large)";
        throw std::domain_error(msg.str());
    }
    mu /= denom;
}

void update_sparse_offdiag(DensityState& state, std::size_t i, std::size_t j, double beta) {
    const std::size_t d = state.dim();
    if (i >= d || j >= d) throw std::out_of_range("update_sparse_offdiag: index out of range");
    if (i == j) throw std::invalid_argument("update_sparse_offdiag: indices must differ");
    if (std::abs(beta) < kBetaSkip) return;
    const double beta2 = beta * beta;
    if (!(beta2 < 1.0)) {
        std::ostringstream msg;
        msg << "update_sparse_offdiag: beta^2 = " << beta2 << " >= 1 (step size too large)";
        throw std::domain_error(msg.str());
    }

    const double a = state.es.values[i];
    const double c = state.es.values[j];
    const double one_minus = 1.0 - beta2;
    const double off = -beta * std::sqrt(a * c);
    const double disc = std::sqrt((a - c) * (a - c) + 4.0 * a * c * beta2);
    const double mu_plus = (a + c + disc) / (2.0 * one_minus);
    // μ₊μ₋ = ac/(1 − β²) avoids cancellation in the minus root.
    const double mu_minus = a * c / (one_minus * mu_plus);

    // Eigenvector of the 2×2 block for μ₊ in (u_I, u_J) coordinates:
    // (−β√(μ_I μ_J), μ₊(1 − β²) − μ_I), with the second entry computed stably.
    const double second = a >= c ? 2.0 * a * c * beta2 / (disc + (a - c)) : 0.5 * (c - a + disc);
    const double len = std::hypot(off, second);
    if (!(len > 0.0)) return;
    const double cs = off / len;
    const double sn = second / len;

    auto ui = state.es.vector(i);
    auto uj = state.es.vector(j);
    for (std::size_t r = 0; r < d; ++r) {
        const double x = ui[r];
        const double y = uj[r];
        ui[r] = cs * x + sn * y;
        uj[r] = -sn * x + cs * y;
    }
    state.es.values[i] = mu_plus;
    state.es.values[j] = mu_minus;
}

void update_dense_ondiag(DensityState& state, std::size_t idx, double loss, double eta,
                         std::optional<double> weight) {
    if (idx >= state.dim()) throw std::out_of_range("update_dense_ondiag: index out of range");
    const double lambda = weight.value_or(state.es.values[idx]);
    if (!(lambda > 0.0)) throw std::domain_error("update_dense_ondiag: sampling weight must be positive");
    update_sparse_diag(state, idx, 2.0 * loss / lambda, eta);
}

void update_diag_plus_rank_one(DensityState& state, std::span<const double> diag_coeffs, double outer_scale,
                               std::span<const double> outer, double eta) {
    const std::size_t d = state.dim();
    if (diag_coeffs.size() != d || outer.size() != d)
        throw std::invalid_argument("update_diag_plus_rank_one: coefficient vectors have wrong length");

    Vector dinv(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double dk = 1.0 / state.es.values[k] + eta * diag_coeffs[k];
        if (!(dk > 0.0)) {
            std::ostringstream msg;
            msg << "update_diag_plus_rank_one: diagonal core entry " << k << " = " << dk << " is not positive";
            throw std::domain_error(msg.str());
        }
        dinv[k] = 1.0 / dk;
    }
    Vector q(d);
    for (std::size_t k = 0; k < d; ++k) q[k] = dinv[k] * outer[k];
    const double denom = 1.0 + eta * outer_scale * dot(outer, q);
    if (!(denom > 0.0)) {
        std::ostringstream msg;
        msg << "update_diag_plus_rank_one: Sherman-Morrison denominator " << denom << " is not positive";
        throw std::domain_error(msg.str());
    }

    SymMatrix core = SymMatrix::diagonal(dinv);
    core.add_outer(-eta * outer_scale / denom, q);
    EigenSystem rot = full_eigendecompose(core);
    for (std::size_t k = 0; k < d; ++k) {
        if (!(rot.values[k] > 0.0)) throw NumericalError("update_diag_plus_rank_one: core lost positive definiteness");
    }
    state.es.vectors = rot.vectors * state.es.vectors;
    state.es.values = std::move(rot.values);
}

void update_dense_offdiag(DensityState& state, std::span<const int> signs, double loss, double eta,
                          std::span<const double> weights) {
    const std::size_t d = state.dim();
    if (signs.size() != d) throw std::invalid_argument("update_dense_offdiag: sign vector has wrong length");
    if (!weights.empty() && weights.size() != d)
        throw std::invalid_argument("update_dense_offdiag: weight vector has wrong length");
    if (loss == 0.0) return;
    const std::span<const double> lambda = weights.empty() ? std::span<const double>(state.es.values) : weights;
    Vector diag(d);
    Vector rho(d);
    for (std::size_t k = 0; k < d; ++k) {
        if (!(lambda[k] > 0.0)) throw std::domain_error("update_dense_offdiag: sampling weight must be positive");
        diag[k] = -loss / lambda[k];
        rho[k] = signs[k] / std::sqrt(lambda[k]);
    }
    update_diag_plus_rank_one(state, diag, loss, rho, eta);
}

// ---------------------------------------------------------------------------
// Projection

ProjectionReport solve_trace_multiplier(std::span<const double> nu) {
    const std::size_t d = nu.size();
    if (d == 0) throw std::invalid_argument("solve_trace_multiplier: empty spectrum");
    Vector inv(d);
    for (std::size_t k = 0; k < d; ++k) {
        if (!(nu[k] > 0.0) || !std::isfinite(nu[k])) {
            std::ostringstream msg;
            msg << "solve_trace_multiplier: eigenvalue " << k << " = " << nu[k] << " is not positive";
            throw std::domain_error(msg.str());
        }
        inv[k] = 1.0 / nu[k];
    }
    auto trace_at = [&](double theta, double& slope) {
        double g = 0.0;
        slope = 0.0;
        for (double x : inv) {
            const double m = 1.0 / (x + theta);
            g += m;
            slope -= m * m;
        }
        return g;
    };

    // g(θ) = Σ 1/(1/ν_i + θ) is decreasing and convex on θ > −min_i 1/ν_i.
    const double pole = -*std::min_element(inv.begin(), inv.end());
    double lo = pole;
    double hi = std::numeric_limits<double>::infinity();
    double slope = 0.0;
    double theta = 0.0;
    double g = trace_at(theta, slope);

    ProjectionReport report;
    if (g - 1.0 > 0.0) {
        lo = 0.0;
        double probe = 1.0;
        for (int k = 0; k < 2000; ++k, probe *= 2.0) {
            double unused;
            if (trace_at(probe, unused) < 1.0) break;
        }
        hi = probe;
    } else {
        hi = 0.0;
    }

    bool converged = false;
    for (int it = 0; it < kProjectionMaxIterations; ++it) {
        const double f = g - 1.0;
        if (std::abs(f) <= kProjectionTolerance) {
            // one more Newton step is nearly free and lands at rounding level
            const double polished = theta - f / slope;
            if (f != 0.0 && polished > lo && polished < hi) theta = polished;
            converged = true;
            break;
        }
        if (f > 0.0)
            lo = theta;
        else
            hi = theta;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(theta))) {
            converged = true;
            break;
        }
        double next = theta - f / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        theta = next;
        g = trace_at(theta, slope);
        report.iterations = it + 1;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "project_trace_one: root-finder did not converge; bracket [" << lo << ", " << hi << "], trace "
            << g;
        throw NumericalError(msg.str());
    }
    report.theta = theta;
    for (std::size_t k = 0; k < d; ++k) {
        const double recip = inv[k] + theta;
        const double mu = 1.0 / recip;
        const double residual = std::abs(1.0 / mu - inv[k] - theta) / std::max(1.0, 1.0 / mu);
        report.kkt_residual = std::max(report.kkt_residual, residual);
    }
    return report;
}

ProjectionReport project_trace_one(DensityState& state) {
    ProjectionReport report = solve_trace_multiplier(state.es.values);
    auto& values = state.es.values;
    if (report.theta != 0.0) {
        for (double& v : values) v = 1.0 / (1.0 / v + report.theta);
    }
    for (double& v : values) v = std::max(v, state.floor);
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    for (double& v : values) v /= total;
    return report;
}

// ---------------------------------------------------------------------------
// Reference path

DensityState slow_reference_update(const DensityState& state, const LossEstimate& estimate, double eta) {
    const std::size_t d = state.dim();
    SymMatrix inverse(d);
    for (std::size_t k = 0; k < d; ++k) {
        if (!(state.es.values[k] > 0.0)) throw std::domain_error("slow_reference_update: state is singular");
        inverse.add_outer(1.0 / state.es.values[k], state.es.vector(k));
    }
    SymMatrix target = inverse;
    if (eta != 0.0) target += eta * estimate.materialize(state.es.vectors);

    EigenSystem es = full_eigendecompose(target);
    for (std::size_t k = 0; k < d; ++k) {
        if (!(es.values[k] > 0.0)) {
            std::ostringstream msg;
            msg << "slow_reference_update: W^-1 + eta*L is not positive definite (eigenvalue " << es.values[k]
                << ")";
            throw std::domain_error(msg.str());
        }
        es.values[k] = 1.0 / es.values[k];
    }
    DensityState out{std::move(es), state.floor};
    project_trace_one(out);
    return out;
}

double stein_divergence(const SymMatrix& w, const SymMatrix& u) {
    if (w.dim() != u.dim()) throw std::invalid_argument("stein_divergence: dimension mismatch");
    const EigenSystem eu = full_eigendecompose(u);
    const EigenSystem ew = full_eigendecompose(w);
    double log_det_u = 0.0;
    double log_det_w = 0.0;
    double trace = 0.0;
    for (std::size_t k = 0; k < u.dim(); ++k) {
        if (!(eu.values[k] > 0.0) || !(ew.values[k] > 0.0))
            throw std::domain_error("stein_divergence: arguments must be positive definite");
        log_det_u += std::log(eu.values[k]);
        log_det_w += std::log(ew.values[k]);
        trace += w.quadratic_form(eu.vector(k)) / eu.values[k];
    }
    return trace - (log_det_w - log_det_u) - static_cast<double>(u.dim());
}

double stein_divergence(const DensityState& w, const DensityState& u) {
    return stein_divergence(w.matrix(), u.matrix());
}

// ---------------------------------------------------------------------------
// Learner

Learner::Learner(LearnerConfig config) : config_(config) {
    config_.validate();
    state_ = DensityState::uniform(config_.dim, config_.floor);
}

Learner::Learner(LearnerConfig config, DensityState initial) : config_(config), state_(std::move(initial)) {
    config_.validate();
    if (state_.dim() != config_.dim) throw std::invalid_argument("Learner: initial state dimension differs from d");
    if (std::abs(state_.trace() - 1.0) > 1e-9) throw std::invalid_argument("Learner: initial state must have trace one");
}

UpdateReport Learner::apply(const LossEstimate& estimate) {
    if (estimate.dim != state_.dim()) throw std::invalid_argument("Learner::apply: estimate dimension mismatch");
    const double eta = config_.eta;
    UpdateReport report;
    bool check_pair = false;
    std::size_t pi = 0;
    std::size_t pj = 0;

    if (estimate.has_dense_part()) {
        if (!estimate.terms.empty())
            throw std::invalid_argument("Learner::apply: mixed term and dense estimates are not supported");
        report.eta_b = std::numeric_limits<double>::quiet_NaN();
        update_diag_plus_rank_one(state_, estimate.diagonal, estimate.outer_scale, estimate.outer, eta);
    } else if (estimate.terms.size() == 1) {
        const auto& term = estimate.terms.front();
        if (term.diagonal()) {
            report.eta_b = eta * std::abs(term.coeff) * state_.es.values[term.i];
            update_sparse_diag(state_, term.i, term.coeff, eta);
        } else {
            const double beta = eta * std::sqrt(state_.es.values[term.i] * state_.es.values[term.j]) * term.coeff;
            report.eta_b = std::abs(beta);
            update_sparse_offdiag(state_, term.i, term.j, beta);
            check_pair = true;
            pi = term.i;
            pj = term.j;
        }
    } else if (!estimate.terms.empty()) {
        throw std::invalid_argument("Learner::apply: fast path expects a single estimate term");
    }

    report.projection = project_trace_one(state_);
    ++updates_;

    const bool periodic = config_.reorthogonalize_every > 0 && updates_ % config_.reorthogonalize_every == 0;
    const bool drifted = check_pair && pair_orthogonality_error(state_.es, pi, pj) > kOrthogonalityTrigger;
    if (periodic || drifted) {
        reorthogonalize_in_place(state_.es);
        ++reorthogonalizations_;
        report.reorthogonalized = true;
    }
    return report;
}

}  // namespace bandit_pca
