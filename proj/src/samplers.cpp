#include "bandit_pca/samplers.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bandit_pca {

std::string_view scheme_name(Scheme scheme) noexcept {
    return scheme == Scheme::Dense ? "dense" : "sparse";
}

MixedWeights mix_weights(std::span<const double> mu, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("mix_weights: gamma outside [0, 1]");
    const double d = static_cast<double>(mu.size());
    MixedWeights out{Vector(mu.size())};
    for (std::size_t i = 0; i < mu.size(); ++i) out.lambda[i] = (1.0 - gamma) * mu[i] + gamma / d;
    return out;
}

std::string_view branch_tag(const Branch& b) noexcept {
    struct Visitor {
        std::string_view operator()(const branch::DenseOn&) const { return "dense_on"; }
        std::string_view operator()(const branch::DenseOff&) const { return "dense_off"; }
        std::string_view operator()(const branch::SparseDiag&) const { return "sparse_diag"; }
        std::string_view operator()(const branch::SparseOff&) const { return "sparse_off"; }
    };
    return std::visit(Visitor{}, b);
}

// ---------------------------------------------------------------------------
// LossEstimate

SymMatrix LossEstimate::in_basis() const {
    SymMatrix m(dim);
    for (const auto& term : terms) m.add(term.i, term.j, term.coeff);
    for (std::size_t i = 0; i < diagonal.size(); ++i) m.add(i, i, diagonal[i]);
    if (!outer.empty()) m.add_outer(outer_scale, outer);
    return m;
}

SymMatrix LossEstimate::materialize(const Matrix& basis) const {
    const std::size_t d = basis.cols();
    if (has_dense_part()) {
        const Matrix coords = in_basis().matrix();
        const Matrix full = transpose(basis) * (coords * basis);
        return SymMatrix::from_matrix(full, 1e-9 * (1.0 + frobenius_norm(full)));
    }
    SymMatrix m(d);
    for (const auto& term : terms) {
        const auto ui = basis.row(term.i);
        const auto uj = basis.row(term.j);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = r; c < d; ++c) {
                const double v = term.diagonal() ? ui[r] * ui[c] : ui[r] * uj[c] + uj[r] * ui[c];
                m.add(r, c, term.coeff * v);
            }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Sampling

std::size_t categorical(std::span<const double> probs, double u) noexcept {
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = i;
        cumulative += probs[i];
        if (u < cumulative) return i;
    }
    // Rounding left Σ probs slightly below 1.
    return last_positive;
}

namespace {

void copy_row(const Matrix& basis, std::size_t k, Vector& w) {
    const auto u = basis.row(k);
    w.assign(u.begin(), u.end());
}

void check_shapes(const MixedWeights& weights, const Matrix& basis) {
    if (weights.dim() != basis.rows() || basis.rows() != basis.cols())
        throw std::invalid_argument("sampler: weights and basis dimensions differ");
}

}  // namespace

Action sample_dense(const MixedWeights& weights, const Matrix& basis, CounterRng& rng) {
    check_shapes(weights, basis);
    const std::size_t d = weights.dim();
    Action action;
    if (rng.uniform() < 0.5) {
        const std::size_t i = categorical(weights.lambda, rng.uniform());
        copy_row(basis, i, action.w);
        action.branch = branch::DenseOn{i};
        return action;
    }
    std::vector<int> signs(d);
    for (auto& s : signs) s = rng.uniform() < 0.5 ? 1 : -1;
    action.w.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double a = signs[i] * std::sqrt(weights.lambda[i]);
        const auto u = basis.row(i);
        for (std::size_t r = 0; r < d; ++r) action.w[r] += a * u[r];
    }
    action.branch = branch::DenseOff{std::move(signs)};
    return action;
}

Action sample_sparse(const MixedWeights& weights, const Matrix& basis, CounterRng& rng) {
    check_shapes(weights, basis);
    const std::size_t i = categorical(weights.lambda, rng.uniform());
    const std::size_t j = categorical(weights.lambda, rng.uniform());
    Action action;
    if (i == j) {
        copy_row(basis, i, action.w);
        action.branch = branch::SparseDiag{i};
        return action;
    }
    const int s = rng.uniform() < 0.5 ? 1 : -1;
    const auto ui = basis.row(i);
    const auto uj = basis.row(j);
    action.w.resize(ui.size());
    for (std::size_t r = 0; r < ui.size(); ++r) action.w[r] = (ui[r] + s * uj[r]) * M_SQRT1_2;
    action.branch = branch::SparseOff{i, j, s};
    return action;
}

Action sample(Scheme scheme, const MixedWeights& weights, const Matrix& basis, CounterRng& rng) {
    return scheme == Scheme::Dense ? sample_dense(weights, basis, rng) : sample_sparse(weights, basis, rng);
}

// ---------------------------------------------------------------------------
// Estimation

namespace {

double positive_weight(const MixedWeights& weights, std::size_t i) {
    const double l = weights.lambda.at(i);
    if (!(l > 0.0)) {
        std::ostringstream msg;
        msg << "estimator: sampled slot " << i << " has non-positive weight " << l;
        throw std::domain_error(msg.str());
    }
    return l;
}

}  // namespace

LossEstimate estimate_dense(const Action& action, double loss, const MixedWeights& weights) {
    LossEstimate est;
    est.dim = weights.dim();
    if (const auto* on = std::get_if<branch::DenseOn>(&action.branch)) {
        const double l = positive_weight(weights, on->index);
        est.terms.push_back({2.0 * loss / l, on->index, on->index});
        return est;
    }
    const auto* off = std::get_if<branch::DenseOff>(&action.branch);
    if (off == nullptr) throw std::invalid_argument("estimate_dense: action was not produced by dense sampling");
    if (off->signs.size() != est.dim) throw std::invalid_argument("estimate_dense: sign vector has wrong length");
    est.diagonal.resize(est.dim);
    est.outer.resize(est.dim);
    est.outer_scale = loss;
    for (std::size_t i = 0; i < est.dim; ++i) {
        const double l = positive_weight(weights, i);
        est.diagonal[i] = -loss / l;
        est.outer[i] = off->signs[i] / std::sqrt(l);
    }
    return est;
}

LossEstimate estimate_sparse(const Action& action, double loss, const MixedWeights& weights) {
    LossEstimate est;
    est.dim = weights.dim();
    if (const auto* diag = std::get_if<branch::SparseDiag>(&action.branch)) {
        const double l = positive_weight(weights, diag->index);
        est.terms.push_back({loss / (l * l), diag->index, diag->index});
        return est;
    }
    const auto* off = std::get_if<branch::SparseOff>(&action.branch);
    if (off == nullptr) throw std::invalid_argument("estimate_sparse: action was not produced by sparse sampling");
    const double li = positive_weight(weights, off->i);
    const double lj = positive_weight(weights, off->j);
    est.terms.push_back({off->sign * loss / (2.0 * li * lj), off->i, off->j});
    return est;
}

LossEstimate estimate(Scheme scheme, const Action& action, double loss, const MixedWeights& weights) {
    return scheme == Scheme::Dense ? estimate_dense(action, loss, weights)
                                   : estimate_sparse(action, loss, weights);
}

// ---------------------------------------------------------------------------
// Enumeration

std::vector<Outcome> enumerate_outcomes(Scheme scheme, const MixedWeights& weights, const Matrix& basis) {
    check_shapes(weights, basis);
    const std::size_t d = weights.dim();
    if (d > kMaxEnumerationDim) {
        std::ostringstream msg;
        msg << "enumerate_outcomes: dimension " << d << " exceeds cap " << kMaxEnumerationDim;
        throw std::invalid_argument(msg.str());
    }
    const auto& lambda = weights.lambda;
    std::vector<Outcome> out;

    if (scheme == Scheme::Sparse) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double p = lambda[i] * lambda[j];
                if (p <= 0.0) continue;
                if (i == j) {
                    Action a;
                    copy_row(basis, i, a.w);
                    a.branch = branch::SparseDiag{i};
                    out.push_back({p, std::move(a)});
                    continue;
                }
                for (int s : {1, -1}) {
                    Action a;
                    a.w.resize(d);
                    for (std::size_t r = 0; r < d; ++r) a.w[r] = (basis(i, r) + s * basis(j, r)) * M_SQRT1_2;
                    a.branch = branch::SparseOff{i, j, s};
                    out.push_back({0.5 * p, std::move(a)});
                }
            }
        }
        return out;
    }

    for (std::size_t i = 0; i < d; ++i) {
        if (lambda[i] <= 0.0) continue;
        Action a;
        copy_row(basis, i, a.w);
        a.branch = branch::DenseOn{i};
        out.push_back({0.5 * lambda[i], std::move(a)});
    }
    const std::size_t patterns = std::size_t{1} << d;
    const double p = 0.5 / static_cast<double>(patterns);
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        std::vector<int> signs(d);
        Action a;
        a.w.assign(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            signs[i] = (mask >> i & 1U) ? -1 : 1;
            const double c = signs[i] * std::sqrt(lambda[i]);
            for (std::size_t r = 0; r < d; ++r) a.w[r] += c * basis(i, r);
        }
        a.branch = branch::DenseOff{std::move(signs)};
        out.push_back({p, std::move(a)});
    }
    return out;
}

}  // namespace bandit_pca
