#pragma once

// Action sampling and unbiased loss estimation.
//
// Both schemes draw a unit vector w whose second moment E[wwᵀ] equals the mixed
// density Σ λ_i u_i u_iᵀ, then turn the observed scalar loss ℓ = wᵀLw into a
// matrix estimate L̃ with E[L̃] = L.
//
//   dense:  B ~ Bernoulli(1/2)
//           B = 1: w = u_I, I ~ λ                 L̃ = (2ℓ/λ_I) u_I u_Iᵀ
//           B = 0: w = Σ s_i √λ_i u_i, s ~ ±1     L̃ = ℓ (ρρᵀ − diag(1/λ)), ρ_i = s_i/√λ_i
//   sparse: I, J ~ λ independently
//           I = J: w = u_I                        L̃ = (ℓ/λ_I²) u_I u_Iᵀ
//           I ≠ J: w = (u_I + s u_J)/√2           L̃ = sℓ/(2λ_Iλ_J) (u_I u_Jᵀ + u_J u_Iᵀ)
//
// Estimates are expressed in the eigenbasis that produced the action; denominators
// always use the mixed sampling weights λ.

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "bandit_pca/rng.hpp"
#include "bandit_pca/symlinalg.hpp"

namespace bandit_pca {

enum class Scheme { Dense, Sparse };

std::string_view scheme_name(Scheme scheme) noexcept;

/// Sampling distribution over eigenvector slots.
struct MixedWeights {
    Vector lambda;

    std::size_t dim() const noexcept { return lambda.size(); }
};

/// λ_i = (1 − γ) μ_i + γ/d
MixedWeights mix_weights(std::span<const double> mu, double gamma);

namespace branch {
struct DenseOn {
    std::size_t index;
};
struct DenseOff {
    std::vector<int> signs;
};
struct SparseDiag {
    std::size_t index;
};
struct SparseOff {
    std::size_t i;
    std::size_t j;
    int sign;
};
}  // namespace branch

using Branch = std::variant<branch::DenseOn, branch::DenseOff, branch::SparseDiag, branch::SparseOff>;

std::string_view branch_tag(const Branch& b) noexcept;

struct Action {
    Vector w;
    Branch branch;
};

/// One rank-one (i == j: u_i u_iᵀ) or rank-two (u_i u_jᵀ + u_j u_iᵀ) term.
struct EstimateTerm {
    double coeff;
    std::size_t i;
    std::size_t j;

    bool diagonal() const noexcept { return i == j; }
};

/// Symmetric loss estimate in eigenbasis coordinates:
///   Σ_terms coeff·(term)  +  Σ_i diagonal[i] u_i u_iᵀ  +  outer_scale·(Σ_i outer[i] u_i)(·)ᵀ
/// Sparse branches carry a single term; the dense sign branch uses the
/// diagonal + outer part.
struct LossEstimate {
    std::size_t dim = 0;
    std::vector<EstimateTerm> terms;
    Vector diagonal;
    double outer_scale = 0.0;
    Vector outer;

    bool has_dense_part() const noexcept { return !diagonal.empty() || !outer.empty(); }

    /// Matrix of the estimate in eigenbasis coordinates (O(d²)).
    SymMatrix in_basis() const;
    /// U · in_basis() · Uᵀ, with eigenvectors as rows of `basis` (O(d³) worst case).
    SymMatrix materialize(const Matrix& basis) const;
};

Action sample_dense(const MixedWeights& weights, const Matrix& basis, CounterRng& rng);
LossEstimate estimate_dense(const Action& action, double loss, const MixedWeights& weights);

Action sample_sparse(const MixedWeights& weights, const Matrix& basis, CounterRng& rng);
LossEstimate estimate_sparse(const Action& action, double loss, const MixedWeights& weights);

Action sample(Scheme scheme, const MixedWeights& weights, const Matrix& basis, CounterRng& rng);
LossEstimate estimate(Scheme scheme, const Action& action, double loss, const MixedWeights& weights);

struct Outcome {
    double probability;
    Action action;
};

inline constexpr std::size_t kMaxEnumerationDim = 12;

/// Every action with nonzero probability under the scheme, with its probability.
/// Throws std::invalid_argument above kMaxEnumerationDim.
std::vector<Outcome> enumerate_outcomes(Scheme scheme, const MixedWeights& weights, const Matrix& basis);

/// Inverse-CDF draw over slot order. `u` in [0, 1).
std::size_t categorical(std::span<const double> probs, double u) noexcept;

}  // namespace bandit_pca
