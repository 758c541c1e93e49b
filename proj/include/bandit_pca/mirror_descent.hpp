#pragma once

// Log-determinant online mirror descent over density matrices.
//
// One step maps the density W = Σ μ_i u_i u_iᵀ to the unprojected
//     W̃ = (W⁻¹ + η L̃)⁻¹
// and then projects back onto trace one, which only moves eigenvalues:
//     μ_i ← 1 / (1/ν_i + θ),  θ chosen so that Σ μ_i = 1.
//
// The fast updates below exploit the structure of each estimator branch and mutate
// the state in place; slow_reference_update materializes everything and is kept as
// an independent oracle for them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "bandit_pca/samplers.hpp"
#include "bandit_pca/symlinalg.hpp"

namespace bandit_pca {

inline constexpr double kEigenvalueFloor = 1e-15;
inline constexpr double kBetaSkip = 1e-14;
inline constexpr double kProjectionTolerance = 1e-12;
inline constexpr int kProjectionMaxIterations = 200;
inline constexpr double kOrthogonalityTrigger = 1e-8;

struct LearnerConfig {
    double eta = 0.1;
    double gamma = 0.0;
    std::size_t dim = 2;
    double floor = kEigenvalueFloor;
    std::size_t reorthogonalize_every = 1000;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless η > 0, γ ∈ [0, 1], d ≥ 2.
    void validate() const;
};

/// Eigensystem of the learner's density matrix. Between an update and the
/// following projection the eigenvalues are the unprojected ν_i and need not sum
/// to one.
struct DensityState {
    EigenSystem es;
    double floor = kEigenvalueFloor;

    static DensityState uniform(std::size_t dim, double floor = kEigenvalueFloor);
    /// Wraps an eigensystem; requires strictly positive eigenvalues.
    static DensityState from_eigensystem(EigenSystem es, double floor = kEigenvalueFloor);
    /// Eigendecomposes a symmetric positive definite matrix.
    static DensityState from_matrix(const SymMatrix& m, double floor = kEigenvalueFloor);

    std::size_t dim() const noexcept { return es.dim(); }
    std::span<const double> eigenvalues() const noexcept { return es.values; }
    double trace() const noexcept;
    SymMatrix matrix() const { return es.reconstruct(); }
};

/// Diagonal estimate term c·u_I u_Iᵀ: μ_I ← μ_I / (1 + η c μ_I). Used by the sparse
/// I = J branch with c = ℓ/λ_I².
void update_sparse_diag(DensityState& state, std::size_t idx, double coeff, double eta);

/// Rank-two term on slots (I, J) with β = η √(μ_I μ_J) · coeff. Replaces μ_I, μ_J by
/// μ_± and rotates u_I, u_J inside their span. |β| < kBetaSkip is a no-op.
void update_sparse_offdiag(DensityState& state, std::size_t i, std::size_t j, double beta);

/// Dense B = 1 branch: μ_I ← μ_I / (1 + 2ηℓ μ_I/λ_I). `weight` is λ_I; when omitted
/// the sampling weights equal the state (γ = 0) and the map is μ_I/(1 + 2ηℓ).
void update_dense_ondiag(DensityState& state, std::size_t idx, double loss, double eta,
                         std::optional<double> weight = std::nullopt);

/// Dense sign branch. With weights λ (empty: λ = μ), inverts
///     diag(1/μ_i − ηℓ/λ_i) + ηℓ ρρᵀ,   ρ_i = s_i/√λ_i
/// by Sherman-Morrison, eigendecomposes the resulting diagonal-plus-rank-one core and
/// rotates the basis by its eigenvectors. O(d³).
void update_dense_offdiag(DensityState& state, std::span<const int> signs, double loss, double eta,
                          std::span<const double> weights = {});

/// General form behind update_dense_offdiag: W̃ = (diag(1/μ + η a) + η σ ρρᵀ)⁻¹ in
/// eigenbasis coordinates.
void update_diag_plus_rank_one(DensityState& state, std::span<const double> diag_coeffs, double outer_scale,
                               std::span<const double> outer, double eta);

struct ProjectionReport {
    double theta = 0.0;
    int iterations = 0;
    /// max_i |1/μ_i − 1/ν_i − θ| / max(1, 1/μ_i), before clamping.
    double kkt_residual = 0.0;
};

/// Root of Σ_i 1/(1/ν_i + θ) = 1 (safeguarded Newton). Requires ν_i > 0.
ProjectionReport solve_trace_multiplier(std::span<const double> nu);

/// Bregman projection onto trace one. Eigenvectors are untouched; eigenvalues are
/// clamped to the floor and renormalized after the multiplier solve.
ProjectionReport project_trace_one(DensityState& state);

/// Dense oracle: materializes (W⁻¹ + η L̃)⁻¹, eigendecomposes it and projects.
DensityState slow_reference_update(const DensityState& state, const LossEstimate& estimate, double eta);

/// D(W‖U) = tr(U⁻¹W) − log det(U⁻¹W) − d. Both arguments must be positive definite.
double stein_divergence(const SymMatrix& w, const SymMatrix& u);
double stein_divergence(const DensityState& w, const DensityState& u);

struct UpdateReport {
    ProjectionReport projection;
    /// η·max|b| over the eigenvalues b of B = W^{1/2} L̃ W^{1/2}; NaN for the dense
    /// sign branch, where it is not tracked.
    double eta_b = 0.0;
    bool reorthogonalized = false;
};

/// Owns a DensityState and applies branch-dispatched updates, projection and basis
/// maintenance (Gram-Schmidt every `reorthogonalize_every` updates, or at once when a
/// touched pair drifts past kOrthogonalityTrigger).
class Learner {
public:
    explicit Learner(LearnerConfig config);
    /// Warm start from a trace-one density.
    Learner(LearnerConfig config, DensityState initial);

    const LearnerConfig& config() const noexcept { return config_; }
    const DensityState& state() const noexcept { return state_; }
    std::size_t reorthogonalizations() const noexcept { return reorthogonalizations_; }

    MixedWeights weights() const { return mix_weights(state_.es.values, config_.gamma); }

    /// Applies the fast update matching the estimate's shape, then projects.
    UpdateReport apply(const LossEstimate& estimate);

private:
    LearnerConfig config_;
    DensityState state_;
    std::size_t updates_ = 0;
    std::size_t reorthogonalizations_ = 0;
};

}  // namespace bandit_pca
