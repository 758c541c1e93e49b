#pragma once

// Loss-matrix environments. Every oracle answers scalar queries ℓ_t = wᵀ L_t w and,
// where it can, exposes L_t (realized) or E[L_t] (expected) for regret accounting.
// Trials are numbered from 1. Randomized environments derive trial t's draws from
// the counter-based stream (seed, Environment, t), so any L_t can be regenerated on
// demand.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bandit_pca/symlinalg.hpp"

namespace bandit_pca {

/// What the learner played and observed in one past trial.
struct Interaction {
    Vector w;
    double loss;
};

enum class MatrixView { Realized, Expected };

class LossOracle {
public:
    virtual ~LossOracle() = default;

    virtual std::string_view name() const noexcept = 0;
    virtual std::size_t dim() const noexcept = 0;
    /// ‖L_t‖_spectral ≤ 1 for every t.
    virtual bool bounded() const noexcept = 0;

    /// Called before the learner draws w_t. Only adaptive environments use it; they see
    /// interactions 1..t-1 and never w_t.
    virtual void prepare(std::size_t /*t*/, std::span<const Interaction> /*history*/) {}
    virtual bool needs_history() const noexcept { return false; }

    virtual double query(std::span<const double> w, std::size_t t) const = 0;

    virtual std::optional<SymMatrix> reveal_matrix(std::size_t /*t*/) const { return std::nullopt; }
    virtual std::optional<SymMatrix> expected_matrix(std::size_t /*t*/) const { return std::nullopt; }

    /// Largest trial index the oracle can serve (file-backed streams).
    virtual std::optional<std::size_t> horizon_limit() const noexcept { return std::nullopt; }

    /// ⟨Σ_i weights_i u_i u_iᵀ, M_t⟩ with M_t the realized or expected loss matrix and
    /// u_i the rows of `basis`; nullopt when that view is unavailable. The default
    /// materializes M_t; streams override with cheaper forms.
    virtual std::optional<double> mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                            MatrixView view) const;

    /// Expected view if available, otherwise realized.
    std::optional<SymMatrix> accounting_matrix(std::size_t t) const;
};

/// Fixed L_t = L. Rejects asymmetric matrices and ‖L‖ > 1 unless `require_bounded` is false.
class StaticMatrixOracle final : public LossOracle {
public:
    explicit StaticMatrixOracle(SymMatrix loss, bool require_bounded = true);

    std::string_view name() const noexcept override { return "static"; }
    std::size_t dim() const noexcept override { return loss_.dim(); }
    bool bounded() const noexcept override { return bounded_; }
    double query(std::span<const double> w, std::size_t t) const override;
    std::optional<SymMatrix> reveal_matrix(std::size_t) const override { return loss_; }
    std::optional<SymMatrix> expected_matrix(std::size_t) const override { return loss_; }

private:
    SymMatrix loss_;
    bool bounded_;
};

/// L_t = −x_t x_tᵀ with unit x_t. Generated mode draws x_t uniformly from the sphere;
/// file mode replays normalized rows.
class RankOneStream final : public LossOracle {
public:
    RankOneStream(std::size_t dim, std::uint64_t seed);
    explicit RankOneStream(std::vector<Vector> rows);

    std::string_view name() const noexcept override { return "rank1"; }
    std::size_t dim() const noexcept override { return dim_; }
    bool bounded() const noexcept override { return true; }
    double query(std::span<const double> w, std::size_t t) const override;
    std::optional<SymMatrix> reveal_matrix(std::size_t t) const override;
    std::optional<SymMatrix> expected_matrix(std::size_t t) const override { return reveal_matrix(t); }
    std::optional<std::size_t> horizon_limit() const noexcept override;
    std::optional<double> mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                    MatrixView view) const override;

    Vector direction(std::size_t t) const;

private:
    std::size_t dim_;
    std::uint64_t seed_ = 0;
    std::vector<Vector> rows_;
};

/// Reads whitespace-separated rows of `dim` decimals ('#' starts a comment line) and
/// normalizes each. Throws std::runtime_error naming the line for malformed rows.
std::vector<Vector> load_rank_one_file(const std::filesystem::path& path, std::size_t dim);

/// PSD losses of rank ≤ r: L_t = Σ_{k<r} c_k q_k q_kᵀ with orthonormal q_k drawn at
/// random and c_k ~ U[0, 1] (or a fixed spectrum clipped to [0, 1]).
class PsdStream final : public LossOracle {
public:
    PsdStream(std::size_t dim, std::size_t rank, std::uint64_t seed, std::optional<Vector> spectrum = std::nullopt);

    std::string_view name() const noexcept override { return "psd"; }
    std::size_t dim() const noexcept override { return dim_; }
    bool bounded() const noexcept override { return true; }
    double query(std::span<const double> w, std::size_t t) const override;
    std::optional<SymMatrix> reveal_matrix(std::size_t t) const override;
    std::optional<SymMatrix> expected_matrix(std::size_t t) const override { return reveal_matrix(t); }
    std::optional<double> mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                    MatrixView view) const override;

    std::size_t rank() const noexcept { return rank_; }

private:
    struct Factor {
        Vector scales;
        Matrix directions;  // rows q_k
    };
    Factor factor(std::size_t t) const;

    std::size_t dim_;
    std::size_t rank_;
    std::uint64_t seed_;
    std::optional<Vector> spectrum_;
};

/// L_t = Z_t I − ε u uᵀ, Z_t ~ N(0, 1), hidden unit spike u drawn once. Unbounded.
class SpikedGaussian final : public LossOracle {
public:
    SpikedGaussian(std::size_t dim, double epsilon, std::uint64_t seed);

    /// ε = d / (4 √T)
    static double default_epsilon(std::size_t dim, std::size_t horizon);

    std::string_view name() const noexcept override { return "spiked"; }
    std::size_t dim() const noexcept override { return spike_.size(); }
    bool bounded() const noexcept override { return false; }
    double query(std::span<const double> w, std::size_t t) const override;
    std::optional<SymMatrix> reveal_matrix(std::size_t t) const override;
    std::optional<SymMatrix> expected_matrix(std::size_t t) const override;
    std::optional<double> mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                    MatrixView view) const override;

    const Vector& spike() const noexcept { return spike_; }
    double epsilon() const noexcept { return epsilon_; }
    double noise(std::size_t t) const;

private:
    double epsilon_;
    std::uint64_t seed_;
    Vector spike_;
};

/// Adaptive adversary: before each trial the callback sees the trial index and all
/// earlier (w, ℓ) pairs and returns L_t. Outputs must be finite with spectral norm ≤ 1.
class AdaptiveHook final : public LossOracle {
public:
    using Callback = std::function<SymMatrix(std::size_t t, std::span<const Interaction> history)>;

    AdaptiveHook(std::size_t dim, Callback callback);

    std::string_view name() const noexcept override { return "adaptive"; }
    std::size_t dim() const noexcept override { return dim_; }
    bool bounded() const noexcept override { return true; }
    void prepare(std::size_t t, std::span<const Interaction> history) override;
    bool needs_history() const noexcept override { return true; }
    double query(std::span<const double> w, std::size_t t) const override;
    std::optional<SymMatrix> reveal_matrix(std::size_t t) const override;
    std::optional<SymMatrix> expected_matrix(std::size_t t) const override { return reveal_matrix(t); }

private:
    std::size_t dim_;
    Callback callback_;
    std::vector<SymMatrix> issued_;
};

/// Largest |eigenvalue|.
double spectral_norm(const SymMatrix& m);

/// Throws std::invalid_argument unless m is finite with ‖m‖_spectral ≤ 1 + 1e-9.
void require_bounded_loss(const SymMatrix& m, std::string_view who);

struct Comparator {
    Vector direction;
    double value;
};

/// Best fixed unit vector in hindsight: the bottom eigenpair of Σ_{t≤T} M_t.
/// Throws std::invalid_argument when the requested view is unavailable.
Comparator best_fixed_comparator(const LossOracle& oracle, std::size_t horizon,
                                 MatrixView view = MatrixView::Realized);

enum class EnvKind { RankOneStream, PsdStream, SpikedGaussian, StaticMatrix, AdaptiveHook };

std::string_view env_kind_name(EnvKind kind) noexcept;
std::optional<EnvKind> parse_env_kind(std::string_view text) noexcept;

struct EnvConfig {
    EnvKind kind = EnvKind::RankOneStream;
    std::size_t dim = 2;
    std::size_t horizon = 1;
    std::uint64_t seed = 0;
    std::optional<double> epsilon;         // spiked; default d/(4√T)
    std::size_t rank = 1;                  // psd
    std::optional<Vector> spectrum;        // psd fixed spectrum
    std::optional<std::filesystem::path> input;   // rank1 file mode
    std::optional<std::filesystem::path> matrix;  // static
    std::optional<SymMatrix> static_loss;         // static, in-memory

    void validate() const;
};

/// Fixed full-rank loss: spectrum evenly spaced over [-1, 1] in a seeded random basis.
/// StaticMatrix falls back to it when neither static_loss nor matrix is given.
SymMatrix random_static_loss(std::size_t dim, std::uint64_t seed);

/// Builds any environment except AdaptiveHook, which needs a callback.
std::unique_ptr<LossOracle> make_oracle(const EnvConfig& config);

/// Reads a d×d whitespace-separated matrix ('#' comments allowed).
SymMatrix load_matrix_file(const std::filesystem::path& path);

}  // namespace bandit_pca
