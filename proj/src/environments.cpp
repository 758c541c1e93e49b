#include "bandit_pca/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bandit_pca/rng.hpp"

namespace bandit_pca {

namespace {

Vector unit_gaussian(CounterRng& rng, std::size_t dim) {
    Vector x(dim);
    double n = 0.0;
    while (!(n > 0.0)) {
        for (double& v : x) v = rng.normal();
        n = norm(x);
    }
    for (double& v : x) v /= n;
    return x;
}

/// Σ_i weights_i u_iᵀ M u_i
double weighted_quadratic(const SymMatrix& m, std::span<const double> weights, const Matrix& basis) {
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] == 0.0) continue;
        s += weights[i] * m.quadratic_form(basis.row(i));
    }
    return s;
}

std::vector<Vector> read_numeric_rows(const std::filesystem::path& path, std::optional<std::size_t> width) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<Vector> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        Vector row;
        std::string token;
        while (fields >> token) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(token, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != token.size() || !std::isfinite(v)) {
                std::ostringstream msg;
                msg << path.string() << ":" << line_no << ": malformed number '" << token << "'";
                throw std::runtime_error(msg.str());
            }
            row.push_back(v);
        }
        if (width && row.size() != *width) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": expected " << *width << " columns, found " << row.size();
            throw std::runtime_error(msg.str());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// LossOracle

std::optional<double> LossOracle::mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                            MatrixView view) const {
    const auto m = view == MatrixView::Realized ? reveal_matrix(t) : expected_matrix(t);
    if (!m) return std::nullopt;
    return weighted_quadratic(*m, weights, basis);
}

std::optional<SymMatrix> LossOracle::accounting_matrix(std::size_t t) const {
    if (auto m = expected_matrix(t)) return m;
    return reveal_matrix(t);
}

double spectral_norm(const SymMatrix& m) {
    if (m.dim() == 0) return 0.0;
    const EigenSystem es = full_eigendecompose(m);
    return std::max(std::abs(es.values.front()), std::abs(es.values.back()));
}

void require_bounded_loss(const SymMatrix& m, std::string_view who) {
    if (!m.is_finite()) throw std::invalid_argument(std::string(who) + ": loss matrix has non-finite entries");
    const double s = spectral_norm(m);
    if (s > 1.0 + 1e-9) {
        std::ostringstream msg;
        msg << who << ": loss matrix spectral norm " << s << " exceeds 1";
        throw std::invalid_argument(msg.str());
    }
}

// ---------------------------------------------------------------------------
// StaticMatrixOracle

StaticMatrixOracle::StaticMatrixOracle(SymMatrix loss, bool require_bounded) : loss_(std::move(loss)) {
    if (!loss_.is_finite()) throw std::invalid_argument("static: loss matrix has non-finite entries");
    bounded_ = spectral_norm(loss_) <= 1.0 + 1e-9;
    if (require_bounded && !bounded_) require_bounded_loss(loss_, "static");
}

double StaticMatrixOracle::query(std::span<const double> w, std::size_t) const { return loss_.quadratic_form(w); }

// ---------------------------------------------------------------------------
// RankOneStream

RankOneStream::RankOneStream(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) throw std::invalid_argument("rank1: dimension must be positive");
}

RankOneStream::RankOneStream(std::vector<Vector> rows) : dim_(rows.empty() ? 0 : rows.front().size()) {
    if (rows.empty()) throw std::invalid_argument("rank1: no input rows");
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto& row = rows[k];
        if (row.size() != dim_) {
            std::ostringstream msg;
            msg << "rank1: row " << k + 1 << " has " << row.size() << " entries, expected " << dim_;
            throw std::invalid_argument(msg.str());
        }
        const double n = norm(row);
        if (!(n > 0.0) || !std::isfinite(n)) {
            std::ostringstream msg;
            msg << "rank1: row " << k + 1 << " is a zero or non-finite vector";
            throw std::invalid_argument(msg.str());
        }
        for (double& v : row) v /= n;
    }
    rows_ = std::move(rows);
}

std::optional<std::size_t> RankOneStream::horizon_limit() const noexcept {
    if (rows_.empty()) return std::nullopt;
    return rows_.size();
}

Vector RankOneStream::direction(std::size_t t) const {
    if (!rows_.empty()) {
        if (t < 1 || t > rows_.size()) {
            std::ostringstream msg;
            msg << "rank1: trial " << t << " beyond the " << rows_.size() << " loaded rows";
            throw std::out_of_range(msg.str());
        }
        return rows_[t - 1];
    }
    CounterRng rng(seed_, StreamId::Environment, t);
    return unit_gaussian(rng, dim_);
}

double RankOneStream::query(std::span<const double> w, std::size_t t) const {
    const Vector x = direction(t);
    const double p = dot(w, x);
    return -p * p;
}

std::optional<SymMatrix> RankOneStream::reveal_matrix(std::size_t t) const {
    SymMatrix m(dim_);
    m.add_outer(-1.0, direction(t));
    return m;
}

std::optional<double> RankOneStream::mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                               MatrixView) const {
    const Vector x = direction(t);
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double p = dot(basis.row(i), x);
        s -= weights[i] * p * p;
    }
    return s;
}

std::vector<Vector> load_rank_one_file(const std::filesystem::path& path, std::size_t dim) {
    auto rows = read_numeric_rows(path, dim);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!(norm(rows[k]) > 0.0)) {
            std::ostringstream msg;
            msg << path.string() << ": data row " << k + 1 << " is the zero vector";
            throw std::runtime_error(msg.str());
        }
        const double n = norm(rows[k]);
        for (double& x : rows[k]) x /= n;
    }
    if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");
    return rows;
}

// ---------------------------------------------------------------------------
// PsdStream

PsdStream::PsdStream(std::size_t dim, std::size_t rank, std::uint64_t seed, std::optional<Vector> spectrum)
    : dim_(dim), rank_(rank), seed_(seed), spectrum_(std::move(spectrum)) {
    if (rank < 1 || rank > dim) throw std::invalid_argument("psd: rank must lie in [1, d]");
    if (spectrum_) {
        if (spectrum_->size() != rank) throw std::invalid_argument("psd: spectrum length must equal the rank");
        for (double& c : *spectrum_) c = std::clamp(c, 0.0, 1.0);
    }
}

PsdStream::Factor PsdStream::factor(std::size_t t) const {
    CounterRng rng(seed_, StreamId::Environment, t);
    Factor f{Vector(rank_), Matrix(rank_, dim_)};
    for (std::size_t k = 0; k < rank_; ++k) {
        auto q = f.directions.row(k);
        for (;;) {
            for (double& v : q) v = rng.normal();
            for (std::size_t j = 0; j < k; ++j) {
                const auto qj = f.directions.row(j);
                const double p = dot(qj, q);
                for (std::size_t r = 0; r < dim_; ++r) q[r] -= p * qj[r];
            }
            const double n = norm(q);
            if (n > 1e-8) {
                for (double& v : q) v /= n;
                break;
            }
        }
    }
    for (std::size_t k = 0; k < rank_; ++k) f.scales[k] = spectrum_ ? (*spectrum_)[k] : rng.uniform();
    return f;
}

double PsdStream::query(std::span<const double> w, std::size_t t) const {
    const Factor f = factor(t);
    double s = 0.0;
    for (std::size_t k = 0; k < rank_; ++k) {
        const double p = dot(f.directions.row(k), w);
        s += f.scales[k] * p * p;
    }
    return s;
}

std::optional<SymMatrix> PsdStream::reveal_matrix(std::size_t t) const {
    const Factor f = factor(t);
    SymMatrix m(dim_);
    for (std::size_t k = 0; k < rank_; ++k) m.add_outer(f.scales[k], f.directions.row(k));
    return m;
}

std::optional<double> PsdStream::mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                           MatrixView) const {
    const Factor f = factor(t);
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] == 0.0) continue;
        for (std::size_t k = 0; k < rank_; ++k) {
            const double p = dot(basis.row(i), f.directions.row(k));
            s += weights[i] * f.scales[k] * p * p;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// SpikedGaussian

SpikedGaussian::SpikedGaussian(std::size_t dim, double epsilon, std::uint64_t seed)
    : epsilon_(epsilon), seed_(seed) {
    if (dim < 1) throw std::invalid_argument("spiked: dimension must be positive");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("spiked: epsilon must lie in [0, 1]");
    CounterRng rng(seed_, StreamId::Environment, 0);
    spike_ = unit_gaussian(rng, dim);
}

double SpikedGaussian::default_epsilon(std::size_t dim, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("spiked: horizon must be positive");
    return static_cast<double>(dim) / (4.0 * std::sqrt(static_cast<double>(horizon)));
}

double SpikedGaussian::noise(std::size_t t) const {
    CounterRng rng(seed_, StreamId::Environment, t);
    return rng.normal();
}

double SpikedGaussian::query(std::span<const double> w, std::size_t t) const {
    const double p = dot(w, spike_);
    return noise(t) * dot(w, w) - epsilon_ * p * p;
}

std::optional<SymMatrix> SpikedGaussian::reveal_matrix(std::size_t t) const {
    SymMatrix m = SymMatrix::identity(dim(), noise(t));
    m.add_outer(-epsilon_, spike_);
    return m;
}

std::optional<SymMatrix> SpikedGaussian::expected_matrix(std::size_t) const {
    SymMatrix m(dim());
    m.add_outer(-epsilon_, spike_);
    return m;
}

std::optional<double> SpikedGaussian::mean_loss(std::span<const double> weights, const Matrix& basis, std::size_t t,
                                                MatrixView view) const {
    double total_weight = 0.0;
    double spike_part = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double p = dot(basis.row(i), spike_);
        total_weight += weights[i];
        spike_part += weights[i] * p * p;
    }
    const double noise_part = view == MatrixView::Realized ? noise(t) * total_weight : 0.0;
    return noise_part - epsilon_ * spike_part;
}

// ---------------------------------------------------------------------------
// AdaptiveHook

AdaptiveHook::AdaptiveHook(std::size_t dim, Callback callback) : dim_(dim), callback_(std::move(callback)) {
    if (!callback_) throw std::invalid_argument("adaptive: empty callback");
}

void AdaptiveHook::prepare(std::size_t t, std::span<const Interaction> history) {
    if (t != issued_.size() + 1) {
        std::ostringstream msg;
        msg << "adaptive: trial " << t << " prepared out of order (expected " << issued_.size() + 1 << ")";
        throw std::logic_error(msg.str());
    }
    SymMatrix m = callback_(t, history);
    if (m.dim() != dim_) throw std::invalid_argument("adaptive: callback returned a matrix of the wrong dimension");
    require_bounded_loss(m, "adaptive");
    issued_.push_back(std::move(m));
}

double AdaptiveHook::query(std::span<const double> w, std::size_t t) const {
    return issued_.at(t - 1).quadratic_form(w);
}

std::optional<SymMatrix> AdaptiveHook::reveal_matrix(std::size_t t) const {
    if (t < 1 || t > issued_.size()) return std::nullopt;
    return issued_[t - 1];
}

// ---------------------------------------------------------------------------
// Comparator

Comparator best_fixed_comparator(const LossOracle& oracle, std::size_t horizon, MatrixView view) {
    SymMatrix total(oracle.dim());
    for (std::size_t t = 1; t <= horizon; ++t) {
        auto m = view == MatrixView::Realized ? oracle.reveal_matrix(t) : oracle.expected_matrix(t);
        if (!m) {
            std::ostringstream msg;
            msg << "best_fixed_comparator: " << oracle.name() << " exposes no "
                << (view == MatrixView::Realized ? "realized" : "expected") << " matrix for trial " << t;
            throw std::invalid_argument(msg.str());
        }
        total += *m;
    }
    const EigenSystem es = full_eigendecompose(total);
    const std::size_t last = es.dim() - 1;
    const auto v = es.vector(last);
    return {Vector(v.begin(), v.end()), es.values[last]};
}

// ---------------------------------------------------------------------------
// Configuration

std::string_view env_kind_name(EnvKind kind) noexcept {
    switch (kind) {
        case EnvKind::RankOneStream: return "rank1";
        case EnvKind::PsdStream: return "psd";
        case EnvKind::SpikedGaussian: return "spiked";
        case EnvKind::StaticMatrix: return "static";
        case EnvKind::AdaptiveHook: return "adaptive";
    }
    return "unknown";
}

std::optional<EnvKind> parse_env_kind(std::string_view text) noexcept {
    for (EnvKind k : {EnvKind::RankOneStream, EnvKind::PsdStream, EnvKind::SpikedGaussian, EnvKind::StaticMatrix,
                      EnvKind::AdaptiveHook})
        if (env_kind_name(k) == text) return k;
    return std::nullopt;
}

void EnvConfig::validate() const {
    if (dim < 2) throw std::invalid_argument("environment: d must be at least 2");
    if (horizon < 1) throw std::invalid_argument("environment: T must be at least 1");
    if (epsilon && !(*epsilon >= 0.0 && *epsilon <= 1.0))
        throw std::invalid_argument("environment: epsilon must lie in [0, 1]");
    if (kind == EnvKind::PsdStream && (rank < 1 || rank > dim))
        throw std::invalid_argument("environment: rank must lie in [1, d]");
}

SymMatrix load_matrix_file(const std::filesystem::path& path) {
    const auto rows = read_numeric_rows(path, std::nullopt);
    const std::size_t d = rows.size();
    if (d == 0) throw std::runtime_error(path.string() + ": no matrix rows");
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (rows[i].size() != d) {
            std::ostringstream msg;
            msg << path.string() << ": matrix row " << i + 1 << " has " << rows[i].size() << " entries, expected "
                << d;
            throw std::runtime_error(msg.str());
        }
        for (std::size_t j = 0; j < d; ++j) m(i, j) = rows[i][j];
    }
    return SymMatrix::from_matrix(m, 1e-12);
}

SymMatrix random_static_loss(std::size_t dim, std::uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("random_static_loss: d must be at least 2");
    CounterRng rng(seed, StreamId::Environment, 0);
    Matrix q(dim, dim);
    for (std::size_t k = 0; k < dim; ++k) {
        auto row = q.row(k);
        for (;;) {
            for (double& v : row) v = rng.normal();
            for (std::size_t j = 0; j < k; ++j) {
                const auto qj = q.row(j);
                const double p = dot(qj, row);
                for (std::size_t r = 0; r < dim; ++r) row[r] -= p * qj[r];
            }
            const double n = norm(row);
            if (n > 1e-8) {
                for (double& v : row) v /= n;
                break;
            }
        }
    }
    SymMatrix m(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        const double value = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(dim - 1);
        m.add_outer(value, q.row(k));
    }
    return m;
}

std::unique_ptr<LossOracle> make_oracle(const EnvConfig& config) {
    config.validate();
    switch (config.kind) {
        case EnvKind::RankOneStream: {
            if (config.input) return std::make_unique<RankOneStream>(load_rank_one_file(*config.input, config.dim));
            return std::make_unique<RankOneStream>(config.dim, config.seed);
        }
        case EnvKind::PsdStream:
            return std::make_unique<PsdStream>(config.dim, config.rank, config.seed, config.spectrum);
        case EnvKind::SpikedGaussian: {
            const double eps = config.epsilon.value_or(SpikedGaussian::default_epsilon(config.dim, config.horizon));
            return std::make_unique<SpikedGaussian>(config.dim, eps, config.seed);
        }
        case EnvKind::StaticMatrix: {
            SymMatrix loss = config.static_loss ? *config.static_loss
                             : config.matrix   ? load_matrix_file(*config.matrix)
                                               : random_static_loss(config.dim, config.seed);
            if (loss.dim() != config.dim) throw std::invalid_argument("static: matrix dimension differs from d");
            return std::make_unique<StaticMatrixOracle>(std::move(loss));
        }
        case EnvKind::AdaptiveHook:
            throw std::invalid_argument("adaptive environments are built from a callback, not a config");
    }
    throw std::invalid_argument("unknown environment kind");
}

}  // namespace bandit_pca
