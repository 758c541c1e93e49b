#pragma once

// Dense symmetric linear algebra used by the learner and its test oracles.
//
// Matrices are small-to-moderate (d up to a few thousand) and stored densely in
// row-major order. Eigenvectors are stored one per row of EigenSystem::vectors so
// that the O(d) rank-two updates touch contiguous memory.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bandit_pca {

using Vector = std::vector<double>;

/// Raised when an iterative numerical routine fails to converge or meets a
/// singular/indefinite input it cannot handle.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::span<const double> data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm(std::span<const double> a) noexcept;
double frobenius_norm(const Matrix& m) noexcept;
double frobenius_distance(const Matrix& a, const Matrix& b);

/// Square symmetric matrix. Entries are mirrored on every write so that
/// (i, j) and (j, i) are bitwise equal.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim) : m_(dim, dim) {}

    /// Copies a square matrix, rejecting asymmetry above `tol` (absolute, entrywise)
    /// and non-finite entries. The stored matrix is the symmetric part.
    static SymMatrix from_matrix(const Matrix& m, double tol = 0.0);
    static SymMatrix identity(std::size_t dim, double scale = 1.0);
    static SymMatrix diagonal(std::span<const double> diag);

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }

    void set(std::size_t i, std::size_t j, double value) noexcept {
        m_(i, j) = value;
        m_(j, i) = value;
    }
    void add(std::size_t i, std::size_t j, double value) noexcept {
        m_(i, j) += value;
        if (i != j) m_(j, i) += value;
    }
    /// this += scale * x xᵀ
    void add_outer(double scale, std::span<const double> x);

    double quadratic_form(std::span<const double> w) const noexcept;
    Vector multiply(std::span<const double> x) const;
    double trace() const noexcept;
    bool is_finite() const noexcept;

    SymMatrix& operator+=(const SymMatrix& other);
    SymMatrix& operator-=(const SymMatrix& other);
    SymMatrix& operator*=(double scale) noexcept;

    const Matrix& matrix() const noexcept { return m_; }

private:
    Matrix m_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double scale, SymMatrix a);

/// Eigenpairs of a symmetric matrix: values[k] belongs to the unit vector stored in
/// row k of `vectors`. Decompositions produced by full_eigendecompose are sorted
/// non-increasing; incrementally maintained systems keep a fixed slot order and may
/// not be.
struct EigenSystem {
    Vector values;
    Matrix vectors;

    std::size_t dim() const noexcept { return values.size(); }
    std::span<const double> vector(std::size_t k) const noexcept { return vectors.row(k); }
    std::span<double> vector(std::size_t k) noexcept { return vectors.row(k); }

    /// Σ_k values[k] u_k u_kᵀ
    SymMatrix reconstruct() const;
};

inline constexpr double kJacobiTolerance = 1e-12;
inline constexpr int kJacobiMaxSweeps = 100;

/// Cyclic Jacobi eigendecomposition. Iterates until the off-diagonal Frobenius norm
/// drops below `tol` times the Frobenius norm of `m`; throws NumericalError with the
/// residual if that takes more than kJacobiMaxSweeps sweeps. Output is sorted
/// non-increasing (stable on ties) and each eigenvector has its first nonzero
/// component positive.
EigenSystem full_eigendecompose(const SymMatrix& m, double tol = kJacobiTolerance);

/// Modified Gram-Schmidt over the eigenvectors in slot order; eigenvalues untouched.
/// Requires the input to be within 1e-3 of orthonormal.
EigenSystem reorthogonalize(const EigenSystem& es);
void reorthogonalize_in_place(EigenSystem& es);

/// max_{i,j} |<u_i, u_j> - δ_ij|
double orthogonality_error(const EigenSystem& es);

/// Same measure restricted to the pair (i, j); O(d).
double pair_orthogonality_error(const EigenSystem& es, std::size_t i, std::size_t j);

}  // namespace bandit_pca
