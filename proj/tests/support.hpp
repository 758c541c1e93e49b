#pragma once

// Random inputs and independent oracles shared by the unit and acceptance tests.
// The oracles use only elementary matrix arithmetic, never the solvers under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "bandit_pca/environments.hpp"
#include "bandit_pca/mirror_descent.hpp"
#include "bandit_pca/samplers.hpp"
#include "bandit_pca/symlinalg.hpp"

namespace bandit_pca::testing {

using Rng = std::mt19937_64;

inline double gaussian(Rng& rng) { return std::normal_distribution<double>{}(rng); }
inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>{lo, hi}(rng);
}

inline Vector random_unit(std::size_t d, Rng& rng) {
    Vector v(d);
    double n = 0.0;
    while (n < 1e-6) {
        for (double& x : v) x = gaussian(rng);
        n = norm(v);
    }
    for (double& x : v) x /= n;
    return v;
}

/// Rows form a random orthonormal basis (modified Gram-Schmidt on Gaussian rows).
inline Matrix random_orthonormal(std::size_t d, Rng& rng) {
    Matrix q(d, d);
    for (std::size_t k = 0; k < d; ++k) {
        auto row = q.row(k);
        double n = 0.0;
        while (n < 1e-6) {
            for (double& x : row) x = gaussian(rng);
            for (std::size_t j = 0; j < k; ++j) {
                const double p = dot(q.row(j), row);
                for (std::size_t r = 0; r < d; ++r) row[r] -= p * q(j, r);
            }
            n = norm(row);
        }
        for (double& x : row) x /= n;
    }
    return q;
}

inline SymMatrix random_symmetric(std::size_t d, Rng& rng, double scale = 1.0) {
    SymMatrix m(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) m.set(i, j, scale * gaussian(rng));
    return m;
}

/// Σ values_k q_k q_kᵀ for the rows q_k of `basis`.
inline SymMatrix compose(const Matrix& basis, const Vector& values) {
    SymMatrix m(basis.rows());
    for (std::size_t k = 0; k < values.size(); ++k) m.add_outer(values[k], basis.row(k));
    return m;
}

/// Random spectrum in [-1, 1] with the largest magnitude pinned to 1, so ‖L‖ = 1 exactly.
inline SymMatrix random_bounded_loss(std::size_t d, Rng& rng) {
    Vector values(d);
    for (double& v : values) v = uniform(rng, -1.0, 1.0);
    values[std::uniform_int_distribution<std::size_t>{0, d - 1}(rng)] = uniform(rng) < 0.5 ? -1.0 : 1.0;
    return compose(random_orthonormal(d, rng), values);
}

/// Positive weights summing to one, with a spread of magnitudes (down to ~1e-3).
inline Vector random_simplex(std::size_t d, Rng& rng) {
    Vector w(d);
    double s = 0.0;
    for (double& x : w) {
        x = std::exp(uniform(rng, -3.0 * std::log(10.0), 0.0));
        s += x;
    }
    for (double& x : w) x /= s;
    return w;
}

/// Density state with a random basis and random eigenvalues, sorted non-increasing.
inline DensityState random_density(std::size_t d, Rng& rng) {
    EigenSystem es;
    es.values = random_simplex(d, rng);
    std::sort(es.values.begin(), es.values.end(), std::greater<>());
    es.vectors = random_orthonormal(d, rng);
    return DensityState::from_eigensystem(std::move(es));
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

inline double max_abs_diff_vec(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Closed-form eigenvalues of a symmetric 2×2 or 3×3 matrix, sorted non-increasing.
inline Vector characteristic_eigenvalues(const SymMatrix& m) {
    if (m.dim() == 2) {
        const double a = m(0, 0), b = m(0, 1), c = m(1, 1);
        const double r = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
        return {(a + c + r) / 2.0, (a + c - r) / 2.0};
    }
    if (m.dim() != 3) throw std::invalid_argument("characteristic_eigenvalues: d must be 2 or 3");
    // Trigonometric solution of the depressed cubic.
    const double q = m.trace() / 3.0;
    const double p1 = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2) + m(1, 2) * m(1, 2);
    const double p2 = (m(0, 0) - q) * (m(0, 0) - q) + (m(1, 1) - q) * (m(1, 1) - q) + (m(2, 2) - q) * (m(2, 2) - q) +
                      2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    if (p == 0.0) return {q, q, q};
    double b[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (m(i, j) - (i == j ? q : 0.0)) / p;
    const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                       b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                       b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double pi = std::acos(-1.0);
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
    return {e1, 3.0 * q - e1 - e3, e3};
}

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix gauss_jordan_inverse(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix m = a;
    Matrix inv = Matrix::identity(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(m(r, c)) > std::abs(m(piv, c))) piv = r;
        if (m(piv, c) == 0.0) throw std::domain_error("singular matrix");
        for (std::size_t k = 0; k < n; ++k) {
            std::swap(m(c, k), m(piv, k));
            std::swap(inv(c, k), inv(piv, k));
        }
        const double d = m(c, c);
        for (std::size_t k = 0; k < n; ++k) {
            m(c, k) /= d;
            inv(c, k) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = m(r, c);
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < n; ++k) {
                m(r, k) -= f * m(c, k);
                inv(r, k) -= f * inv(c, k);
            }
        }
    }
    return inv;
}

inline Matrix outer(std::span<const double> a, std::span<const double> b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

inline Matrix scaled(Matrix m, double c) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (double& x : m.row(i)) x *= c;
    return m;
}

inline Matrix add(const Matrix& a, const Matrix& b, double scale = 1.0) {
    Matrix m = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) += scale * b(i, j);
    return m;
}

/// Probability of an action under the scheme's sampling rule, computed from the
/// branch data alone.
inline double outcome_probability(const Action& a, const Vector& lambda) {
    const double d = static_cast<double>(lambda.size());
    if (const auto* on = std::get_if<branch::DenseOn>(&a.branch)) return 0.5 * lambda[on->index];
    if (std::holds_alternative<branch::DenseOff>(a.branch)) return 0.5 * std::pow(2.0, -d);
    if (const auto* sd = std::get_if<branch::SparseDiag>(&a.branch)) return lambda[sd->index] * lambda[sd->index];
    const auto& so = std::get<branch::SparseOff>(a.branch);
    return lambda[so.i] * lambda[so.j] / 2.0;
}

/// The estimators written in ambient coordinates, straight from the matrix
/// formulas: Λ = Σ λ_i u_i u_iᵀ,
///   dense on:   2ℓ Λ^{-1/2} w wᵀ Λ^{-1/2}
///   dense off:  ℓ (Λ^{-1} w wᵀ Λ^{-1} − Λ^{-1})
///   sparse:     (ℓ/λ_I²) u_I u_Iᵀ  or  sℓ/(2λ_Iλ_J)(u_I u_Jᵀ + u_J u_Iᵀ)
inline Matrix direct_estimate(const Action& a, double loss, const Vector& lambda, const Matrix& basis) {
    const std::size_t d = lambda.size();
    auto power = [&](double p) {
        Vector v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = std::pow(lambda[i], p);
        return compose(basis, v).matrix();
    };
    auto mul = [](const Matrix& m, std::span<const double> x) {
        Vector y(m.rows(), 0.0);
        for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
        return y;
    };
    if (std::holds_alternative<branch::DenseOn>(a.branch)) {
        const Vector v = mul(power(-0.5), a.w);
        return scaled(outer(v, v), 2.0 * loss);
    }
    if (std::holds_alternative<branch::DenseOff>(a.branch)) {
        const Matrix inv = power(-1.0);
        const Vector v = mul(inv, a.w);
        return scaled(add(outer(v, v), inv, -1.0), loss);
    }
    if (const auto* sd = std::get_if<branch::SparseDiag>(&a.branch)) {
        const double l = lambda[sd->index];
        return scaled(outer(basis.row(sd->index), basis.row(sd->index)), loss / (l * l));
    }
    const auto& so = std::get<branch::SparseOff>(a.branch);
    const double c = so.sign * loss / (2.0 * lambda[so.i] * lambda[so.j]);
    return scaled(add(outer(basis.row(so.i), basis.row(so.j)), outer(basis.row(so.j), basis.row(so.i))), c);
}

}  // namespace bandit_pca::testing
