#include "bandit_pca/symlinalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bandit_pca {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

double frobenius_norm(const Matrix& m) noexcept { return norm(m.data()); }

double frobenius_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("frobenius_distance: shape mismatch");
    double s = 0.0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) s += (da[i] - db[i]) * (da[i] - db[i]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// SymMatrix

SymMatrix SymMatrix::from_matrix(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: matrix is not square");
    const std::size_t d = m.rows();
    SymMatrix out(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            const double a = m(i, j);
            const double b = m(j, i);
            if (!std::isfinite(a) || !std::isfinite(b)) {
                std::ostringstream msg;
                msg << "SymMatrix: non-finite entry at (" << i << ", " << j << ")";
                throw std::invalid_argument(msg.str());
            }
            if (std::abs(a - b) > tol) {
                std::ostringstream msg;
                msg << "SymMatrix: asymmetry " << std::abs(a - b) << " at (" << i << ", " << j
                    << ") exceeds " << tol;
                throw std::invalid_argument(msg.str());
            }
            out.set(i, j, a == b ? a : 0.5 * (a + b));
        }
    }
    return out;
}

SymMatrix SymMatrix::identity(std::size_t dim, double scale) {
    SymMatrix out(dim);
    for (std::size_t i = 0; i < dim; ++i) out.set(i, i, scale);
    return out;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix out(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) out.set(i, i, diag[i]);
    return out;
}

void SymMatrix::add_outer(double scale, std::span<const double> x) {
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d; ++i) {
        const double si = scale * x[i];
        auto r = m_.row(i);
        for (std::size_t j = 0; j < d; ++j) r[j] += si * x[j];
    }
}

double SymMatrix::quadratic_form(std::span<const double> w) const noexcept {
    const std::size_t d = dim();
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += w[i] * dot(m_.row(i), w);
    return s;
}

Vector SymMatrix::multiply(std::span<const double> x) const {
    Vector y(dim());
    for (std::size_t i = 0; i < dim(); ++i) y[i] = dot(m_.row(i), x);
    return y;
}

double SymMatrix::trace() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += m_(i, i);
    return s;
}

bool SymMatrix::is_finite() const noexcept {
    return std::all_of(m_.data().begin(), m_.data().end(), [](double v) { return std::isfinite(v); });
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
    if (other.dim() != dim()) throw std::invalid_argument("SymMatrix +=: dimension mismatch");
    for (std::size_t i = 0; i < dim(); ++i) {
        auto a = m_.row(i);
        auto b = other.m_.row(i);
        for (std::size_t j = 0; j < dim(); ++j) a[j] += b[j];
    }
    return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
    if (other.dim() != dim()) throw std::invalid_argument("SymMatrix -=: dimension mismatch");
    for (std::size_t i = 0; i < dim(); ++i) {
        auto a = m_.row(i);
        auto b = other.m_.row(i);
        for (std::size_t j = 0; j < dim(); ++j) a[j] -= b[j];
    }
    return *this;
}

SymMatrix& SymMatrix::operator*=(double scale) noexcept {
    for (std::size_t i = 0; i < dim(); ++i)
        for (double& v : m_.row(i)) v *= scale;
    return *this;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(double scale, SymMatrix a) { return a *= scale; }

// ---------------------------------------------------------------------------
// EigenSystem

SymMatrix EigenSystem::reconstruct() const {
    SymMatrix out(dim());
    for (std::size_t k = 0; k < dim(); ++k) out.add_outer(values[k], vector(k));
    return out;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

void apply_sign_convention(std::span<double> v) {
    for (double x : v) {
        if (std::abs(x) > 1e-12) {
            if (x < 0.0)
                for (double& y : v) y = -y;
            return;
        }
    }
}

}  // namespace

EigenSystem full_eigendecompose(const SymMatrix& m, double tol) {
    if (!m.is_finite()) throw std::invalid_argument("full_eigendecompose: non-finite input");
    const std::size_t d = m.dim();
    Matrix a = m.matrix();
    // Row p of vt is the p-th column of the accumulated rotation.
    Matrix vt = Matrix::identity(d);
    const double scale = frobenius_norm(a);

    int sweep = 0;
    double off = off_diagonal_norm(a);
    while (off > tol * scale) {
        if (++sweep > kJacobiMaxSweeps) {
            std::ostringstream msg;
            msg << "full_eigendecompose: no convergence after " << kJacobiMaxSweeps
                << " sweeps, off-diagonal residual " << off;
            throw NumericalError(msg.str());
        }
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Negligible relative to both diagonal entries: drop it.
                if (sweep > 4 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
                    std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                auto rp = a.row(p);
                auto rq = a.row(q);
                for (std::size_t r = 0; r < d; ++r) {
                    if (r == p || r == q) continue;
                    const double g = rp[r];
                    const double h = rq[r];
                    rp[r] = c * g - s * h;
                    rq[r] = s * g + c * h;
                    a(r, p) = rp[r];
                    a(r, q) = rq[r];
                }
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;

                auto vp = vt.row(p);
                auto vq = vt.row(q);
                for (std::size_t r = 0; r < d; ++r) {
                    const double g = vp[r];
                    const double h = vq[r];
                    vp[r] = c * g - s * h;
                    vq[r] = s * g + c * h;
                }
            }
        }
        off = off_diagonal_norm(a);
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenSystem es{Vector(d), Matrix(d, d)};
    for (std::size_t k = 0; k < d; ++k) {
        es.values[k] = a(order[k], order[k]);
        auto dst = es.vectors.row(k);
        auto src = vt.row(order[k]);
        std::copy(src.begin(), src.end(), dst.begin());
        apply_sign_convention(dst);
    }
    return es;
}

void reorthogonalize_in_place(EigenSystem& es) {
    const std::size_t d = es.dim();
    for (std::size_t k = 0; k < d; ++k) {
        auto vk = es.vector(k);
        for (std::size_t j = 0; j < k; ++j) {
            auto vj = es.vector(j);
            const double proj = dot(vj, vk);
            for (std::size_t r = 0; r < vk.size(); ++r) vk[r] -= proj * vj[r];
        }
        const double n = norm(vk);
        if (!(n > 1e-8)) {
            std::ostringstream msg;
            msg << "reorthogonalize: vector " << k << " collapsed to norm " << n;
            throw NumericalError(msg.str());
        }
        for (double& x : vk) x /= n;
    }
}

EigenSystem reorthogonalize(const EigenSystem& es) {
    const double err = orthogonality_error(es);
    if (!(err < 1e-3)) {
        std::ostringstream msg;
        msg << "reorthogonalize: basis deviates from orthonormal by " << err;
        throw std::invalid_argument(msg.str());
    }
    EigenSystem out = es;
    reorthogonalize_in_place(out);
    return out;
}

double orthogonality_error(const EigenSystem& es) {
    double worst = 0.0;
    for (std::size_t i = 0; i < es.dim(); ++i) {
        for (std::size_t j = i; j < es.dim(); ++j) {
            const double g = dot(es.vector(i), es.vector(j)) - (i == j ? 1.0 : 0.0);
            worst = std::max(worst, std::abs(g));
        }
    }
    return worst;
}

double pair_orthogonality_error(const EigenSystem& es, std::size_t i, std::size_t j) {
    const auto ui = es.vector(i);
    const auto uj = es.vector(j);
    return std::max({std::abs(dot(ui, ui) - 1.0), std::abs(dot(uj, uj) - 1.0),
                     std::abs(dot(ui, uj))});
}

}  // namespace bandit_pca
