#include "doctest.h"

#include "bandit_pca/symlinalg.hpp"
#include "support.hpp"

using namespace bandit_pca;
using namespace bandit_pca::testing;

TEST_CASE("SymMatrix keeps both triangles in sync") {
    SymMatrix m(3);
    m.set(0, 2, 1.5);
    m.add(2, 0, 0.5);
    CHECK(m(0, 2) == 2.0);
    CHECK(m(2, 0) == 2.0);
    m.add(1, 1, 3.0);
    CHECK(m(1, 1) == 3.0);
    CHECK(m.trace() == 3.0);
}

TEST_CASE("SymMatrix::from_matrix rejects asymmetric input") {
    Matrix a(2, 2);
    a(0, 1) = 1.0;
    a(1, 0) = 1.0 + 1e-6;
    CHECK_THROWS_AS(SymMatrix::from_matrix(a), std::invalid_argument);
    CHECK_NOTHROW(SymMatrix::from_matrix(a, 1e-5));
    CHECK_THROWS_AS(SymMatrix::from_matrix(Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("quadratic form and multiply agree") {
    Rng rng(3);
    const SymMatrix m = random_symmetric(5, rng);
    const Vector w = random_unit(5, rng);
    CHECK(m.quadratic_form(w) == doctest::Approx(dot(w, m.multiply(w))).epsilon(1e-14));
}

TEST_CASE("full_eigendecompose: identity") {
    const EigenSystem es = full_eigendecompose(SymMatrix::identity(3));
    for (double v : es.values) CHECK(v == 1.0);
    CHECK(orthogonality_error(es) < 1e-15);
}

TEST_CASE("full_eigendecompose: diagonal gives the coordinate axes") {
    const Vector diag{0.3, 0.7};
    const EigenSystem es = full_eigendecompose(SymMatrix::diagonal(diag));
    CHECK(es.values[0] == 0.7);
    CHECK(es.values[1] == 0.3);
    CHECK(es.vector(0)[1] == 1.0);
    CHECK(es.vector(1)[0] == 1.0);
}

TEST_CASE("full_eigendecompose: 2x2 example with values (1, 1/3)") {
    SymMatrix m(2);
    m.set(0, 0, 0.5 / 0.75);
    m.set(1, 1, 0.5 / 0.75);
    m.set(0, 1, -0.25 / 0.75);
    const EigenSystem es = full_eigendecompose(m);
    CHECK(es.values[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(es.values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    // (1, -1)/√2 is the top eigenvector; the sign convention makes its first entry positive.
    CHECK(es.vector(0)[0] == doctest::Approx(std::sqrt(0.5)));
    CHECK(es.vector(0)[1] == doctest::Approx(-std::sqrt(0.5)));
}

TEST_CASE("full_eigendecompose reconstructs random symmetric matrices") {
    Rng rng(11);
    for (std::size_t d = 1; d <= 8; ++d) {
        for (int rep = 0; rep < 25; ++rep) {
            const SymMatrix m = random_symmetric(d, rng);
            const EigenSystem es = full_eigendecompose(m);
            CHECK(frobenius_distance(es.reconstruct().matrix(), m.matrix()) <= 1e-10);
            CHECK(orthogonality_error(es) <= 1e-12);
            for (std::size_t k = 1; k < d; ++k) CHECK(es.values[k - 1] >= es.values[k]);
            // Sign convention: first non-negligible component positive.
            for (std::size_t k = 0; k < d; ++k) {
                for (double x : es.vector(k)) {
                    if (std::abs(x) > 1e-12) {
                        CHECK(x > 0.0);
                        break;
                    }
                }
            }
        }
    }
}

TEST_CASE("full_eigendecompose matches characteristic-polynomial roots") {
    Rng rng(12);
    for (std::size_t d : {2u, 3u}) {
        for (int rep = 0; rep < 200; ++rep) {
            const SymMatrix m = random_symmetric(d, rng);
            const Vector expected = characteristic_eigenvalues(m);
            const EigenSystem es = full_eigendecompose(m);
            for (std::size_t k = 0; k < d; ++k) CHECK(es.values[k] == doctest::Approx(expected[k]).epsilon(1e-9));
        }
    }
}

TEST_CASE("full_eigendecompose: stable order for ties") {
    // Exact ties keep their original index order, so the basis is the identity.
    const EigenSystem es = full_eigendecompose(SymMatrix::identity(4, 0.25));
    CHECK(max_abs_diff(es.vectors, Matrix::identity(4)) == 0.0);
}

TEST_CASE("full_eigendecompose rejects non-finite input") {
    SymMatrix m(2);
    m.set(0, 1, std::nan(""));
    CHECK_THROWS_AS(full_eigendecompose(m), std::invalid_argument);
}

TEST_CASE("orthogonality_error examples") {
    EigenSystem es{Vector{1.0, 1.0}, Matrix::identity(2)};
    CHECK(orthogonality_error(es) == 0.0);

    es.vectors(1, 0) = 1.0;
    es.vectors(1, 1) = 0.0;
    CHECK(orthogonality_error(es) == 1.0);

    const double a = 0.3;
    es.vectors(0, 0) = std::cos(a);
    es.vectors(0, 1) = std::sin(a);
    es.vectors(1, 0) = -std::sin(a);
    es.vectors(1, 1) = std::cos(a);
    CHECK(orthogonality_error(es) <= 1e-15);
}

TEST_CASE("reorthogonalize") {
    Rng rng(21);
    SUBCASE("fixed point on an orthonormal basis") {
        EigenSystem es{Vector(6, 1.0 / 6.0), random_orthonormal(6, rng)};
        es.vectors = reorthogonalize(es).vectors;  // settle rounding once
        const EigenSystem again = reorthogonalize(es);
        CHECK(max_abs_diff(again.vectors, es.vectors) <= 1e-12);
        CHECK(again.values == es.values);
    }
    SUBCASE("repairs small perturbations") {
        EigenSystem es{Vector{0.5, 0.3, 0.2, 0.0, 0.0}, random_orthonormal(5, rng)};
        for (std::size_t i = 0; i < 5; ++i)
            for (double& x : es.vectors.row(i)) x += 1e-6 * gaussian(rng);
        CHECK(orthogonality_error(es) > 1e-8);
        const EigenSystem fixed = reorthogonalize(es);
        CHECK(orthogonality_error(fixed) <= 1e-12);
        CHECK(fixed.values == es.values);
        CHECK(max_abs_diff(reorthogonalize(fixed).vectors, fixed.vectors) <= 1e-12);
    }
    SUBCASE("d = 1") {
        EigenSystem es{Vector{1.0}, Matrix::identity(1)};
        CHECK(reorthogonalize(es).vectors(0, 0) == 1.0);
    }
    SUBCASE("rejects a basis far from orthonormal") {
        EigenSystem es{Vector{0.5, 0.5}, Matrix::identity(2)};
        es.vectors(1, 0) = 0.1;
        CHECK_THROWS_AS(reorthogonalize(es), std::invalid_argument);
    }
    SUBCASE("names the collapsed vector") {
        EigenSystem es{Vector{0.5, 0.5}, Matrix::identity(2)};
        es.vectors(1, 0) = 1.0;
        es.vectors(1, 1) = 0.0;
        try {
            reorthogonalize_in_place(es);
            FAIL("expected NumericalError");
        } catch (const NumericalError& e) {
            CHECK(std::string(e.what()).find("vector 1") != std::string::npos);
        }
    }
}
