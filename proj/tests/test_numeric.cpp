#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uio/numeric.hpp"

using namespace uio;

TEST_CASE("numeric_rank recovers constructed ranks")
{
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 50; ++trial) {
        int rows = 2 + static_cast<int>(gen() % 5);
        int cols = 2 + static_cast<int>(gen() % 5);
        int r = static_cast<int>(gen() % (std::min(rows, cols) + 1));
        MatrixXd M = random_gaussian(rows, r, gen) * random_gaussian(r, cols, gen);
        CHECK(numeric_rank(M) == r);
    }
}

TEST_CASE("numeric_rank is invariant under scaling")
{
    std::mt19937_64 gen(11);
    MatrixXd M = random_gaussian(4, 2, gen) * random_gaussian(2, 5, gen);
    CHECK(numeric_rank(MatrixXd(1e8 * M)) == 2);
    CHECK(numeric_rank(MatrixXd(1e-8 * M)) == 2);
    CHECK(numeric_rank(MatrixXd(MatrixXd::Zero(3, 3))) == 0);
}

TEST_CASE("kernel and left_kernel are orthonormal annihilators")
{
    std::mt19937_64 gen(13);
    MatrixXd M = random_gaussian(4, 2, gen) * random_gaussian(2, 6, gen);
    MatrixXd K = kernel(M);
    CHECK(K.cols() == 4);
    CHECK((M * K).norm() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK((K.transpose() * K - MatrixXd::Identity(4, 4)).norm() < 1e-12);

    MatrixXd L = left_kernel(M);
    CHECK(L.rows() == 2);
    CHECK((L * M).norm() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK((L * L.transpose() - MatrixXd::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("orthonormal_range spans the columns")
{
    std::mt19937_64 gen(17);
    MatrixXd M = random_gaussian(5, 3, gen) * random_gaussian(3, 4, gen);
    MatrixXd Q = orthonormal_range(M);
    CHECK(Q.cols() == 3);
    CHECK((Q.transpose() * Q - MatrixXd::Identity(3, 3)).norm() < 1e-12);
    // Every column of M lies in span(Q).
    CHECK((M - Q * (Q.transpose() * M)).norm() < 1e-10);
}

TEST_CASE("orthonormal_complement completes the space")
{
    std::mt19937_64 gen(19);
    MatrixXd Q = random_orthogonal(5, gen).leftCols(2);
    MatrixXd P = orthonormal_complement(Q, 5);
    CHECK(P.cols() == 3);
    CHECK((Q.transpose() * P).norm() < 1e-12);
}

TEST_CASE("intersect_ranges finds the planted intersection")
{
    std::mt19937_64 gen(23);
    // Common direction w plus independent fillers.
    VectorXd w = random_gaussian(6, 1, gen);
    MatrixXd U(6, 2), V(6, 2);
    U << w, random_gaussian(6, 1, gen);
    V << w, random_gaussian(6, 1, gen);
    MatrixXd I = intersect_ranges(U, V);
    REQUIRE(I.cols() == 1);
    // The intersection is the line through w.
    CHECK((I - w.normalized() * (w.normalized().dot(I.col(0)))).norm() < 1e-9);
}

TEST_CASE("seeded generators are deterministic")
{
    std::mt19937_64 g1(99), g2(99);
    CHECK(random_gaussian(3, 3, g1) == random_gaussian(3, 3, g2));
    auto p1 = random_complex_points(8, 42), p2 = random_complex_points(8, 42);
    REQUIRE(p1.size() == p2.size());
    for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
}

TEST_CASE("random_orthogonal and random_invertible are well conditioned")
{
    std::mt19937_64 gen(31);
    MatrixXd Q = random_orthogonal(6, gen);
    CHECK((Q.transpose() * Q - MatrixXd::Identity(6, 6)).norm() < 1e-12);
    MatrixXd T = random_invertible(6, gen);
    CHECK(numeric_rank(T) == 6);
}
