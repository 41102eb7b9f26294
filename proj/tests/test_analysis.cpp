#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uio/analysis.hpp"
#include "uio/reference_example.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>

using namespace uio;

namespace {

StateSpaceSystem random_system(std::mt19937_64& gen, int n, int m, int p)
{
    for (int attempt = 0; attempt < 100; ++attempt) {
        StateSpaceSystem sys;
        sys.A = random_gaussian(n, n, gen);
        sys.B = random_gaussian(n, m, gen);
        sys.C = random_gaussian(p, n, gen);
        sys.D = (gen() % 2) ? MatrixXd(random_gaussian(p, m, gen)) : MatrixXd(MatrixXd::Zero(p, m));
        try {
            sys.validate();
            return sys;
        } catch (const std::invalid_argument&) {
        }
    }
    throw std::runtime_error("random_system: no valid sample");
}

// Controllable canonical SISO realization of b(s)/a(s), deg a = n.
StateSpaceSystem siso_from_polynomials(const VectorXd& a, const VectorXd& b)
{
    const int n = static_cast<int>(a.size()) - 1;
    StateSpaceSystem sys;
    sys.A = MatrixXd::Zero(n, n);
    sys.A.topRightCorner(n - 1, n - 1).setIdentity();
    for (int j = 0; j < n; ++j) sys.A(n - 1, j) = -a(j);
    sys.B = MatrixXd::Zero(n, 1);
    sys.B(n - 1, 0) = 1.0;
    sys.C = MatrixXd::Zero(1, n);
    for (int j = 0; j < static_cast<int>(b.size()) && j < n; ++j) sys.C(0, j) = b(j);
    sys.D = MatrixXd::Zero(1, 1);
    return sys;
}

VectorXd poly_from_roots(const std::vector<double>& roots)
{
    std::vector<double> c{1.0};
    for (double r : roots) {
        std::vector<double> nc(c.size() + 1, 0.0);
        for (size_t i = 0; i < c.size(); ++i) {
            nc[i + 1] += c[i];
            nc[i] += -r * c[i];
        }
        c = nc;
    }
    return Eigen::Map<VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

}  // namespace

TEST_CASE("rosenbrock stacks the system matrix")
{
    auto sys = reference_example::system();
    std::complex<double> s(0.3, -1.2);
    MatrixXcd P = analysis::rosenbrock(sys, s);
    REQUIRE(P.rows() == 11);
    REQUIRE(P.cols() == 10);
    CHECK((P.topLeftCorner(8, 8) - (s * MatrixXd::Identity(8, 8).cast<std::complex<double>>() -
                                    sys.A.cast<std::complex<double>>()))
              .norm() < 1e-14);
    CHECK((P.topRightCorner(8, 2) + sys.B.cast<std::complex<double>>()).norm() < 1e-14);
    CHECK((P.bottomLeftCorner(3, 8) - sys.C.cast<std::complex<double>>()).norm() < 1e-14);
}

TEST_CASE("reference plant classification")
{
    auto sys = reference_example::system();
    auto p = analysis::classify(sys);
    CHECK(p.normal_rank_P == 10);
    CHECK(p.left_invertible);
    REQUIRE(p.invariant_zeros.size() == 1);
    CHECK(p.invariant_zeros[0].value.real() == doctest::Approx(-10.0).epsilon(1e-6));
    CHECK(std::abs(p.invariant_zeros[0].value.imag()) < 1e-6);
    CHECK(p.strongly_detectable);
    CHECK(!p.strongly_observable);
    CHECK(!p.strong_star_detectable);
    CHECK(p.minimum_phase);
    CHECK(p.dim_V_star == 1);
    CHECK(p.dim_R_star == 0);
    // No direct feedthrough and CB = 0, so the no-differentiation test fails.
    CHECK((sys.C * sys.B).norm() == 0.0);
    CHECK(!analysis::rank_condition(sys));
}

TEST_CASE("invariant zeros match planted transmission zeros")
{
    // b(s)/a(s) realizations: zeros of b are the invariant zeros.
    std::mt19937_64 gen(101);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 3 + static_cast<int>(gen() % 3);
        int nz = 1 + static_cast<int>(gen() % (n - 1));
        std::vector<double> zr, pr;
        std::uniform_real_distribution<double> U(-3.0, 3.0);
        for (int i = 0; i < nz; ++i) zr.push_back(U(gen));
        for (int i = 0; i < n; ++i) pr.push_back(U(gen));
        std::sort(zr.begin(), zr.end());
        // Keep zeros separated so clustering is unambiguous.
        bool ok = true;
        for (size_t i = 1; i < zr.size(); ++i)
            if (zr[i] - zr[i - 1] < 0.2) ok = false;
        if (!ok) continue;
        auto sys = siso_from_polynomials(poly_from_roots(pr), poly_from_roots(zr));
        auto zeros = analysis::invariant_zeros(sys);
        REQUIRE(zeros.size() == zr.size());
        std::vector<double> got;
        for (const auto& z : zeros) {
            CHECK(std::abs(z.value.imag()) < 1e-6);
            got.push_back(z.value.real());
        }
        std::sort(got.begin(), got.end());
        for (size_t i = 0; i < zr.size(); ++i) CHECK(got[i] == doctest::Approx(zr[i]).epsilon(1e-6));
    }
}

TEST_CASE("invariant zeros drop the rank of the system matrix")
{
    auto sys = reference_example::system();
    int nr = analysis::normal_rank(sys);
    for (const auto& z : analysis::invariant_zeros(sys))
        CHECK(numeric_rank(analysis::rosenbrock(sys, z.value)) < nr);
}

TEST_CASE("classification is similarity invariant")
{
    std::mt19937_64 gen(303);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = random_system(gen, 4, 1, 2);
        MatrixXd T = random_invertible(4, gen);
        StateSpaceSystem tr;
        tr.A = T * sys.A * T.inverse();
        tr.B = T * sys.B;
        tr.C = sys.C * T.inverse();
        tr.D = sys.D;
        auto p0 = analysis::classify(sys);
        auto p1 = analysis::classify(tr);
        CHECK(p0.normal_rank_P == p1.normal_rank_P);
        CHECK(p0.strongly_observable == p1.strongly_observable);
        CHECK(p0.strongly_detectable == p1.strongly_detectable);
        CHECK(p0.strong_star_detectable == p1.strong_star_detectable);
        CHECK(p0.dim_V_star == p1.dim_V_star);
        CHECK(p0.dim_R_star == p1.dim_R_star);
        CHECK(analysis::rank_condition(sys) == analysis::rank_condition(tr));
    }
}

TEST_CASE("rank condition agrees with its kernel form")
{
    std::mt19937_64 gen(505);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + static_cast<int>(gen() % 5);
        int m = 1 + static_cast<int>(gen() % 2);
        int p = 1 + static_cast<int>(gen() % 3);
        if (p < m) p = m;  // left invertibility needs p >= m
        auto sys = random_system(gen, n, m, p);
        CHECK(analysis::rank_condition(sys) == analysis::rank_condition_kernel_form(sys));
    }
}

TEST_CASE("the weakly unobservable subspace is (A,B)-invariant inside ker C")
{
    std::mt19937_64 gen(707);
    int nontrivial = 0;
    for (int trial = 0; trial < 40; ++trial) {
        int n = 3 + static_cast<int>(gen() % 4);
        int m = 1 + static_cast<int>(gen() % 2);
        int p = m + static_cast<int>(gen() % 2);
        auto sys = random_system(gen, n, m, p);
        MatrixXd V = analysis::weakly_unobservable_subspace(sys);
        MatrixXd R = analysis::controllable_weakly_unobservable_subspace(sys);
        if (V.cols() == 0) continue;
        ++nontrivial;
        // [A; C] V subset of Im [V B; 0 D].
        MatrixXd lhs(n + p, V.cols());
        lhs << sys.A * V, sys.C * V;
        MatrixXd rhs(n + p, V.cols() + m);
        rhs.topLeftCorner(n, V.cols()) = V;
        rhs.topRightCorner(n, m) = sys.B;
        rhs.bottomLeftCorner(p, V.cols()).setZero();
        rhs.bottomRightCorner(p, m) = sys.D;
        MatrixXd sol = rhs.completeOrthogonalDecomposition().solve(lhs);
        CHECK((rhs * sol - lhs).norm() < 1e-8);
        // R* sits inside V*.
        if (R.cols() > 0) CHECK((R - V * (V.transpose() * R)).norm() < 1e-8);
        CHECK(R.cols() <= V.cols());
    }
    CHECK(nontrivial > 0);
}

TEST_CASE("strong observability equals a trivial weakly unobservable subspace")
{
    std::mt19937_64 gen(909);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + static_cast<int>(gen() % 4);
        int m = 1 + static_cast<int>(gen() % 2);
        int p = m + static_cast<int>(gen() % 2);
        auto sys = random_system(gen, n, m, p);
        auto prof = analysis::classify(sys);
        CHECK(prof.strongly_observable == (prof.dim_V_star == 0));
        if (prof.strongly_observable) CHECK(prof.strongly_detectable);
        if (prof.strong_star_detectable) CHECK(prof.strongly_detectable);
    }
}
