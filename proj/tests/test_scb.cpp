#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uio/analysis.hpp"
#include "uio/reference_example.hpp"
#include "uio/scb.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

using namespace uio;

namespace {

// Build a decomposed form with prescribed index lists directly from the
// chain patterns, then hide it behind random invertible transforms. Running
// the constructive algorithm on the assembled plant must recover the same
// structure; this is the independent ground truth for to_scb.
scb::ScbForm random_scb(std::mt19937_64& gen, int na, const std::vector<int>& q,
                        const std::vector<int>& l, int nc, int mc)
{
    scb::ScbForm f;
    f.q = q;
    f.l = l;
    f.na = na;
    f.nb = std::accumulate(l.begin(), l.end(), 0);
    f.nc = nc;
    f.nd = std::accumulate(q.begin(), q.end(), 0);
    f.m0 = 0;
    f.md = static_cast<int>(q.size());
    f.mc = mc;
    f.pb = static_cast<int>(l.size());

    auto R = [&](int r, int c) { return MatrixXd(0.7 * random_gaussian(r, c, gen)); };
    f.Aaa = R(na, na);
    f.Hab = R(na, f.pb);
    f.Had = R(na, f.md);
    f.Ab_star = scb::chain_shift_matrix(l);
    f.Hbb = R(f.nb, f.pb);
    f.Hbd = R(f.nb, f.md);
    f.Cb = scb::chain_head_selector(l);
    f.Ab = f.Ab_star + f.Hbb * f.Cb;
    f.Ac = R(nc, nc);
    f.Bc = nc > 0 ? MatrixXd(random_invertible(nc, gen).leftCols(mc)) : MatrixXd(0, mc);
    f.Fca = R(mc, na);
    f.Hcb = R(nc, f.pb);
    f.Hcd = R(nc, f.md);
    f.Ad_star = scb::chain_shift_matrix(q);
    f.Bd = scb::chain_tail_selector(q);
    f.Cd = scb::chain_head_selector(q);
    f.Fda = R(f.md, na);
    f.Fdb = R(f.md, f.nb);
    f.Fdc = R(f.md, nc);
    f.Fdd = R(f.md, f.nd);
    f.Hdd = R(f.nd, f.md);
    const int n = f.n(), m = f.m(), p = f.p();
    f.B0a = MatrixXd(na, 0);
    f.B0b = MatrixXd(f.nb, 0);
    f.B0c = MatrixXd(nc, 0);
    f.B0d = MatrixXd(f.nd, 0);
    f.C0a = MatrixXd(0, na);
    f.C0b = MatrixXd(0, f.nb);
    f.C0c = MatrixXd(0, nc);
    f.C0d = MatrixXd(0, f.nd);
    f.Ts = random_orthogonal(n, gen);
    f.Ti = random_invertible(m, gen);
    f.To = random_invertible(p, gen);
    f.Gd = f.Ti.inverse().topRows(f.md);
    return f;
}

bool fdd_pattern_ok(const scb::ScbForm& f, double cut = 1e-9)
{
    // Row i may only touch interior levels (j >= 2) of strictly earlier
    // chains; row 1 and every head column vanish.
    for (int i = 0; i < f.md; ++i)
        for (int k = 0; k < f.md; ++k)
            for (int j = 0; j < f.q[k]; ++j) {
                bool allowed = i > k && j >= 1;
                if (!allowed) CHECK(std::abs(f.Fdd(i, f.head_d(k) + j)) < cut);
                if (!allowed && std::abs(f.Fdd(i, f.head_d(k) + j)) >= cut) return false;
            }
    return true;
}

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

}  // namespace

TEST_CASE("chain pattern helpers")
{
    std::vector<int> lens{3, 2};
    MatrixXd S = scb::chain_shift_matrix(lens);
    MatrixXd B = scb::chain_tail_selector(lens);
    MatrixXd C = scb::chain_head_selector(lens);
    REQUIRE(S.rows() == 5);
    REQUIRE(B.cols() == 2);
    REQUIRE(C.rows() == 2);
    CHECK(S(0, 1) == 1.0);
    CHECK(S(1, 2) == 1.0);
    CHECK(S(3, 4) == 1.0);
    CHECK(S(2, 3) == 0.0);
    CHECK(S.cwiseAbs().sum() == 3.0);
    CHECK(B(2, 0) == 1.0);
    CHECK(B(4, 1) == 1.0);
    CHECK(B.cwiseAbs().sum() == 2.0);
    CHECK(C(0, 0) == 1.0);
    CHECK(C(1, 3) == 1.0);
    CHECK(C.cwiseAbs().sum() == 2.0);
}

TEST_CASE("reference plant decomposes with the published structure")
{
    auto sys = reference_example::system();
    auto pub = reference_example::published();
    auto f = scb::to_scb(sys);
    CHECK(f.na == pub.na);
    CHECK(f.nb == pub.nb);
    CHECK(f.nc == pub.nc);
    CHECK(f.nd == pub.nd);
    CHECK(f.q == pub.q);
    CHECK(f.l == pub.l);
    REQUIRE(f.Aaa.rows() == 1);
    CHECK(f.Aaa(0, 0) == doctest::Approx(pub.zero).epsilon(1e-6));
    auto report = scb::verify_scb(sys, f, 1e-8);
    for (const auto& c : report.checks) {
        INFO(c.name, " residual ", c.residual);
        CHECK(c.pass);
    }
}

TEST_CASE("triangularization produces the canonical coupling pattern")
{
    auto sys = reference_example::system();
    auto f0 = scb::to_scb(sys);
    auto f = scb::triangularize_fdd(f0);
    CHECK(fdd_pattern_ok(f));
    // The d-refinement leaves the chain selectors untouched.
    CHECK((f.Cd - scb::chain_head_selector(f.q)).norm() < 1e-12);
    CHECK((f.Bd - scb::chain_tail_selector(f.q)).norm() < 1e-12);
    // Td acts on the d-block alone: other columns of Ts are unchanged.
    CHECK((f.Ts.leftCols(f.na + f.nb + f.nc) - f0.Ts.leftCols(f.na + f.nb + f.nc)).norm() == 0.0);
    auto report = scb::verify_scb(sys, f, 1e-8);
    CHECK(report.all_pass());
    // Exactly one cross-chain coupling survives, matching the published
    // magnitude up to the normalization of this equivalent decomposition.
    CHECK(f.Fdd.row(0).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(f.Fdd.row(1).segment(1, 2).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("round trip: planted decompositions are recovered")
{
    std::mt19937_64 gen(2024);
    struct Layout {
        int na;
        std::vector<int> q;
        std::vector<int> l;
        int nc, mc;
    };
    std::vector<Layout> layouts = {
        {1, {3, 2}, {2}, 0, 0}, {0, {2}, {1, 1}, 0, 0},     {2, {1, 1}, {}, 0, 0},
        {0, {4}, {3}, 0, 0},    {1, {2, 2}, {2, 1}, 0, 0},  {2, {3}, {}, 0, 0},
        {0, {1}, {2}, 1, 1},    {1, {2}, {1}, 2, 1},
    };
    for (const auto& lay : layouts) {
        for (int rep = 0; rep < 3; ++rep) {
            auto truth = random_scb(gen, lay.na, lay.q, lay.l, lay.nc, lay.mc);
            auto sys = truth.assemble_original();
            CAPTURE(lay.na);
            CAPTURE(lay.nc);
            auto f = scb::to_scb(sys);
            CHECK(f.na == truth.na);
            CHECK(f.nb == truth.nb);
            CHECK(f.nc == truth.nc);
            CHECK(f.nd == truth.nd);
            auto sq = f.q;
            auto tq = truth.q;
            std::sort(sq.begin(), sq.end());
            std::sort(tq.begin(), tq.end());
            CHECK(sq == tq);
            auto sl = f.l;
            auto tl = truth.l;
            std::sort(sl.begin(), sl.end());
            std::sort(tl.begin(), tl.end());
            CHECK(sl == tl);
            auto report = scb::verify_scb(sys, f, 1e-8);
            for (const auto& c : report.checks) {
                INFO(c.name, " residual ", c.residual);
                CHECK(c.pass);
            }
        }
    }
}

TEST_CASE("triangularization preserves validity on planted decompositions")
{
    std::mt19937_64 gen(4048);
    std::vector<std::vector<int>> qs = {{3, 2}, {2, 2, 1}, {4, 1}, {3, 3}};
    for (const auto& q : qs) {
        auto truth = random_scb(gen, 1, q, {1}, 0, 0);
        auto sys = truth.assemble_original();
        auto f = scb::triangularize_fdd(scb::to_scb(sys));
        CHECK(fdd_pattern_ok(f));
        CHECK((f.Cd - scb::chain_head_selector(f.q)).norm() < 1e-12);
        CHECK((f.Bd - scb::chain_tail_selector(f.q)).norm() < 1e-12);
        CHECK(scb::verify_scb(sys, f, 1e-8).all_pass());
    }
}

TEST_CASE("verification rejects corrupted decompositions")
{
    auto sys = reference_example::system();
    auto f = scb::to_scb(sys);

    auto corrupt = f;
    corrupt.Ts(2, 3) += 1e-4;
    CHECK(!scb::verify_scb(sys, corrupt, 1e-8).all_pass());

    corrupt = f;
    corrupt.Aaa(0, 0) += 1e-3;
    CHECK(!scb::verify_scb(sys, corrupt, 1e-8).all_pass());

    corrupt = f;
    corrupt.Fdb(0, 1) += 1e-3;
    CHECK(!scb::verify_scb(sys, corrupt, 1e-8).all_pass());
}

TEST_CASE("random plants decompose consistently with the subspace analysis")
{
    std::mt19937_64 gen(6071);
    int done = 0;
    for (int trial = 0; trial < 40; ++trial) {
        int n = 2 + static_cast<int>(gen() % 5);
        int m = 1 + static_cast<int>(gen() % 2);
        int p = 1 + static_cast<int>(gen() % 3);
        auto sys = random_system(gen, n, m, p);
        auto prof = analysis::classify(sys);
        auto f = scb::to_scb(sys);
        CHECK(f.na + f.nc == prof.dim_V_star);
        CHECK(f.nc == prof.dim_R_star);
        auto report = scb::verify_scb(sys, f, 1e-8);
        for (const auto& c : report.checks) {
            INFO(c.name, " residual ", c.residual);
            CHECK(c.pass);
        }
        CHECK(scb::strong_star_from_scb(f) == prof.strong_star_detectable);
        ++done;
    }
    CHECK(done == 40);
}

TEST_CASE("borderline draws fail loudly, never silently")
{
    // Ill-conditioned hidden transforms may push rank decisions past the
    // threshold; the contract is that such draws raise NumericalDegeneracy
    // (rarely) instead of returning a wrong decomposition.
    std::mt19937_64 gen(777);
    int wrong = 0, thrown = 0, tot = 0;
    for (int rep = 0; rep < 60; ++rep) {
        auto truth = random_scb(gen, 1, {2}, {1}, 2, 1);
        truth.Ts = random_invertible(truth.n(), gen);
        auto sys = truth.assemble_original();
        ++tot;
        try {
            auto f = scb::to_scb(sys);
            bool good = f.na == truth.na && f.nc == truth.nc &&
                        scb::verify_scb(sys, f, 1e-6).all_pass();
            if (!good) ++wrong;
        } catch (const NumericalDegeneracy&) {
            ++thrown;
        }
    }
    CHECK(wrong == 0);
    CHECK(thrown <= tot / 10);
}

TEST_CASE("chain lengths are ordered and sized consistently")
{
    std::mt19937_64 gen(8093);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = random_system(gen, 3 + static_cast<int>(gen() % 4), 1 + static_cast<int>(gen() % 2),
                                 2 + static_cast<int>(gen() % 2));
        auto f = scb::to_scb(sys);
        CHECK(std::is_sorted(f.q.rbegin(), f.q.rend()));
        CHECK(std::accumulate(f.q.begin(), f.q.end(), 0) == f.nd);
        CHECK(std::accumulate(f.l.begin(), f.l.end(), 0) == f.nb);
        CHECK(f.md == static_cast<int>(f.q.size()));
        CHECK(f.pb == static_cast<int>(f.l.size()));
        CHECK(f.n() == sys.n());
        CHECK(f.m() == sys.m());
        CHECK(f.p() == sys.p());
    }
}
