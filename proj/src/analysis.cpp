#include "uio/analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace uio::analysis {

namespace {

constexpr std::uint64_t kNormalRankSeed = 0x1f83d9abfb41bd6bULL;
constexpr int kNormalRankPoints = 16;

}  // namespace

MatrixXcd rosenbrock(const StateSpaceSystem& sys, std::complex<double> s)
{
    const int n = sys.n(), m = sys.m(), p = sys.p();
    MatrixXcd P(n + p, n + m);
    P.topLeftCorner(n, n) = s * MatrixXcd::Identity(n, n) - sys.A.cast<std::complex<double>>();
    P.topRightCorner(n, m) = -sys.B.cast<std::complex<double>>();
    P.bottomLeftCorner(p, n) = sys.C.cast<std::complex<double>>();
    P.bottomRightCorner(p, m) = sys.D.cast<std::complex<double>>();
    return P;
}

int normal_rank(const StateSpaceSystem& sys, const RankPolicy& policy)
{
    int best = 0;
    for (const auto& s : random_complex_points(kNormalRankPoints, kNormalRankSeed)) {
        best = std::max(best, numeric_rank(rosenbrock(sys, s), policy));
        if (best == sys.n() + std::min(sys.m(), sys.p())) break;  // cannot grow further
    }
    return best;
}

std::vector<InvariantZero> invariant_zeros(const StateSpaceSystem& sys, const RankPolicy& policy)
{
    const int n = sys.n(), m = sys.m(), p = sys.p();
    if (normal_rank(sys, policy) < n + m)
        throw NotLeftInvertible("invariant_zeros: system matrix has normal rank below n+m");

    // On a left-invertible system the zero dynamics live on V*: any friend F
    // keeps V* invariant under A + BF with zero output, and the invariant
    // zeros are exactly the eigenvalues of the restriction to V*. This avoids
    // the singular system pencil, whose spurious generalized eigenvalues are
    // numerically indistinguishable from rank drops near the infinite zeros.
    MatrixXd V = weakly_unobservable_subspace(sys, policy);
    if (V.cols() == 0) return {};

    MatrixXd Pperp = MatrixXd::Identity(n, n) - V * V.transpose();
    MatrixXd lhs(n + p, m);
    lhs.topRows(n) = Pperp * sys.B;
    lhs.bottomRows(p) = sys.D;
    auto cod = lhs.completeOrthogonalDecomposition();
    MatrixXd U(m, V.cols());
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        VectorXd rhs(n + p);
        rhs.head(n) = -Pperp * sys.A * V.col(j);
        rhs.tail(p) = -sys.C * V.col(j);
        U.col(j) = m > 0 ? VectorXd(cod.solve(rhs)) : VectorXd(0);
    }
    MatrixXd restricted = V.transpose() * (sys.A * V + sys.B * U);

    Eigen::EigenSolver<MatrixXd> es(restricted);
    std::vector<std::complex<double>> verified(es.eigenvalues().data(),
                                               es.eigenvalues().data() + V.cols());

    // Snap near-real values and cluster into multiplicities.
    for (auto& z : verified)
        if (std::abs(z.imag()) < 1e-8 * (1.0 + std::abs(z.real()))) z = {z.real(), 0.0};
    std::sort(verified.begin(), verified.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    std::vector<InvariantZero> zeros;
    for (const auto& z : verified) {
        if (!zeros.empty() &&
            std::abs(z - zeros.back().value) < 1e-6 * (1.0 + std::abs(z))) {
            ++zeros.back().multiplicity;
        } else {
            zeros.push_back({z, 1});
        }
    }
    return zeros;
}

bool rank_condition(const StateSpaceSystem& sys, const RankPolicy& policy)
{
    const int m = sys.m(), p = sys.p();
    MatrixXd T = MatrixXd::Zero(2 * p, 2 * m);
    T.topLeftCorner(p, m) = sys.C * sys.B;
    T.topRightCorner(p, m) = sys.D;
    T.bottomLeftCorner(p, m) = sys.D;
    return numeric_rank(T, policy) == numeric_rank(sys.D, policy) + m;
}

bool rank_condition_kernel_form(const StateSpaceSystem& sys, const RankPolicy& policy)
{
    const int n = sys.n(), m = sys.m(), p = sys.p();
    MatrixXd K = left_kernel(sys.D, policy);  // (p - m0) x p, K D = 0
    MatrixXd lhs(K.rows() + p, m);
    lhs << K * sys.C * sys.B, sys.D;
    MatrixXd BD(n + p, m);
    BD << sys.B, sys.D;
    return numeric_rank(lhs, policy) == numeric_rank(BD, policy);
}

MatrixXd weakly_unobservable_subspace(const StateSpaceSystem& sys, const RankPolicy& policy)
{
    const int n = sys.n(), m = sys.m(), p = sys.p();
    MatrixXd V = MatrixXd::Identity(n, n);
    int dim = n;
    for (int iter = 0; iter <= 2 * n + 2; ++iter) {
        // V_{k+1} = { x : exists u with Cx + Du = 0 and Ax + Bu in V_k }.
        // The membership constraint uses an orthonormal basis W of the
        // complement of V_k rather than the projector I - VV^T: the projected
        // stack has n - dim genuine rows, while the projector version carries
        // rank-deficient rows whose novel content is pure roundoff and whose
        // rescaling can manufacture rank out of noise.
        MatrixXd W = orthonormal_complement(V, n);
        MatrixXd S(p + W.cols(), n + m);
        S.topLeftCorner(p, n) = sys.C;
        S.topRightCorner(p, m) = sys.D;
        S.bottomLeftCorner(W.cols(), n) = W.transpose() * sys.A;
        S.bottomRightCorner(W.cols(), m) = W.transpose() * sys.B;
        // Balance the row scales so one large block cannot swamp the rank
        // decision for the others.
        double max_row = 0.0;
        for (Eigen::Index r = 0; r < S.rows(); ++r)
            max_row = std::max(max_row, S.row(r).norm());
        for (Eigen::Index r = 0; r < S.rows(); ++r) {
            double nrm = S.row(r).norm();
            if (nrm > 1e-12 * max_row) S.row(r) /= nrm;
        }
        MatrixXd N = kernel(S, policy);
        MatrixXd Vn = orthonormal_range(N.topRows(n), policy);
        // A fixed point needs the span unchanged, not just the dimension: a
        // same-size subspace that moved is not yet invariant and iterating
        // with its projector can still shrink it.
        if (Vn.cols() == dim &&
            (Vn - V * (V.transpose() * Vn)).norm() < 1e-9 * std::sqrt(1.0 + dim))
            return Vn;
        V = Vn;
        dim = static_cast<int>(Vn.cols());
        if (dim == 0) return MatrixXd(n, 0);
    }
    return V;
}

MatrixXd controllable_weakly_unobservable_subspace(const StateSpaceSystem& sys,
                                                   const RankPolicy& policy)
{
    const int n = sys.n(), m = sys.m(), p = sys.p();
    MatrixXd V = weakly_unobservable_subspace(sys, policy);
    if (V.cols() == 0 || m == 0) return MatrixXd(n, 0);

    // Friend F of V*: for each basis vector v pick u with Cv + Du = 0 and
    // Av + Bu in V*, by least squares against the complement projector.
    MatrixXd Pperp = MatrixXd::Identity(n, n) - V * V.transpose();
    MatrixXd lhs(n + p, m);
    lhs.topRows(n) = Pperp * sys.B;
    lhs.bottomRows(p) = sys.D;
    MatrixXd U(m, V.cols());
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        VectorXd rhs(n + p);
        rhs.head(n) = -Pperp * sys.A * V.col(j);
        rhs.tail(p) = -sys.C * V.col(j);
        U.col(j) = lhs.completeOrthogonalDecomposition().solve(rhs);
    }
    MatrixXd F = U * V.transpose();
    MatrixXd AF = sys.A + sys.B * F;

    // Reachability from L = V* ∩ B ker(D) under A + BF, carried out in V*
    // coordinates so the result cannot leak out of V* when the friend is
    // only approximately invariant.
    MatrixXd L = intersect_ranges(V, sys.B * kernel(sys.D, policy), policy);
    if (L.cols() == 0) return MatrixXd(n, 0);
    MatrixXd Av = V.transpose() * AF * V;
    MatrixXd Lv = V.transpose() * L;
    MatrixXd R = orthonormal_range(Lv, policy);
    for (int iter = 0; iter < V.cols(); ++iter) {
        MatrixXd grown(V.cols(), R.cols() + Lv.cols() + R.cols());
        grown << R, Lv, Av * R;
        MatrixXd Rn = orthonormal_range(grown, policy);
        if (Rn.cols() == R.cols()) break;
        R = Rn;
    }
    return V * R;
}

StructuralProfile classify(const StateSpaceSystem& sys, const RankPolicy& policy)
{
    StructuralProfile profile;
    const int n = sys.n(), m = sys.m();
    profile.normal_rank_P = normal_rank(sys, policy);
    profile.normal_rank_G = profile.normal_rank_P - n;
    profile.m0 = numeric_rank(sys.D, policy);
    profile.left_invertible = profile.normal_rank_P == n + m;
    if (profile.left_invertible) profile.invariant_zeros = invariant_zeros(sys, policy);

    profile.V_star_basis = weakly_unobservable_subspace(sys, policy);
    profile.R_star_basis = controllable_weakly_unobservable_subspace(sys, policy);
    profile.dim_V_star = static_cast<int>(profile.V_star_basis.cols());
    profile.dim_R_star = static_cast<int>(profile.R_star_basis.cols());

    profile.minimum_phase =
        profile.left_invertible &&
        std::all_of(profile.invariant_zeros.begin(), profile.invariant_zeros.end(),
                    [](const InvariantZero& z) { return z.value.real() < -kStabilityMargin; });
    profile.strongly_observable = profile.dim_V_star == 0;
    profile.strongly_detectable = profile.dim_R_star == 0 && profile.minimum_phase;
    profile.strong_star_detectable = profile.strongly_detectable && rank_condition(sys, policy);
    return profile;
}

}  // namespace uio::analysis
