#include "uio/numeric.hpp"

#include <Eigen/SVD>

namespace uio {

namespace {

template <typename Matrix>
int rank_from_svd(const Matrix& M, const RankPolicy& policy)
{
    if (M.rows() == 0 || M.cols() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& sv = svd.singularValues();
    double tau = policy.tolerance(sv(0), M.rows(), M.cols());
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tau) ++r;
    return r;
}

}  // namespace

int numeric_rank(const MatrixXd& M, const RankPolicy& policy) { return rank_from_svd(M, policy); }

int numeric_rank(const MatrixXcd& M, const RankPolicy& policy) { return rank_from_svd(M, policy); }

MatrixXd orthonormal_range(const MatrixXd& M, const RankPolicy& policy)
{
    if (M.rows() == 0 || M.cols() == 0) return MatrixXd(M.rows(), 0);
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    double tau = policy.tolerance(sv(0), M.rows(), M.cols());
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tau) ++r;
    return svd.matrixU().leftCols(r);
}

MatrixXd kernel(const MatrixXd& M, const RankPolicy& policy)
{
    if (M.cols() == 0) return MatrixXd(0, 0);
    if (M.rows() == 0) return MatrixXd::Identity(M.cols(), M.cols());
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double tau = policy.tolerance(sv(0), M.rows(), M.cols());
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tau) ++r;
    return svd.matrixV().rightCols(M.cols() - r);
}

MatrixXd left_kernel(const MatrixXd& M, const RankPolicy& policy)
{
    return kernel(M.transpose(), policy).transpose();
}

MatrixXd orthonormal_complement(const MatrixXd& M, int n, const RankPolicy& policy)
{
    if (M.cols() == 0) return MatrixXd::Identity(n, n);
    MatrixXd Q = orthonormal_range(M, policy);
    // Null space of Q^T is exactly the complement of span(Q).
    return kernel(Q.transpose(), policy);
}

MatrixXd intersect_ranges(const MatrixXd& U, const MatrixXd& V, const RankPolicy& policy)
{
    const Eigen::Index n = U.rows();
    if (U.cols() == 0 || V.cols() == 0) return MatrixXd(n, 0);
    // [U -V] [a;b] = 0  =>  U a = V b lies in the intersection.
    MatrixXd stacked(n, U.cols() + V.cols());
    stacked << U, -V;
    MatrixXd null = kernel(stacked, policy);
    if (null.cols() == 0) return MatrixXd(n, 0);
    MatrixXd pts = U * null.topRows(U.cols());
    return orthonormal_range(pts, policy);
}

std::vector<std::complex<double>> random_complex_points(int count, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<std::complex<double>> pts;
    pts.reserve(count);
    for (int i = 0; i < count; ++i) {
        double re = dist(gen);
        double im = dist(gen);
        pts.emplace_back(re, im);
    }
    return pts;
}

MatrixXd random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = dist(gen);
    return M;
}

MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& gen)
{
    MatrixXd G = random_gaussian(n, n, gen);
    Eigen::HouseholderQR<MatrixXd> qr(G);
    MatrixXd Q = qr.householderQ();
    return Q;
}

MatrixXd random_invertible(Eigen::Index n, std::mt19937_64& gen)
{
    for (int attempt = 0; attempt < 64; ++attempt) {
        MatrixXd M = random_gaussian(n, n, gen);
        Eigen::JacobiSVD<MatrixXd> svd(M);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) > 1e-3 * sv(0)) return M;
    }
    throw NumericalDegeneracy("random_invertible: failed to draw a well-conditioned matrix");
}

}  // namespace uio
