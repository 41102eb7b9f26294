#pragma once

#include <Eigen/Dense>
#include <complex>
#include <random>
#include <stdexcept>

// Shared numerical helpers: one rank policy for the whole toolkit plus a few
// subspace primitives (range, kernel, complement, intersection) built on SVD.
namespace uio {

using Eigen::MatrixXd;
using Eigen::MatrixXcd;
using Eigen::VectorXd;
using Eigen::VectorXcd;

// Raised when a rank decision or structural identity cannot be resolved
// reliably; carries the pipeline stage that failed.
struct NumericalDegeneracy : std::runtime_error {
    explicit NumericalDegeneracy(const std::string& what) : std::runtime_error(what) {}
};

// Singular-value cutoff tau = factor * max(rows,cols) * sigma_max * eps.
// All rank decisions in the toolkit go through one instance of this policy so
// that classifications stay mutually consistent.
struct RankPolicy {
    double factor = 1e2;

    double tolerance(double sigma_max, Eigen::Index rows, Eigen::Index cols) const
    {
        const double eps = std::numeric_limits<double>::epsilon();
        double dim = static_cast<double>(std::max(rows, cols));
        return factor * dim * std::max(sigma_max, 1.0) * eps;
    }
};

// Numerical rank of a real matrix under the policy.
int numeric_rank(const MatrixXd& M, const RankPolicy& policy = {});

// Numerical rank of a complex matrix under the policy.
int numeric_rank(const MatrixXcd& M, const RankPolicy& policy = {});

// Orthonormal basis of the column span (n x rank).
MatrixXd orthonormal_range(const MatrixXd& M, const RankPolicy& policy = {});

// Orthonormal basis of the right null space (cols x nullity).
MatrixXd kernel(const MatrixXd& M, const RankPolicy& policy = {});

// Orthonormal basis of the left null space, returned as rows (nullity x rows).
MatrixXd left_kernel(const MatrixXd& M, const RankPolicy& policy = {});

// Orthonormal basis of the orthogonal complement of span(M) in R^n.
MatrixXd orthonormal_complement(const MatrixXd& M, int n, const RankPolicy& policy = {});

// Orthonormal basis of span(U) ∩ span(V); U, V column bases in R^n.
MatrixXd intersect_ranges(const MatrixXd& U, const MatrixXd& V, const RankPolicy& policy = {});

// Deterministic complex sample points for generic-rank sweeps.
std::vector<std::complex<double>> random_complex_points(int count, std::uint64_t seed);

// Random matrix with i.i.d. standard normal entries from a seeded generator.
MatrixXd random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen);

// Random orthogonal matrix (QR of a Gaussian sample).
MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& gen);

// Random invertible matrix with condition number kept moderate; retries until
// the sample is comfortably nonsingular.
MatrixXd random_invertible(Eigen::Index n, std::mt19937_64& gen);

}  // namespace uio
