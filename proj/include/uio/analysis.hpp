#pragma once

#include "uio/types.hpp"

#include <complex>
#include <vector>

// Structural analysis of (A,B,C,D): Rosenbrock matrix ranks, invariant zeros,
// the weakly unobservable subspaces and the strong observability /
// detectability classification.
namespace uio::analysis {

struct NotLeftInvertible : std::runtime_error {
    explicit NotLeftInvertible(const std::string& what) : std::runtime_error(what) {}
};

struct InvariantZero {
    std::complex<double> value;
    int multiplicity = 1;
};

struct StructuralProfile {
    int normal_rank_P = 0;
    int normal_rank_G = 0;
    std::vector<InvariantZero> invariant_zeros;
    int m0 = 0;  // rank of D
    bool left_invertible = false;
    bool strongly_observable = false;
    bool strongly_detectable = false;
    bool strong_star_detectable = false;
    bool minimum_phase = false;
    int dim_V_star = 0;
    int dim_R_star = 0;
    MatrixXd V_star_basis;
    MatrixXd R_star_basis;
};

// System matrix [[sI - A, -B], [C, D]] evaluated at s.
MatrixXcd rosenbrock(const StateSpaceSystem& sys, std::complex<double> s);

// Generic rank of the system matrix, taken as the maximum numerical rank over
// a fixed set of seeded random complex evaluation points.
int normal_rank(const StateSpaceSystem& sys, const RankPolicy& policy = {});

// Eigenvalues of the zero dynamics: the restriction of A + BF to V* for a
// friend F of V*, clustered into multiplicities. Requires left
// invertibility; zeros are not isolated otherwise.
std::vector<InvariantZero> invariant_zeros(const StateSpaceSystem& sys,
                                           const RankPolicy& policy = {});

// rank [[CB, D], [D, 0]] == rank D + m; existence test for a linear
// unknown-input observer without output differentiation.
bool rank_condition(const StateSpaceSystem& sys, const RankPolicy& policy = {});

// Same test in kernel form: K a full-row-rank annihilator of D, condition
// rank [KCB; D] == rank [B; D]. Agrees with rank_condition on every input.
bool rank_condition_kernel_form(const StateSpaceSystem& sys, const RankPolicy& policy = {});

// Orthonormal basis of V*: largest subspace on which the state can evolve
// with identically zero output for a suitable input.
MatrixXd weakly_unobservable_subspace(const StateSpaceSystem& sys, const RankPolicy& policy = {});

// Orthonormal basis of R*: the states within V* reachable with zero output,
// computed as the reachability subspace of (A + BF) from V* ∩ B ker D for a
// friend F of V*.
MatrixXd controllable_weakly_unobservable_subspace(const StateSpaceSystem& sys,
                                                   const RankPolicy& policy = {});

// Full classification. Non-left-invertible systems are reported via the
// left_invertible flag with an empty zero list, not as a failure.
StructuralProfile classify(const StateSpaceSystem& sys, const RankPolicy& policy = {});

// Real-part tolerance below which a zero counts as closed-right-half-plane.
inline constexpr double kStabilityMargin = 1e-9;

}  // namespace uio::analysis
