#pragma once

#include "uio/types.hpp"

#include <string>
#include <vector>

// Special coordinate basis: state/input/output transformations decomposing
// (A,B,C,D) into the zero-dynamics part (a), output-chain part (b),
// right-invertibility part (c) and the unknown-input integrator chains (d).
namespace uio::scb {

// Decomposed form. Coordinates: x = Ts x̄ with x̄ = (x_a, x_b, x_c, x_d),
// u = Ti ū with ū = (u_0, u_d, u_c), y = To ȳ with ȳ = (y_0, y_d, y_b).
struct ScbForm {
    MatrixXd Ts, Ti, To;

    std::vector<int> q;  // d-chain lengths, non-increasing
    std::vector<int> l;  // b-chain lengths, construction order
    int na = 0, nb = 0, nc = 0, nd = 0;
    int m0 = 0, md = 0, mc = 0, pb = 0;

    // Subsystem blocks of the transformed dynamics.
    MatrixXd Aaa, Hab, Had;
    MatrixXd Ab, Ab_star, Hbb, Hbd, Cb;
    MatrixXd Ac, Bc, Fca, Hcb, Hcd;
    MatrixXd Ad_star, Bd, Cd, Fda, Fdb, Fdc, Fdd, Hdd;
    MatrixXd B0a, B0b, B0c, B0d;  // feedthrough-channel input columns per subsystem
    MatrixXd C0a, C0b, C0c, C0d;  // y_0 output rows per subsystem
    MatrixXd Gd;                  // rows of Ti^{-1} producing u_d

    int n() const { return na + nb + nc + nd; }
    int m() const { return m0 + md + mc; }
    int p() const { return m0 + md + pb; }

    // 0-based offset of chain i's first (head) state within x_d / x_b.
    int head_d(int i) const;
    int head_b(int i) const;

    // Transformed matrices reassembled from the blocks.
    MatrixXd assemble_Abar() const;
    MatrixXd assemble_Bbar() const;
    MatrixXd assemble_Cbar() const;
    MatrixXd assemble_Dbar() const;

    // Blocks conjugated back to the original coordinates.
    StateSpaceSystem assemble_original() const;

    // A_d including output feedback: A_d_star + Bd Fdd + Hdd Cd.
    MatrixXd Ad() const { return Ad_star + Bd * Fdd + Hdd * Cd; }
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double residual = 0.0;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass() const
    {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

// Block-diagonal nilpotent Jordan shift matrix diag(J_{k_1}, ..., J_{k_r}).
MatrixXd chain_shift_matrix(const std::vector<int>& lengths);
// diag of tail unit columns: the B_d pattern (Σk_i rows, r columns).
MatrixXd chain_tail_selector(const std::vector<int>& lengths);
// diag of head unit rows: the C_d / C_b pattern (r rows, Σk_i columns).
MatrixXd chain_head_selector(const std::vector<int>& lengths);

// Slice all blocks out of the transformed system given transforms and index
// data; validates nothing beyond dimensions (verify_scb does the checking).
ScbForm extract_blocks(const StateSpaceSystem& sys, const MatrixXd& Ts, const MatrixXd& Ti,
                       const MatrixXd& To, int na, int nc, int m0, const std::vector<int>& q,
                       const std::vector<int>& l);

// Constructive transformation via the structure algorithm: feedthrough
// normalization, output-differentiation chain discovery, and subspace-based
// completion of the state transform.
ScbForm to_scb(const StateSpaceSystem& sys, const RankPolicy& policy = {});

// Refine the d-block coordinates so that Fdd becomes block strictly lower
// triangular with zero first row and zero head columns, leaving Bd and Cd
// untouched (Ts changes only in its d-columns).
ScbForm triangularize_fdd(const ScbForm& scb, const RankPolicy& policy = {});

// Structural validation: similarity residuals, zero patterns, chain
// patterns, zero/eigenvalue agreement, observability and strong
// observability of the chain subsystems.
ValidationReport verify_scb(const StateSpaceSystem& sys, const ScbForm& scb, double tol,
                            const RankPolicy& policy = {});

// Existence of a linear unknown-input observer read off the decomposition:
// n_c = 0, A_aa Hurwitz and all chain lengths q_i = 1.
bool strong_star_from_scb(const ScbForm& scb, const RankPolicy& policy = {});

}  // namespace uio::scb
