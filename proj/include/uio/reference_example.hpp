#pragma once

#include "uio/types.hpp"

#include <vector>

// Worked reference system: an 8th-order strongly detectable plant with two
// unknown inputs and three outputs, together with the published decomposition
// and observer data used to cross-check the toolkit end to end.
namespace uio::reference_example {

// Plant with component-wise input bounds u1 in [-2, 1], u2 in [0, 1].
StateSpaceSystem system();

// Published transformations and subsystem blocks (4-5 significant digits).
struct PublishedDecomposition {
    MatrixXd Ts;      // state transformation (rows of the inverse published)
    MatrixXd Ti;      // 2x2 unknown-input transformation
    MatrixXd To_inv;  // 3x3 inverse output transformation
    MatrixXd Aaa, Ab, Cb, Hab, Had, Hbd, Fda, Fdb, Hdd, Fdd;
    std::vector<int> q{3, 2};
    std::vector<int> l{2};
    int na = 1, nb = 2, nc = 0, nd = 5;
    double zero = -10.0;  // single invariant zero
};
PublishedDecomposition published();

// Input magnitude bounds for the transformed unknown-input channels.
VectorXd published_delta_d();

// Output-injection gain placing the b-subsystem error poles at {-8, -6}.
VectorXd published_lb();

// Sliding-mode injection gains for the two chains (lengths 3 and 2).
std::vector<std::vector<double>> published_kappa();

// Plant initial state for the published trajectories (observer starts at 0).
VectorXd published_x0();

// Unknown input used in the published simulation:
// u1 = 1.5 sin(t) + 0.5, u2 = step(t-1) - step(t-4).
VectorXd input_at(double t);

}  // namespace uio::reference_example
