#pragma once

#include "uio/analysis.hpp"
#include "uio/scb.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

// Observer synthesis on top of the decomposition: the trivial zero-dynamics
// copy, linear and continuous bi-homogeneous b-observers, and the
// reduced / full-order / sliding-mode / discontinuous bi-homogeneous
// d-observers, plus gain selection and the design decision tree.
namespace uio::observer {

struct EmptySubsystem : std::runtime_error {
    explicit EmptySubsystem(const std::string& w) : std::runtime_error(w) {}
};
struct UnsupportedOrder : std::runtime_error {
    explicit UnsupportedOrder(const std::string& w) : std::runtime_error(w) {}
};
struct PoleCountMismatch : std::runtime_error {
    explicit PoleCountMismatch(const std::string& w) : std::runtime_error(w) {}
};
struct UnstablePoleRequested : std::runtime_error {
    explicit UnstablePoleRequested(const std::string& w) : std::runtime_error(w) {}
};
struct ChannelShapeMismatch : std::runtime_error {
    explicit ChannelShapeMismatch(const std::string& w) : std::runtime_error(w) {}
};
struct RequiresStrongStar : std::runtime_error {
    explicit RequiresStrongStar(const std::string& w) : std::runtime_error(w) {}
};
struct MissingPart : std::runtime_error {
    explicit MissingPart(const std::string& w) : std::runtime_error(w) {}
};
struct NotStronglyDetectable : std::runtime_error {
    explicit NotStronglyDetectable(const std::string& w) : std::runtime_error(w) {}
};

// ⌊z⌉^a = sign(z)|z|^a with ⌊z⌉^0 = sign(z), sign(0) = 0.
double signed_power(double z, double a);

// One nonlinear output-injection chain. The injected error is
// e = ybar(output_index) - xi(state_offset); levels j = 1..order receive
// gains(j-1) * Phi_j(e).
struct InjectionChannel {
    int order = 1;
    int output_index = 0;  // index into the stacked measured output ybar
    int state_offset = 0;  // chain head within the observer state
    VectorXd gains;
    double mu = 0.5;
    double d0 = -1.0;
    double d_inf = -1.0;

    // Homogeneity weights r_{0,i} = 1-(order-i)d0, r_{inf,i} likewise,
    // defined for i = 1..order+1.
    double r0(int i) const { return 1.0 - (order - i) * d0; }
    double rinf(int i) const { return 1.0 - (order - i) * d_inf; }
};

// Phi_i = phi_i ∘ ... ∘ phi_1 with
// phi_k(z) = mu*⌊z⌉^{r0(k+1)/r0(k)} + (1-mu)*⌊z⌉^{rinf(k+1)/rinf(k)}.
double moreno_phi(const InjectionChannel& ch, int i, double z);

// Per-channel disturbance bounds in the transformed input coordinates.
struct InputBoundsScb {
    VectorXd delta_d;
};

// Delta_{d,i} = sum_j |g_{d,i,j}| u_{s,j} + |sum_j g_{d,i,j} u_{o,j}| with
// u_o/u_s the offset and symmetric part of the bounds.
InputBoundsScb transform_input_bounds(const InputBounds& bounds, const scb::ScbForm& scb);
// Same, reading the bounds off the system; throws MissingBounds without them.
InputBoundsScb transform_input_bounds(const StateSpaceSystem& sys, const scb::ScbForm& scb);

enum class GainKind { SlidingMode, ContinuousBihomogeneous, DiscontinuousBihomogeneous };

// Gain ladder scaled from the standard robust-exact-differentiator table
// {1.1, 1.5, 2, 3, 5, 8}; the last gain is 1.1*Delta for the sliding-mode
// kind. Bi-homogeneous kinds reuse the table with Delta clamped to >= 1.
// Orders above 6 are outside the table.
VectorXd default_gains(int order, double delta, GainKind kind, double multiplier = 1.0);

enum class ObserverKind {
    TrivialA,
    LinearB,
    CbhoB,
    LinearReducedD,
    LinearFullOrderD,
    SmoD,
    DbhoD,
    Composite,
};

// State-space observer piece: xi' = M xi + N ybar + nonlinear injections,
// subsystem estimate = T_out xi + D_out ybar. couple_a / couple_b are the
// d-observer feeds B_d F_da / B_d F_db resolved against the a/b estimates
// when parts are assembled.
struct ObserverRealization {
    ObserverKind kind = ObserverKind::Composite;
    int dim = 0;
    MatrixXd M;
    MatrixXd N;
    MatrixXd L;  // linear injection gain (L_b) or full-order drift F
    std::vector<InjectionChannel> channels;
    MatrixXd T_out;
    MatrixXd D_out;
    MatrixXd couple_a;
    MatrixXd couple_b;
    scb::ScbForm scb;

    // Composite only: offsets of the a/b/d parts in the composite state.
    int off_a = 0, off_b = 0, off_d = 0;

    VectorXd derivative(const VectorXd& xi, const VectorXd& ybar) const;
    VectorXd estimate(const VectorXd& xi, const VectorXd& ybar) const;
    bool has_discontinuous_channel() const;
};

// x̂_a' = A_aa x̂_a + H_ab y_b + H_ad y_d + B_0a y_0 (copy dynamics).
ObserverRealization build_sigma_a_observer(const scb::ScbForm& scb);

// Output injection with eig(A_b - L_b C_b) = poles, exploiting the chain
// structure: L_b = H_bb + per-chain companion coefficients.
MatrixXd place_lb(const scb::ScbForm& scb, const std::vector<std::complex<double>>& poles);

// Luenberger observer x̂_b' = A_b x̂_b + H_bd y_d + B_0b y_0 + L_b(y_b - C_b x̂_b).
ObserverRealization build_sigma_b_observer(const scb::ScbForm& scb, const MatrixXd& Lb);
// Continuous bi-homogeneous variant with one channel per b-chain.
ObserverRealization build_sigma_b_observer(const scb::ScbForm& scb,
                                           const std::vector<InjectionChannel>& channels);

// Static reduced observer x̂_d = y_d (requires all q_i = 1).
ObserverRealization build_sigma_d_reduced(const scb::ScbForm& scb);
// Full-order companion z' = F z, x̂_d = z + y_d; equals the reduced observer
// for z(0) = 0 (requires all q_i = 1 and Hurwitz F).
ObserverRealization build_sigma_d_fullorder(const scb::ScbForm& scb, const MatrixXd& F);
// Sliding-mode observer (d0 = d_inf = -1 channels) for the chain subsystem.
ObserverRealization build_sigma_d_smo(const scb::ScbForm& scb,
                                      const std::vector<InjectionChannel>& channels,
                                      const InputBoundsScb& bounds);
// Discontinuous bi-homogeneous observer (d0 = -1, d_inf > -1).
ObserverRealization build_sigma_d_dbho(const scb::ScbForm& scb,
                                       const std::vector<InjectionChannel>& channels,
                                       const InputBoundsScb& bounds);

enum class Goal { Asymptotic, FiniteTime, FixedTime };

struct ObserverPlan {
    bool use_a = false;
    std::optional<ObserverKind> b_mode;
    std::optional<ObserverKind> d_mode;
    Goal requested = Goal::Asymptotic;
    Goal achieved = Goal::Asymptotic;
    std::string note;
};

// Decision tree over the structural profile: trivial Σa copy whenever
// n_a > 0 (asymptotic only), linear or bi-homogeneous Σb, and reduced /
// sliding-mode / discontinuous bi-homogeneous Σd.
ObserverPlan recommend(const analysis::StructuralProfile& profile, const scb::ScbForm& scb,
                       Goal goal);

// Glue the per-subsystem pieces into one observer of dimension
// n_a + n_b + n_d whose estimate is reported in the decomposition
// coordinates (x̂_a, x̂_b, x̂_d).
ObserverRealization assemble(const scb::ScbForm& scb,
                             const std::optional<ObserverRealization>& part_a,
                             const std::optional<ObserverRealization>& part_b,
                             const std::optional<ObserverRealization>& part_d);

struct SynthesisOptions {
    std::vector<std::complex<double>> b_poles;  // empty: -3, -4, ...
    double mu = 0.5;
    double cbho_d0 = -0.5;
    double cbho_dinf = 0.0;  // <= 0: min(0.9/(max l_i - 1), 0.25)
    double dbho_dinf = 0.0;  // <= 0: min(0.9/(max q_i - 1), 0.25)
    double gain_multiplier = 1.0;
    MatrixXd fullorder_F;  // empty: -I
};

// Build every part the plan asks for and assemble the composite.
ObserverRealization build_from_plan(const scb::ScbForm& scb, const ObserverPlan& plan,
                                    const std::optional<InputBounds>& bounds,
                                    const SynthesisOptions& opts = {});

}  // namespace uio::observer
