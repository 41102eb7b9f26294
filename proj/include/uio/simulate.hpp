#pragma once

#include "uio/observer.hpp"

#include <optional>
#include <string>
#include <vector>

// Fixed-step joint integration of plant and observer, bounded input-signal
// generation, per-subsystem error bookkeeping and convergence measurement.
namespace uio::sim {

struct NonFiniteState : std::runtime_error {
    explicit NonFiniteState(const std::string& w) : std::runtime_error(w) {}
};

// Sum of bounded primitives; one spec per input component.
struct SignalPrimitive {
    enum class Kind { Constant, Sine, Step };
    Kind kind = Kind::Constant;
    double value = 0.0;      // constant c / sine amplitude / step amplitude
    double omega = 0.0;      // sine angular frequency
    double phase = 0.0;      // sine phase
    double offset = 0.0;     // sine vertical offset
    double onset = 0.0;      // step onset time
};

struct SignalSpec {
    std::vector<SignalPrimitive> terms;

    static SignalSpec constant(double c);
    static SignalSpec sine(double amplitude, double omega, double phase = 0.0,
                           double offset = 0.0);
    static SignalSpec step(double amplitude, double onset);
    SignalSpec& add(const SignalSpec& other);
};

// Sum of primitive evaluations; the step uses sigma(t - t0) = 1 for t >= t0.
double eval_signal(const SignalSpec& spec, double t);

struct SimulationScenario {
    StateSpaceSystem system;
    observer::ObserverRealization observer;
    std::vector<SignalSpec> inputs;  // one entry per input component
    VectorXd x0;
    VectorXd xhat0;  // observer state, size observer.dim
    double dt = 1e-4;
    double horizon = 10.0;
    int decimation = 1;        // record every k-th step
    bool force_euler = false;  // disable the Runge-Kutta fast path
    double convergence_tol = 1e-2;
};

struct TrajectoryRecord {
    std::vector<double> times;
    MatrixXd x;     // samples x n, plant state
    MatrixXd xhat;  // samples x n, estimate in original coordinates
    MatrixXd ea, eb, ed;  // samples x (na / nb / nd), decomposition-coordinate errors
    std::vector<double> norm_a, norm_b, norm_d;  // per-sample sup norms
    int na = 0, nb = 0, nd = 0;
    double convergence_tol = 1e-2;
    std::optional<double> conv_a, conv_b, conv_d;  // per-block hold times
};

// Joint fixed-step integration: explicit Euler whenever a discontinuous
// injection channel is present, classical Runge-Kutta otherwise. States are
// guarded against overflow at 1e12.
TrajectoryRecord simulate(const SimulationScenario& sc);

// Smallest grid time T with the block sup-norm below tol at every sample
// from T to the end; absent when never achieved.
std::optional<double> convergence_time(const TrajectoryRecord& rec, char block, double tol);

// CSV columns: t, x_1..x_n, xhat_1..xhat_n, ea_*, eb_*, ed_*.
void export_csv(const TrajectoryRecord& rec, const std::string& path);

}  // namespace uio::sim
