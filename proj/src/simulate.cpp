#include "uio/simulate.hpp"

#include <Eigen/LU>

#include <cmath>
#include <fstream>

namespace uio::sim {

SignalSpec SignalSpec::constant(double c)
{
    SignalSpec s;
    SignalPrimitive p;
    p.kind = SignalPrimitive::Kind::Constant;
    p.value = c;
    s.terms.push_back(p);
    return s;
}

SignalSpec SignalSpec::sine(double amplitude, double omega, double phase, double offset)
{
    SignalSpec s;
    SignalPrimitive p;
    p.kind = SignalPrimitive::Kind::Sine;
    p.value = amplitude;
    p.omega = omega;
    p.phase = phase;
    p.offset = offset;
    s.terms.push_back(p);
    return s;
}

SignalSpec SignalSpec::step(double amplitude, double onset)
{
    SignalSpec s;
    SignalPrimitive p;
    p.kind = SignalPrimitive::Kind::Step;
    p.value = amplitude;
    p.onset = onset;
    s.terms.push_back(p);
    return s;
}

SignalSpec& SignalSpec::add(const SignalSpec& other)
{
    terms.insert(terms.end(), other.terms.begin(), other.terms.end());
    return *this;
}

double eval_signal(const SignalSpec& spec, double t)
{
    double v = 0.0;
    for (const auto& p : spec.terms) {
        switch (p.kind) {
            case SignalPrimitive::Kind::Constant:
                v += p.value;
                break;
            case SignalPrimitive::Kind::Sine:
                v += p.value * std::sin(p.omega * t + p.phase) + p.offset;
                break;
            case SignalPrimitive::Kind::Step:
                v += t >= p.onset ? p.value : 0.0;
                break;
        }
    }
    return v;
}

namespace {

constexpr double kOverflowGuard = 1e12;

std::optional<double> hold_time(const std::vector<double>& times, const std::vector<double>& norms,
                                double tol, int width)
{
    if (width == 0) return 0.0;  // empty block: trivially converged
    // Last sample at or above tol decides the hold start.
    for (size_t i = norms.size(); i-- > 0;) {
        if (norms[i] >= tol) {
            if (i + 1 >= norms.size()) return std::nullopt;
            return times[i + 1];
        }
    }
    return times.empty() ? std::nullopt : std::optional<double>(times.front());
}

}  // namespace

TrajectoryRecord simulate(const SimulationScenario& sc)
{
    const auto& sys = sc.system;
    const auto& obs = sc.observer;
    const int n = sys.n(), m = sys.m();
    if (sc.dt <= 0.0 || sc.dt > sc.horizon)
        throw std::invalid_argument("simulate: need 0 < dt <= horizon");
    if (static_cast<int>(sc.inputs.size()) != m)
        throw std::invalid_argument("simulate: one input signal per input component required");
    if (sc.x0.size() != n) throw std::invalid_argument("simulate: x0 size");
    if (sc.xhat0.size() != obs.dim) throw std::invalid_argument("simulate: xhat0 size");
    const auto& scb = obs.scb;
    if (scb.n() != n) throw std::invalid_argument("simulate: observer built for another system");

    const MatrixXd To_inv = scb.To.partialPivLu().inverse();
    const MatrixXd Ts_inv = scb.Ts.partialPivLu().inverse();
    const bool euler = sc.force_euler || obs.has_discontinuous_channel();

    auto input_at = [&](double t) {
        VectorXd u(m);
        for (int j = 0; j < m; ++j) u(j) = eval_signal(sc.inputs[j], t);
        return u;
    };
    auto ybar_of = [&](const VectorXd& x, const VectorXd& u) {
        return VectorXd(To_inv * (sys.C * x + sys.D * u));
    };
    // Joint right-hand side over (x, xi).
    auto rhs = [&](double t, const VectorXd& x, const VectorXd& xi, VectorXd& dx, VectorXd& dxi) {
        VectorXd u = input_at(t);
        dx = sys.A * x + sys.B * u;
        dxi = obs.derivative(xi, ybar_of(x, u));
    };

    const auto steps = static_cast<long>(std::llround(sc.horizon / sc.dt));
    const int dec = std::max(1, sc.decimation);
    const long samples = steps / dec + 1 + (steps % dec != 0 ? 1 : 0);

    TrajectoryRecord rec;
    rec.na = scb.na;
    rec.nb = scb.nb;
    rec.nd = scb.nd;
    rec.convergence_tol = sc.convergence_tol;
    rec.times.reserve(samples);
    rec.x.resize(samples, n);
    rec.xhat.resize(samples, n);
    rec.ea.resize(samples, scb.na);
    rec.eb.resize(samples, scb.nb);
    rec.ed.resize(samples, scb.nd);

    VectorXd x = sc.x0, xi = sc.xhat0;
    long row = 0;
    auto record = [&](double t) {
        VectorXd u = input_at(t);
        VectorXd yb = ybar_of(x, u);
        VectorXd est = obs.estimate(xi, yb);  // (x̂_a, x̂_b, x̂_d)
        VectorXd xbar = Ts_inv * x;
        VectorXd est_full = VectorXd::Zero(n);
        est_full.head(scb.na + scb.nb) = est.head(scb.na + scb.nb);
        est_full.tail(scb.nd) = est.tail(scb.nd);
        rec.times.push_back(t);
        rec.x.row(row) = x.transpose();
        rec.xhat.row(row) = (scb.Ts * est_full).transpose();
        rec.ea.row(row) = (xbar.head(scb.na) - est.head(scb.na)).transpose();
        rec.eb.row(row) = (xbar.segment(scb.na, scb.nb) - est.segment(scb.na, scb.nb)).transpose();
        rec.ed.row(row) =
            (xbar.segment(scb.na + scb.nb + scb.nc, scb.nd) - est.tail(scb.nd)).transpose();
        rec.norm_a.push_back(scb.na ? rec.ea.row(row).cwiseAbs().maxCoeff() : 0.0);
        rec.norm_b.push_back(scb.nb ? rec.eb.row(row).cwiseAbs().maxCoeff() : 0.0);
        rec.norm_d.push_back(scb.nd ? rec.ed.row(row).cwiseAbs().maxCoeff() : 0.0);
        ++row;
    };

    VectorXd dx(n), dxi(obs.dim);
    VectorXd k1x(n), k1o(obs.dim), k2x(n), k2o(obs.dim), k3x(n), k3o(obs.dim), k4x(n),
        k4o(obs.dim);
    record(0.0);
    for (long step = 0; step < steps; ++step) {
        double t = step * sc.dt;
        if (euler) {
            rhs(t, x, xi, dx, dxi);
            x += sc.dt * dx;
            xi += sc.dt * dxi;
        } else {
            rhs(t, x, xi, k1x, k1o);
            rhs(t + 0.5 * sc.dt, x + 0.5 * sc.dt * k1x, xi + 0.5 * sc.dt * k1o, k2x, k2o);
            rhs(t + 0.5 * sc.dt, x + 0.5 * sc.dt * k2x, xi + 0.5 * sc.dt * k2o, k3x, k3o);
            rhs(t + sc.dt, x + sc.dt * k3x, xi + sc.dt * k3o, k4x, k4o);
            x += sc.dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            xi += sc.dt / 6.0 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o);
        }
        bool finite = x.allFinite() && xi.allFinite() &&
                      (n == 0 || x.cwiseAbs().maxCoeff() < kOverflowGuard) &&
                      (obs.dim == 0 || xi.cwiseAbs().maxCoeff() < kOverflowGuard);
        if (!finite)
            throw NonFiniteState("simulate: state exceeded the overflow guard at t = " +
                                 std::to_string(t + sc.dt));
        if ((step + 1) % dec == 0 || step + 1 == steps) record((step + 1) * sc.dt);
    }
    rec.x.conservativeResize(row, Eigen::NoChange);
    rec.xhat.conservativeResize(row, Eigen::NoChange);
    rec.ea.conservativeResize(row, Eigen::NoChange);
    rec.eb.conservativeResize(row, Eigen::NoChange);
    rec.ed.conservativeResize(row, Eigen::NoChange);

    rec.conv_a = convergence_time(rec, 'a', sc.convergence_tol);
    rec.conv_b = convergence_time(rec, 'b', sc.convergence_tol);
    rec.conv_d = convergence_time(rec, 'd', sc.convergence_tol);
    return rec;
}

std::optional<double> convergence_time(const TrajectoryRecord& rec, char block, double tol)
{
    if (tol <= 0.0) throw std::invalid_argument("convergence_time: tol must be positive");
    switch (block) {
        case 'a':
            return hold_time(rec.times, rec.norm_a, tol, rec.na);
        case 'b':
            return hold_time(rec.times, rec.norm_b, tol, rec.nb);
        case 'd':
            return hold_time(rec.times, rec.norm_d, tol, rec.nd);
        default:
            throw std::invalid_argument("convergence_time: block must be a, b or d");
    }
}

void export_csv(const TrajectoryRecord& rec, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_csv: cannot open " + path);
    out.precision(17);
    const int n = static_cast<int>(rec.x.cols());
    out << "t";
    for (int i = 1; i <= n; ++i) out << ",x_" << i;
    for (int i = 1; i <= n; ++i) out << ",xhat_" << i;
    for (int i = 1; i <= rec.na; ++i) out << ",ea_" << i;
    for (int i = 1; i <= rec.nb; ++i) out << ",eb_" << i;
    for (int i = 1; i <= rec.nd; ++i) out << ",ed_" << i;
    out << "\n";
    for (size_t r = 0; r < rec.times.size(); ++r) {
        out << rec.times[r];
        for (int i = 0; i < n; ++i) out << "," << rec.x(r, i);
        for (int i = 0; i < n; ++i) out << "," << rec.xhat(r, i);
        for (int i = 0; i < rec.na; ++i) out << "," << rec.ea(r, i);
        for (int i = 0; i < rec.nb; ++i) out << "," << rec.eb(r, i);
        for (int i = 0; i < rec.nd; ++i) out << "," << rec.ed(r, i);
        out << "\n";
    }
    if (!out) throw std::runtime_error("export_csv: write failed for " + path);
}

}  // namespace uio::sim
