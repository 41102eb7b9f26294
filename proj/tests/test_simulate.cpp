#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uio/reference_example.hpp"
#include "uio/simulate.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace uio;

namespace {

// Autonomous plant with no outputs observed through the trivial copy
// observer; the joint flow then has the closed form exp(At).
struct CopySetup {
    StateSpaceSystem sys;
    observer::ObserverRealization obs;
};

CopySetup copy_setup(const MatrixXd& A)
{
    const int n = static_cast<int>(A.rows());
    scb::ScbForm f;
    f.na = n;
    f.Aaa = A;
    f.Ts = MatrixXd::Identity(n, n);
    f.Ti = MatrixXd(0, 0);
    f.To = MatrixXd(0, 0);
    f.Hab = MatrixXd::Zero(n, 0);
    f.Had = MatrixXd::Zero(n, 0);
    f.B0a = MatrixXd::Zero(n, 0);
    CopySetup s;
    s.sys.A = A;
    s.sys.B = MatrixXd::Zero(n, 0);
    s.sys.C = MatrixXd::Zero(0, n);
    s.sys.D = MatrixXd::Zero(0, 0);
    s.obs = observer::build_sigma_a_observer(f);
    return s;
}

sim::SimulationScenario copy_scenario(const CopySetup& s, const VectorXd& x0,
                                      const VectorXd& xhat0)
{
    sim::SimulationScenario sc;
    sc.system = s.sys;
    sc.observer = s.obs;
    sc.x0 = x0;
    sc.xhat0 = xhat0;
    return sc;
}

}  // namespace

TEST_CASE("signal primitives and sums evaluate pointwise")
{
    auto c = sim::SignalSpec::constant(2.5);
    CHECK(sim::eval_signal(c, 0.0) == 2.5);
    CHECK(sim::eval_signal(c, 100.0) == 2.5);

    auto s = sim::SignalSpec::sine(1.5, 2.0, 0.25, 0.5);
    for (double t : {0.0, 0.3, 1.7})
        CHECK(sim::eval_signal(s, t) == doctest::Approx(1.5 * std::sin(2.0 * t + 0.25) + 0.5));

    auto st = sim::SignalSpec::step(-2.0, 1.0);
    CHECK(sim::eval_signal(st, 0.999) == 0.0);
    CHECK(sim::eval_signal(st, 1.0) == -2.0);
    CHECK(sim::eval_signal(st, 5.0) == -2.0);

    auto mix = sim::SignalSpec::step(1.0, 1.0);
    mix.add(sim::SignalSpec::step(-1.0, 4.0)).add(sim::SignalSpec::constant(0.25));
    CHECK(sim::eval_signal(mix, 0.0) == 0.25);
    CHECK(sim::eval_signal(mix, 2.0) == 1.25);
    CHECK(sim::eval_signal(mix, 4.5) == 0.25);
}

TEST_CASE("the linear flow matches the matrix exponential")
{
    std::mt19937_64 gen(21);
    MatrixXd A = random_gaussian(4, 4, gen);
    A -= 3.0 * MatrixXd::Identity(4, 4);  // push the spectrum left
    auto s = copy_setup(A);
    VectorXd x0 = random_gaussian(4, 1, gen), xh0 = random_gaussian(4, 1, gen);
    auto sc = copy_scenario(s, x0, xh0);
    sc.dt = 1e-3;
    sc.horizon = 2.0;
    auto rec = sim::simulate(sc);

    MatrixXd eAT = (2.0 * A).exp();
    VectorXd want_x = eAT * x0;
    CHECK((rec.x.row(rec.x.rows() - 1).transpose() - want_x).norm() < 1e-9);
    // The estimation error obeys the same flow.
    VectorXd want_e = eAT * (x0 - xh0);
    CHECK((rec.ea.row(rec.ea.rows() - 1).transpose() - want_e).norm() < 1e-9);
    CHECK(rec.times.front() == 0.0);
    CHECK(rec.times.back() == doctest::Approx(2.0));

    // Mid-trajectory sample too.
    size_t mid = rec.times.size() / 2;
    MatrixXd eAt = (rec.times[mid] * A).exp();
    CHECK((rec.x.row(mid).transpose() - eAt * x0).norm() < 1e-9);
}

TEST_CASE("explicit Euler halving shrinks the global error by the expected factor")
{
    std::mt19937_64 gen(23);
    MatrixXd A = random_gaussian(3, 3, gen) - 3.0 * MatrixXd::Identity(3, 3);
    auto s = copy_setup(A);
    VectorXd x0 = random_gaussian(3, 1, gen);
    VectorXd want = (1.0 * A).exp() * x0;

    auto run = [&](double dt) {
        auto sc = copy_scenario(s, x0, x0);
        sc.dt = dt;
        sc.horizon = 1.0;
        sc.force_euler = true;
        auto rec = sim::simulate(sc);
        return (rec.x.row(rec.x.rows() - 1).transpose() - want).norm();
    };
    double e1 = run(1e-3), e2 = run(5e-4);
    CHECK(e1 > 1e-8);  // first order: visible error at this step size
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("convergence time is the start of the final hold interval")
{
    sim::TrajectoryRecord rec;
    rec.times = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    rec.na = 1;
    rec.nb = 1;
    rec.nd = 0;
    rec.norm_a = {1.0, 0.5, 0.005, 0.02, 0.004, 0.003};  // re-excursion at t=0.3
    rec.norm_b = {1.0, 0.5, 0.2, 0.1, 0.05, 0.02};       // never below tol
    rec.norm_d = {};

    auto ca = sim::convergence_time(rec, 'a', 1e-2);
    REQUIRE(ca.has_value());
    CHECK(*ca == 0.4);
    CHECK_FALSE(sim::convergence_time(rec, 'b', 1e-2).has_value());
    // Empty block: trivially converged at once.
    auto cd = sim::convergence_time(rec, 'd', 1e-2);
    REQUIRE(cd.has_value());
    CHECK(*cd == 0.0);
    // Below tol from the first sample on.
    rec.norm_a = {0.001, 0.002, 0.001, 0.0, 0.0, 0.0};
    CHECK(*sim::convergence_time(rec, 'a', 1e-2) == 0.0);
    // Final sample at tol blocks convergence.
    rec.norm_a = {1.0, 0.5, 0.1, 0.05, 0.02, 0.01};
    CHECK_FALSE(sim::convergence_time(rec, 'a', 1e-2).has_value());

    CHECK_THROWS_AS(sim::convergence_time(rec, 'a', 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sim::convergence_time(rec, 'x', 1e-2), std::invalid_argument);
}

TEST_CASE("divergence trips the overflow guard")
{
    MatrixXd A(1, 1);
    A << 8.0;
    auto s = copy_setup(A);
    auto sc = copy_scenario(s, VectorXd::Ones(1), VectorXd::Zero(1));
    sc.dt = 1e-2;
    sc.horizon = 10.0;
    CHECK_THROWS_AS(sim::simulate(sc), sim::NonFiniteState);
}

TEST_CASE("decimation records every k-th step plus the endpoint")
{
    std::mt19937_64 gen(29);
    MatrixXd A = random_gaussian(2, 2, gen) - 2.0 * MatrixXd::Identity(2, 2);
    auto s = copy_setup(A);
    VectorXd x0 = random_gaussian(2, 1, gen);
    auto sc = copy_scenario(s, x0, x0);
    sc.dt = 1e-2;
    sc.horizon = 1.0;
    sc.decimation = 7;
    auto rec = sim::simulate(sc);
    REQUIRE(rec.times.size() >= 3);
    CHECK(rec.times.front() == 0.0);
    CHECK(rec.times.back() == doctest::Approx(1.0));
    for (size_t i = 1; i + 1 < rec.times.size(); ++i)
        CHECK(rec.times[i] == doctest::Approx(0.07 * i));

    // Decimated samples agree with the dense run at common times.
    auto dense_sc = copy_scenario(s, x0, x0);
    dense_sc.dt = 1e-2;
    dense_sc.horizon = 1.0;
    auto dense = sim::simulate(dense_sc);
    for (size_t i = 0; i < rec.times.size(); ++i) {
        size_t j = static_cast<size_t>(std::llround(rec.times[i] / 1e-2));
        CHECK((rec.x.row(i) - dense.x.row(j)).norm() == 0.0);
    }
}

TEST_CASE("csv export writes one row per sample with the full column set")
{
    std::mt19937_64 gen(31);
    MatrixXd A = random_gaussian(2, 2, gen) - 2.0 * MatrixXd::Identity(2, 2);
    auto s = copy_setup(A);
    auto sc = copy_scenario(s, random_gaussian(2, 1, gen), VectorXd::Zero(2));
    sc.dt = 1e-2;
    sc.horizon = 0.1;
    auto rec = sim::simulate(sc);

    std::string path = "/tmp/uio_test_traj.csv";
    sim::export_csv(rec, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x_1,x_2,xhat_1,xhat_2,ea_1,ea_2");
    size_t rows = 0;
    std::string line;
    double first_t = -1.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (rows == 0) {
            std::istringstream ss(line);
            ss >> first_t;
        }
        CHECK(std::count(line.begin(), line.end(), ',') == 6);
        ++rows;
    }
    CHECK(rows == rec.times.size());
    CHECK(first_t == 0.0);
    std::remove(path.c_str());

    CHECK_THROWS_AS(sim::export_csv(rec, "/nonexistent-dir/x.csv"), std::runtime_error);
}

TEST_CASE("scenario validation rejects inconsistent setups")
{
    std::mt19937_64 gen(37);
    MatrixXd A = random_gaussian(2, 2, gen) - 2.0 * MatrixXd::Identity(2, 2);
    auto s = copy_setup(A);
    auto good = copy_scenario(s, VectorXd::Zero(2), VectorXd::Zero(2));
    good.dt = 1e-2;
    good.horizon = 0.1;

    auto sc = good;
    sc.dt = 0.0;
    CHECK_THROWS_AS(sim::simulate(sc), std::invalid_argument);
    sc = good;
    sc.dt = 1.0;  // larger than the horizon
    CHECK_THROWS_AS(sim::simulate(sc), std::invalid_argument);
    sc = good;
    sc.inputs.push_back(sim::SignalSpec::constant(0.0));
    CHECK_THROWS_AS(sim::simulate(sc), std::invalid_argument);
    sc = good;
    sc.x0 = VectorXd::Zero(3);
    CHECK_THROWS_AS(sim::simulate(sc), std::invalid_argument);
    sc = good;
    sc.xhat0 = VectorXd::Zero(5);
    CHECK_THROWS_AS(sim::simulate(sc), std::invalid_argument);
}

TEST_CASE("the reference design converges under the published excitation")
{
    auto sys = reference_example::system();
    auto f = scb::triangularize_fdd(scb::to_scb(sys));
    auto prof = analysis::classify(sys);
    auto plan = observer::recommend(prof, f, observer::Goal::FiniteTime);
    plan.b_mode = observer::ObserverKind::LinearB;
    observer::SynthesisOptions opts;
    opts.b_poles = {{-8.0, 0.0}, {-6.0, 0.0}};
    auto obs = observer::build_from_plan(f, plan, sys.bounds, opts);
    REQUIRE(obs.has_discontinuous_channel());  // forces the Euler path

    sim::SimulationScenario sc;
    sc.system = sys;
    sc.observer = obs;
    sc.inputs = {sim::SignalSpec::sine(1.5, 1.0, 0.0, 0.5),
                 sim::SignalSpec::step(1.0, 1.0).add(sim::SignalSpec::step(-1.0, 4.0))};
    sc.x0 = reference_example::published_x0();
    sc.xhat0 = VectorXd::Zero(obs.dim);
    sc.dt = 1e-4;
    sc.horizon = 8.0;
    auto rec = sim::simulate(sc);

    REQUIRE(rec.conv_d.has_value());
    CHECK(*rec.conv_d < 8.0);
    REQUIRE(rec.conv_b.has_value());
    CHECK(*rec.conv_b < 3.0);
    REQUIRE(rec.conv_a.has_value());
    // Once the d-estimate locks, it stays locked to the end of the run.
    CHECK(rec.norm_d.back() < 1e-2);
}
