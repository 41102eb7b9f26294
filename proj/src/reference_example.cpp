#include "uio/reference_example.hpp"

#include <cmath>

namespace uio::reference_example {

StateSpaceSystem system()
{
    StateSpaceSystem sys;
    sys.A = MatrixXd(8, 8);
    sys.A << -4, 6, -5, 11, 8, -5, 22, 0,
        -3, 0, 2, -2, -1, 1, -3, -12,
        -3, -2, 3, -9, -2, 6, -8, -2,
        0, 0, 0, -2, 1, 0, -2, 0,
        3, 0, -1, 3, 1, 0, 4, 11,
        3, 1, -4, 6, 1, -7, 3, 2,
        0, 0, 0, -1, 0, 0, -1, 1,
        -3, 0, 1, -5, -1, 1, -7, -10;
    sys.B = MatrixXd(8, 2);
    sys.B << 0, -2,
        0, 1,
        -1, 1,
        0, 0,
        0, -1,
        1, -1,
        0, 0,
        0, 1;
    sys.C = MatrixXd(3, 8);
    sys.C << 0, 0, 0, 1, 0, 0, 1, 0,
        0, 0, 0, 0, 0, 0, 1, 0,
        0, -2, 1, 0, -2, 1, -2, 0;
    sys.D = MatrixXd::Zero(3, 2);
    InputBounds b;
    b.u_min = VectorXd(2);
    b.u_min << -2, 0;
    b.u_max = VectorXd(2);
    b.u_max << 1, 1;
    sys.bounds = b;
    return sys;
}

PublishedDecomposition published()
{
    PublishedDecomposition d;
    MatrixXd Ts_inv(8, 8);
    Ts_inv << -1, -0.3297, 0.0330, 5.6804, -1.0328, 0, 3.7947, -1.2649,
        0, -0.2857, -0.1429, 0.7746, -0.7746, 0, -2.2136, 0.6325,
        0, 0.4286, -0.2857, -11.8771, 4.6476, -1.2910, -0.3162, 0.9487,
        0, 0, 0, 0.7746, 0, 0, -0.6325, 0,
        0, 0, 0, -1.2910, 0.7746, 0, 1.5811, -0.6325,
        0, 0, 0, 11.8771, -4.6476, 1.2910, 0.3162, -0.9487,
        0, 0, 0, 0.5164, 0, 0, 0.6325, 0,
        0, 0, 0, -2.8402, 0.5164, 0, -1.8974, 0.6325;
    d.Ts = Ts_inv.inverse();
    d.Ti = MatrixXd(2, 2);
    d.Ti << 1.2910, -0.3162, 0, 0.6325;
    d.To_inv = MatrixXd(3, 3);
    d.To_inv << 0.7746, 0, 0, -0.6325, 1.5811, 0, 0, 0, 1;
    d.Aaa = MatrixXd(1, 1);
    d.Aaa << -10;
    d.Ab = MatrixXd(2, 2);
    d.Ab << -1, 1, -1, 0;
    d.Cb = MatrixXd(1, 2);
    d.Cb << 1, 0;
    d.Hab = MatrixXd::Zero(1, 1);
    d.Had = MatrixXd(1, 2);
    d.Had << -0.0709, -0.3823;
    d.Hbd = MatrixXd(2, 2);
    d.Hbd << -4.3894, -0.6325, 8.7788, 1.2649;
    d.Fda = MatrixXd(2, 1);
    d.Fda << 1.1619, 4.7434;
    d.Fdb = MatrixXd(2, 2);
    d.Fdb << -0.6682, 0.4043, 2.2414, -0.6081;
    d.Hdd = MatrixXd(5, 2);
    d.Hdd << -6.2, -0.2449,
        -15.6, -3.1843,
        -21.5, -4.899,
        -1.4697, -2.8,
        -11.3493, 0.6;
    d.Fdd = MatrixXd(2, 5);
    d.Fdd << 0, 0, 0, 0, 0, 0, 0, -0.8165, 0, 0;
    return d;
}

VectorXd published_delta_d()
{
    VectorXd delta(2);
    delta << 1.5492, 1.5811;
    return delta;
}

VectorXd published_lb()
{
    VectorXd lb(2);
    lb << 13, 47;
    return lb;
}

std::vector<std::vector<double>> published_kappa()
{
    const VectorXd delta = published_delta_d();
    const double d1 = delta(0), d2 = delta(1);
    return {
        {2.0 * std::cbrt(d1), 2.12 * std::pow(d1, 2.0 / 3.0), 1.1 * d1},
        {1.5 * std::sqrt(d2), 1.1 * d2},
    };
}

VectorXd published_x0()
{
    VectorXd x0(8);
    x0 << 1, -0.1, 2, -0.3, 0.5, 0.2, -0.5, -0.2;
    return x0;
}

VectorXd input_at(double t)
{
    VectorXd u(2);
    u(0) = 1.5 * std::sin(t) + 0.5;
    u(1) = (t >= 1.0 ? 1.0 : 0.0) - (t >= 4.0 ? 1.0 : 0.0);
    return u;
}

}  // namespace uio::reference_example
