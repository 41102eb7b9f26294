#include "uio/observer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace uio::observer {

namespace {

// Standard robust-exact-differentiator gain ladder, indexed from the last
// stage backwards.
constexpr double kLambda[6] = {1.1, 1.5, 2.0, 3.0, 5.0, 8.0};

void check_channel_count(const std::vector<InjectionChannel>& channels,
                         const std::vector<int>& lengths, const std::string& what)
{
    if (channels.size() != lengths.size())
        throw ChannelShapeMismatch(what + ": expected " + std::to_string(lengths.size()) +
                                   " channels, got " + std::to_string(channels.size()));
    for (size_t i = 0; i < channels.size(); ++i) {
        if (channels[i].order != lengths[i])
            throw ChannelShapeMismatch(what + ": channel " + std::to_string(i) + " order " +
                                       std::to_string(channels[i].order) + " != chain length " +
                                       std::to_string(lengths[i]));
        if (channels[i].gains.size() != lengths[i])
            throw ChannelShapeMismatch(what + ": channel " + std::to_string(i) +
                                       " gain count mismatch");
    }
}

void check_continuous_params(const InjectionChannel& ch, const std::string& what)
{
    bool ok = ch.mu > 0.0 && ch.mu < 1.0 && ch.d0 > -1.0 && ch.d0 <= ch.d_inf &&
              (ch.order <= 1 || ch.d_inf < 1.0 / (ch.order - 1));
    if (!ok) throw std::invalid_argument(what + ": continuous channel parameters out of range");
}

void check_discontinuous_params(const InjectionChannel& ch, const std::string& what)
{
    bool ok = ch.mu > 0.0 && ch.mu < 1.0 && ch.d0 == -1.0 && ch.d_inf >= -1.0 &&
              (ch.order <= 1 || ch.d_inf < 1.0 / (ch.order - 1));
    if (!ok) throw std::invalid_argument(what + ": discontinuous channel parameters out of range");
}

bool is_hurwitz(const MatrixXd& M)
{
    if (M.rows() == 0) return true;
    Eigen::EigenSolver<MatrixXd> eig(M);
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        if (eig.eigenvalues()(i).real() >= -analysis::kStabilityMargin) return false;
    return true;
}

// Monic polynomial coefficients (descending, without the leading 1) from its
// roots; imaginary parts cancel for self-conjugate sets.
std::vector<double> poly_from_roots(const std::vector<std::complex<double>>& roots)
{
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
        c.push_back(0.0);
        for (size_t i = c.size() - 1; i > 0; --i) c[i] = c[i] - r * c[i - 1];
    }
    std::vector<double> out;
    for (size_t i = 1; i < c.size(); ++i) out.push_back(c[i].real());
    return out;
}

}  // namespace

double signed_power(double z, double a)
{
    double s = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
    if (a == 0.0) return s;
    return s * std::pow(std::abs(z), a);
}

double moreno_phi(const InjectionChannel& ch, int i, double z)
{
    if (i < 1 || i > ch.order)
        throw std::invalid_argument("moreno_phi: stage index out of range");
    double w = z;
    for (int k = 1; k <= i; ++k) {
        double e0 = ch.r0(k + 1) / ch.r0(k);
        double einf = ch.rinf(k + 1) / ch.rinf(k);
        w = ch.mu * signed_power(w, e0) + (1.0 - ch.mu) * signed_power(w, einf);
    }
    return w;
}

InputBoundsScb transform_input_bounds(const InputBounds& bounds, const scb::ScbForm& scb)
{
    bounds.validate();
    if (bounds.u_min.size() != scb.m())
        throw std::invalid_argument("transform_input_bounds: bound size != input count");
    VectorXd uo = bounds.offset(), us = bounds.symmetric_part();
    InputBoundsScb out;
    out.delta_d = VectorXd::Zero(scb.md);
    for (int i = 0; i < scb.md; ++i) {
        double sym = 0.0, off = 0.0;
        for (int j = 0; j < scb.m(); ++j) {
            sym += std::abs(scb.Gd(i, j)) * us(j);
            off += scb.Gd(i, j) * uo(j);
        }
        out.delta_d(i) = sym + std::abs(off);
    }
    return out;
}

InputBoundsScb transform_input_bounds(const StateSpaceSystem& sys, const scb::ScbForm& scb)
{
    if (!sys.bounds) throw MissingBounds("transform_input_bounds: system carries no input bounds");
    return transform_input_bounds(*sys.bounds, scb);
}

VectorXd default_gains(int order, double delta, GainKind kind, double multiplier)
{
    if (order < 1) throw std::invalid_argument("default_gains: order must be positive");
    if (order > 6) throw UnsupportedOrder("default_gains: gain table covers orders up to 6");
    if (delta < 0.0) throw std::invalid_argument("default_gains: delta must be nonnegative");
    double d = kind == GainKind::SlidingMode ? delta : std::max(delta, 1.0);
    VectorXd g(order);
    for (int i = 1; i <= order; ++i) {
        double lam = kLambda[order - i];
        double root = 1.0 / static_cast<double>(order - i + 1);
        double val = lam * std::pow(d, root);
        if (i > 1) val *= std::pow(g(i - 2), (order - i) * root);
        g(i - 1) = val;
    }
    return multiplier * g;
}

VectorXd ObserverRealization::derivative(const VectorXd& xi, const VectorXd& ybar) const
{
    VectorXd dxi = M * xi + N * ybar;
    for (const auto& ch : channels) {
        double e = ybar(ch.output_index) - xi(ch.state_offset);
        for (int j = 1; j <= ch.order; ++j)
            dxi(ch.state_offset + j - 1) += ch.gains(j - 1) * moreno_phi(ch, j, e);
    }
    return dxi;
}

VectorXd ObserverRealization::estimate(const VectorXd& xi, const VectorXd& ybar) const
{
    return T_out * xi + D_out * ybar;
}

bool ObserverRealization::has_discontinuous_channel() const
{
    for (const auto& ch : channels)
        if (ch.d0 <= -1.0 || ch.d_inf <= -1.0) return true;
    return false;
}

ObserverRealization build_sigma_a_observer(const scb::ScbForm& scb)
{
    if (scb.na == 0) throw EmptySubsystem("build_sigma_a_observer: n_a = 0");
    ObserverRealization r;
    r.kind = ObserverKind::TrivialA;
    r.dim = scb.na;
    r.scb = scb;
    r.M = scb.Aaa;
    r.N = MatrixXd::Zero(scb.na, scb.p());
    r.N.leftCols(scb.m0) = scb.B0a;
    r.N.middleCols(scb.m0, scb.md) = scb.Had;
    r.N.rightCols(scb.pb) = scb.Hab;
    r.L = MatrixXd(scb.na, 0);
    r.T_out = MatrixXd::Identity(scb.na, scb.na);
    r.D_out = MatrixXd::Zero(scb.na, scb.p());
    return r;
}

MatrixXd place_lb(const scb::ScbForm& scb, const std::vector<std::complex<double>>& poles)
{
    const int nb = scb.nb, pbn = scb.pb;
    if (nb == 0) throw EmptySubsystem("place_lb: n_b = 0");
    if (static_cast<int>(poles.size()) != nb)
        throw PoleCountMismatch("place_lb: expected " + std::to_string(nb) + " poles");
    for (const auto& s : poles)
        if (s.real() >= 0.0)
            throw UnstablePoleRequested("place_lb: pole with nonnegative real part");

    // Group into conjugate units, then fill chains without splitting a pair.
    std::vector<std::complex<double>> sorted = poles;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    std::vector<std::vector<std::complex<double>>> units;
    for (size_t i = 0; i < sorted.size();) {
        if (std::abs(sorted[i].imag()) < 1e-12) {
            units.push_back({std::complex<double>(sorted[i].real(), 0.0)});
            ++i;
        } else {
            if (i + 1 >= sorted.size() || std::abs(sorted[i + 1] - std::conj(sorted[i])) > 1e-9)
                throw PoleCountMismatch("place_lb: pole set is not self-conjugate");
            units.push_back({sorted[i], sorted[i + 1]});
            i += 2;
        }
    }
    std::vector<std::vector<std::complex<double>>> per_chain(pbn);
    for (int c = 0; c < pbn; ++c) {
        int cap = scb.l[c];
        while (cap > 0) {
            int pick = -1;
            for (size_t u = 0; u < units.size(); ++u)
                if (static_cast<int>(units[u].size()) <= cap) {
                    pick = static_cast<int>(u);
                    break;
                }
            if (pick < 0)
                throw PoleCountMismatch(
                    "place_lb: conjugate pair cannot be split across chains");
            for (const auto& s : units[pick]) per_chain[c].push_back(s);
            cap -= static_cast<int>(units[pick].size());
            units.erase(units.begin() + pick);
        }
    }

    // Companion coefficients per chain: with the chain shift structure the
    // injected first column becomes the characteristic polynomial directly.
    MatrixXd Lstar = MatrixXd::Zero(nb, pbn);
    for (int c = 0; c < pbn; ++c) {
        auto coeffs = poly_from_roots(per_chain[c]);
        for (int j = 0; j < scb.l[c]; ++j) Lstar(scb.head_b(c) + j, c) = coeffs[j];
    }
    MatrixXd Lb = scb.Hbb + Lstar;

    Eigen::EigenSolver<MatrixXd> eig(scb.Ab - Lb * scb.Cb);
    std::vector<std::complex<double>> got;
    for (int i = 0; i < nb; ++i) got.push_back(eig.eigenvalues()(i));
    auto key = [](const std::complex<double>& a, const std::complex<double>& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    };
    std::sort(got.begin(), got.end(), key);
    for (int i = 0; i < nb; ++i)
        if (std::abs(got[i] - sorted[i]) > 1e-6 * (1.0 + std::abs(sorted[i])))
            throw NumericalDegeneracy("place_lb: eigenvalue post-check failed");
    return Lb;
}

ObserverRealization build_sigma_b_observer(const scb::ScbForm& scb, const MatrixXd& Lb)
{
    if (scb.nb == 0) throw EmptySubsystem("build_sigma_b_observer: n_b = 0");
    if (Lb.rows() != scb.nb || Lb.cols() != scb.pb)
        throw std::invalid_argument("build_sigma_b_observer: L_b dimensions");
    ObserverRealization r;
    r.kind = ObserverKind::LinearB;
    r.dim = scb.nb;
    r.scb = scb;
    r.M = scb.Ab - Lb * scb.Cb;
    r.N = MatrixXd::Zero(scb.nb, scb.p());
    r.N.leftCols(scb.m0) = scb.B0b;
    r.N.middleCols(scb.m0, scb.md) = scb.Hbd;
    r.N.rightCols(scb.pb) = Lb;
    r.L = Lb;
    r.T_out = MatrixXd::Identity(scb.nb, scb.nb);
    r.D_out = MatrixXd::Zero(scb.nb, scb.p());
    return r;
}

ObserverRealization build_sigma_b_observer(const scb::ScbForm& scb,
                                           const std::vector<InjectionChannel>& channels)
{
    if (scb.nb == 0) throw EmptySubsystem("build_sigma_b_observer: n_b = 0");
    check_channel_count(channels, scb.l, "build_sigma_b_observer");
    ObserverRealization r;
    r.kind = ObserverKind::CbhoB;
    r.dim = scb.nb;
    r.scb = scb;
    r.M = scb.Ab_star;
    r.N = MatrixXd::Zero(scb.nb, scb.p());
    r.N.leftCols(scb.m0) = scb.B0b;
    r.N.middleCols(scb.m0, scb.md) = scb.Hbd;
    r.N.rightCols(scb.pb) = scb.Hbb;
    r.L = MatrixXd(scb.nb, 0);
    r.T_out = MatrixXd::Identity(scb.nb, scb.nb);
    r.D_out = MatrixXd::Zero(scb.nb, scb.p());
    r.channels = channels;
    for (int i = 0; i < scb.pb; ++i) {
        check_continuous_params(r.channels[i], "build_sigma_b_observer");
        r.channels[i].output_index = scb.m0 + scb.md + i;
        r.channels[i].state_offset = scb.head_b(i);
    }
    return r;
}

namespace {

void require_unit_chains(const scb::ScbForm& scb, const std::string& what)
{
    for (int qi : scb.q)
        if (qi != 1)
            throw RequiresStrongStar(what + ": chain of length " + std::to_string(qi) +
                                     " needs output derivatives; requires all q_i = 1");
}

MatrixXd yd_selector(const scb::ScbForm& scb)
{
    MatrixXd S = MatrixXd::Zero(scb.nd, scb.p());
    for (int i = 0; i < scb.md; ++i) S(i, scb.m0 + i) = 1.0;  // q_i = 1: nd == md
    return S;
}

ObserverRealization build_sigma_d_nonlinear(const scb::ScbForm& scb,
                                            const std::vector<InjectionChannel>& channels,
                                            const InputBoundsScb& bounds, ObserverKind kind)
{
    const std::string what =
        kind == ObserverKind::SmoD ? "build_sigma_d_smo" : "build_sigma_d_dbho";
    if (scb.nd == 0) throw EmptySubsystem(what + ": n_d = 0");
    if (bounds.delta_d.size() != scb.md)
        throw MissingBounds(what + ": transformed input bounds missing or wrongly sized");
    check_channel_count(channels, scb.q, what);
    ObserverRealization r;
    r.kind = kind;
    r.dim = scb.nd;
    r.scb = scb;
    r.M = scb.Ad_star + scb.Bd * scb.Fdd;
    r.N = MatrixXd::Zero(scb.nd, scb.p());
    r.N.leftCols(scb.m0) = scb.B0d;
    r.N.middleCols(scb.m0, scb.md) = scb.Hdd;
    r.L = MatrixXd(scb.nd, 0);
    r.T_out = MatrixXd::Identity(scb.nd, scb.nd);
    r.D_out = MatrixXd::Zero(scb.nd, scb.p());
    r.couple_a = scb.Bd * scb.Fda;
    r.couple_b = scb.Bd * scb.Fdb;
    r.channels = channels;
    for (int i = 0; i < scb.md; ++i) {
        if (kind == ObserverKind::SmoD) {
            if (r.channels[i].d0 != -1.0 || r.channels[i].d_inf != -1.0)
                throw std::invalid_argument(what + ": sliding-mode channels need d0=d_inf=-1");
        } else {
            check_discontinuous_params(r.channels[i], what);
        }
        r.channels[i].output_index = scb.m0 + i;
        r.channels[i].state_offset = scb.head_d(i);
    }
    return r;
}

}  // namespace

ObserverRealization build_sigma_d_reduced(const scb::ScbForm& scb)
{
    if (scb.nd == 0) throw EmptySubsystem("build_sigma_d_reduced: n_d = 0");
    require_unit_chains(scb, "build_sigma_d_reduced");
    ObserverRealization r;
    r.kind = ObserverKind::LinearReducedD;
    r.dim = 0;
    r.scb = scb;
    r.M = MatrixXd(0, 0);
    r.N = MatrixXd(0, scb.p());
    r.L = MatrixXd(0, 0);
    r.T_out = MatrixXd(scb.nd, 0);
    r.D_out = yd_selector(scb);
    return r;
}

ObserverRealization build_sigma_d_fullorder(const scb::ScbForm& scb, const MatrixXd& F)
{
    if (scb.nd == 0) throw EmptySubsystem("build_sigma_d_fullorder: n_d = 0");
    require_unit_chains(scb, "build_sigma_d_fullorder");
    if (F.rows() != scb.nd || F.cols() != scb.nd)
        throw std::invalid_argument("build_sigma_d_fullorder: F dimensions");
    if (!is_hurwitz(F))
        throw std::invalid_argument("build_sigma_d_fullorder: F must be Hurwitz");
    ObserverRealization r;
    r.kind = ObserverKind::LinearFullOrderD;
    r.dim = scb.nd;
    r.scb = scb;
    r.M = F;
    r.N = MatrixXd::Zero(scb.nd, scb.p());
    r.L = F;
    r.T_out = MatrixXd::Identity(scb.nd, scb.nd);
    r.D_out = yd_selector(scb);
    return r;
}

ObserverRealization build_sigma_d_smo(const scb::ScbForm& scb,
                                      const std::vector<InjectionChannel>& channels,
                                      const InputBoundsScb& bounds)
{
    return build_sigma_d_nonlinear(scb, channels, bounds, ObserverKind::SmoD);
}

ObserverRealization build_sigma_d_dbho(const scb::ScbForm& scb,
                                       const std::vector<InjectionChannel>& channels,
                                       const InputBoundsScb& bounds)
{
    return build_sigma_d_nonlinear(scb, channels, bounds, ObserverKind::DbhoD);
}

ObserverPlan recommend(const analysis::StructuralProfile& profile, const scb::ScbForm& scb,
                       Goal goal)
{
    if (!profile.strongly_detectable)
        throw NotStronglyDetectable(
            "recommend: strong detectability is the minimum requirement for state estimation");
    ObserverPlan plan;
    plan.requested = goal;
    plan.achieved = goal;
    plan.use_a = scb.na > 0;
    if (plan.use_a && goal != Goal::Asymptotic) {
        plan.achieved = Goal::Asymptotic;
        plan.note = "zero dynamics present: overall guarantee downgraded to asymptotic";
    }
    if (scb.nb > 0) {
        plan.b_mode =
            goal == Goal::Asymptotic ? ObserverKind::LinearB : ObserverKind::CbhoB;
        if (*plan.b_mode == ObserverKind::LinearB && goal != Goal::Asymptotic)
            plan.achieved = Goal::Asymptotic;
    }
    if (scb.nd > 0) {
        bool star = strong_star_from_scb(scb);
        if (star) {
            plan.d_mode = ObserverKind::LinearReducedD;  // exact static reconstruction
        } else if (goal == Goal::FixedTime) {
            plan.d_mode = ObserverKind::DbhoD;
        } else {
            plan.d_mode = ObserverKind::SmoD;  // finite-time chains
        }
    }
    return plan;
}

ObserverRealization assemble(const scb::ScbForm& scb,
                             const std::optional<ObserverRealization>& part_a,
                             const std::optional<ObserverRealization>& part_b,
                             const std::optional<ObserverRealization>& part_d)
{
    if (scb.nc != 0)
        throw NotStronglyDetectable("assemble: nonzero c-subsystem admits no observer");
    if (scb.na > 0 && !part_a) throw MissingPart("assemble: a-part missing");
    if (scb.nb > 0 && !part_b) throw MissingPart("assemble: b-part missing");
    if (scb.nd > 0 && !part_d) throw MissingPart("assemble: d-part missing");

    const int p = scb.p();
    const int da = part_a ? part_a->dim : 0;
    const int db = part_b ? part_b->dim : 0;
    const int dd = part_d ? part_d->dim : 0;
    ObserverRealization r;
    r.kind = ObserverKind::Composite;
    r.dim = da + db + dd;
    r.scb = scb;
    r.off_a = 0;
    r.off_b = da;
    r.off_d = da + db;
    r.M = MatrixXd::Zero(r.dim, r.dim);
    r.N = MatrixXd::Zero(r.dim, p);
    r.L = MatrixXd(r.dim, 0);
    r.T_out = MatrixXd::Zero(scb.n(), r.dim);
    r.D_out = MatrixXd::Zero(scb.n(), p);

    auto place = [&](const ObserverRealization& part, int off, int est_row, int est_rows) {
        r.M.block(off, off, part.dim, part.dim) = part.M;
        r.N.middleRows(off, part.dim) = part.N;
        r.T_out.block(est_row, off, est_rows, part.dim) = part.T_out;
        r.D_out.middleRows(est_row, est_rows) = part.D_out;
        for (auto ch : part.channels) {
            ch.state_offset += off;
            r.channels.push_back(ch);
        }
    };
    if (part_a) place(*part_a, r.off_a, 0, scb.na);
    if (part_b) place(*part_b, r.off_b, scb.na, scb.nb);
    if (part_d) place(*part_d, r.off_d, scb.na + scb.nb, scb.nd);

    // Resolve the d-observer coupling feeds against the a/b estimates.
    if (part_d && part_d->couple_a.size() > 0 && part_a) {
        r.M.block(r.off_d, r.off_a, dd, da) += part_d->couple_a * part_a->T_out;
        r.N.middleRows(r.off_d, dd) += part_d->couple_a * part_a->D_out;
    }
    if (part_d && part_d->couple_b.size() > 0 && part_b) {
        r.M.block(r.off_d, r.off_b, dd, db) += part_d->couple_b * part_b->T_out;
        r.N.middleRows(r.off_d, dd) += part_d->couple_b * part_b->D_out;
    }
    return r;
}

ObserverRealization build_from_plan(const scb::ScbForm& scb, const ObserverPlan& plan,
                                    const std::optional<InputBounds>& bounds,
                                    const SynthesisOptions& opts)
{
    std::optional<ObserverRealization> pa, pb, pd;
    if (plan.use_a) pa = build_sigma_a_observer(scb);

    if (plan.b_mode) {
        if (*plan.b_mode == ObserverKind::LinearB) {
            std::vector<std::complex<double>> poles = opts.b_poles;
            if (poles.empty())
                for (int i = 0; i < scb.nb; ++i) poles.emplace_back(-3.0 - i, 0.0);
            pb = build_sigma_b_observer(scb, place_lb(scb, poles));
        } else {
            int lmax = *std::max_element(scb.l.begin(), scb.l.end());
            double dinf = opts.cbho_dinf > 0.0
                              ? opts.cbho_dinf
                              : (lmax > 1 ? std::min(0.9 / (lmax - 1), 0.25) : 0.25);
            std::vector<InjectionChannel> chs;
            for (int li : scb.l) {
                InjectionChannel ch;
                ch.order = li;
                ch.mu = opts.mu;
                ch.d0 = opts.cbho_d0;
                ch.d_inf = dinf;
                ch.gains = default_gains(li, 1.0, GainKind::ContinuousBihomogeneous,
                                         opts.gain_multiplier);
                chs.push_back(ch);
            }
            pb = build_sigma_b_observer(scb, chs);
        }
    }

    if (plan.d_mode) {
        switch (*plan.d_mode) {
            case ObserverKind::LinearReducedD:
                pd = build_sigma_d_reduced(scb);
                break;
            case ObserverKind::LinearFullOrderD: {
                MatrixXd F = opts.fullorder_F.size() > 0
                                 ? opts.fullorder_F
                                 : MatrixXd(-MatrixXd::Identity(scb.nd, scb.nd));
                pd = build_sigma_d_fullorder(scb, F);
                break;
            }
            case ObserverKind::SmoD:
            case ObserverKind::DbhoD: {
                if (!bounds)
                    throw MissingBounds("build_from_plan: sliding-mode route needs input bounds");
                auto delta = transform_input_bounds(*bounds, scb);
                int qmax = *std::max_element(scb.q.begin(), scb.q.end());
                bool dbho = *plan.d_mode == ObserverKind::DbhoD;
                double dinf = dbho ? (opts.dbho_dinf > 0.0
                                          ? opts.dbho_dinf
                                          : (qmax > 1 ? std::min(0.9 / (qmax - 1), 0.25) : 0.25))
                                   : -1.0;
                std::vector<InjectionChannel> chs;
                for (int i = 0; i < scb.md; ++i) {
                    InjectionChannel ch;
                    ch.order = scb.q[i];
                    ch.mu = opts.mu;
                    ch.d0 = -1.0;
                    ch.d_inf = dinf;
                    ch.gains = default_gains(
                        scb.q[i], delta.delta_d(i),
                        dbho ? GainKind::DiscontinuousBihomogeneous : GainKind::SlidingMode,
                        opts.gain_multiplier);
                    chs.push_back(ch);
                }
                pd = dbho ? build_sigma_d_dbho(scb, chs, delta)
                          : build_sigma_d_smo(scb, chs, delta);
                break;
            }
            default:
                throw std::invalid_argument("build_from_plan: unsupported d-mode");
        }
    }
    return assemble(scb, pa, pb, pd);
}

}  // namespace uio::observer
