#include "uio/serialize.hpp"

#include <fstream>
#include <sstream>

namespace uio::serialize {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what)
{
    throw ConfigError("config error at " + path + ": " + what);
}

const Json& member(const Json& j, const char* key, const std::string& path)
{
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing field");
    return *it;
}

const Json* optional_member(const Json& j, const char* key, const std::string& path)
{
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
}

double as_double(const Json& j, const std::string& path)
{
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

int as_int(const Json& j, const std::string& path)
{
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

bool as_bool(const Json& j, const std::string& path)
{
    if (!j.is_boolean()) fail(path, "expected a boolean");
    return j.get<bool>();
}

std::string as_string(const Json& j, const std::string& path)
{
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

std::vector<int> int_list(const Json& j, const std::string& path)
{
    if (!j.is_array()) fail(path, "expected an array");
    std::vector<int> out;
    for (size_t i = 0; i < j.size(); ++i)
        out.push_back(as_int(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Json int_list_json(const std::vector<int>& v)
{
    return Json(v);
}

Json double_list_json(const std::vector<double>& v)
{
    return Json(v);
}

std::vector<double> double_list(const Json& j, const std::string& path)
{
    if (!j.is_array()) fail(path, "expected an array");
    std::vector<double> out;
    for (size_t i = 0; i < j.size(); ++i)
        out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Json complex_to_json(std::complex<double> z)
{
    return Json{{"re", z.real()}, {"im", z.imag()}};
}

std::complex<double> complex_from_json(const Json& j, const std::string& path)
{
    if (j.is_number()) return {j.get<double>(), 0.0};
    return {as_double(member(j, "re", path), path + ".re"),
            as_double(member(j, "im", path), path + ".im")};
}

std::string kind_name(observer::ObserverKind k)
{
    using K = observer::ObserverKind;
    switch (k) {
        case K::TrivialA: return "trivial_a";
        case K::LinearB: return "linear_b";
        case K::CbhoB: return "cbho_b";
        case K::LinearReducedD: return "reduced_d";
        case K::LinearFullOrderD: return "fullorder_d";
        case K::SmoD: return "smo_d";
        case K::DbhoD: return "dbho_d";
        case K::Composite: return "composite";
    }
    return "composite";
}

observer::ObserverKind kind_from_name(const std::string& s, const std::string& path)
{
    using K = observer::ObserverKind;
    if (s == "trivial_a") return K::TrivialA;
    if (s == "linear_b" || s == "linear") return K::LinearB;
    if (s == "cbho_b" || s == "cbho") return K::CbhoB;
    if (s == "reduced_d" || s == "reduced") return K::LinearReducedD;
    if (s == "fullorder_d" || s == "fullorder") return K::LinearFullOrderD;
    if (s == "smo_d" || s == "smo") return K::SmoD;
    if (s == "dbho_d" || s == "dbho") return K::DbhoD;
    if (s == "composite") return K::Composite;
    fail(path, "unknown observer kind '" + s + "'");
}

std::string goal_name(observer::Goal g)
{
    switch (g) {
        case observer::Goal::Asymptotic: return "asymptotic";
        case observer::Goal::FiniteTime: return "finite";
        case observer::Goal::FixedTime: return "fixed";
    }
    return "asymptotic";
}

observer::Goal goal_from_name(const std::string& s, const std::string& path)
{
    if (s == "asymptotic") return observer::Goal::Asymptotic;
    if (s == "finite") return observer::Goal::FiniteTime;
    if (s == "fixed") return observer::Goal::FixedTime;
    fail(path, "goal must be asymptotic, finite or fixed; got '" + s + "'");
}

}  // namespace

Json matrix_to_json(const MatrixXd& m)
{
    std::vector<double> data;
    data.reserve(static_cast<size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", double_list_json(data)}};
}

MatrixXd matrix_from_json(const Json& j, const std::string& path)
{
    // Convenience form: nested array of rows.
    if (j.is_array()) {
        const auto rows = static_cast<Eigen::Index>(j.size());
        if (rows == 0) return MatrixXd(0, 0);
        if (!j[0].is_array()) fail(path, "expected an array of rows");
        const auto cols = static_cast<Eigen::Index>(j[0].size());
        MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto& row = j[static_cast<size_t>(r)];
            const std::string rp = path + "[" + std::to_string(r) + "]";
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
                fail(rp, "expected " + std::to_string(cols) + " entries");
            for (Eigen::Index c = 0; c < cols; ++c)
                m(r, c) = as_double(row[static_cast<size_t>(c)],
                                    rp + "[" + std::to_string(c) + "]");
        }
        return m;
    }
    const int rows = as_int(member(j, "rows", path), path + ".rows");
    const int cols = as_int(member(j, "cols", path), path + ".cols");
    if (rows < 0 || cols < 0) fail(path, "negative shape");
    auto data = double_list(member(j, "data", path), path + ".data");
    if (static_cast<int>(data.size()) != rows * cols)
        fail(path + ".data", "expected " + std::to_string(rows * cols) + " entries, got " +
                                 std::to_string(data.size()));
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = data[static_cast<size_t>(r) * cols + c];
    return m;
}

Json vector_to_json(const VectorXd& v)
{
    return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

VectorXd vector_from_json(const Json& j, const std::string& path)
{
    auto data = double_list(j, path);
    return Eigen::Map<const VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

Json to_json(const InputBounds& b)
{
    return Json{{"u_min", vector_to_json(b.u_min)}, {"u_max", vector_to_json(b.u_max)}};
}

Json to_json(const StateSpaceSystem& sys)
{
    Json j{{"A", matrix_to_json(sys.A)},
           {"B", matrix_to_json(sys.B)},
           {"C", matrix_to_json(sys.C)},
           {"D", matrix_to_json(sys.D)}};
    if (sys.bounds) j["bounds"] = to_json(*sys.bounds);
    return j;
}

StateSpaceSystem system_from_json(const Json& j, const std::string& path)
{
    StateSpaceSystem sys;
    sys.A = matrix_from_json(member(j, "A", path), path + ".A");
    sys.B = matrix_from_json(member(j, "B", path), path + ".B");
    sys.C = matrix_from_json(member(j, "C", path), path + ".C");
    if (const Json* d = optional_member(j, "D", path))
        sys.D = matrix_from_json(*d, path + ".D");
    else
        sys.D = MatrixXd::Zero(sys.C.rows(), sys.B.cols());
    if (const Json* b = optional_member(j, "bounds", path)) {
        InputBounds ib;
        ib.u_min = vector_from_json(member(*b, "u_min", path + ".bounds"), path + ".bounds.u_min");
        ib.u_max = vector_from_json(member(*b, "u_max", path + ".bounds"), path + ".bounds.u_max");
        sys.bounds = ib;
    }
    try {
        sys.validate();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return sys;
}

Json to_json(const analysis::StructuralProfile& p)
{
    Json zeros = Json::array();
    for (const auto& z : p.invariant_zeros) {
        Json jz = complex_to_json(z.value);
        jz["multiplicity"] = z.multiplicity;
        zeros.push_back(jz);
    }
    return Json{{"normal_rank_P", p.normal_rank_P},
                {"normal_rank_G", p.normal_rank_G},
                {"invariant_zeros", zeros},
                {"m0", p.m0},
                {"left_invertible", p.left_invertible},
                {"strongly_observable", p.strongly_observable},
                {"strongly_detectable", p.strongly_detectable},
                {"strong_star_detectable", p.strong_star_detectable},
                {"minimum_phase", p.minimum_phase},
                {"dim_V_star", p.dim_V_star},
                {"dim_R_star", p.dim_R_star},
                {"V_star_basis", matrix_to_json(p.V_star_basis)},
                {"R_star_basis", matrix_to_json(p.R_star_basis)}};
}

Json to_json(const scb::ScbForm& f)
{
    Json j;
    j["Ts"] = matrix_to_json(f.Ts);
    j["Ti"] = matrix_to_json(f.Ti);
    j["To"] = matrix_to_json(f.To);
    j["q"] = int_list_json(f.q);
    j["l"] = int_list_json(f.l);
    j["na"] = f.na;
    j["nb"] = f.nb;
    j["nc"] = f.nc;
    j["nd"] = f.nd;
    j["m0"] = f.m0;
    j["md"] = f.md;
    j["mc"] = f.mc;
    j["pb"] = f.pb;
    auto put = [&](const char* name, const MatrixXd& m) { j[name] = matrix_to_json(m); };
    put("Aaa", f.Aaa);
    put("Hab", f.Hab);
    put("Had", f.Had);
    put("Ab", f.Ab);
    put("Ab_star", f.Ab_star);
    put("Hbb", f.Hbb);
    put("Hbd", f.Hbd);
    put("Cb", f.Cb);
    put("Ac", f.Ac);
    put("Bc", f.Bc);
    put("Fca", f.Fca);
    put("Hcb", f.Hcb);
    put("Hcd", f.Hcd);
    put("Ad_star", f.Ad_star);
    put("Bd", f.Bd);
    put("Cd", f.Cd);
    put("Fda", f.Fda);
    put("Fdb", f.Fdb);
    put("Fdc", f.Fdc);
    put("Fdd", f.Fdd);
    put("Hdd", f.Hdd);
    put("B0a", f.B0a);
    put("B0b", f.B0b);
    put("B0c", f.B0c);
    put("B0d", f.B0d);
    put("C0a", f.C0a);
    put("C0b", f.C0b);
    put("C0c", f.C0c);
    put("C0d", f.C0d);
    put("Gd", f.Gd);
    return j;
}

scb::ScbForm scb_from_json(const Json& j, const std::string& path)
{
    scb::ScbForm f;
    auto mat = [&](const char* name) {
        return matrix_from_json(member(j, name, path), path + "." + name);
    };
    f.Ts = mat("Ts");
    f.Ti = mat("Ti");
    f.To = mat("To");
    f.q = int_list(member(j, "q", path), path + ".q");
    f.l = int_list(member(j, "l", path), path + ".l");
    f.na = as_int(member(j, "na", path), path + ".na");
    f.nb = as_int(member(j, "nb", path), path + ".nb");
    f.nc = as_int(member(j, "nc", path), path + ".nc");
    f.nd = as_int(member(j, "nd", path), path + ".nd");
    f.m0 = as_int(member(j, "m0", path), path + ".m0");
    f.md = as_int(member(j, "md", path), path + ".md");
    f.mc = as_int(member(j, "mc", path), path + ".mc");
    f.pb = as_int(member(j, "pb", path), path + ".pb");
    f.Aaa = mat("Aaa");
    f.Hab = mat("Hab");
    f.Had = mat("Had");
    f.Ab = mat("Ab");
    f.Ab_star = mat("Ab_star");
    f.Hbb = mat("Hbb");
    f.Hbd = mat("Hbd");
    f.Cb = mat("Cb");
    f.Ac = mat("Ac");
    f.Bc = mat("Bc");
    f.Fca = mat("Fca");
    f.Hcb = mat("Hcb");
    f.Hcd = mat("Hcd");
    f.Ad_star = mat("Ad_star");
    f.Bd = mat("Bd");
    f.Cd = mat("Cd");
    f.Fda = mat("Fda");
    f.Fdb = mat("Fdb");
    f.Fdc = mat("Fdc");
    f.Fdd = mat("Fdd");
    f.Hdd = mat("Hdd");
    f.B0a = mat("B0a");
    f.B0b = mat("B0b");
    f.B0c = mat("B0c");
    f.B0d = mat("B0d");
    f.C0a = mat("C0a");
    f.C0b = mat("C0b");
    f.C0c = mat("C0c");
    f.C0d = mat("C0d");
    f.Gd = mat("Gd");
    return f;
}

Json to_json(const scb::ValidationReport& r)
{
    Json checks = Json::array();
    for (const auto& c : r.checks)
        checks.push_back(Json{{"name", c.name}, {"pass", c.pass}, {"residual", c.residual}});
    return Json{{"all_pass", r.all_pass()}, {"checks", checks}};
}

Json to_json(const observer::InjectionChannel& ch)
{
    return Json{{"order", ch.order},
                {"output_index", ch.output_index},
                {"state_offset", ch.state_offset},
                {"gains", vector_to_json(ch.gains)},
                {"mu", ch.mu},
                {"d0", ch.d0},
                {"d_inf", ch.d_inf}};
}

namespace {

observer::InjectionChannel channel_from_json(const Json& j, const std::string& path)
{
    observer::InjectionChannel ch;
    ch.order = as_int(member(j, "order", path), path + ".order");
    ch.output_index = as_int(member(j, "output_index", path), path + ".output_index");
    ch.state_offset = as_int(member(j, "state_offset", path), path + ".state_offset");
    ch.gains = vector_from_json(member(j, "gains", path), path + ".gains");
    ch.mu = as_double(member(j, "mu", path), path + ".mu");
    ch.d0 = as_double(member(j, "d0", path), path + ".d0");
    ch.d_inf = as_double(member(j, "d_inf", path), path + ".d_inf");
    return ch;
}

}  // namespace

Json to_json(const observer::ObserverRealization& obs)
{
    Json channels = Json::array();
    for (const auto& ch : obs.channels) channels.push_back(to_json(ch));
    return Json{{"kind", kind_name(obs.kind)},
                {"dim", obs.dim},
                {"M", matrix_to_json(obs.M)},
                {"N", matrix_to_json(obs.N)},
                {"L", matrix_to_json(obs.L)},
                {"channels", channels},
                {"T_out", matrix_to_json(obs.T_out)},
                {"D_out", matrix_to_json(obs.D_out)},
                {"couple_a", matrix_to_json(obs.couple_a)},
                {"couple_b", matrix_to_json(obs.couple_b)},
                {"off_a", obs.off_a},
                {"off_b", obs.off_b},
                {"off_d", obs.off_d},
                {"scb", to_json(obs.scb)}};
}

observer::ObserverRealization observer_from_json(const Json& j, const std::string& path)
{
    observer::ObserverRealization obs;
    obs.kind = kind_from_name(as_string(member(j, "kind", path), path + ".kind"), path + ".kind");
    obs.dim = as_int(member(j, "dim", path), path + ".dim");
    obs.M = matrix_from_json(member(j, "M", path), path + ".M");
    obs.N = matrix_from_json(member(j, "N", path), path + ".N");
    obs.L = matrix_from_json(member(j, "L", path), path + ".L");
    const Json& chs = member(j, "channels", path);
    if (!chs.is_array()) fail(path + ".channels", "expected an array");
    for (size_t i = 0; i < chs.size(); ++i)
        obs.channels.push_back(
            channel_from_json(chs[i], path + ".channels[" + std::to_string(i) + "]"));
    obs.T_out = matrix_from_json(member(j, "T_out", path), path + ".T_out");
    obs.D_out = matrix_from_json(member(j, "D_out", path), path + ".D_out");
    obs.couple_a = matrix_from_json(member(j, "couple_a", path), path + ".couple_a");
    obs.couple_b = matrix_from_json(member(j, "couple_b", path), path + ".couple_b");
    obs.off_a = as_int(member(j, "off_a", path), path + ".off_a");
    obs.off_b = as_int(member(j, "off_b", path), path + ".off_b");
    obs.off_d = as_int(member(j, "off_d", path), path + ".off_d");
    obs.scb = scb_from_json(member(j, "scb", path), path + ".scb");
    return obs;
}

Json to_json(const sim::SignalSpec& s)
{
    Json terms = Json::array();
    for (const auto& p : s.terms) {
        switch (p.kind) {
            case sim::SignalPrimitive::Kind::Constant:
                terms.push_back(Json{{"type", "constant"}, {"value", p.value}});
                break;
            case sim::SignalPrimitive::Kind::Sine:
                terms.push_back(Json{{"type", "sine"},
                                     {"amplitude", p.value},
                                     {"omega", p.omega},
                                     {"phase", p.phase},
                                     {"offset", p.offset}});
                break;
            case sim::SignalPrimitive::Kind::Step:
                terms.push_back(Json{{"type", "step"}, {"amplitude", p.value}, {"onset", p.onset}});
                break;
        }
    }
    return terms;
}

sim::SignalSpec signal_from_json(const Json& j, const std::string& path)
{
    sim::SignalSpec s;
    if (j.is_number()) {
        s = sim::SignalSpec::constant(j.get<double>());
        return s;
    }
    if (!j.is_array()) fail(path, "expected an array of signal terms or a number");
    for (size_t i = 0; i < j.size(); ++i) {
        const std::string tp = path + "[" + std::to_string(i) + "]";
        const Json& t = j[i];
        const std::string type = as_string(member(t, "type", tp), tp + ".type");
        if (type == "constant") {
            s.add(sim::SignalSpec::constant(as_double(member(t, "value", tp), tp + ".value")));
        } else if (type == "sine") {
            double amp = as_double(member(t, "amplitude", tp), tp + ".amplitude");
            double omega = as_double(member(t, "omega", tp), tp + ".omega");
            double phase = 0.0, offset = 0.0;
            if (const Json* v = optional_member(t, "phase", tp)) phase = as_double(*v, tp + ".phase");
            if (const Json* v = optional_member(t, "offset", tp))
                offset = as_double(*v, tp + ".offset");
            s.add(sim::SignalSpec::sine(amp, omega, phase, offset));
        } else if (type == "step") {
            s.add(sim::SignalSpec::step(as_double(member(t, "amplitude", tp), tp + ".amplitude"),
                                        as_double(member(t, "onset", tp), tp + ".onset")));
        } else {
            fail(tp + ".type", "unknown signal type '" + type + "'");
        }
    }
    return s;
}

Json to_json(const sim::TrajectoryRecord& rec)
{
    Json j;
    j["times"] = double_list_json(rec.times);
    j["x"] = matrix_to_json(rec.x);
    j["xhat"] = matrix_to_json(rec.xhat);
    j["ea"] = matrix_to_json(rec.ea);
    j["eb"] = matrix_to_json(rec.eb);
    j["ed"] = matrix_to_json(rec.ed);
    j["norm_a"] = double_list_json(rec.norm_a);
    j["norm_b"] = double_list_json(rec.norm_b);
    j["norm_d"] = double_list_json(rec.norm_d);
    j["na"] = rec.na;
    j["nb"] = rec.nb;
    j["nd"] = rec.nd;
    j["convergence_tol"] = rec.convergence_tol;
    j["conv_a"] = rec.conv_a ? Json(*rec.conv_a) : Json(nullptr);
    j["conv_b"] = rec.conv_b ? Json(*rec.conv_b) : Json(nullptr);
    j["conv_d"] = rec.conv_d ? Json(*rec.conv_d) : Json(nullptr);
    return j;
}

sim::TrajectoryRecord trajectory_from_json(const Json& j, const std::string& path)
{
    sim::TrajectoryRecord rec;
    rec.times = double_list(member(j, "times", path), path + ".times");
    rec.x = matrix_from_json(member(j, "x", path), path + ".x");
    rec.xhat = matrix_from_json(member(j, "xhat", path), path + ".xhat");
    rec.ea = matrix_from_json(member(j, "ea", path), path + ".ea");
    rec.eb = matrix_from_json(member(j, "eb", path), path + ".eb");
    rec.ed = matrix_from_json(member(j, "ed", path), path + ".ed");
    rec.norm_a = double_list(member(j, "norm_a", path), path + ".norm_a");
    rec.norm_b = double_list(member(j, "norm_b", path), path + ".norm_b");
    rec.norm_d = double_list(member(j, "norm_d", path), path + ".norm_d");
    rec.na = as_int(member(j, "na", path), path + ".na");
    rec.nb = as_int(member(j, "nb", path), path + ".nb");
    rec.nd = as_int(member(j, "nd", path), path + ".nd");
    rec.convergence_tol =
        as_double(member(j, "convergence_tol", path), path + ".convergence_tol");
    auto opt = [&](const char* name) -> std::optional<double> {
        const Json& v = member(j, name, path);
        if (v.is_null()) return std::nullopt;
        return as_double(v, path + "." + name);
    };
    rec.conv_a = opt("conv_a");
    rec.conv_b = opt("conv_b");
    rec.conv_d = opt("conv_d");
    return rec;
}

RankPolicy ProjectConfig::rank_policy() const
{
    RankPolicy p;
    if (rank_tol_factor > 0.0) p.factor = rank_tol_factor;
    return p;
}

ProjectConfig config_from_json(const Json& j)
{
    ProjectConfig cfg;
    cfg.system = system_from_json(member(j, "system", "config"), "config.system");

    if (const Json* g = optional_member(j, "goal", "config"))
        cfg.goal = goal_from_name(as_string(*g, "config.goal"), "config.goal");

    if (const Json* o = optional_member(j, "observer", "config")) {
        const std::string path = "config.observer";
        if (const Json* v = optional_member(*o, "use_a", path))
            cfg.use_a = as_bool(*v, path + ".use_a");
        if (const Json* v = optional_member(*o, "b_mode", path)) {
            cfg.b_mode = kind_from_name(as_string(*v, path + ".b_mode"), path + ".b_mode");
            if (*cfg.b_mode != observer::ObserverKind::LinearB &&
                *cfg.b_mode != observer::ObserverKind::CbhoB)
                fail(path + ".b_mode", "must be linear or cbho");
        }
        if (const Json* v = optional_member(*o, "d_mode", path)) {
            cfg.d_mode = kind_from_name(as_string(*v, path + ".d_mode"), path + ".d_mode");
            switch (*cfg.d_mode) {
                case observer::ObserverKind::LinearReducedD:
                case observer::ObserverKind::LinearFullOrderD:
                case observer::ObserverKind::SmoD:
                case observer::ObserverKind::DbhoD:
                    break;
                default:
                    fail(path + ".d_mode", "must be reduced, fullorder, smo or dbho");
            }
        }
        if (const Json* v = optional_member(*o, "b_poles", path)) {
            if (!v->is_array()) fail(path + ".b_poles", "expected an array");
            for (size_t i = 0; i < v->size(); ++i)
                cfg.options.b_poles.push_back(complex_from_json(
                    (*v)[i], path + ".b_poles[" + std::to_string(i) + "]"));
        }
        if (const Json* v = optional_member(*o, "mu", path))
            cfg.options.mu = as_double(*v, path + ".mu");
        if (const Json* v = optional_member(*o, "d0", path))
            cfg.options.cbho_d0 = as_double(*v, path + ".d0");
        if (const Json* v = optional_member(*o, "d_inf", path)) {
            cfg.options.cbho_dinf = as_double(*v, path + ".d_inf");
            cfg.options.dbho_dinf = cfg.options.cbho_dinf;
        }
        if (const Json* v = optional_member(*o, "gain_multiplier", path))
            cfg.options.gain_multiplier = as_double(*v, path + ".gain_multiplier");
        if (const Json* v = optional_member(*o, "fullorder_F", path))
            cfg.options.fullorder_F = matrix_from_json(*v, path + ".fullorder_F");
    }

    if (const Json* s = optional_member(j, "scenario", "config")) {
        const std::string path = "config.scenario";
        if (const Json* v = optional_member(*s, "x0", path))
            cfg.x0 = vector_from_json(*v, path + ".x0");
        if (const Json* v = optional_member(*s, "xhat0", path))
            cfg.xhat0 = vector_from_json(*v, path + ".xhat0");
        if (const Json* v = optional_member(*s, "dt", path)) cfg.dt = as_double(*v, path + ".dt");
        if (const Json* v = optional_member(*s, "horizon", path))
            cfg.horizon = as_double(*v, path + ".horizon");
        if (const Json* v = optional_member(*s, "convergence_tol", path))
            cfg.convergence_tol = as_double(*v, path + ".convergence_tol");
        if (const Json* v = optional_member(*s, "signals", path)) {
            if (!v->is_array()) fail(path + ".signals", "expected an array (one per input)");
            for (size_t i = 0; i < v->size(); ++i)
                cfg.signals.push_back(signal_from_json(
                    (*v)[i], path + ".signals[" + std::to_string(i) + "]"));
            if (static_cast<int>(cfg.signals.size()) != cfg.system.m())
                fail(path + ".signals", "expected " + std::to_string(cfg.system.m()) +
                                            " signals, got " + std::to_string(cfg.signals.size()));
        }
        if (cfg.dt <= 0.0) fail(path + ".dt", "must be positive");
        if (cfg.horizon <= 0.0) fail(path + ".horizon", "must be positive");
        if (cfg.x0 && cfg.x0->size() != cfg.system.n())
            fail(path + ".x0", "expected " + std::to_string(cfg.system.n()) + " entries");
    }

    if (const Json* o = optional_member(j, "output", "config")) {
        const std::string path = "config.output";
        if (const Json* v = optional_member(*o, "decimation", path)) {
            cfg.decimation = as_int(*v, path + ".decimation");
            if (cfg.decimation < 1) fail(path + ".decimation", "must be >= 1");
        }
        if (const Json* v = optional_member(*o, "format", path)) {
            cfg.format = as_string(*v, path + ".format");
            if (cfg.format != "csv" && cfg.format != "json")
                fail(path + ".format", "must be csv or json");
        }
    }

    if (const Json* nu = optional_member(j, "numerics", "config")) {
        const std::string path = "config.numerics";
        if (const Json* v = optional_member(*nu, "rank_tol_factor", path)) {
            cfg.rank_tol_factor = as_double(*v, path + ".rank_tol_factor");
            if (cfg.rank_tol_factor <= 0.0) fail(path + ".rank_tol_factor", "must be positive");
        }
        if (const Json* v = optional_member(*nu, "seed", path)) {
            if (!v->is_number_integer()) fail(path + ".seed", "expected an integer");
            cfg.seed = v->get<unsigned long long>();
        }
    }
    return cfg;
}

ProjectConfig load_config(const std::string& file)
{
    return config_from_json(read_json(file));
}

Json to_json(const ProjectConfig& cfg)
{
    Json j;
    j["system"] = to_json(cfg.system);
    j["goal"] = goal_name(cfg.goal);
    Json obs = Json::object();
    if (cfg.use_a) obs["use_a"] = *cfg.use_a;
    if (cfg.b_mode) obs["b_mode"] = kind_name(*cfg.b_mode);
    if (cfg.d_mode) obs["d_mode"] = kind_name(*cfg.d_mode);
    if (!cfg.options.b_poles.empty()) {
        Json poles = Json::array();
        for (auto z : cfg.options.b_poles) poles.push_back(complex_to_json(z));
        obs["b_poles"] = poles;
    }
    obs["mu"] = cfg.options.mu;
    obs["d0"] = cfg.options.cbho_d0;
    obs["d_inf"] = cfg.options.cbho_dinf;
    obs["gain_multiplier"] = cfg.options.gain_multiplier;
    j["observer"] = obs;
    Json sc = Json::object();
    if (cfg.x0) sc["x0"] = vector_to_json(*cfg.x0);
    if (cfg.xhat0) sc["xhat0"] = vector_to_json(*cfg.xhat0);
    sc["dt"] = cfg.dt;
    sc["horizon"] = cfg.horizon;
    sc["convergence_tol"] = cfg.convergence_tol;
    if (!cfg.signals.empty()) {
        Json sigs = Json::array();
        for (const auto& s : cfg.signals) sigs.push_back(to_json(s));
        sc["signals"] = sigs;
    }
    j["scenario"] = sc;
    j["output"] = Json{{"decimation", cfg.decimation}, {"format", cfg.format}};
    Json nu = Json::object();
    if (cfg.rank_tol_factor > 0.0) nu["rank_tol_factor"] = cfg.rank_tol_factor;
    nu["seed"] = cfg.seed;
    j["numerics"] = nu;
    return j;
}

std::string dump(const Json& j)
{
    return j.dump(2) + "\n";
}

void write_json(const Json& j, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_json: cannot open " + path);
    out << dump(j);
    if (!out) throw std::runtime_error("write_json: write failed for " + path);
}

Json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config error at <file>: cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config error at ") + path + ": " + e.what());
    }
}

}  // namespace uio::serialize
