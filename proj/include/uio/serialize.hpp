#pragma once

#include "uio/analysis.hpp"
#include "uio/observer.hpp"
#include "uio/scb.hpp"
#include "uio/simulate.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

// JSON document format for every module-level type plus the project
// configuration. Insertion-ordered objects keep the output deterministic;
// matrices are stored row-major with explicit shape fields.
namespace uio::serialize {

using Json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& w) : std::runtime_error(w) {}
};

// Matrices: {"rows": r, "cols": c, "data": [row-major doubles]}.
Json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const Json& j, const std::string& path);
Json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const Json& j, const std::string& path);

Json to_json(const InputBounds& b);
Json to_json(const StateSpaceSystem& sys);
StateSpaceSystem system_from_json(const Json& j, const std::string& path = "system");

Json to_json(const analysis::StructuralProfile& p);

Json to_json(const scb::ScbForm& f);
scb::ScbForm scb_from_json(const Json& j, const std::string& path = "scb");

Json to_json(const scb::ValidationReport& r);

Json to_json(const observer::InjectionChannel& ch);
Json to_json(const observer::ObserverRealization& obs);
observer::ObserverRealization observer_from_json(const Json& j,
                                                 const std::string& path = "observer");

Json to_json(const sim::SignalSpec& s);
sim::SignalSpec signal_from_json(const Json& j, const std::string& path);

Json to_json(const sim::TrajectoryRecord& rec);
sim::TrajectoryRecord trajectory_from_json(const Json& j,
                                           const std::string& path = "trajectory");

// Everything a command needs: the plant, the design goal, synthesis
// overrides, the simulation scenario and output/numerics knobs.
struct ProjectConfig {
    StateSpaceSystem system;
    observer::Goal goal = observer::Goal::Asymptotic;

    // Observer overrides; unset fields fall back to the recommendation.
    std::optional<bool> use_a;
    std::optional<observer::ObserverKind> b_mode;  // LinearB or CbhoB
    std::optional<observer::ObserverKind> d_mode;  // reduced/fullorder/smo/dbho
    observer::SynthesisOptions options;

    // Scenario.
    std::optional<VectorXd> x0;
    std::optional<VectorXd> xhat0;  // defaults to zero
    double dt = 1e-4;
    double horizon = 10.0;
    std::vector<sim::SignalSpec> signals;  // defaults to all-zero inputs
    double convergence_tol = 1e-2;

    // Output.
    int decimation = 1;
    std::string format = "csv";  // csv | json

    // Numerics.
    double rank_tol_factor = 0.0;  // <= 0: library default
    unsigned long long seed = 0;

    RankPolicy rank_policy() const;
};

// Parse with a field-path diagnostic on any violation
// (e.g. "config error at system.A.data: expected 12 entries, got 11").
ProjectConfig config_from_json(const Json& j);
ProjectConfig load_config(const std::string& file);

Json to_json(const ProjectConfig& cfg);

// Canonical serialization: two-space indent, '\n' line ends, trailing newline.
std::string dump(const Json& j);
void write_json(const Json& j, const std::string& path);
Json read_json(const std::string& path);

}  // namespace uio::serialize
