#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rmplate/mesh.hpp"
#include "rmplate/rm_system.hpp"

namespace rmplate {

std::string version_string();

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<std::pair<double, double>> points;  // (parameter, error)
    /// False when the discretization control disagreed with the fine level by more than 20%.
    bool claimed = true;
};

/// Ordinary least squares of log(error) against log(parameter).
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

enum class SweepKind { Thickness, Delta, Korn, Kernel, Poincare };
std::string to_string(SweepKind kind);
SweepKind sweep_kind_from_string(const std::string& s);

/// Data f0 of the thin-domain resolvent experiment, given on the base interval.
struct LimitData {
    std::string kind = "sine";  // "sine": (0, sin(pi x)); "rigid": (a, a x + b)
    double a = 0.0;
    double b = 1.0;
};

struct SweepConfig {
    SweepKind kind = SweepKind::Thickness;
    std::vector<double> parameters;  // t or delta, strictly decreasing
    std::vector<int> mesh_levels;    // cells per unit length along x, coarse to fine, each level doubling
    int thin_cells = 4;              // cells across the thickness on the first level (delta-type sweeps)
    MaterialParams params;
    BcFamily bc = BcFamily::HardClamped;
    int k_eigs = 4;
    bool richardson = true;          // extrapolate eigenvalues over the last two levels
    ThinDomainSpec profile = ThinDomainSpec::cylinder(0.0, 1.0, 1.0);
    LimitData f0;
    std::string output = "report";   // directory receiving report.json and report.csv

    /// Throws InvalidArgument on too few points, unsorted parameters or bad levels.
    void validate() const;
};

SweepConfig default_config(SweepKind kind);
/// Defaults for `kind` overridden by the keys present in `j`.
SweepConfig config_from_json(const nlohmann::json& j, SweepKind kind);
nlohmann::json config_to_json(const SweepConfig& c);

/// One sweep parameter evaluated on one discretization level.
struct SweepPoint {
    double parameter = 0.0;
    int mesh_n = 0;
    std::vector<double> gaps;             // per eigenvalue (thickness) or per cluster (delta)
    double resolvent_gap = 0.0;           // NaN where not applicable
    std::vector<double> values;           // eigenvalues or constants computed at this point
    std::vector<double> reference;        // limit values the gaps refer to
    std::vector<double> angles;           // largest principal angle per cluster (delta sweep)
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SweepReport {
    SweepKind kind = SweepKind::Thickness;
    SweepConfig config;
    std::string version;
    std::vector<SweepPoint> points;   // fine level
    std::vector<SweepPoint> control;  // one level coarser
    std::map<std::string, RateFit> fits;
    std::string primary_fit;          // fit reported in the CSV slope column
    std::vector<Check> checks;
    std::map<std::string, double> timings;  // seconds
    nlohmann::json extra = nlohmann::json::object();

    bool all_passed() const;
    const Check* find_check(const std::string& name) const;
};

/// RM eigenvalues against the biharmonic limit for decreasing thickness.
SweepReport sweep_thickness(const SweepConfig& config);
/// Thin-domain resolvent and eigenvalue gaps for decreasing delta.
SweepReport sweep_delta(const SweepConfig& config);

/// Kernel dimension of each boundary-condition family's shifted pencil.
std::vector<std::pair<BcFamily, int>> kernel_census(const MaterialParams& params, const Mesh& mesh,
                                                    double tol = 1e-8);
/// Census on the configured square levels; checks the expected table and mesh independence.
SweepReport run_kernel_census(const SweepConfig& config);

enum class KornSpace { Second, Clamped };  // no constraints, or eta = 0 on the boundary

/// Largest eigenvalue of (int |D eta|^2, int |eps(eta)|^2 + |eta|^2) on Q1 vector fields.
double korn_constant(const Mesh& mesh, KornSpace space = KornSpace::Second);
/// Unit-square constant on each level, then the thin-rectangle constant for each delta.
SweepReport sweep_korn(const SweepConfig& config);

/// Smallest Dirichlet eigenvalue of (int |grad w|^2, int w^2) on a mesh.
double dirichlet_eigenvalue(const Mesh& mesh);
/// Dirichlet eigenvalue on (0,1) x (-delta/2, delta/2) per delta plus the delta = 1 square check.
SweepReport poincare_check(const SweepConfig& config);

SweepReport run_sweep(const SweepConfig& config);

nlohmann::json report_to_json(const SweepReport& r);
SweepReport report_from_json(const nlohmann::json& j);
/// One row per fine sweep point: parameter, mesh_n, gap_1..gap_k, resolvent_gap, fitted_slope.
std::string report_csv(const SweepReport& r);
/// Writes <dir>/report.json and <dir>/report.csv. An empty sweep is an error.
void emit_report(const SweepReport& r, const std::string& dir);

}  // namespace rmplate
