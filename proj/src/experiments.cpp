#include "rmplate/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "rmplate/biharmonic.hpp"
#include "rmplate/eigensolve.hpp"
#include "rmplate/errors.hpp"
#include "rmplate/thin_limit.hpp"

#ifndef RMPLATE_VERSION
#define RMPLATE_VERSION "unknown"
#endif

namespace rmplate {

using nlohmann::json;

std::string version_string() { return RMPLATE_VERSION; }

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw InvalidArgument("a rate fit needs at least 3 points");
    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx, ly;
    for (const auto& [p, e] : points) {
        if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("rate fit parameters must be positive");
        if (!(e > 0.0) || !std::isfinite(e)) throw InvalidArgument("rate fit errors must be positive");
        lx.push_back(std::log(p));
        ly.push_back(std::log(e));
        sx += lx.back();
        sy += ly.back();
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw InvalidArgument("rate fit needs distinct parameters");
    RateFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        ssr += r * r;
    }
    // a flat series is fitted exactly by a zero slope
    f.r2 = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
    f.points = points;
    return f;
}

std::string to_string(SweepKind kind) {
    switch (kind) {
        case SweepKind::Thickness: return "thickness";
        case SweepKind::Delta: return "delta";
        case SweepKind::Korn: return "korn";
        case SweepKind::Kernel: return "kernel";
        case SweepKind::Poincare: return "poincare";
    }
    return "?";
}

SweepKind sweep_kind_from_string(const std::string& s) {
    for (SweepKind k : {SweepKind::Thickness, SweepKind::Delta, SweepKind::Korn, SweepKind::Kernel,
                        SweepKind::Poincare})
        if (to_string(k) == s) return k;
    throw InvalidArgument("unknown sweep kind '" + s + "'");
}

void SweepConfig::validate() const {
    params.validate();
    if (kind != SweepKind::Kernel) {
        if (parameters.size() < 3) throw InvalidArgument("a sweep needs at least 3 parameter values");
        for (std::size_t i = 0; i < parameters.size(); ++i) {
            if (!(parameters[i] > 0.0)) throw InvalidArgument("sweep parameters must be positive");
            if (i > 0 && !(parameters[i] < parameters[i - 1]))
                throw InvalidArgument("sweep parameters must be strictly decreasing");
        }
    }
    const std::size_t need = kind == SweepKind::Kernel || kind == SweepKind::Korn ? 1 : (richardson ? 3 : 2);
    if (mesh_levels.size() < need)
        throw InvalidArgument("this sweep needs at least " + std::to_string(need) + " mesh levels");
    for (std::size_t i = 0; i < mesh_levels.size(); ++i) {
        if (mesh_levels[i] < 2) throw InvalidArgument("mesh levels must have at least 2 cells");
        if (i > 0 && kind != SweepKind::Kernel && mesh_levels[i] != 2 * mesh_levels[i - 1])
            throw InvalidArgument("mesh levels must double from one to the next");
    }
    if (thin_cells < 1) throw InvalidArgument("thin_cells must be >= 1");
    if (k_eigs < 1) throw InvalidArgument("k_eigs must be >= 1");
    if (f0.kind != "sine" && f0.kind != "rigid") throw InvalidArgument("f0.kind must be 'sine' or 'rigid'");
    profile.validate();
}

SweepConfig default_config(SweepKind kind) {
    SweepConfig c;
    c.kind = kind;
    switch (kind) {
        case SweepKind::Thickness:
            c.parameters = {0.2, 0.1, 0.05, 0.025};
            c.mesh_levels = {16, 32, 64};
            c.k_eigs = 4;
            c.output = "report-thickness";
            break;
        case SweepKind::Delta:
            c.parameters = {0.4, 0.2, 0.1, 0.05};
            c.mesh_levels = {64, 128, 256};
            c.thin_cells = 4;
            c.bc = BcFamily::FreeNeumann;
            c.k_eigs = 3;
            c.output = "report-delta";
            break;
        case SweepKind::Korn:
            c.parameters = {0.4, 0.2, 0.1};
            c.mesh_levels = {16, 32};
            c.thin_cells = 4;
            c.richardson = false;
            c.k_eigs = 1;
            c.output = "report-korn";
            break;
        case SweepKind::Kernel:
            c.mesh_levels = {4, 8, 16};
            c.k_eigs = 8;
            c.richardson = false;
            c.output = "report-kernel";
            break;
        case SweepKind::Poincare:
            c.parameters = {0.4, 0.2, 0.1};
            c.mesh_levels = {16, 32, 64};
            c.thin_cells = 4;
            c.k_eigs = 1;
            c.output = "report-poincare";
            break;
    }
    return c;
}

namespace {

json profile_to_json(const ThinDomainSpec& s) {
    return {{"a", s.a},         {"b", s.b},           {"x", s.f1.knots()}, {"f1", s.f1.values()},
            {"f2", s.f2.values()}, {"delta", s.delta}, {"d", s.d}};
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? nan() : j.get<double>(); }

std::vector<double> numbers_from(const json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(number_from(v));
    return out;
}
json numbers_to_json(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(number_or_null(x));
    return out;
}

}  // namespace

SweepConfig config_from_json(const json& j, SweepKind kind) {
    SweepConfig c = default_config(kind);
    try {
        if (j.contains("kind") && sweep_kind_from_string(j.at("kind").get<std::string>()) != kind)
            throw InvalidArgument("config kind '" + j.at("kind").get<std::string>() + "' does not match the command");
        if (j.contains("parameters")) c.parameters = j.at("parameters").get<std::vector<double>>();
        if (j.contains("mesh_levels")) c.mesh_levels = j.at("mesh_levels").get<std::vector<int>>();
        if (j.contains("thin_cells")) c.thin_cells = j.at("thin_cells").get<int>();
        if (j.contains("k_eigs")) c.k_eigs = j.at("k_eigs").get<int>();
        if (j.contains("richardson")) c.richardson = j.at("richardson").get<bool>();
        if (j.contains("bc")) c.bc = bc_family_from_string(j.at("bc").get<std::string>());
        if (j.contains("output")) c.output = j.at("output").get<std::string>();
        if (j.contains("params")) {
            const json& p = j.at("params");
            if (p.contains("E")) c.params.E = p.at("E").get<double>();
            if (p.contains("sigma")) c.params.sigma = p.at("sigma").get<double>();
            if (p.contains("k")) c.params.k = p.at("k").get<double>();
            if (p.contains("t")) c.params.t = p.at("t").get<double>();
        }
        if (j.contains("profile")) c.profile = thin_spec_from_json(j.at("profile"));
        if (j.contains("f0")) {
            const json& f = j.at("f0");
            if (f.contains("kind")) c.f0.kind = f.at("kind").get<std::string>();
            if (f.contains("a")) c.f0.a = f.at("a").get<double>();
            if (f.contains("b")) c.f0.b = f.at("b").get<double>();
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed sweep config: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const SweepConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"parameters", c.parameters},
            {"mesh_levels", c.mesh_levels},
            {"thin_cells", c.thin_cells},
            {"k_eigs", c.k_eigs},
            {"richardson", c.richardson},
            {"bc", to_string(c.bc)},
            {"output", c.output},
            {"params", {{"E", c.params.E}, {"sigma", c.params.sigma}, {"k", c.params.k}, {"t", c.params.t}}},
            {"profile", profile_to_json(c.profile)},
            {"f0", {{"kind", c.f0.kind}, {"a", c.f0.a}, {"b", c.f0.b}}}};
}

bool SweepReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* SweepReport::find_check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double richardson(double coarse, double fine) { return (4.0 * fine - coarse) / 3.0; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

/// Values of one quantity across the mesh levels, reduced to the fine and control estimates.
struct LevelPair {
    double fine = 0.0;
    double control = 0.0;
};

LevelPair reduce_levels(const std::vector<double>& per_level, bool extrapolate) {
    const std::size_t n = per_level.size();
    if (extrapolate)
        return {richardson(per_level[n - 2], per_level[n - 1]), richardson(per_level[n - 3], per_level[n - 2])};
    return {per_level[n - 1], per_level[n - 2]};
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

constexpr double kExactLevel = 1e-8;  // gaps below this are exact discrete identities, not rates

bool all_exact(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::abs(x) <= kExactLevel; });
}

/// Fits the fine-level series and withholds the claim when the control level disagrees by > 20%.
void add_fit(SweepReport& r, const std::string& name, const std::vector<double>& fine,
             const std::vector<double>& control) {
    if (all_exact(fine) || std::any_of(fine.begin(), fine.end(), [](double x) { return !(x > 0.0); })) {
        r.extra["unfitted"].push_back(name);
        return;
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < fine.size(); ++i) pts.emplace_back(r.config.parameters[i], fine[i]);
    RateFit f = fit_rate(pts);
    for (std::size_t i = 0; i < fine.size(); ++i)
        if (std::abs(fine[i] - control[i]) > 0.2 * std::abs(fine[i])) f.claimed = false;
    r.fits[name] = f;
}

std::vector<double> column(const std::vector<SweepPoint>& pts, std::size_t j) {
    std::vector<double> out;
    for (const auto& p : pts) out.push_back(p.gaps.at(j));
    return out;
}

std::vector<double> smallest_eigenvalues(const SparseSymMatrix& A, const SparseSymMatrix& B, int k) {
    EigOptions o;
    o.k = std::min(k, A.n());
    const EigResult r = solve_gep_smallest(A, B, o);
    return std::vector<double>(r.eigenvalues.data(), r.eigenvalues.data() + r.eigenvalues.size());
}

}  // namespace

SweepReport sweep_thickness(const SweepConfig& config) {
    config.validate();
    const auto t_start = Clock::now();
    const LimitBc limit_bc = map_limit_bc(config.bc);  // throws UnsupportedLimit
    const int k = config.k_eigs;
    const auto& levels = config.mesh_levels;

    SweepReport r;
    r.kind = SweepKind::Thickness;
    r.config = config;
    r.version = version_string();

    // limit eigenvalues per level
    auto t0 = Clock::now();
    std::vector<std::vector<double>> bih(levels.size());
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const Mesh tri = triangulate(build_rect_mesh(1.0, 1.0, levels[l], levels[l]));
        const BiharmonicPencil p = assemble_biharmonic_pencil(tri, config.params.E, config.params.sigma, limit_bc);
        bih[l] = smallest_eigenvalues(p.A, p.B, k);
        if (static_cast<int>(bih[l].size()) < k) throw InvalidArgument("mesh too coarse for k_eigs eigenvalues");
    }
    r.timings["biharmonic"] = seconds_since(t0);

    t0 = Clock::now();
    for (double t : config.parameters) {
        MaterialParams p = config.params;
        p.t = t;
        std::vector<std::vector<double>> rm(levels.size());
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const Pencil pen = assemble_rm_pencil(build_rect_mesh(1.0, 1.0, levels[l], levels[l]), p, config.bc, true);
            rm[l] = smallest_eigenvalues(pen.A, pen.B, k);
        }
        SweepPoint fine{t, levels.back(), {}, nan(), {}, {}, {}};
        SweepPoint control{t, levels[levels.size() - 2], {}, nan(), {}, {}, {}};
        for (int j = 0; j < k; ++j) {
            std::vector<double> lr, lb;
            for (std::size_t l = 0; l < levels.size(); ++l) {
                lr.push_back(rm[l][static_cast<std::size_t>(j)]);
                lb.push_back(bih[l][static_cast<std::size_t>(j)]);
            }
            const LevelPair vr = reduce_levels(lr, config.richardson);
            const LevelPair vb = reduce_levels(lb, config.richardson);
            fine.values.push_back(vr.fine);
            fine.reference.push_back(vb.fine);
            fine.gaps.push_back(std::abs(vr.fine - vb.fine));
            control.values.push_back(vr.control);
            control.reference.push_back(vb.control);
            control.gaps.push_back(std::abs(vr.control - vb.control));
        }
        r.points.push_back(std::move(fine));
        r.control.push_back(std::move(control));
    }
    r.timings["rm"] = seconds_since(t0);

    bool decreasing = true;
    std::string detail;
    for (int j = 0; j < k; ++j) {
        const auto g = column(r.points, static_cast<std::size_t>(j));
        const bool ok = strictly_decreasing(g) || all_exact(g);
        decreasing = decreasing && ok;
        if (!ok) detail += "gap_" + std::to_string(j + 1) + " not decreasing; ";
        add_fit(r, "gap_" + std::to_string(j + 1), g, column(r.control, static_cast<std::size_t>(j)));
    }
    r.checks.push_back({"gaps_decrease", decreasing, detail.empty() ? "all gaps decrease with t" : detail});
    r.primary_fit = "gap_1";
    if (auto it = r.fits.find(r.primary_fit); it != r.fits.end())
        r.checks.push_back({"discretization_control", it->second.claimed,
                            "gap_1 fine and control levels agree within 20%: " +
                                std::string(it->second.claimed ? "yes" : "no")});
    r.timings["total"] = seconds_since(t_start);
    return r;
}

namespace {

Eigen::VectorXd limit_data(const ConnectingSystem& cs, const LimitData& f0) {
    const auto& nodes = cs.interval_mesh().nodes;
    const int nv = static_cast<int>(nodes.size());
    const int ne = nv - 1;
    const int per_block = nv + ne;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * per_block);
    auto put = [&](int slot, double x) {
        if (f0.kind == "sine") {
            out(per_block + slot) = std::sin(std::numbers::pi * x);
        } else {
            out(slot) = f0.a;
            out(per_block + slot) = f0.a * x + f0.b;
        }
    };
    for (int i = 0; i < nv; ++i) put(i, nodes[static_cast<std::size_t>(i)][0]);
    for (int e = 0; e < ne; ++e)
        put(nv + e, 0.5 * (nodes[static_cast<std::size_t>(e)][0] + nodes[static_cast<std::size_t>(e + 1)][0]));
    return out;
}

struct ThinSpectrum {
    Eigen::VectorXd values;   // eigenpairs whose section averages carry their norm
    Eigen::MatrixXd vectors;
};

/// Thin eigenpairs that are E-convergent candidates: modes whose mass is carried by the section
/// averages. Modes with nonzero mean of the thin rotation component are outside H_delta and are
/// dropped, as are the unit kernel eigenvalues.
ThinSpectrum filtered_thin_spectrum(const ConnectingSystem& cs, const Pencil& pen, int wanted) {
    EigOptions o;
    o.k = std::min(2 * wanted + 6, pen.A.n());
    while (true) {
        const EigResult r = solve_gep_smallest(pen.A, pen.B, o);
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i) {
            if (std::abs(r.eigenvalues(i) - 1.0) <= 1e-6) continue;
            const Eigen::VectorXd u = r.eigenvectors.col(i);
            const double frac = cs.limit_norm(cs.average(u)) / cs.thin_norm(u);
            if (frac >= 0.5) keep.push_back(i);
        }
        if (static_cast<int>(keep.size()) >= wanted || o.k == pen.A.n()) {
            ThinSpectrum s;
            s.values.resize(static_cast<Eigen::Index>(keep.size()));
            s.vectors.resize(r.eigenvectors.rows(), static_cast<Eigen::Index>(keep.size()));
            for (std::size_t i = 0; i < keep.size(); ++i) {
                s.values(static_cast<Eigen::Index>(i)) = r.eigenvalues(keep[i]);
                s.vectors.col(static_cast<Eigen::Index>(i)) = r.eigenvectors.col(keep[i]);
            }
            return s;
        }
        o.k = std::min(2 * o.k, pen.A.n());
    }
}

/// Indices of the `size` thin values nearest to `target`, ascending by index.
std::vector<Eigen::Index> nearest(const Eigen::VectorXd& values, double target, std::size_t size) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(values(a) - target) < std::abs(values(b) - target);
    });
    if (idx.size() < size) throw InvalidArgument("not enough thin eigenvalues to match a limit cluster");
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

SweepReport sweep_delta(const SweepConfig& config) {
    config.validate();
    if (config.profile.d != 1) throw UnsupportedConfiguration("thin meshes are built for d = 1 only");
    const auto t_start = Clock::now();
    const auto& levels = config.mesh_levels;
    const std::size_t nl = levels.size();
    const int k = config.k_eigs;
    auto ny_of = [&](std::size_t l) { return config.thin_cells * (levels[l] / levels[0]); };

    SweepReport r;
    r.kind = SweepKind::Delta;
    r.config = config;
    r.version = version_string();

    // The limit problem does not depend on delta: one solve on the finest interval mesh.
    auto t0 = Clock::now();
    const ThinDomainSpec base = config.profile;
    const Mesh fine_interval = build_interval_mesh(base.a, base.b, levels.back());
    const LimitPencil limit = assemble_limit_pencil(fine_interval, base, config.params, 1);
    EigOptions lo;
    lo.k = std::min(2 * k + 6, limit.A.n());
    const EigResult lim = solve_gep_smallest(limit.A, limit.B, lo);
    std::vector<EigCluster> clusters;
    for (const auto& c : cluster_eigenvalues(lim.eigenvalues, 1e-6))
        if (std::abs(c.mean - 1.0) > 1e-6 && static_cast<int>(clusters.size()) < k) clusters.push_back(c);
    if (static_cast<int>(clusters.size()) < k) throw InvalidArgument("limit mesh too coarse for k_eigs clusters");
    std::size_t wanted = 0;
    for (const auto& c : clusters) wanted += c.size;
    r.timings["limit"] = seconds_since(t0);

    json limit_json = json::array();
    for (const auto& c : clusters) limit_json.push_back({{"mean", c.mean}, {"size", c.size}});
    r.extra["limit_clusters"] = limit_json;

    t0 = Clock::now();
    for (double delta : config.parameters) {
        const ThinDomainSpec spec = base.with_delta(delta);
        std::vector<double> resolvent(nl);
        std::vector<std::vector<std::vector<double>>> matched(nl);  // level -> cluster -> values
        std::vector<double> angles;
        for (std::size_t l = 0; l < nl; ++l) {
            const ConnectingSystem cs(spec, levels[l], ny_of(l));
            const Pencil pen = assemble_rm_pencil(cs.thin_mesh(), config.params, BcFamily::FreeNeumann, true);
            const LimitPencil lp = assemble_limit_pencil(cs.interval_mesh(), spec, config.params, 1);
            resolvent[l] = resolvent_gap(cs, pen, lp, limit_data(cs, config.f0)).gap;

            const ThinSpectrum ts = filtered_thin_spectrum(cs, pen, static_cast<int>(wanted));
            matched[l].resize(clusters.size());
            for (std::size_t c = 0; c < clusters.size(); ++c) {
                const auto idx = nearest(ts.values, clusters[c].mean, clusters[c].size);
                for (auto i : idx) matched[l][c].push_back(ts.values(i));
                if (l + 1 == nl) {
                    // principal angles between averaged thin modes and limit modes, H_0 inner product
                    Eigen::MatrixXd U(lp.dofmap.n_dofs, static_cast<Eigen::Index>(idx.size()));
                    for (std::size_t q = 0; q < idx.size(); ++q)
                        U.col(static_cast<Eigen::Index>(q)) = cs.average(ts.vectors.col(idx[q]));
                    const Eigen::MatrixXd V = lim.eigenvectors.middleCols(
                        static_cast<Eigen::Index>(clusters[c].first), static_cast<Eigen::Index>(clusters[c].size));
                    const auto a = principal_angles(U, V, limit.plain_mass);
                    angles.push_back(*std::max_element(a.begin(), a.end()));
                }
            }
        }

        SweepPoint fine{delta, levels.back(), {}, resolvent[nl - 1], {}, {}, angles};
        SweepPoint control{delta, levels[nl - 2], {}, resolvent[nl - 2], {}, {}, {}};
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            double gf = 0.0, gc = 0.0;
            for (std::size_t i = 0; i < clusters[c].size; ++i) {
                std::vector<double> per_level;
                for (std::size_t l = 0; l < nl; ++l) per_level.push_back(matched[l][c][i]);
                const LevelPair v = reduce_levels(per_level, config.richardson);
                const double lam0 = lim.eigenvalues(static_cast<Eigen::Index>(clusters[c].first + i));
                fine.values.push_back(v.fine);
                fine.reference.push_back(lam0);
                control.values.push_back(v.control);
                control.reference.push_back(lam0);
                gf += std::abs(v.fine - lam0);
                gc += std::abs(v.control - lam0);
            }
            fine.gaps.push_back(gf);
            control.gaps.push_back(gc);
        }
        r.points.push_back(std::move(fine));
        r.control.push_back(std::move(control));
    }
    r.timings["thin"] = seconds_since(t0);

    std::vector<double> rf, rc;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        rf.push_back(r.points[i].resolvent_gap);
        rc.push_back(r.control[i].resolvent_gap);
    }
    add_fit(r, "resolvent_gap", rf, rc);
    for (int c = 0; c < k; ++c)
        add_fit(r, "cluster_" + std::to_string(c + 1), column(r.points, static_cast<std::size_t>(c)),
                column(r.control, static_cast<std::size_t>(c)));

    r.checks.push_back({"resolvent_decreasing", strictly_decreasing(rf) || all_exact(rf),
                        "resolvent gaps decrease as delta decreases (or vanish identically)"});
    r.primary_fit = "resolvent_gap";
    if (auto it = r.fits.find(r.primary_fit); it != r.fits.end())
        r.checks.push_back({"discretization_control", it->second.claimed,
                            "resolvent gap fine and control levels agree within 20%: " +
                                std::string(it->second.claimed ? "yes" : "no")});
    r.timings["total"] = seconds_since(t_start);
    return r;
}

std::vector<std::pair<BcFamily, int>> kernel_census(const MaterialParams& params, const Mesh& mesh, double tol) {
    std::vector<std::pair<BcFamily, int>> out;
    for (BcFamily bc : all_bc_families())
        out.emplace_back(bc, kernel_count(assemble_rm_pencil(mesh, params, bc, true), tol));
    return out;
}

namespace {

int expected_kernel(BcFamily bc) {
    switch (bc) {
        case BcFamily::FreeNeumann: return 3;
        case BcFamily::HardRigid:
        case BcFamily::SoftRigid:
        case BcFamily::WeakNeumann: return 1;
        default: return 0;
    }
}

}  // namespace

SweepReport run_kernel_census(const SweepConfig& config) {
    config.validate();
    const auto t_start = Clock::now();
    SweepReport r;
    r.kind = SweepKind::Kernel;
    r.config = config;
    r.config.k_eigs = 8;
    r.version = version_string();
    bool table_ok = true, stable = true;
    std::vector<int> first;
    for (int n : config.mesh_levels) {
        const auto table = kernel_census(config.params, build_rect_mesh(1.0, 1.0, n, n));
        SweepPoint p{static_cast<double>(n), n, {}, nan(), {}, {}, {}};
        std::vector<int> counts;
        for (const auto& [bc, c] : table) {
            p.values.push_back(c);
            p.reference.push_back(expected_kernel(bc));
            p.gaps.push_back(std::abs(c - expected_kernel(bc)));
            counts.push_back(c);
            if (c != expected_kernel(bc)) table_ok = false;
        }
        if (first.empty()) first = counts;
        if (counts != first) stable = false;
        r.points.push_back(std::move(p));
    }
    r.control = r.points;
    json families = json::array();
    for (BcFamily bc : all_bc_families()) families.push_back(to_string(bc));
    r.extra["families"] = families;
    r.checks.push_back({"kernel_table", table_ok, "free 3, rigid-type 1, clamped and supported 0"});
    r.checks.push_back({"mesh_independent", stable, "identical census on every level"});
    r.timings["total"] = seconds_since(t_start);
    return r;
}

double korn_constant(const Mesh& mesh, KornSpace space) {
    const DofMap dm = build_dofmap(mesh, SpaceKind::Q1vector2,
                                   space == KornSpace::Clamped ? essential_everywhere(Trace::Full) : no_essential());
    if (dm.n_free == 0) throw InvalidArgument("Korn pencil has no free dofs");
    const SparseSymMatrix grad = assemble(mesh, dm, [](const FieldEval& u, const FieldEval& v) {
        double s = 0.0;
        for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d) s += u.grad[c][d] * v.grad[c][d];
        return s;
    });
    const SparseSymMatrix sym = assemble(mesh, dm, [](const FieldEval& u, const FieldEval& v) {
        double s = 0.0;
        for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d)
                s += 0.25 * (u.grad[c][d] + u.grad[d][c]) * (v.grad[c][d] + v.grad[d][c]);
        return s + u.value[0] * v.value[0] + u.value[1] * v.value[1];
    });
    // largest mu of grad x = mu sym x, via the smallest nu = 1 / (1 + mu) of sym x = nu (grad + sym) x
    EigOptions o;
    o.k = 1;
    const EigResult r = solve_gep_smallest(sym, grad + sym, o);
    return 1.0 / r.eigenvalues(0) - 1.0;
}

SweepReport sweep_korn(const SweepConfig& config) {
    config.validate();
    const auto t_start = Clock::now();
    SweepReport r;
    r.kind = SweepKind::Korn;
    r.config = config;
    r.version = version_string();

    std::vector<double> square;
    for (int n : config.mesh_levels) square.push_back(korn_constant(build_rect_mesh(1.0, 1.0, n, n)));
    r.extra["unit_square"] = {{"mesh_levels", config.mesh_levels}, {"constants", square}};
    const bool bound =
        std::all_of(square.begin(), square.end(), [](double c) { return c >= 3.0 - 1e-9; });
    bool stable = true;
    for (std::size_t i = 1; i < square.size(); ++i)
        if (config.mesh_levels[i - 1] >= 16 && std::abs(square[i] - square[i - 1]) > 0.05 * square[i - 1])
            stable = false;
    r.checks.push_back({"unit_square_lower_bound", bound, "constant >= 3 on every level"});
    r.checks.push_back({"unit_square_stable", stable, "change <= 5% per refinement from n = 16"});

    const int nx = config.mesh_levels.back();
    const int nx_c = config.mesh_levels.size() > 1 ? config.mesh_levels[config.mesh_levels.size() - 2] : nx;
    const int ny_c = std::max(1, config.thin_cells * nx_c / nx);
    for (double delta : config.parameters) {
        const ThinDomainSpec spec = config.profile.with_delta(delta);
        const double c = korn_constant(build_thin_mesh(spec, nx, config.thin_cells));
        const double cc = korn_constant(build_thin_mesh(spec, nx_c, ny_c));
        r.points.push_back({delta, nx, {c}, nan(), {c}, {}, {}});
        r.control.push_back({delta, nx_c, {cc}, nan(), {cc}, {}, {}});
    }
    std::vector<double> thin = column(r.points, 0);
    bool increasing = true;
    for (std::size_t i = 1; i < thin.size(); ++i)
        if (!(thin[i] > thin[i - 1])) increasing = false;
    r.checks.push_back({"thin_increasing", increasing, "constant grows strictly as delta decreases"});
    add_fit(r, "korn_constant", thin, column(r.control, 0));
    r.primary_fit = "korn_constant";
    r.timings["total"] = seconds_since(t_start);
    return r;
}

double dirichlet_eigenvalue(const Mesh& mesh) {
    const DofMap dm = build_dofmap(mesh, SpaceKind::Q1scalar, essential_everywhere(Trace::Full));
    if (dm.n_free == 0) throw InvalidArgument("Dirichlet pencil has no free dofs");
    const SparseSymMatrix K = assemble(mesh, dm, [](const FieldEval& u, const FieldEval& v) {
        return u.grad[0][0] * v.grad[0][0] + u.grad[0][1] * v.grad[0][1];
    });
    const SparseSymMatrix M =
        assemble(mesh, dm, [](const FieldEval& u, const FieldEval& v) { return u.value[0] * v.value[0]; });
    EigOptions o;
    o.k = 1;
    return solve_gep_smallest(K, M, o).eigenvalues(0);
}

SweepReport poincare_check(const SweepConfig& config) {
    config.validate();
    const auto t_start = Clock::now();
    SweepReport r;
    r.kind = SweepKind::Poincare;
    r.config = config;
    r.version = version_string();
    const auto& levels = config.mesh_levels;

    bool positive = true;
    for (double delta : config.parameters) {
        const ThinDomainSpec spec = config.profile.with_delta(delta);
        std::vector<double> per_level;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const int ny = config.thin_cells * (levels[l] / levels[0]);
            per_level.push_back(dirichlet_eigenvalue(build_thin_mesh(spec, levels[l], ny)));
            if (!(per_level.back() > 0.0)) positive = false;
        }
        const LevelPair v = reduce_levels(per_level, config.richardson);
        r.points.push_back({delta, levels.back(), {v.fine}, nan(), per_level, {}, {}});
        r.control.push_back({delta, levels[levels.size() - 2], {v.control}, nan(), {}, {}, {}});
    }
    add_fit(r, "dirichlet_eigenvalue", column(r.points, 0), column(r.control, 0));
    r.primary_fit = "dirichlet_eigenvalue";
    const auto it = r.fits.find(r.primary_fit);
    const double slope = it != r.fits.end() ? it->second.slope : nan();
    r.checks.push_back({"positive", positive, "every Dirichlet eigenvalue is positive"});
    r.checks.push_back({"blow_up_slope", slope <= -1.9, "log-log slope " + fmt(slope) + " <= -1.9"});

    // unit square: (0,1) x (-1/2, 1/2) against 2 pi^2
    std::vector<double> sq;
    for (int n : {levels[levels.size() - 2], levels.back()})
        sq.push_back(dirichlet_eigenvalue(build_thin_mesh(config.profile.with_delta(1.0), n, n)));
    const double extrapolated = richardson(sq[0], sq[1]);
    const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
    const double rel = std::abs(extrapolated - exact) / exact;
    r.extra["unit_square"] = {{"raw", sq}, {"extrapolated", extrapolated}, {"exact", exact}, {"relative_error", rel}};
    r.checks.push_back({"unit_square_2pi2", rel <= 0.01, "relative error " + fmt(rel) + " <= 1%"});
    r.timings["total"] = seconds_since(t_start);
    return r;
}

SweepReport run_sweep(const SweepConfig& config) {
    switch (config.kind) {
        case SweepKind::Thickness: return sweep_thickness(config);
        case SweepKind::Delta: return sweep_delta(config);
        case SweepKind::Korn: return sweep_korn(config);
        case SweepKind::Kernel: return run_kernel_census(config);
        case SweepKind::Poincare: return poincare_check(config);
    }
    throw InvalidArgument("unknown sweep kind");
}

namespace {

json point_to_json(const SweepPoint& p) {
    return {{"parameter", p.parameter},
            {"mesh_n", p.mesh_n},
            {"gaps", numbers_to_json(p.gaps)},
            {"resolvent_gap", number_or_null(p.resolvent_gap)},
            {"values", numbers_to_json(p.values)},
            {"reference", numbers_to_json(p.reference)},
            {"angles", numbers_to_json(p.angles)}};
}

SweepPoint point_from_json(const json& j) {
    SweepPoint p;
    p.parameter = j.at("parameter").get<double>();
    p.mesh_n = j.at("mesh_n").get<int>();
    p.gaps = numbers_from(j.at("gaps"));
    p.resolvent_gap = number_from(j.at("resolvent_gap"));
    p.values = numbers_from(j.at("values"));
    p.reference = numbers_from(j.at("reference"));
    p.angles = numbers_from(j.at("angles"));
    return p;
}

}  // namespace

json report_to_json(const SweepReport& r) {
    json j;
    j["kind"] = to_string(r.kind);
    j["version"] = r.version;
    j["config"] = config_to_json(r.config);
    for (const char* key : {"points", "control"}) j[key] = json::array();
    for (const auto& p : r.points) j["points"].push_back(point_to_json(p));
    for (const auto& p : r.control) j["control"].push_back(point_to_json(p));
    j["fits"] = json::object();
    for (const auto& [name, f] : r.fits) {
        json pts = json::array();
        for (const auto& [x, y] : f.points) pts.push_back({x, y});
        j["fits"][name] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2},
                           {"claimed", f.claimed}, {"points", pts}};
    }
    j["primary_fit"] = r.primary_fit;
    j["checks"] = json::array();
    for (const auto& c : r.checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["all_passed"] = r.all_passed();
    j["timings"] = r.timings;
    j["extra"] = r.extra;
    return j;
}

SweepReport report_from_json(const json& j) {
    try {
        SweepReport r;
        r.kind = sweep_kind_from_string(j.at("kind").get<std::string>());
        r.version = j.at("version").get<std::string>();
        r.config = config_from_json(j.at("config"), r.kind);
        for (const auto& p : j.at("points")) r.points.push_back(point_from_json(p));
        for (const auto& p : j.at("control")) r.control.push_back(point_from_json(p));
        for (const auto& [name, f] : j.at("fits").items()) {
            RateFit fit;
            fit.slope = f.at("slope").get<double>();
            fit.intercept = f.at("intercept").get<double>();
            fit.r2 = f.at("r2").get<double>();
            fit.claimed = f.at("claimed").get<bool>();
            for (const auto& p : f.at("points")) fit.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
            r.fits[name] = fit;
        }
        r.primary_fit = j.at("primary_fit").get<std::string>();
        for (const auto& c : j.at("checks"))
            r.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(),
                                c.at("detail").get<std::string>()});
        r.timings = j.at("timings").get<std::map<std::string, double>>();
        r.extra = j.at("extra");
        return r;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed report: ") + e.what());
    }
}

std::string report_csv(const SweepReport& r) {
    if (r.points.empty()) throw InvalidArgument("empty sweep: nothing to report");
    const std::size_t k = r.points.front().gaps.size();
    std::ostringstream os;
    os.precision(17);
    os << "parameter,mesh_n";
    for (std::size_t j = 1; j <= k; ++j) os << ",gap_" << j;
    os << ",resolvent_gap,fitted_slope\n";
    const auto it = r.fits.find(r.primary_fit);
    const double slope = it != r.fits.end() ? it->second.slope : nan();
    auto cell = [&](double v) {
        if (std::isfinite(v))
            os << v;
        else
            os << "nan";
    };
    for (const auto& p : r.points) {
        if (p.gaps.size() != k) throw InvalidArgument("sweep points disagree on the gap count");
        os << p.parameter << ',' << p.mesh_n;
        for (double g : p.gaps) {
            os << ',';
            cell(g);
        }
        os << ',';
        cell(p.resolvent_gap);
        os << ',';
        cell(slope);
        os << '\n';
    }
    return os.str();
}

void emit_report(const SweepReport& r, const std::string& dir) {
    if (r.points.empty()) throw InvalidArgument("empty sweep: refusing to write an empty report");
    const std::string csv = report_csv(r);
    const std::string js = report_to_json(r).dump(2);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory '" + dir + "': " + ec.message());
    for (const auto& [name, text] : {std::pair{std::string("report.json"), js}, std::pair{std::string("report.csv"), csv}}) {
        const std::string path = (std::filesystem::path(dir) / name).string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot open '" + path + "' for writing");
        out << text;
        if (!out) throw IoError("write to '" + path + "' failed");
    }
}

}  // namespace rmplate
