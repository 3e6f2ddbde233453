#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmplate/biharmonic.hpp"
#include "rmplate/eigensolve.hpp"
#include "rmplate/errors.hpp"
#include "rmplate/experiments.hpp"
#include "rmplate/mesh.hpp"
#include "rmplate/rm_system.hpp"
#include "rmplate/thin_limit.hpp"

using namespace rmplate;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidArgument("'" + path + "' is not valid JSON: " + e.what());
    }
}

void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

void write_json(const json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << "\n";
        return;
    }
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

void dump_pencil(const SparseSymMatrix& A, const SparseSymMatrix& B, const std::string& dir) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    write_matrix_market(A, (std::filesystem::path(dir) / "A.mtx").string());
    write_matrix_market(B, (std::filesystem::path(dir) / "B.mtx").string());
}

json mesh_info(const Mesh& m) {
    return {{"element_kind", to_string(m.kind)},
            {"nodes", m.num_nodes()},
            {"elements", m.num_elements()},
            {"facets", m.facets.size()},
            {"measure", m.total_measure()}};
}

json eig_json(const EigResult& r) {
    return {{"eigenvalues", std::vector<double>(r.eigenvalues.data(), r.eigenvalues.data() + r.eigenvalues.size())},
            {"residuals", std::vector<double>(r.residuals.data(), r.residuals.data() + r.residuals.size())}};
}

std::pair<double, double> parse_pair(const std::string& s) {
    std::istringstream is(s);
    double a = 0.0, b = 0.0;
    char comma = 0;
    if (!(is >> a >> comma >> b) || comma != ',') throw InvalidArgument("expected 'a,b', got '" + s + "'");
    return {a, b};
}

struct PlateOptions {
    double E = 1.0, sigma = 0.3, k = 5.0 / 6.0, t = 0.1;
    int num_eigs = 10;
    std::string out, dump_matrices, dump_eigvecs;

    void add_material(CLI::App* app, bool with_shear) {
        app->add_option("--E", E, "Young modulus");
        app->add_option("--sigma", sigma, "Poisson ratio");
        if (with_shear) {
            app->add_option("--k", k, "shear correction factor");
            app->add_option("--t", t, "plate thickness");
        }
        app->add_option("--num-eigs", num_eigs, "number of smallest eigenvalues");
        app->add_option("--out", out, "output JSON path (stdout when omitted)");
        app->add_option("--dump-matrices", dump_matrices, "directory receiving A.mtx and B.mtx");
        app->add_option("--dump-eigvecs", dump_eigvecs, "Matrix Market file receiving the eigenvectors");
    }
    MaterialParams params() const {
        MaterialParams p;
        p.E = E;
        p.sigma = sigma;
        p.k = k;
        p.t = t;
        p.validate();
        return p;
    }
};

EigResult solve_and_dump(const SparseSymMatrix& A, const SparseSymMatrix& B, const PlateOptions& o) {
    dump_pencil(A, B, o.dump_matrices);
    EigOptions eo;
    eo.k = std::min(o.num_eigs, A.n());
    EigResult r = solve_gep_smallest(A, B, eo);
    if (!o.dump_eigvecs.empty()) {
        ensure_parent(o.dump_eigvecs);
        write_matrix_market_dense(r.eigenvectors, o.dump_eigvecs);
    }
    return r;
}

int run_report(SweepKind kind, const std::string& config_path, const std::string& out_override) {
    SweepConfig c = config_path.empty() ? default_config(kind) : config_from_json(read_json(config_path), kind);
    if (!out_override.empty()) c.output = out_override;
    const SweepReport r = run_sweep(c);
    emit_report(r, c.output);
    for (const auto& ch : r.checks)
        std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << "\n";
    for (const auto& [name, f] : r.fits)
        std::cout << "fit " << name << ": slope " << f.slope << ", r2 " << f.r2
                  << (f.claimed ? "" : " (not claimed: control level disagrees)") << "\n";
    std::cout << "report written to " << c.output << "\n";
    return r.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reissner-Mindlin plate toolkit: thin-thickness and thin-domain limit experiments"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    // mesh
    auto* mesh_cmd = app.add_subcommand("mesh", "generate a structured mesh as JSON");
    std::string mesh_out, mesh_size = "1,1", mesh_profile;
    int mesh_nx = 16, mesh_ny = 0;
    double mesh_delta = 0.0;
    bool mesh_tri = false;
    mesh_cmd->add_option("--size", mesh_size, "rectangle side lengths 'lx,ly'");
    mesh_cmd->add_option("--nx", mesh_nx, "cells along x");
    mesh_cmd->add_option("--ny", mesh_ny, "cells along y (default: nx)");
    mesh_cmd->add_option("--delta", mesh_delta, "build the thin domain of this thickness instead of a rectangle");
    mesh_cmd->add_option("--g-profile", mesh_profile, "thin profile JSON {x, f1, f2} (default: uniform 1/2, 1/2)");
    mesh_cmd->add_flag("--triangulate", mesh_tri, "split every quadrilateral into two triangles");
    mesh_cmd->add_option("--out", mesh_out, "output JSON path")->required();

    // solve-rm
    auto* rm_cmd = app.add_subcommand("solve-rm", "smallest eigenvalues of the shifted RM pencil");
    PlateOptions rm_opts;
    std::string rm_mesh, rm_bc = "free";
    rm_cmd->add_option("--mesh", rm_mesh, "quadrilateral mesh JSON")->required();
    rm_cmd->add_option("--bc", rm_bc, "boundary-condition family");
    rm_opts.add_material(rm_cmd, true);

    // solve-biharmonic
    auto* bh_cmd = app.add_subcommand("solve-biharmonic", "smallest eigenvalues of the shifted Morley plate pencil");
    PlateOptions bh_opts;
    std::string bh_mesh, bh_bc = "clamped";
    bh_cmd->add_option("--mesh", bh_mesh, "mesh JSON (quadrilaterals are triangulated)")->required();
    bh_cmd->add_option("--bc", bh_bc, "clamped | navier | intermediate | free, or an RM family name");
    bh_opts.add_material(bh_cmd, false);

    // solve-limit
    auto* lim_cmd = app.add_subcommand("solve-limit", "smallest eigenvalues of the weighted 1D limit pencil");
    PlateOptions lim_opts;
    std::string lim_interval = "0,1", lim_profile;
    int lim_n = 64, lim_d = 1;
    lim_cmd->add_option("--interval", lim_interval, "base interval 'a,b'");
    lim_cmd->add_option("--n", lim_n, "interval elements");
    lim_cmd->add_option("--g-profile", lim_profile, "profile JSON {x, f1, f2}");
    lim_cmd->add_option("--d", lim_d, "thin-direction count in the coefficients");
    lim_opts.add_material(lim_cmd, true);

    // sweeps
    std::string cfg_path, cfg_out;
    struct SweepCmd {
        const char* name;
        const char* help;
        SweepKind kind;
    };
    const SweepCmd sweeps[] = {{"sweep-t", "RM eigenvalues against the biharmonic limit as t decreases", SweepKind::Thickness},
                               {"sweep-delta", "thin-domain resolvent and eigenvalue gaps as delta decreases", SweepKind::Delta},
                               {"kernel-check", "kernel dimension of every boundary-condition family", SweepKind::Kernel},
                               {"korn", "discrete second Korn constants", SweepKind::Korn},
                               {"poincare", "Dirichlet eigenvalue growth on thin rectangles", SweepKind::Poincare}};
    std::vector<std::pair<CLI::App*, SweepKind>> sweep_cmds;
    for (const auto& s : sweeps) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        cmd->add_option("--config", cfg_path, "JSON file overriding the defaults");
        cmd->add_option("--out", cfg_out, "report directory (overrides the config)");
        sweep_cmds.emplace_back(cmd, s.kind);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (mesh_cmd->parsed()) {
            const auto [lx, ly] = parse_pair(mesh_size);
            const int ny = mesh_ny > 0 ? mesh_ny : mesh_nx;
            Mesh m;
            if (mesh_delta > 0.0) {
                ThinDomainSpec spec = mesh_profile.empty() ? ThinDomainSpec::cylinder(0.0, lx, mesh_delta)
                                                           : thin_spec_from_json(read_json(mesh_profile));
                spec.delta = mesh_delta;
                m = build_thin_mesh(spec, mesh_nx, ny);
            } else {
                m = build_rect_mesh(lx, ly, mesh_nx, ny);
            }
            if (mesh_tri) m = triangulate(m);
            ensure_parent(mesh_out);
            write_mesh(m, mesh_out);
            std::cout << mesh_info(m).dump() << "\n";
            return 0;
        }
        if (rm_cmd->parsed()) {
            const Mesh m = read_mesh(rm_mesh);
            const BcFamily bc = bc_family_from_string(rm_bc);
            const MaterialParams p = rm_opts.params();
            const Pencil pen = assemble_rm_pencil(m, p, bc, true);
            const EigResult r = solve_and_dump(pen.A, pen.B, rm_opts);
            json j = eig_json(r);
            j["bc"] = to_string(bc);
            j["params"] = {{"E", p.E}, {"sigma", p.sigma}, {"k", p.k}, {"t", p.t}};
            j["mesh_info"] = mesh_info(m);
            j["kernel_dimension"] = count_near(r.eigenvalues, 1.0, 1e-8);
            write_json(j, rm_opts.out);
            return 0;
        }
        if (bh_cmd->parsed()) {
            Mesh m = read_mesh(bh_mesh);
            if (m.kind == ElementKind::Quad4) m = triangulate(m);
            LimitBc bc;
            try {
                bc = limit_bc_from_string(bh_bc);
            } catch (const InvalidArgument&) {
                bc = map_limit_bc(bc_family_from_string(bh_bc));
            }
            const BiharmonicPencil pen = assemble_biharmonic_pencil(m, bh_opts.E, bh_opts.sigma, bc);
            const EigResult r = solve_and_dump(pen.A, pen.B, bh_opts);
            json j = eig_json(r);
            j["bc"] = to_string(bc);
            j["params"] = {{"E", bh_opts.E}, {"sigma", bh_opts.sigma}};
            j["mesh_info"] = mesh_info(m);
            write_json(j, bh_opts.out);
            return 0;
        }
        if (lim_cmd->parsed()) {
            const auto [a, b] = parse_pair(lim_interval);
            ThinDomainSpec spec = lim_profile.empty() ? ThinDomainSpec::cylinder(a, b, 1.0)
                                                      : thin_spec_from_json(read_json(lim_profile));
            spec.a = a;
            spec.b = b;
            spec.d = lim_d;
            const MaterialParams p = lim_opts.params();
            const LimitPencil pen = assemble_limit_pencil(build_interval_mesh(a, b, lim_n), spec, p, lim_d);
            const EigResult r = solve_and_dump(pen.A, pen.B, lim_opts);
            json j = eig_json(r);
            j["params"] = {{"E", p.E}, {"sigma", p.sigma}, {"k", p.k}, {"t", p.t}};
            j["d"] = lim_d;
            j["interval"] = {a, b};
            write_json(j, lim_opts.out);
            return 0;
        }
        for (const auto& [cmd, kind] : sweep_cmds)
            if (cmd->parsed()) return run_report(kind, cfg_path, cfg_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
