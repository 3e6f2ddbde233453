#include "rmplate/rm_system.hpp"

#include <cmath>

#include <Eigen/SparseCholesky>

#include "rmplate/eigensolve.hpp"
#include "rmplate/errors.hpp"

namespace rmplate {

void MaterialParams::validate() const {
    if (!(E > 0.0)) throw InvalidArgument("Young modulus must be positive");
    if (!(k > 0.0)) throw InvalidArgument("shear correction factor must be positive");
    if (!(t > 0.0)) throw InvalidArgument("thickness must be positive");
    if (N < 2) throw InvalidArgument("space dimension N must be >= 2");
    const double lo = -1.0 / static_cast<double>(N - 1);
    if (!(sigma > lo && sigma < 1.0))
        throw InvalidArgument("Poisson ratio must lie in (" + std::to_string(lo) + ", 1)");
}

Lame lame_coefficients(const MaterialParams& params) {
    params.validate();
    const double E = params.E, s = params.sigma;
    return {E / (2.0 * (1.0 + s)), s * E / (2.0 * (1.0 - s * s))};
}

std::array<BcFamily, 8> all_bc_families() {
    return {BcFamily::HardClamped, BcFamily::SoftClamped, BcFamily::HardSimplySupported,
            BcFamily::SoftSimplySupported, BcFamily::FreeNeumann, BcFamily::HardRigid,
            BcFamily::SoftRigid, BcFamily::WeakNeumann};
}

std::string to_string(BcFamily bc) {
    switch (bc) {
        case BcFamily::HardClamped: return "hard-clamped";
        case BcFamily::SoftClamped: return "soft-clamped";
        case BcFamily::HardSimplySupported: return "hard-simply-supported";
        case BcFamily::SoftSimplySupported: return "soft-simply-supported";
        case BcFamily::FreeNeumann: return "free";
        case BcFamily::HardRigid: return "hard-rigid";
        case BcFamily::SoftRigid: return "soft-rigid";
        case BcFamily::WeakNeumann: return "weak-neumann";
    }
    return "?";
}

BcFamily bc_family_from_string(const std::string& s) {
    for (BcFamily bc : all_bc_families())
        if (to_string(bc) == s) return bc;
    if (s == "clamped") return BcFamily::HardClamped;
    if (s == "free-neumann") return BcFamily::FreeNeumann;
    throw InvalidArgument("unknown boundary-condition family '" + s + "'");
}

BcSpaces bc_spaces(BcFamily bc) {
    switch (bc) {
        case BcFamily::HardClamped: return {Trace::Full, Trace::Full};
        case BcFamily::SoftClamped: return {Trace::Normal, Trace::Full};
        case BcFamily::HardSimplySupported: return {Trace::Tangential, Trace::Full};
        case BcFamily::SoftSimplySupported: return {Trace::None, Trace::Full};
        case BcFamily::FreeNeumann: return {Trace::None, Trace::None};
        case BcFamily::HardRigid: return {Trace::Full, Trace::None};
        case BcFamily::SoftRigid: return {Trace::Normal, Trace::None};
        case BcFamily::WeakNeumann: return {Trace::Tangential, Trace::None};
    }
    return {Trace::None, Trace::None};
}

Eigen::VectorXd Pencil::pack(const Eigen::VectorXd& beta, const Eigen::VectorXd& w) const {
    if (beta.size() != 2 * n_nodes || w.size() != n_nodes) throw InvalidArgument("field lengths do not match the mesh");
    Eigen::VectorXd x(3 * n_nodes);
    x << beta, w;
    return x;
}

Eigen::VectorXd FieldPair::packed() const {
    Eigen::VectorXd x(beta.size() + w.size());
    x << beta, w;
    return x;
}

namespace {

// Field components: 0, 1 -> beta; 2 -> w.
double strain_density(const FieldEval& u, const FieldEval& v, double one_minus_sigma, double sigma) {
    const auto& gu = u.grad;
    const auto& gv = v.grad;
    const double eu12 = 0.5 * (gu[0][1] + gu[1][0]);
    const double ev12 = 0.5 * (gv[0][1] + gv[1][0]);
    const double eps = gu[0][0] * gv[0][0] + gu[1][1] * gv[1][1] + 2.0 * eu12 * ev12;
    const double div = (gu[0][0] + gu[1][1]) * (gv[0][0] + gv[1][1]);
    return one_minus_sigma * eps + sigma * div;
}

double shear_component(const FieldEval& u, const FieldEval& v, int c) {
    return (u.grad[2][c] - u.value[c]) * (v.grad[2][c] - v.value[c]);
}

}  // namespace

Pencil assemble_rm_pencil(const Mesh& mesh, const MaterialParams& params, BcFamily bc, bool shifted,
                          ShearRule shear_rule) {
    params.validate();
    if (mesh.dim != 2 || mesh.kind != ElementKind::Quad4)
        throw InvalidArgument("Reissner-Mindlin pencils need a 2D Quad4 mesh");
    const BcSpaces spaces = bc_spaces(bc);
    Pencil p;
    p.params = params;
    p.bc = bc;
    p.shifted = shifted;
    p.n_nodes = static_cast<int>(mesh.num_nodes());
    p.dofmap = stack_dofmaps({build_dofmap(mesh, SpaceKind::Q1vector2, essential_everywhere(spaces.beta)),
                              build_dofmap(mesh, SpaceKind::Q1scalar, essential_everywhere(spaces.w))});

    const double D = params.bending_modulus();
    const double s = params.sigma;
    const double kappa = params.shear_modulus();
    const double rot = params.rotary_inertia();

    p.bending = assemble(mesh, p.dofmap, [=](const FieldEval& u, const FieldEval& v) {
        return D * strain_density(u, v, 1.0 - s, s);
    });

    switch (shear_rule) {
        case ShearRule::Directional: {
            const QuadratureRule rx = gauss_quad(1, 2);
            const QuadratureRule ry = gauss_quad(2, 1);
            p.shear = assemble(mesh, p.dofmap,
                               [=](const FieldEval& u, const FieldEval& v) { return kappa * shear_component(u, v, 0); },
                               &rx) +
                      assemble(mesh, p.dofmap,
                               [=](const FieldEval& u, const FieldEval& v) { return kappa * shear_component(u, v, 1); },
                               &ry);
            break;
        }
        case ShearRule::OnePoint:
        case ShearRule::Full: {
            const QuadratureRule r = shear_rule == ShearRule::OnePoint ? gauss_quad(1, 1) : gauss_quad(2, 2);
            p.shear = assemble(
                mesh, p.dofmap,
                [=](const FieldEval& u, const FieldEval& v) {
                    return kappa * (shear_component(u, v, 0) + shear_component(u, v, 1));
                },
                &r);
            break;
        }
    }

    const Density mass = [=](const FieldEval& u, const FieldEval& v) {
        return u.value[2] * v.value[2] + rot * (u.value[0] * v.value[0] + u.value[1] * v.value[1]);
    };
    p.B = assemble(mesh, p.dofmap, mass);
    p.mass_all = assemble(mesh, p.dofmap, mass, nullptr, Reduction::AllDofs);
    p.A = p.bending + p.shear;
    if (shifted) p.A = p.A + p.B;
    return p;
}

Eigen::VectorXd solve_spd(const SparseSymMatrix& K, const Eigen::VectorXd& rhs, double* relative_residual) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(K.lower());
    if (ldlt.info() != Eigen::Success) throw SingularSystem("LDL^T factorization failed");
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0) || d.cwiseAbs().minCoeff() <= 1e-14 * dmax) throw SingularSystem("system matrix is singular");
    Eigen::VectorXd x = ldlt.solve(rhs);
    // One step of iterative refinement.
    const Eigen::VectorXd r = rhs - K * x;
    x += ldlt.solve(r);
    if (relative_residual) {
        const double nb = rhs.norm();
        *relative_residual = nb > 0.0 ? (rhs - K * x).norm() / nb : (K * x).norm();
    }
    return x;
}

FieldPair solve_rm_source(const Pencil& pencil, const Eigen::VectorXd& F, const Eigen::VectorXd& f) {
    if (!pencil.shifted) throw SingularSystem("source problems need the shifted pencil (unshifted A may be singular)");
    const Eigen::VectorXd data = pencil.pack(F, f);
    const Eigen::VectorXd load = pencil.dofmap.restrict_to_free(pencil.mass_all * data);
    FieldPair out;
    const Eigen::VectorXd x = pencil.dofmap.expand_from_free(solve_spd(pencil.A, load, &out.relative_residual));
    out.beta = x.head(2 * pencil.n_nodes);
    out.w = x.tail(pencil.n_nodes);
    return out;
}

int kernel_count(const Pencil& pencil, double tol) {
    if (!pencil.shifted) throw InvalidArgument("kernel_count needs the shifted pencil");
    EigOptions opts;
    opts.k = std::min(6, pencil.A.n());
    while (true) {
        const EigResult r = solve_gep_smallest(pencil.A, pencil.B, opts);
        const int c = count_near(r.eigenvalues, 1.0, tol);
        if (c < opts.k || opts.k == pencil.A.n()) return c;
        opts.k = std::min(2 * opts.k, pencil.A.n());
    }
}

}  // namespace rmplate
