#include "rmplate/biharmonic.hpp"

#include "rmplate/errors.hpp"

namespace rmplate {

std::string to_string(LimitBc bc) {
    switch (bc) {
        case LimitBc::Clamped: return "clamped";
        case LimitBc::Navier: return "navier";
        case LimitBc::Intermediate: return "intermediate";
        case LimitBc::Free: return "free";
    }
    return "?";
}

LimitBc limit_bc_from_string(const std::string& s) {
    for (LimitBc bc : {LimitBc::Clamped, LimitBc::Navier, LimitBc::Intermediate, LimitBc::Free})
        if (to_string(bc) == s) return bc;
    if (s == "hinged" || s == "simply-supported") return LimitBc::Navier;
    throw InvalidArgument("unknown biharmonic boundary condition '" + s + "'");
}

LimitBc map_limit_bc(BcFamily bc) {
    switch (bc) {
        case BcFamily::HardClamped:
        case BcFamily::SoftClamped: return LimitBc::Clamped;
        case BcFamily::HardSimplySupported:
        case BcFamily::SoftSimplySupported: return LimitBc::Navier;
        case BcFamily::SoftRigid: return LimitBc::Intermediate;
        case BcFamily::FreeNeumann: return LimitBc::Free;
        case BcFamily::HardRigid:
        case BcFamily::WeakNeumann: break;
    }
    throw UnsupportedLimit("the " + to_string(bc) +
                           " family leads to a non-standard biharmonic limit (u constant on boundary components)");
}

BiharmonicPencil assemble_biharmonic_pencil(const Mesh& tri_mesh, double E, double sigma, LimitBc bc) {
    if (tri_mesh.kind != ElementKind::Tri3) throw InvalidArgument("biharmonic pencils need a triangle mesh");
    MaterialParams check;
    check.E = E;
    check.sigma = sigma;
    check.validate();

    Trace trace = Trace::None;
    switch (bc) {
        case LimitBc::Clamped: trace = Trace::FullAndNormalDerivative; break;
        case LimitBc::Navier: trace = Trace::Full; break;
        case LimitBc::Intermediate: trace = Trace::NormalDerivative; break;
        case LimitBc::Free: trace = Trace::None; break;
    }
    BiharmonicPencil p;
    p.bc = bc;
    p.E = E;
    p.sigma = sigma;
    p.dofmap = build_dofmap(tri_mesh, SpaceKind::Morley, essential_everywhere(trace));
    p.mesh = std::make_shared<const Mesh>(tri_mesh);

    const double D = E / (12.0 * (1.0 - sigma * sigma));
    // Element Hessians are constant, so the one-point rule integrates the bending part exactly.
    const QuadratureRule centroid = triangle_rule(1);
    const SparseSymMatrix bending = assemble(
        tri_mesh, p.dofmap,
        [=](const FieldEval& u, const FieldEval& v) {
            const auto& hu = u.hess;
            const auto& hv = v.hess;
            const double ddot = hu[0] * hv[0] + hu[1] * hv[1] + hu[2] * hv[2] + hu[3] * hv[3];
            const double lap = (hu[0] + hu[3]) * (hv[0] + hv[3]);
            return D * ((1.0 - sigma) * ddot + sigma * lap);
        },
        &centroid);
    p.B = assemble(tri_mesh, p.dofmap, [](const FieldEval& u, const FieldEval& v) { return u.value[0] * v.value[0]; });
    p.A = bending + p.B;
    return p;
}

Eigen::VectorXd solve_biharmonic_source(const BiharmonicPencil& pencil, const std::function<double(const Point&)>& f,
                                        double* relative_residual) {
    if (!pencil.mesh) throw InvalidArgument("biharmonic pencil carries no mesh");
    const Eigen::VectorXd load =
        assemble_load(*pencil.mesh, pencil.dofmap, [&](const FieldEval& v) { return f(v.x) * v.value[0]; });
    return pencil.dofmap.expand_from_free(solve_spd(pencil.A, pencil.dofmap.restrict_to_free(load), relative_residual));
}

}  // namespace rmplate
