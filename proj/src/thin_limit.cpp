#include "rmplate/thin_limit.hpp"

#include <cmath>

#include "rmplate/errors.hpp"

namespace rmplate {

double limit_div_coefficient(double sigma, int d) {
    if (d < 1) throw InvalidArgument("thin-direction count d must be >= 1");
    const double denom = (1.0 - sigma) + d * sigma;
    if (!(denom > 0.0)) throw InvalidArgument("(1 - sigma) + d sigma must be positive");
    return (1.0 - sigma) * sigma / denom;
}

double qjj_value(double sigma, int d, double divx_beta) {
    if (d < 1) throw InvalidArgument("thin-direction count d must be >= 1");
    const double denom = (1.0 - sigma) + d * sigma;
    if (!(denom > 0.0)) throw InvalidArgument("(1 - sigma) + d sigma must be positive");
    return -sigma * divx_beta / denom;
}

namespace {

PiecewiseLinear nodal_weight(const Mesh& interval, const ThinDomainSpec& spec) {
    std::vector<double> x, g;
    for (const auto& p : interval.nodes) {
        x.push_back(p[0]);
        g.push_back(spec.g(p[0]));
        if (!(g.back() > 0.0)) throw InvalidArgument("section weight g must be positive at every node");
    }
    return PiecewiseLinear(std::move(x), std::move(g));
}

DofMap free_p2_pair(const Mesh& interval) {
    return stack_dofmaps({build_dofmap(interval, SpaceKind::P2scalar1D, no_essential()),
                          build_dofmap(interval, SpaceKind::P2scalar1D, no_essential())});
}

}  // namespace

LimitPencil assemble_limit_pencil(const Mesh& interval_mesh, const ThinDomainSpec& spec, const MaterialParams& params,
                                  int d) {
    params.validate();
    if (interval_mesh.kind != ElementKind::Segment) throw InvalidArgument("limit pencil needs an interval mesh");
    LimitPencil p;
    p.d = d;
    p.params = params;
    p.mesh = std::make_shared<const Mesh>(interval_mesh);
    p.dofmap = free_p2_pair(interval_mesh);
    const PiecewiseLinear g = nodal_weight(interval_mesh, spec);

    const double D = params.bending_modulus();
    const double s = params.sigma;
    const double bend = D * ((1.0 - s) + limit_div_coefficient(s, d));
    const double kappa = params.shear_modulus();
    const double rot = params.rotary_inertia();

    // Slot 0: Phi, slot 1: phi.
    const SparseSymMatrix stiff = assemble(interval_mesh, p.dofmap, [=](const FieldEval& u, const FieldEval& v) {
        const double shear_u = u.grad[1][0] - u.value[0];
        const double shear_v = v.grad[1][0] - v.value[0];
        return g(u.x[0]) * (bend * u.grad[0][0] * v.grad[0][0] + kappa * shear_u * shear_v);
    });
    p.B = assemble(interval_mesh, p.dofmap, [=](const FieldEval& u, const FieldEval& v) {
        return g(u.x[0]) * (u.value[1] * v.value[1] + rot * u.value[0] * v.value[0]);
    });
    p.plain_mass = assemble(interval_mesh, p.dofmap, [=](const FieldEval& u, const FieldEval& v) {
        return g(u.x[0]) * (u.value[1] * v.value[1] + u.value[0] * v.value[0]);
    });
    p.A = stiff + p.B;

    const QuadratureRule q = gauss_segment(3);
    for (std::size_t e = 0; e < interval_mesh.num_elements(); ++e)
        for (const auto& pt : q.points) p.g_samples.push_back(g(map_reference(interval_mesh, e, pt).first[0]));
    return p;
}

Eigen::VectorXd solve_limit_source(const LimitPencil& pencil, const Eigen::VectorXd& data, double* relative_residual) {
    if (data.size() != pencil.dofmap.n_dofs) throw InvalidArgument("limit data length != dof count");
    return solve_spd(pencil.A, pencil.B * data, relative_residual);
}

ConnectingSystem::ConnectingSystem(const ThinDomainSpec& spec, int nx, int ny) : spec_(spec), nx_(nx), ny_(ny) {
    thin_ = std::make_shared<const Mesh>(build_thin_mesh(spec, nx, ny));
    interval_ = std::make_shared<const Mesh>(build_interval_mesh(spec.a, spec.b, nx));
    thin_dofs_ = stack_dofmaps({build_dofmap(*thin_, SpaceKind::Q1vector2, no_essential()),
                                build_dofmap(*thin_, SpaceKind::Q1scalar, no_essential())});
    limit_dofs_ = free_p2_pair(*interval_);
    for (const auto& p : interval_->nodes) g_nodes_.push_back(spec.g(p[0]));
    for (int i = 0; i <= nx; ++i)
        if (std::abs(thin_->nodes[static_cast<std::size_t>(i)][0] - interval_->nodes[static_cast<std::size_t>(i)][0]) >
            1e-14 * (1.0 + std::abs(spec.b)))
            throw InvalidArgument("thin mesh columns are not aligned with the interval nodes");
}

Eigen::VectorXd ConnectingSystem::extend(const Eigen::VectorXd& limit_field) const {
    if (limit_field.size() != limit_dofs_.n_dofs) throw InvalidArgument("limit field length != dof count");
    const int nn = static_cast<int>(thin_->num_nodes());
    const int per_block = limit_dofs_.n_dofs / 2;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * nn);
    const GridShape grid = *thin_->grid;
    for (int j = 0; j <= ny_; ++j)
        for (int i = 0; i <= nx_; ++i) {
            const int n = grid.node(i, j);
            out(n) = limit_field(i);
            out(2 * nn + n) = limit_field(per_block + i);
        }
    return out;
}

Eigen::VectorXd ConnectingSystem::average_component(const Eigen::VectorXd& thin_field, int component) const {
    const int nn = static_cast<int>(thin_->num_nodes());
    if (thin_field.size() != 3 * nn) throw InvalidArgument("thin field length != 3 * nodes");
    if (component < 0 || component > 2) throw InvalidArgument("component must be 0, 1 or 2");
    const GridShape grid = *thin_->grid;
    // Along each column the Q1 field is piecewise linear in the uniform section coordinate,
    // so the trapezoidal rule gives the exact section mean.
    std::vector<double> col(static_cast<std::size_t>(nx_ + 1), 0.0);
    for (int i = 0; i <= nx_; ++i) {
        double s = 0.0;
        for (int j = 0; j <= ny_; ++j) {
            const double w = (j == 0 || j == ny_) ? 0.5 : 1.0;
            s += w * thin_field(component * nn + grid.node(i, j));
        }
        col[static_cast<std::size_t>(i)] = s / ny_;
    }
    const int nv = nx_ + 1;
    Eigen::VectorXd out(nv + nx_);
    for (int i = 0; i < nv; ++i) out(i) = col[static_cast<std::size_t>(i)];
    for (int e = 0; e < nx_; ++e)
        out(nv + e) = 0.5 * (col[static_cast<std::size_t>(e)] + col[static_cast<std::size_t>(e + 1)]);
    return out;
}

Eigen::VectorXd ConnectingSystem::average(const Eigen::VectorXd& thin_field) const {
    const Eigen::VectorXd bx = average_component(thin_field, 0);
    const Eigen::VectorXd w = average_component(thin_field, 2);
    Eigen::VectorXd out(bx.size() + w.size());
    out << bx, w;
    return out;
}

double ConnectingSystem::g_at(int element, double xi) const {
    return 0.5 * (1.0 - xi) * g_nodes_[static_cast<std::size_t>(element)] +
           0.5 * (1.0 + xi) * g_nodes_[static_cast<std::size_t>(element + 1)];
}

std::array<double, 2> ConnectingSystem::limit_value(const Eigen::VectorXd& limit_field, int element, double xi) const {
    const int nv = nx_ + 1;
    const int per_block = nv + nx_;
    const double n0 = 0.5 * xi * (xi - 1.0), n1 = 0.5 * xi * (xi + 1.0), nm = 1.0 - xi * xi;
    std::array<double, 2> v{};
    for (int b = 0; b < 2; ++b) {
        const int off = b * per_block;
        v[static_cast<std::size_t>(b)] = n0 * limit_field(off + element) + n1 * limit_field(off + element + 1) +
                                         nm * limit_field(off + nv + element);
    }
    return v;
}

double ConnectingSystem::integrate_thin(const PointIntegrand& fn, const Eigen::VectorXd* thin_field,
                                        const Eigen::VectorXd* limit_field) const {
    if (thin_field && thin_field->size() != thin_dofs_.n_dofs) throw InvalidArgument("thin field length mismatch");
    if (limit_field && limit_field->size() != limit_dofs_.n_dofs) throw InvalidArgument("limit field length mismatch");
    const QuadratureRule q = gauss_quad(3, 3);
    double sum = 0.0;
    for (int j = 0; j < ny_; ++j)
        for (int i = 0; i < nx_; ++i) {
            const auto e = static_cast<std::size_t>(j * nx_ + i);
            for (std::size_t k = 0; k < q.size(); ++k) {
                std::array<double, 3> u{}, ext{};
                double det = 0.0;
                if (thin_field) {
                    const FieldEval f = evaluate_field(*thin_, thin_dofs_, *thin_field, e, q.points[k]);
                    u = f.value;
                }
                det = map_reference(*thin_, e, q.points[k]).second;
                if (limit_field) {
                    const auto lv = limit_value(*limit_field, i, q.points[k][0]);
                    ext = {lv[0], 0.0, lv[1]};
                }
                sum += q.weights[k] * det * fn(u, ext);
            }
        }
    return sum / std::pow(spec_.delta, spec_.d);
}

double ConnectingSystem::thin_norm(const Eigen::VectorXd& thin_field) const {
    return std::sqrt(integrate_thin(
        [](const auto& u, const auto&) { return u[0] * u[0] + u[1] * u[1] + u[2] * u[2]; }, &thin_field, nullptr));
}

double ConnectingSystem::extended_norm(const Eigen::VectorXd& limit_field) const {
    return std::sqrt(integrate_thin(
        [](const auto&, const auto& e) { return e[0] * e[0] + e[1] * e[1] + e[2] * e[2]; }, nullptr, &limit_field));
}

double ConnectingSystem::gap_norm(const Eigen::VectorXd& thin_field, const Eigen::VectorXd& limit_field) const {
    return std::sqrt(integrate_thin(
        [](const auto& u, const auto& e) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) s += (u[c] - e[c]) * (u[c] - e[c]);
            return s;
        },
        &thin_field, &limit_field));
}

double ConnectingSystem::thin_pairing(const Eigen::VectorXd& thin_field, const Eigen::VectorXd& limit_field) const {
    return integrate_thin([](const auto& u, const auto& e) { return u[0] * e[0] + u[1] * e[1] + u[2] * e[2]; },
                          &thin_field, &limit_field);
}

double ConnectingSystem::limit_pairing(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    if (a.size() != limit_dofs_.n_dofs || b.size() != limit_dofs_.n_dofs)
        throw InvalidArgument("limit field length mismatch");
    const QuadratureRule q = gauss_segment(3);
    double sum = 0.0;
    for (int e = 0; e < nx_; ++e) {
        const double half = 0.5 * (interval_->nodes[static_cast<std::size_t>(e + 1)][0] -
                                   interval_->nodes[static_cast<std::size_t>(e)][0]);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double xi = q.points[k][0];
            const auto va = limit_value(a, e, xi);
            const auto vb = limit_value(b, e, xi);
            sum += q.weights[k] * half * g_at(e, xi) * (va[0] * vb[0] + va[1] * vb[1]);
        }
    }
    return sum;
}

double ConnectingSystem::limit_norm(const Eigen::VectorXd& limit_field) const {
    return std::sqrt(limit_pairing(limit_field, limit_field));
}

ResolventGap resolvent_gap(const ConnectingSystem& system, const Pencil& thin_pencil, const LimitPencil& limit,
                           const Eigen::VectorXd& f0) {
    if (thin_pencil.bc != BcFamily::FreeNeumann || !thin_pencil.shifted)
        throw InvalidArgument("resolvent_gap needs the shifted free pencil on the thin mesh");
    if (thin_pencil.n_nodes != static_cast<int>(system.thin_mesh().num_nodes()))
        throw InvalidArgument("thin pencil does not match the connecting system");
    if (limit.dofmap.n_dofs != system.limit_dofmap().n_dofs)
        throw InvalidArgument("limit pencil does not match the connecting system");

    ResolventGap out;
    out.f0_norm = system.limit_norm(f0);
    if (!(out.f0_norm > 0.0)) throw InvalidArgument("resolvent_gap needs nonzero data f0");

    const Eigen::VectorXd data = system.extend(f0);
    const int nn = thin_pencil.n_nodes;
    const FieldPair thin = solve_rm_source(thin_pencil, data.head(2 * nn), data.tail(nn));
    out.thin_solution = thin.packed();
    out.limit_solution = solve_limit_source(limit, f0);
    out.gap = system.gap_norm(out.thin_solution, out.limit_solution) / out.f0_norm;
    return out;
}

EnergyValue energy_functional(const ConnectingSystem& system, const Pencil& thin_pencil, const Eigen::VectorXd& pair,
                              const Eigen::VectorXd& f0) {
    if (thin_pencil.dofmap.n_free != thin_pencil.dofmap.n_dofs || !thin_pencil.shifted)
        throw InvalidArgument("energy functional needs the shifted free pencil");
    if (pair.size() != thin_pencil.dofmap.n_dofs) throw InvalidArgument("pair length != dof count");
    const double scale = 1.0 / std::pow(system.delta(), system.spec().d);
    EnergyValue e;
    e.homogeneous = scale * 0.5 * thin_pencil.A.quadratic_form(pair);
    const Eigen::VectorXd load = thin_pencil.mass_all * system.extend(f0);
    e.total = e.homogeneous - scale * pair.dot(load);
    return e;
}

}  // namespace rmplate
