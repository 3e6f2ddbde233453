#include "rmplate/fem.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "rmplate/errors.hpp"

namespace rmplate {

// ---------------------------------------------------------------------------
// Quadrature

QuadratureRule gauss_segment(int npoints) {
    QuadratureRule r;
    switch (npoints) {
        case 1:
            r.points = {{0.0, 0.0}};
            r.weights = {2.0};
            r.order = 1;
            break;
        case 2: {
            const double g = 1.0 / std::sqrt(3.0);
            r.points = {{-g, 0.0}, {g, 0.0}};
            r.weights = {1.0, 1.0};
            r.order = 3;
            break;
        }
        case 3: {
            const double g = std::sqrt(0.6);
            r.points = {{-g, 0.0}, {0.0, 0.0}, {g, 0.0}};
            r.weights = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
            r.order = 5;
            break;
        }
        default: throw InvalidArgument("gauss_segment supports 1, 2 or 3 points");
    }
    return r;
}

QuadratureRule gauss_quad(int nxi, int neta) {
    const auto rx = gauss_segment(nxi);
    const auto ry = gauss_segment(neta);
    QuadratureRule r;
    for (std::size_t j = 0; j < ry.size(); ++j)
        for (std::size_t i = 0; i < rx.size(); ++i) {
            r.points.push_back({rx.points[i][0], ry.points[j][0]});
            r.weights.push_back(rx.weights[i] * ry.weights[j]);
        }
    r.order = std::min(rx.order, ry.order);
    return r;
}

QuadratureRule triangle_rule(int npoints) {
    QuadratureRule r;
    switch (npoints) {
        case 1:
            r.points = {{1.0 / 3.0, 1.0 / 3.0}};
            r.weights = {0.5};
            r.order = 1;
            break;
        case 3:
            r.points = {{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}};
            r.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
            r.order = 2;
            break;
        case 6: {
            // Strang-Fix / Dunavant degree-4 rule.
            const double a = 0.445948490915965, wa = 0.223381589678011 / 2.0;
            const double b = 0.091576213509771, wb = 0.109951743655322 / 2.0;
            r.points = {{a, a}, {1.0 - 2.0 * a, a}, {a, 1.0 - 2.0 * a},
                        {b, b}, {1.0 - 2.0 * b, b}, {b, 1.0 - 2.0 * b}};
            r.weights = {wa, wa, wa, wb, wb, wb};
            // Renormalize so the weights sum to the reference area to machine precision.
            double s = 0.0;
            for (double w : r.weights) s += w;
            for (double& w : r.weights) w *= 0.5 / s;
            r.order = 4;
            break;
        }
        default: throw InvalidArgument("triangle_rule supports 1, 3 or 6 points");
    }
    return r;
}

// ---------------------------------------------------------------------------
// SparseSymMatrix

SparseSymMatrix::SparseSymMatrix(Eigen::SparseMatrix<double> lower) : lower_(std::move(lower)) {
    if (lower_.rows() != lower_.cols()) throw InvalidArgument("symmetric matrix must be square");
    lower_ = Eigen::SparseMatrix<double>(lower_.triangularView<Eigen::Lower>());
    lower_.prune(0.0);
    lower_.makeCompressed();
}

SparseSymMatrix SparseSymMatrix::from_triplets(int n, const std::vector<Eigen::Triplet<double>>& triplets) {
    std::vector<Eigen::Triplet<double>> lower;
    lower.reserve(triplets.size());
    for (const auto& t : triplets) {
        if (t.row() >= t.col())
            lower.push_back(t);
        else
            lower.emplace_back(t.col(), t.row(), t.value());
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(lower.begin(), lower.end());
    return SparseSymMatrix(std::move(m));
}

SparseSymMatrix SparseSymMatrix::from_dense(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw InvalidArgument("symmetric matrix must be square");
    Eigen::MatrixXd lower = m.triangularView<Eigen::Lower>();
    return SparseSymMatrix(lower.sparseView());
}

Eigen::SparseMatrix<double> SparseSymMatrix::full() const {
    Eigen::SparseMatrix<double> f = lower_.selfadjointView<Eigen::Lower>();
    return f;
}

Eigen::VectorXd SparseSymMatrix::operator*(const Eigen::VectorXd& x) const {
    if (x.size() != n()) throw InvalidArgument("dimension mismatch in matrix-vector product");
    Eigen::VectorXd y = lower_.selfadjointView<Eigen::Lower>() * x;
    return y;
}

Eigen::MatrixXd SparseSymMatrix::operator*(const Eigen::MatrixXd& x) const {
    if (x.rows() != n()) throw InvalidArgument("dimension mismatch in matrix product");
    Eigen::MatrixXd y = lower_.selfadjointView<Eigen::Lower>() * x;
    return y;
}

SparseSymMatrix SparseSymMatrix::operator+(const SparseSymMatrix& other) const { return plus_scaled(1.0, other); }

SparseSymMatrix SparseSymMatrix::operator*(double s) const {
    Eigen::SparseMatrix<double> m = lower_ * s;
    return SparseSymMatrix(std::move(m));
}

SparseSymMatrix SparseSymMatrix::plus_scaled(double s, const SparseSymMatrix& other) const {
    if (other.n() != n()) throw InvalidArgument("dimension mismatch in matrix sum");
    Eigen::SparseMatrix<double> m = lower_ + s * other.lower_;
    return SparseSymMatrix(std::move(m));
}

void write_matrix_market(const SparseSymMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write matrix file " + path);
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << m.n() << ' ' << m.n() << ' ' << m.nonzeros() << '\n';
    out << std::setprecision(17);
    const auto& l = m.lower();
    for (int c = 0; c < l.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(l, c); it; ++it)
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    if (!out) throw IoError("write failed for " + path);
}

SparseSymMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matrix file " + path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("%%MatrixMarket matrix coordinate real", 0) != 0)
        throw IoError("unsupported Matrix Market header in " + path);
    const bool symmetric = line.find("symmetric") != std::string::npos;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '%') break;
    std::istringstream size_line(line);
    long rows = 0, cols = 0, nnz = 0;
    if (!(size_line >> rows >> cols >> nnz) || rows != cols) throw IoError("bad size line in " + path);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nnz));
    for (long k = 0; k < nnz; ++k) {
        long r = 0, c = 0;
        double v = 0.0;
        if (!(in >> r >> c >> v)) throw IoError("truncated matrix file " + path);
        if (symmetric || r >= c) trip.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), v);
    }
    return SparseSymMatrix::from_triplets(static_cast<int>(rows), trip);
}

void write_matrix_market_dense(const Eigen::MatrixXd& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write matrix file " + path);
    out << "%%MatrixMarket matrix array real general\n" << m.rows() << ' ' << m.cols() << '\n';
    out << std::setprecision(17);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) out << m(r, c) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Spaces

int num_components(SpaceKind kind) { return kind == SpaceKind::Q1vector2 ? 2 : 1; }

int shapes_per_element(SpaceKind kind) {
    switch (kind) {
        case SpaceKind::Q1scalar:
        case SpaceKind::Q1vector2: return 4;
        case SpaceKind::P1scalar1D: return 2;
        case SpaceKind::P2scalar1D: return 3;
        case SpaceKind::Morley: return 6;
    }
    return 0;
}

namespace {

ElementKind required_element(SpaceKind kind) {
    switch (kind) {
        case SpaceKind::Q1scalar:
        case SpaceKind::Q1vector2: return ElementKind::Quad4;
        case SpaceKind::P1scalar1D:
        case SpaceKind::P2scalar1D: return ElementKind::Segment;
        case SpaceKind::Morley: return ElementKind::Tri3;
    }
    return ElementKind::Quad4;
}

int axis_of(const Point& normal) {
    constexpr double tol = 1e-12;
    if (std::abs(std::abs(normal[0]) - 1.0) < tol && std::abs(normal[1]) < tol) return 0;
    if (std::abs(std::abs(normal[1]) - 1.0) < tol && std::abs(normal[0]) < tol) return 1;
    throw UnsupportedConfiguration("normal/tangential traces are only supported on axis-aligned facets");
}

std::array<int, 2> edge_key(int a, int b) { return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a}; }

void finalize_free(DofMap& dm) {
    dm.free_index.assign(static_cast<std::size_t>(dm.n_dofs), -1);
    dm.n_free = 0;
    for (int g = 0; g < dm.n_dofs; ++g)
        if (!dm.constrained[static_cast<std::size_t>(g)]) dm.free_index[static_cast<std::size_t>(g)] = dm.n_free++;
}

}  // namespace

Eigen::VectorXd DofMap::restrict_to_free(const Eigen::VectorXd& full) const {
    if (full.size() != n_dofs) throw InvalidArgument("restrict_to_free: vector length != n_dofs");
    Eigen::VectorXd r(n_free);
    for (int g = 0; g < n_dofs; ++g)
        if (free_index[static_cast<std::size_t>(g)] >= 0) r(free_index[static_cast<std::size_t>(g)]) = full(g);
    return r;
}

Eigen::VectorXd DofMap::expand_from_free(const Eigen::VectorXd& reduced) const {
    if (reduced.size() != n_free) throw InvalidArgument("expand_from_free: vector length != n_free");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n_dofs);
    for (int g = 0; g < n_dofs; ++g)
        if (free_index[static_cast<std::size_t>(g)] >= 0) f(g) = reduced(free_index[static_cast<std::size_t>(g)]);
    return f;
}

DofMap build_dofmap(const Mesh& mesh, SpaceKind space, const EssentialFn& essential) {
    if (mesh.kind != required_element(space))
        throw InvalidArgument("space is incompatible with the mesh element kind " + to_string(mesh.kind));
    DofMap dm;
    const int nn = static_cast<int>(mesh.num_nodes());
    const int ne = static_cast<int>(mesh.num_elements());
    const int ncomp = num_components(space);

    if (space == SpaceKind::Morley) {
        std::map<std::array<int, 2>, int> edge_ids;
        dm.element_edges.resize(static_cast<std::size_t>(ne));
        for (int e = 0; e < ne; ++e) {
            const auto& el = mesh.elements[static_cast<std::size_t>(e)];
            for (int k = 0; k < 3; ++k) {
                const auto key = edge_key(el[k], el[(k + 1) % 3]);
                auto [it, inserted] = edge_ids.emplace(key, static_cast<int>(dm.edges.size()));
                if (inserted) dm.edges.push_back(key);
                dm.element_edges[static_cast<std::size_t>(e)][k] = it->second;
            }
        }
        dm.n_dofs = nn + static_cast<int>(dm.edges.size());
        for (int e = 0; e < ne; ++e) {
            const auto& el = mesh.elements[static_cast<std::size_t>(e)];
            const auto& ee = dm.element_edges[static_cast<std::size_t>(e)];
            dm.element_dofs.push_back({el[0], el[1], el[2], nn + ee[0], nn + ee[1], nn + ee[2]});
        }
        dm.constrained.assign(static_cast<std::size_t>(dm.n_dofs), 0);
        for (const auto& f : mesh.facets) {
            const Trace t = essential(f.tag);
            if (t == Trace::None) continue;
            const bool values = t == Trace::Full || t == Trace::FullAndNormalDerivative;
            const bool slopes = t == Trace::NormalDerivative || t == Trace::FullAndNormalDerivative;
            if (!values && !slopes) throw InvalidArgument("trace kind not available for the Morley space");
            if (values)
                for (int n : f.nodes) dm.constrained[static_cast<std::size_t>(n)] = 1;
            if (slopes)
                dm.constrained[static_cast<std::size_t>(nn + edge_ids.at(edge_key(f.nodes[0], f.nodes[1])))] = 1;
        }
    } else {
        int entities = nn;
        if (space == SpaceKind::P2scalar1D) entities = nn + ne;
        dm.n_dofs = ncomp * entities;
        for (int e = 0; e < ne; ++e) {
            const auto& el = mesh.elements[static_cast<std::size_t>(e)];
            std::vector<int> local;
            for (int c = 0; c < ncomp; ++c) {
                for (int n : el) local.push_back(c * entities + n);
                if (space == SpaceKind::P2scalar1D) local.push_back(nn + e);
            }
            dm.element_dofs.push_back(std::move(local));
        }
        dm.constrained.assign(static_cast<std::size_t>(dm.n_dofs), 0);
        for (const auto& f : mesh.facets) {
            const Trace t = essential(f.tag);
            if (t == Trace::None) continue;
            std::vector<int> comps;
            switch (t) {
                case Trace::Full:
                    for (int c = 0; c < ncomp; ++c) comps.push_back(c);
                    break;
                case Trace::Normal:
                case Trace::Tangential: {
                    if (space != SpaceKind::Q1vector2)
                        throw InvalidArgument("normal/tangential traces need a vector space");
                    const int axis = axis_of(f.normal);
                    comps.push_back(t == Trace::Normal ? axis : 1 - axis);
                    break;
                }
                default: throw InvalidArgument("trace kind not available for a Lagrange space");
            }
            for (int c : comps)
                for (int n : f.nodes) dm.constrained[static_cast<std::size_t>(c * entities + n)] = 1;
        }
    }
    dm.blocks.push_back(DofBlock{space, 0, 0, dm.n_dofs});
    finalize_free(dm);
    return dm;
}

DofMap stack_dofmaps(const std::vector<DofMap>& parts) {
    if (parts.empty()) throw InvalidArgument("stack_dofmaps needs at least one part");
    DofMap out;
    out.element_dofs.resize(parts.front().element_dofs.size());
    int component = 0;
    for (const auto& p : parts) {
        if (p.element_dofs.size() != out.element_dofs.size())
            throw InvalidArgument("stacked dof maps must share the mesh");
        for (const auto& b : p.blocks) {
            DofBlock nb = b;
            nb.first_component = component + b.first_component;
            nb.dof_offset = out.n_dofs + b.dof_offset;
            out.blocks.push_back(nb);
        }
        for (std::size_t e = 0; e < p.element_dofs.size(); ++e)
            for (int g : p.element_dofs[e]) out.element_dofs[e].push_back(out.n_dofs + g);
        out.constrained.insert(out.constrained.end(), p.constrained.begin(), p.constrained.end());
        if (!p.edges.empty()) {
            out.edges = p.edges;
            out.element_edges = p.element_edges;
        }
        int comps = 0;
        for (const auto& b : p.blocks) comps = std::max(comps, b.first_component + num_components(b.kind));
        component += comps;
        out.n_dofs += p.n_dofs;
    }
    if (component > 3) throw InvalidArgument("at most three field components are supported");
    finalize_free(out);
    return out;
}

// ---------------------------------------------------------------------------
// Element basis evaluation

namespace {

struct Geometry {
    Point x{};
    double det = 0.0;
    double jinv[2][2] = {{0, 0}, {0, 0}};  // inverse Jacobian (ref derivatives -> physical)
};

/// Q1 reference shapes and derivatives at (xi, eta).
void q1_shapes(double xi, double eta, double n[4], double dn[4][2]) {
    const double sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, -1, 1, 1};
    for (int a = 0; a < 4; ++a) {
        n[a] = 0.25 * (1 + sx[a] * xi) * (1 + sy[a] * eta);
        dn[a][0] = 0.25 * sx[a] * (1 + sy[a] * eta);
        dn[a][1] = 0.25 * sy[a] * (1 + sx[a] * xi);
    }
}

Geometry quad_geometry(const Mesh& mesh, const std::vector<int>& el, const Point& ref, double n[4], double dn[4][2]) {
    q1_shapes(ref[0], ref[1], n, dn);
    Geometry g;
    double j[2][2] = {{0, 0}, {0, 0}};
    for (int a = 0; a < 4; ++a) {
        const auto& p = mesh.nodes[static_cast<std::size_t>(el[a])];
        g.x[0] += n[a] * p[0];
        g.x[1] += n[a] * p[1];
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) j[r][c] += p[r] * dn[a][c];
    }
    g.det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    // d(ref)/d(x) = J^{-1}
    g.jinv[0][0] = j[1][1] / g.det;
    g.jinv[0][1] = -j[0][1] / g.det;
    g.jinv[1][0] = -j[1][0] / g.det;
    g.jinv[1][1] = j[0][0] / g.det;
    return g;
}

/// Morley basis of one triangle as coefficients over scaled monomials
/// {1, X, Y, X^2, XY, Y^2}, X = (x - cx) / h, Y = (y - cy) / h.
struct MorleyBasis {
    Point c{};
    double h = 1.0;
    Eigen::Matrix<double, 6, 6> coef;  // column i = basis i

    MorleyBasis(const Mesh& mesh, const DofMap& dm, std::size_t e) {
        const auto& el = mesh.elements[e];
        Point p[3];
        for (int k = 0; k < 3; ++k) p[k] = mesh.nodes[static_cast<std::size_t>(el[k])];
        c = {(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0};
        h = std::max({std::hypot(p[1][0] - p[0][0], p[1][1] - p[0][1]), std::hypot(p[2][0] - p[1][0], p[2][1] - p[1][1]),
                      std::hypot(p[0][0] - p[2][0], p[0][1] - p[2][1])});
        Eigen::Matrix<double, 6, 6> v;
        for (int k = 0; k < 3; ++k) {
            const double X = (p[k][0] - c[0]) / h, Y = (p[k][1] - c[1]) / h;
            v.row(k) << 1, X, Y, X * X, X * Y, Y * Y;
        }
        for (int k = 0; k < 3; ++k) {
            const auto& edge = dm.edges[static_cast<std::size_t>(dm.element_edges[e][k])];
            const auto& a = mesh.nodes[static_cast<std::size_t>(edge[0])];
            const auto& b = mesh.nodes[static_cast<std::size_t>(edge[1])];
            const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
            const double nx = (b[1] - a[1]) / len, ny = -(b[0] - a[0]) / len;
            const double X = (0.5 * (a[0] + b[0]) - c[0]) / h, Y = (0.5 * (a[1] + b[1]) - c[1]) / h;
            // d/dn of each monomial, in physical units
            v.row(3 + k) << 0, nx / h, ny / h, 2 * X * nx / h, (Y * nx + X * ny) / h, 2 * Y * ny / h;
        }
        coef = v.inverse();
    }

    void eval(const Point& x, int i, FieldEval& f) const {
        const double X = (x[0] - c[0]) / h, Y = (x[1] - c[1]) / h;
        const auto a = coef.col(i);
        f.value[0] = a(0) + a(1) * X + a(2) * Y + a(3) * X * X + a(4) * X * Y + a(5) * Y * Y;
        f.grad[0][0] = (a(1) + 2 * a(3) * X + a(4) * Y) / h;
        f.grad[0][1] = (a(2) + a(4) * X + 2 * a(5) * Y) / h;
        const double h2 = h * h;
        f.hess = {2 * a(3) / h2, a(4) / h2, a(4) / h2, 2 * a(5) / h2};
    }
};

/// Evaluates all local basis functions of an element at one reference point.
class ElementBasis {
public:
    ElementBasis(const Mesh& mesh, const DofMap& dm, std::size_t e) : mesh_(mesh), dm_(dm), e_(e) {
        for (const auto& b : dm.blocks)
            if (b.kind == SpaceKind::Morley) morley_.emplace(mesh, dm, e);
    }

    Geometry eval(const Point& ref, std::vector<FieldEval>& out) const {
        const auto& el = mesh_.elements[e_];
        Geometry g;
        double n[4] = {0, 0, 0, 0}, dn[4][2] = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};
        double seg_n[3] = {0, 0, 0}, seg_dn[3] = {0, 0, 0};
        switch (mesh_.kind) {
            case ElementKind::Quad4: g = quad_geometry(mesh_, el, ref, n, dn); break;
            case ElementKind::Segment: {
                const double x0 = mesh_.nodes[static_cast<std::size_t>(el[0])][0];
                const double x1 = mesh_.nodes[static_cast<std::size_t>(el[1])][0];
                const double xi = ref[0];
                g.det = 0.5 * (x1 - x0);
                g.x = {0.5 * (1 - xi) * x0 + 0.5 * (1 + xi) * x1, 0.0};
                g.jinv[0][0] = 1.0 / g.det;
                break;
            }
            case ElementKind::Tri3: {
                const auto& p0 = mesh_.nodes[static_cast<std::size_t>(el[0])];
                const auto& p1 = mesh_.nodes[static_cast<std::size_t>(el[1])];
                const auto& p2 = mesh_.nodes[static_cast<std::size_t>(el[2])];
                g.x = {p0[0] + ref[0] * (p1[0] - p0[0]) + ref[1] * (p2[0] - p0[0]),
                       p0[1] + ref[0] * (p1[1] - p0[1]) + ref[1] * (p2[1] - p0[1])};
                g.det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
                break;
            }
        }
        out.clear();
        for (const auto& b : dm_.blocks) {
            const int ncomp = num_components(b.kind);
            for (int c = 0; c < ncomp; ++c) {
                const int slot = b.first_component + c;
                switch (b.kind) {
                    case SpaceKind::Q1scalar:
                    case SpaceKind::Q1vector2:
                        for (int a = 0; a < 4; ++a) {
                            FieldEval f;
                            f.x = g.x;
                            f.value[slot] = n[a];
                            f.grad[slot][0] = g.jinv[0][0] * dn[a][0] + g.jinv[1][0] * dn[a][1];
                            f.grad[slot][1] = g.jinv[0][1] * dn[a][0] + g.jinv[1][1] * dn[a][1];
                            out.push_back(f);
                        }
                        break;
                    case SpaceKind::P1scalar1D:
                    case SpaceKind::P2scalar1D: {
                        const double xi = ref[0];
                        int count = 2;
                        if (b.kind == SpaceKind::P1scalar1D) {
                            seg_n[0] = 0.5 * (1 - xi);
                            seg_n[1] = 0.5 * (1 + xi);
                            seg_dn[0] = -0.5;
                            seg_dn[1] = 0.5;
                        } else {
                            count = 3;
                            seg_n[0] = 0.5 * xi * (xi - 1);
                            seg_n[1] = 0.5 * xi * (xi + 1);
                            seg_n[2] = 1 - xi * xi;
                            seg_dn[0] = xi - 0.5;
                            seg_dn[1] = xi + 0.5;
                            seg_dn[2] = -2 * xi;
                        }
                        for (int a = 0; a < count; ++a) {
                            FieldEval f;
                            f.x = g.x;
                            f.value[slot] = seg_n[a];
                            f.grad[slot][0] = seg_dn[a] * g.jinv[0][0];
                            out.push_back(f);
                        }
                        break;
                    }
                    case SpaceKind::Morley:
                        for (int a = 0; a < 6; ++a) {
                            FieldEval f;
                            f.x = g.x;
                            FieldEval tmp;
                            morley_->eval(g.x, a, tmp);
                            f.value[slot] = tmp.value[0];
                            f.grad[slot] = tmp.grad[0];
                            if (slot == 0) f.hess = tmp.hess;
                            out.push_back(f);
                        }
                        break;
                }
            }
        }
        return g;
    }

private:
    const Mesh& mesh_;
    const DofMap& dm_;
    std::size_t e_;
    std::optional<MorleyBasis> morley_;
};

const QuadratureRule& default_rule(ElementKind kind) {
    static const QuadratureRule quad = gauss_quad(2, 2);
    static const QuadratureRule seg = gauss_segment(3);
    static const QuadratureRule tri = triangle_rule(6);
    switch (kind) {
        case ElementKind::Quad4: return quad;
        case ElementKind::Segment: return seg;
        case ElementKind::Tri3: return tri;
    }
    return quad;
}

void check_dofmap(const Mesh& mesh, const DofMap& dm) {
    if (dm.element_dofs.size() != mesh.num_elements()) throw InvalidArgument("dof map does not match the mesh");
    for (const auto& b : dm.blocks)
        if (mesh.kind != required_element(b.kind)) throw InvalidArgument("dof map space incompatible with mesh");
}

}  // namespace

SparseSymMatrix assemble(const Mesh& mesh, const DofMap& dofmap, const Density& density, const QuadratureRule* rule,
                         Reduction reduction) {
    check_dofmap(mesh, dofmap);
    const QuadratureRule& q = rule ? *rule : default_rule(mesh.kind);
    const bool reduce = reduction == Reduction::FreeDofs;
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<FieldEval> basis;
    Eigen::MatrixXd local;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& dofs = dofmap.element_dofs[e];
        const auto nl = static_cast<Eigen::Index>(dofs.size());
        local.setZero(nl, nl);
        ElementBasis eb(mesh, dofmap, e);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const Geometry g = eb.eval(q.points[k], basis);
            if (!(g.det > 0.0)) throw AssemblyError("non-positive Jacobian", static_cast<long>(e));
            const double w = q.weights[k] * g.det;
            for (Eigen::Index i = 0; i < nl; ++i)
                for (Eigen::Index j = 0; j <= i; ++j) {
                    double v = 0.0;
                    try {
                        v = density(basis[static_cast<std::size_t>(j)], basis[static_cast<std::size_t>(i)]);
                    } catch (const std::exception& ex) {
                        throw AssemblyError(std::string("density evaluation failed: ") + ex.what(),
                                            static_cast<long>(e));
                    }
                    if (!std::isfinite(v)) throw AssemblyError("density returned a non-finite value", static_cast<long>(e));
                    local(i, j) += w * v;
                }
        }
        for (Eigen::Index i = 0; i < nl; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                int gi = dofs[static_cast<std::size_t>(i)], gj = dofs[static_cast<std::size_t>(j)];
                if (reduce) {
                    gi = dofmap.free_index[static_cast<std::size_t>(gi)];
                    gj = dofmap.free_index[static_cast<std::size_t>(gj)];
                    if (gi < 0 || gj < 0) continue;
                }
                const double v = local(i, j);
                if (v == 0.0) continue;
                trip.emplace_back(std::max(gi, gj), std::min(gi, gj), v);
                // Off-diagonal local pairs that land on the same global dof contribute twice.
                if (i != j && gi == gj) trip.emplace_back(gi, gi, v);
            }
    }
    return SparseSymMatrix::from_triplets(reduce ? dofmap.n_free : dofmap.n_dofs, trip);
}

Eigen::VectorXd assemble_load(const Mesh& mesh, const DofMap& dofmap,
                              const std::function<double(const FieldEval& test)>& density, const QuadratureRule* rule) {
    check_dofmap(mesh, dofmap);
    const QuadratureRule& q = rule ? *rule : default_rule(mesh.kind);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dofmap.n_dofs);
    std::vector<FieldEval> basis;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& dofs = dofmap.element_dofs[e];
        ElementBasis eb(mesh, dofmap, e);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const Geometry g = eb.eval(q.points[k], basis);
            const double w = q.weights[k] * g.det;
            for (std::size_t i = 0; i < dofs.size(); ++i) b(dofs[i]) += w * density(basis[i]);
        }
    }
    return b;
}

FieldEval evaluate_field(const Mesh& mesh, const DofMap& dofmap, const Eigen::VectorXd& coeffs, std::size_t element,
                         const Point& ref_point) {
    if (coeffs.size() != dofmap.n_dofs) throw InvalidArgument("coefficient vector length != n_dofs");
    ElementBasis eb(mesh, dofmap, element);
    std::vector<FieldEval> basis;
    const Geometry g = eb.eval(ref_point, basis);
    FieldEval out;
    out.x = g.x;
    const auto& dofs = dofmap.element_dofs[element];
    for (std::size_t i = 0; i < dofs.size(); ++i) {
        const double c = coeffs(dofs[i]);
        for (int s = 0; s < 3; ++s) {
            out.value[s] += c * basis[i].value[s];
            out.grad[s][0] += c * basis[i].grad[s][0];
            out.grad[s][1] += c * basis[i].grad[s][1];
        }
        for (int s = 0; s < 4; ++s) out.hess[s] += c * basis[i].hess[s];
    }
    return out;
}

std::pair<Point, double> map_reference(const Mesh& mesh, std::size_t element, const Point& ref_point) {
    DofMap geom;
    geom.element_dofs.resize(mesh.num_elements());
    ElementBasis eb(mesh, geom, element);
    std::vector<FieldEval> unused;
    const Geometry g = eb.eval(ref_point, unused);
    return {g.x, g.det};
}

Eigen::VectorXd interpolate(const Mesh& mesh, const DofMap& dofmap,
                            const std::function<double(const Point& x, int component)>& fn) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dofmap.n_dofs);
    const int nn = static_cast<int>(mesh.num_nodes());
    for (const auto& b : dofmap.blocks) {
        if (b.kind == SpaceKind::Morley) throw InvalidArgument("use morley_interpolate for Morley blocks");
        const int ncomp = num_components(b.kind);
        const int entities = b.n_dofs / ncomp;
        for (int c = 0; c < ncomp; ++c) {
            for (int n = 0; n < nn; ++n)
                v(b.dof_offset + c * entities + n) = fn(mesh.nodes[static_cast<std::size_t>(n)], b.first_component + c);
            if (b.kind == SpaceKind::P2scalar1D)
                for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
                    const auto& el = mesh.elements[static_cast<std::size_t>(e)];
                    const Point mid{0.5 * (mesh.nodes[static_cast<std::size_t>(el[0])][0] +
                                           mesh.nodes[static_cast<std::size_t>(el[1])][0]),
                                    0.0};
                    v(b.dof_offset + c * entities + nn + e) = fn(mid, b.first_component + c);
                }
        }
    }
    return v;
}

Eigen::VectorXd morley_interpolate(const Mesh& mesh, const DofMap& dofmap,
                                   const std::function<double(const Point&)>& u,
                                   const std::function<Point(const Point&)>& grad_u) {
    if (dofmap.blocks.size() != 1 || dofmap.blocks.front().kind != SpaceKind::Morley)
        throw InvalidArgument("morley_interpolate needs a single Morley block");
    const int nn = static_cast<int>(mesh.num_nodes());
    Eigen::VectorXd v(dofmap.n_dofs);
    for (int n = 0; n < nn; ++n) v(n) = u(mesh.nodes[static_cast<std::size_t>(n)]);
    for (std::size_t k = 0; k < dofmap.edges.size(); ++k) {
        const auto& a = mesh.nodes[static_cast<std::size_t>(dofmap.edges[k][0])];
        const auto& b = mesh.nodes[static_cast<std::size_t>(dofmap.edges[k][1])];
        const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
        const Point nrm{(b[1] - a[1]) / len, -(b[0] - a[0]) / len};
        const Point g = grad_u({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])});
        v(nn + static_cast<int>(k)) = g[0] * nrm[0] + g[1] * nrm[1];
    }
    return v;
}

}  // namespace rmplate
