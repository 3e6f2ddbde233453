#include "rmplate/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rmplate/errors.hpp"

namespace rmplate {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Outward normal of the edge a -> b of a counterclockwise element.
Point edge_normal(const Point& a, const Point& b) {
    const double dx = b[0] - a[0];
    const double dy = b[1] - a[1];
    const double len = std::hypot(dx, dy);
    return {dy / len, -dx / len};
}

void add_edge_facet(Mesh& mesh, int element, int a, int b, BoundaryTag tag) {
    Facet f;
    f.nodes = {a, b};
    f.tag = tag;
    f.normal = edge_normal(mesh.nodes[a], mesh.nodes[b]);
    f.element = element;
    mesh.facets.push_back(std::move(f));
}

/// Structured quad mesh with node positions supplied per grid index; boundary facets tagged
/// Lateral on i = 0 / i = nx and `top_bottom` elsewhere.
template <typename NodeFn>
Mesh structured_quads(int nx, int ny, NodeFn&& node_at, BoundaryTag lateral, BoundaryTag top_bottom) {
    Mesh mesh;
    mesh.dim = 2;
    mesh.kind = ElementKind::Quad4;
    GridShape grid{nx, ny};
    mesh.grid = grid;
    mesh.nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) mesh.nodes.push_back(node_at(i, j));
    mesh.elements.reserve(static_cast<std::size_t>(nx * ny));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            mesh.elements.push_back(
                {grid.node(i, j), grid.node(i + 1, j), grid.node(i + 1, j + 1), grid.node(i, j + 1)});

    auto elem = [nx](int i, int j) { return j * nx + i; };
    for (int i = 0; i < nx; ++i) add_edge_facet(mesh, elem(i, 0), grid.node(i, 0), grid.node(i + 1, 0), top_bottom);
    for (int j = 0; j < ny; ++j)
        add_edge_facet(mesh, elem(nx - 1, j), grid.node(nx, j), grid.node(nx, j + 1), lateral);
    for (int i = nx - 1; i >= 0; --i)
        add_edge_facet(mesh, elem(i, ny - 1), grid.node(i + 1, ny), grid.node(i, ny), top_bottom);
    for (int j = ny - 1; j >= 0; --j) add_edge_facet(mesh, elem(0, j), grid.node(0, j + 1), grid.node(0, j), lateral);
    return mesh;
}

}  // namespace

std::string to_string(ElementKind kind) {
    switch (kind) {
        case ElementKind::Segment: return "Segment";
        case ElementKind::Quad4: return "Quad4";
        case ElementKind::Tri3: return "Tri3";
    }
    return "?";
}

std::string to_string(BoundaryTag tag) {
    switch (tag) {
        case BoundaryTag::Lateral: return "Lateral";
        case BoundaryTag::TopBottom: return "TopBottom";
        case BoundaryTag::WholeBoundary: return "WholeBoundary";
    }
    return "?";
}

ElementKind element_kind_from_string(const std::string& s) {
    if (s == "Segment") return ElementKind::Segment;
    if (s == "Quad4") return ElementKind::Quad4;
    if (s == "Tri3") return ElementKind::Tri3;
    throw InvalidArgument("unknown element kind '" + s + "'");
}

BoundaryTag boundary_tag_from_string(const std::string& s) {
    if (s == "Lateral") return BoundaryTag::Lateral;
    if (s == "TopBottom") return BoundaryTag::TopBottom;
    if (s == "WholeBoundary") return BoundaryTag::WholeBoundary;
    throw InvalidArgument("unknown boundary tag '" + s + "'");
}

double Mesh::element_measure(std::size_t e) const {
    const auto& el = elements.at(e);
    switch (kind) {
        case ElementKind::Segment: return std::abs(nodes[el[1]][0] - nodes[el[0]][0]);
        case ElementKind::Tri3: return 0.5 * cross(nodes[el[0]], nodes[el[1]], nodes[el[2]]);
        case ElementKind::Quad4: {
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                const auto& p = nodes[el[k]];
                const auto& q = nodes[el[(k + 1) % 4]];
                s += p[0] * q[1] - q[0] * p[1];
            }
            return 0.5 * s;
        }
    }
    return 0.0;
}

double Mesh::total_measure() const {
    double s = 0.0;
    for (std::size_t e = 0; e < elements.size(); ++e) s += element_measure(e);
    return s;
}

Point Mesh::element_centroid(std::size_t e) const {
    Point c{0.0, 0.0};
    const auto& el = elements.at(e);
    for (int n : el) {
        c[0] += nodes[n][0];
        c[1] += nodes[n][1];
    }
    c[0] /= static_cast<double>(el.size());
    c[1] /= static_cast<double>(el.size());
    return c;
}

void Mesh::validate() const {
    const auto nn = static_cast<int>(nodes.size());
    const std::size_t per = kind == ElementKind::Segment ? 2 : kind == ElementKind::Tri3 ? 3 : 4;
    if ((kind == ElementKind::Segment) != (dim == 1)) throw InvalidArgument("mesh dim does not match element kind");
    for (std::size_t e = 0; e < elements.size(); ++e) {
        if (elements[e].size() != per) throw InvalidArgument("element " + std::to_string(e) + " has wrong node count");
        for (int n : elements[e])
            if (n < 0 || n >= nn) throw InvalidArgument("element node index out of range");
        if (kind == ElementKind::Quad4) {
            // Bilinear map Jacobian at 2x2 Gauss points.
            const double g = 1.0 / std::sqrt(3.0);
            for (double xi : {-g, g})
                for (double eta : {-g, g}) {
                    const double dn[4][2] = {{-(1 - eta) / 4, -(1 - xi) / 4},
                                             {(1 - eta) / 4, -(1 + xi) / 4},
                                             {(1 + eta) / 4, (1 + xi) / 4},
                                             {-(1 + eta) / 4, (1 - xi) / 4}};
                    double j[2][2] = {{0, 0}, {0, 0}};
                    for (int a = 0; a < 4; ++a)
                        for (int r = 0; r < 2; ++r)
                            for (int c = 0; c < 2; ++c) j[r][c] += nodes[elements[e][a]][r] * dn[a][c];
                    if (j[0][0] * j[1][1] - j[0][1] * j[1][0] <= 0.0)
                        throw InvalidArgument("inverted quad element " + std::to_string(e));
                }
        } else if (element_measure(e) <= 0.0) {
            throw InvalidArgument("inverted element " + std::to_string(e));
        }
    }
    for (const auto& f : facets) {
        if (f.element < 0 || f.element >= static_cast<int>(elements.size()))
            throw InvalidArgument("facet without owning element");
        const auto& el = elements[f.element];
        Point mid{0.0, 0.0};
        for (int n : f.nodes) {
            if (n < 0 || n >= nn) throw InvalidArgument("facet node index out of range");
            if (std::find(el.begin(), el.end(), n) == el.end())
                throw InvalidArgument("facet node not in owning element");
            mid[0] += nodes[n][0] / static_cast<double>(f.nodes.size());
            mid[1] += nodes[n][1] / static_cast<double>(f.nodes.size());
        }
        if (std::abs(std::hypot(f.normal[0], f.normal[1]) - 1.0) > 1e-12)
            throw InvalidArgument("facet normal is not unit length");
        const Point c = element_centroid(f.element);
        if (f.normal[0] * (mid[0] - c[0]) + f.normal[1] * (mid[1] - c[1]) <= 0.0)
            throw InvalidArgument("facet normal is not outward");
    }
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.empty() || knots_.size() != values_.size())
        throw InvalidArgument("piecewise-linear profile needs matching, non-empty knots and values");
    if (!std::is_sorted(knots_.begin(), knots_.end()) ||
        std::adjacent_find(knots_.begin(), knots_.end()) != knots_.end())
        throw InvalidArgument("profile knots must be strictly increasing");
}

PiecewiseLinear PiecewiseLinear::constant(double a, double b, double value) {
    if (!(a < b)) return PiecewiseLinear({a}, {value});
    return PiecewiseLinear({a, b}, {value, value});
}

double PiecewiseLinear::operator()(double x) const {
    if (knots_.empty()) throw InvalidArgument("evaluating an empty profile");
    if (x <= knots_.front()) return values_.front();
    if (x >= knots_.back()) return values_.back();
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    const auto k = static_cast<std::size_t>(it - knots_.begin());
    const double x0 = knots_[k - 1], x1 = knots_[k];
    const double s = (x - x0) / (x1 - x0);
    return (1.0 - s) * values_[k - 1] + s * values_[k];
}

double PiecewiseLinear::min_value() const { return *std::min_element(values_.begin(), values_.end()); }

void ThinDomainSpec::validate() const {
    if (!(a < b)) throw InvalidArgument("thin domain base interval needs a < b");
    if (!(delta > 0.0)) throw InvalidArgument("thin domain needs delta > 0");
    if (d < 1) throw InvalidArgument("thin-direction count d must be >= 1");
    if (!(f1.min_value() > 0.0) || !(f2.min_value() > 0.0))
        throw InvalidArgument("profiles f1, f2 must be bounded below by a positive constant");
}

ThinDomainSpec ThinDomainSpec::cylinder(double a, double b, double delta) {
    ThinDomainSpec s;
    s.a = a;
    s.b = b;
    s.f1 = PiecewiseLinear::constant(a, b, 0.5);
    s.f2 = PiecewiseLinear::constant(a, b, 0.5);
    s.delta = delta;
    s.d = 1;
    return s;
}

ThinDomainSpec ThinDomainSpec::with_delta(double new_delta) const {
    ThinDomainSpec s = *this;
    s.delta = new_delta;
    return s;
}

Mesh build_rect_mesh(double lx, double ly, int nx, int ny) {
    if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("rectangle dimensions must be positive");
    if (nx < 1 || ny < 1) throw InvalidArgument("rectangle subdivisions must be >= 1");
    return structured_quads(
        nx, ny, [&](int i, int j) { return Point{lx * i / nx, ly * j / ny}; }, BoundaryTag::WholeBoundary,
        BoundaryTag::WholeBoundary);
}

Mesh build_interval_mesh(double a, double b, int n) {
    if (!(a < b)) throw InvalidArgument("interval needs a < b");
    if (n < 1) throw InvalidArgument("interval subdivisions must be >= 1");
    Mesh mesh;
    mesh.dim = 1;
    mesh.kind = ElementKind::Segment;
    for (int i = 0; i <= n; ++i) mesh.nodes.push_back({i == n ? b : a + (b - a) * i / n, 0.0});
    for (int i = 0; i < n; ++i) mesh.elements.push_back({i, i + 1});
    mesh.facets.push_back(Facet{{0}, BoundaryTag::WholeBoundary, {-1.0, 0.0}, 0});
    mesh.facets.push_back(Facet{{n}, BoundaryTag::WholeBoundary, {1.0, 0.0}, n - 1});
    return mesh;
}

Mesh build_thin_mesh(const ThinDomainSpec& spec, int nx, int ny) {
    if (spec.d != 1)
        throw UnsupportedConfiguration("thin meshes are only built for one thin direction (d = 1), got d = " +
                                       std::to_string(spec.d));
    spec.validate();
    if (nx < 1 || ny < 1) throw InvalidArgument("thin mesh subdivisions must be >= 1");
    const double len = spec.b - spec.a;
    return structured_quads(
        nx, ny,
        [&](int i, int j) {
            const double x = i == nx ? spec.b : spec.a + len * i / nx;
            const double s = static_cast<double>(j) / ny;
            return Point{x, -spec.delta * spec.f1(x) + s * spec.delta * spec.g(x)};
        },
        BoundaryTag::Lateral, BoundaryTag::TopBottom);
}

Mesh rescale_to_reference(const Mesh& mesh_delta, const ThinDomainSpec& spec) {
    if (!mesh_delta.grid || mesh_delta.kind != ElementKind::Quad4)
        throw InvalidArgument("rescale_to_reference needs a structured thin mesh");
    const Mesh expected = build_thin_mesh(spec, mesh_delta.grid->nx, mesh_delta.grid->ny);
    if (expected.nodes.size() != mesh_delta.nodes.size())
        throw InvalidArgument("thin mesh does not match the domain spec");
    const double scale = std::max(std::abs(spec.b - spec.a), spec.delta);
    for (std::size_t n = 0; n < expected.nodes.size(); ++n)
        if (std::abs(expected.nodes[n][0] - mesh_delta.nodes[n][0]) > 1e-10 * scale ||
            std::abs(expected.nodes[n][1] - mesh_delta.nodes[n][1]) > 1e-10 * scale)
            throw InvalidArgument("thin mesh does not match the domain spec");

    Mesh out = mesh_delta;
    for (auto& p : out.nodes) p[1] /= spec.delta;
    for (auto& f : out.facets) {
        // Normals transform with the inverse transpose of diag(1, 1/delta).
        Point n{f.normal[0], f.normal[1] * spec.delta};
        const double len = std::hypot(n[0], n[1]);
        f.normal = {n[0] / len, n[1] / len};
    }
    return out;
}

Mesh triangulate(const Mesh& quad_mesh) {
    if (quad_mesh.kind != ElementKind::Quad4) throw InvalidArgument("triangulate needs a Quad4 mesh");
    Mesh out;
    out.dim = 2;
    out.kind = ElementKind::Tri3;
    out.nodes = quad_mesh.nodes;
    out.elements.reserve(2 * quad_mesh.elements.size());
    for (const auto& q : quad_mesh.elements) {
        out.elements.push_back({q[0], q[1], q[2]});
        out.elements.push_back({q[0], q[2], q[3]});
    }
    for (const auto& f : quad_mesh.facets) {
        Facet g = f;
        const auto& t0 = out.elements[2 * f.element];
        const bool in_t0 = std::find(t0.begin(), t0.end(), f.nodes[0]) != t0.end() &&
                           std::find(t0.begin(), t0.end(), f.nodes[1]) != t0.end();
        g.element = 2 * f.element + (in_t0 ? 0 : 1);
        out.facets.push_back(std::move(g));
    }
    return out;
}

Mesh translated(const Mesh& mesh, Point shift) {
    Mesh out = mesh;
    for (auto& p : out.nodes) {
        p[0] += shift[0];
        if (mesh.dim == 2) p[1] += shift[1];
    }
    return out;
}

nlohmann::json mesh_to_json(const Mesh& mesh) {
    nlohmann::json j;
    j["dim"] = mesh.dim;
    j["element_kind"] = to_string(mesh.kind);
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& p : mesh.nodes) {
        if (mesh.dim == 1)
            nodes.push_back({p[0]});
        else
            nodes.push_back({p[0], p[1]});
    }
    j["elements"] = mesh.elements;
    auto& facets = j["facets"] = nlohmann::json::array();
    for (const auto& f : mesh.facets) {
        nlohmann::json jf;
        jf["nodes"] = f.nodes;
        jf["tag"] = to_string(f.tag);
        if (mesh.dim == 1)
            jf["normal"] = {f.normal[0]};
        else
            jf["normal"] = {f.normal[0], f.normal[1]};
        jf["element"] = f.element;
        facets.push_back(std::move(jf));
    }
    if (mesh.grid) j["grid"] = {{"nx", mesh.grid->nx}, {"ny", mesh.grid->ny}};
    return j;
}

Mesh mesh_from_json(const nlohmann::json& j) {
    try {
        Mesh mesh;
        mesh.dim = j.at("dim").get<int>();
        mesh.kind = element_kind_from_string(j.at("element_kind").get<std::string>());
        for (const auto& p : j.at("nodes")) {
            if (static_cast<int>(p.size()) != mesh.dim) throw InvalidArgument("node coordinate length != dim");
            mesh.nodes.push_back({p[0].get<double>(), mesh.dim == 2 ? p[1].get<double>() : 0.0});
        }
        mesh.elements = j.at("elements").get<std::vector<std::vector<int>>>();
        for (const auto& jf : j.at("facets")) {
            Facet f;
            f.nodes = jf.at("nodes").get<std::vector<int>>();
            f.tag = boundary_tag_from_string(jf.at("tag").get<std::string>());
            const auto n = jf.at("normal");
            f.normal = {n[0].get<double>(), mesh.dim == 2 ? n[1].get<double>() : 0.0};
            if (jf.contains("element")) {
                f.element = jf["element"].get<int>();
            } else {
                // Locate the owning element by node containment.
                for (std::size_t e = 0; e < mesh.elements.size() && f.element < 0; ++e) {
                    const auto& el = mesh.elements[e];
                    if (std::all_of(f.nodes.begin(), f.nodes.end(),
                                    [&](int v) { return std::find(el.begin(), el.end(), v) != el.end(); }))
                        f.element = static_cast<int>(e);
                }
            }
            mesh.facets.push_back(std::move(f));
        }
        if (j.contains("grid")) mesh.grid = GridShape{j["grid"].at("nx").get<int>(), j["grid"].at("ny").get<int>()};
        mesh.validate();
        return mesh;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed mesh JSON: ") + e.what());
    }
}

Mesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse mesh file " + path + ": " + e.what());
    }
    return mesh_from_json(j);
}

void write_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh file " + path);
    out << mesh_to_json(mesh).dump(1) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

ThinDomainSpec thin_spec_from_json(const nlohmann::json& j) {
    try {
        ThinDomainSpec s;
        const auto x = j.at("x").get<std::vector<double>>();
        if (x.empty()) throw InvalidArgument("g-profile needs at least one x sample");
        s.a = j.value("a", x.front());
        s.b = j.value("b", x.back());
        s.f1 = PiecewiseLinear(x, j.at("f1").get<std::vector<double>>());
        s.f2 = PiecewiseLinear(x, j.at("f2").get<std::vector<double>>());
        s.delta = j.value("delta", 1.0);
        s.d = j.value("d", 1);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed g-profile JSON: ") + e.what());
    }
}

}  // namespace rmplate
