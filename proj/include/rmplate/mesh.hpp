#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rmplate {

using Point = std::array<double, 2>;

enum class ElementKind { Segment, Quad4, Tri3 };
enum class BoundaryTag { Lateral, TopBottom, WholeBoundary };

std::string to_string(ElementKind kind);
std::string to_string(BoundaryTag tag);
ElementKind element_kind_from_string(const std::string& s);
BoundaryTag boundary_tag_from_string(const std::string& s);

struct Facet {
    std::vector<int> nodes;  // 1 node (Segment mesh) or 2 nodes (edge)
    BoundaryTag tag = BoundaryTag::WholeBoundary;
    Point normal{0.0, 0.0};  // outward unit normal
    int element = -1;        // owning element
};

/// Tensor-grid shape of a structured mesh; node (i, j) sits at index j * (nx + 1) + i.
struct GridShape {
    int nx = 0;
    int ny = 0;
    int node(int i, int j) const { return j * (nx + 1) + i; }
};

/// Immutable-after-construction mesh of a 1D interval or a 2D plate domain.
/// Quad4 nodes are numbered counterclockwise; Tri3 likewise.
struct Mesh {
    int dim = 2;
    ElementKind kind = ElementKind::Quad4;
    std::vector<Point> nodes;  // for dim == 1 only the first coordinate is used
    std::vector<std::vector<int>> elements;
    std::vector<Facet> facets;
    std::optional<GridShape> grid;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_elements() const { return elements.size(); }

    double element_measure(std::size_t e) const;
    double total_measure() const;
    Point element_centroid(std::size_t e) const;

    /// Checks index ranges, unit normals, outwardness and positive orientation; throws InvalidArgument.
    void validate() const;
};

/// Piecewise-linear function on a sorted knot vector, constant extrapolation outside.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    PiecewiseLinear(std::vector<double> knots, std::vector<double> values);
    static PiecewiseLinear constant(double a, double b, double value);

    double operator()(double x) const;
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    double min_value() const;

private:
    std::vector<double> knots_;
    std::vector<double> values_;
};

/// Thin profile domain {(x, y) : a < x < b, -delta f1(x) < y < delta f2(x)}.
struct ThinDomainSpec {
    double a = 0.0;
    double b = 1.0;
    PiecewiseLinear f1;
    PiecewiseLinear f2;
    double delta = 1.0;
    int d = 1;

    /// Section measure of the reference domain: g(x) = f1(x) + f2(x).
    double g(double x) const { return f1(x) + f2(x); }
    void validate() const;

    /// Uniform profile f1 = f2 = 1/2 on (a, b): Omega_delta = (a, b) x (-delta/2, delta/2).
    static ThinDomainSpec cylinder(double a, double b, double delta);
    ThinDomainSpec with_delta(double new_delta) const;
};

Mesh build_rect_mesh(double lx, double ly, int nx, int ny);
Mesh build_interval_mesh(double a, double b, int n);

/// Structured Quad4 mesh of Omega_delta; profiles are sampled at the nx + 1 grid columns.
Mesh build_thin_mesh(const ThinDomainSpec& spec, int nx, int ny);

/// Image of a thin mesh under (x, y) -> (x, y / delta).
Mesh rescale_to_reference(const Mesh& mesh_delta, const ThinDomainSpec& spec);

/// Splits every quad along its node0-node2 diagonal; facets are carried over.
Mesh triangulate(const Mesh& quad_mesh);

/// Translates all node coordinates.
Mesh translated(const Mesh& mesh, Point shift);

nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const nlohmann::json& j);
Mesh read_mesh(const std::string& path);
void write_mesh(const Mesh& mesh, const std::string& path);

ThinDomainSpec thin_spec_from_json(const nlohmann::json& j);

}  // namespace rmplate
