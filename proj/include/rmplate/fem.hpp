#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rmplate/mesh.hpp"

namespace rmplate {

// ---------------------------------------------------------------------------
// Quadrature

/// Reference-element quadrature. Quad rules live on [-1, 1]^2, segment rules on [-1, 1]
/// (second coordinate unused), triangle rules on the unit simplex {(0,0), (1,0), (0,1)}.
struct QuadratureRule {
    std::vector<Point> points;
    std::vector<double> weights;
    int order = 0;  // highest total polynomial degree integrated exactly

    std::size_t size() const { return points.size(); }
};

QuadratureRule gauss_segment(int npoints);
QuadratureRule gauss_quad(int nxi, int neta);
/// 1-point (order 1), 3-point (order 2) or 6-point (order 4) symmetric triangle rule.
QuadratureRule triangle_rule(int npoints);

// ---------------------------------------------------------------------------
// Sparse symmetric storage

/// Symmetric matrix stored as its compressed lower triangle.
class SparseSymMatrix {
public:
    SparseSymMatrix() = default;
    explicit SparseSymMatrix(Eigen::SparseMatrix<double> lower);

    /// Builds from triplets; entries above the diagonal are mirrored into the lower triangle.
    static SparseSymMatrix from_triplets(int n, const std::vector<Eigen::Triplet<double>>& triplets);
    static SparseSymMatrix from_dense(const Eigen::MatrixXd& m);

    int n() const { return static_cast<int>(lower_.rows()); }
    const Eigen::SparseMatrix<double>& lower() const { return lower_; }
    Eigen::SparseMatrix<double> full() const;
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(full()); }
    long nonzeros() const { return lower_.nonZeros(); }

    Eigen::VectorXd operator*(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd operator*(const Eigen::MatrixXd& x) const;
    double quadratic_form(const Eigen::VectorXd& x) const { return x.dot(*this * x); }

    SparseSymMatrix operator+(const SparseSymMatrix& other) const;
    SparseSymMatrix operator*(double s) const;
    /// this + s * other
    SparseSymMatrix plus_scaled(double s, const SparseSymMatrix& other) const;

private:
    Eigen::SparseMatrix<double> lower_;
};

void write_matrix_market(const SparseSymMatrix& m, const std::string& path);
SparseSymMatrix read_matrix_market(const std::string& path);
/// Dense column-major array format, one file per set of vectors.
void write_matrix_market_dense(const Eigen::MatrixXd& m, const std::string& path);

// ---------------------------------------------------------------------------
// Spaces and degree-of-freedom maps

enum class SpaceKind { Q1scalar, Q1vector2, P1scalar1D, P2scalar1D, Morley };

int num_components(SpaceKind kind);
int shapes_per_element(SpaceKind kind);

/// Essential trace imposed on a boundary facet.
///   Full           - every component (vertex values for Morley)
///   Normal         - eta . nu = 0 (Q1vector2 only, axis-aligned facets)
///   Tangential     - tangential trace zero (Q1vector2 only, axis-aligned facets)
///   NormalDerivative - Morley edge normal-derivative dofs
///   FullAndNormalDerivative - both Morley dof families
enum class Trace { None, Full, Normal, Tangential, NormalDerivative, FullAndNormalDerivative };

using EssentialFn = std::function<Trace(BoundaryTag)>;

inline EssentialFn no_essential() {
    return [](BoundaryTag) { return Trace::None; };
}
inline EssentialFn essential_everywhere(Trace t) {
    return [t](BoundaryTag) { return t; };
}

struct DofBlock {
    SpaceKind kind;
    int first_component = 0;  // component slot in FieldEval
    int dof_offset = 0;
    int n_dofs = 0;
};

/// Global numbering of one or more stacked blocks. Within a block, dof index is
/// component * (entities per component) + entity; blocks follow each other.
struct DofMap {
    int n_dofs = 0;
    std::vector<DofBlock> blocks;
    std::vector<std::vector<int>> element_dofs;  // concatenated block by block
    std::vector<char> constrained;               // per global dof
    std::vector<int> free_index;                 // global -> reduced index, -1 if constrained
    int n_free = 0;

    // Morley topology: global edges (node pairs, first < second) and per-element edge ids.
    std::vector<std::array<int, 2>> edges;
    std::vector<std::array<int, 3>> element_edges;

    int num_constrained() const { return n_dofs - n_free; }
    bool is_constrained(int g) const { return constrained[static_cast<std::size_t>(g)] != 0; }

    Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& full) const;
    Eigen::VectorXd expand_from_free(const Eigen::VectorXd& reduced) const;
};

DofMap build_dofmap(const Mesh& mesh, SpaceKind space, const EssentialFn& essential);

/// Stacks single-block maps built on the same mesh; constraint sets are carried over.
DofMap stack_dofmaps(const std::vector<DofMap>& parts);

// ---------------------------------------------------------------------------
// Assembly

/// Value, gradient and (scalar component 0) Hessian of a field at a quadrature point.
/// Up to three components; physical point in `x`.
struct FieldEval {
    std::array<double, 3> value{};
    std::array<std::array<double, 2>, 3> grad{};
    std::array<double, 4> hess{};  // row-major 2x2, component 0
    Point x{};
};

/// Symmetric bilinear density evaluated on (trial, test) basis functions.
using Density = std::function<double(const FieldEval& trial, const FieldEval& test)>;

enum class Reduction { FreeDofs, AllDofs };

/// Sum over elements of the quadrature of density(phi_j, phi_i). Uses `rule` when given,
/// otherwise the space default (2x2 Gauss on Quad4, 3-point Gauss on segments,
/// 6-point rule on triangles). Constrained rows/columns are dropped for Reduction::FreeDofs.
SparseSymMatrix assemble(const Mesh& mesh, const DofMap& dofmap, const Density& density,
                         const QuadratureRule* rule = nullptr, Reduction reduction = Reduction::FreeDofs);

/// Load vector of a linear density over all global dofs.
Eigen::VectorXd assemble_load(const Mesh& mesh, const DofMap& dofmap,
                              const std::function<double(const FieldEval& test)>& density,
                              const QuadratureRule* rule = nullptr);

/// Evaluates a discrete field (global coefficient vector) at a reference point of an element.
FieldEval evaluate_field(const Mesh& mesh, const DofMap& dofmap, const Eigen::VectorXd& coeffs, std::size_t element,
                         const Point& ref_point);

/// Physical point and Jacobian determinant of the reference map at a reference point.
std::pair<Point, double> map_reference(const Mesh& mesh, std::size_t element, const Point& ref_point);

// ---------------------------------------------------------------------------
// Interpolation

/// Nodal interpolant of a vector-valued function into the stacked Lagrange blocks
/// (Q1/P1/P2); `fn(x, component)` is called for every dof.
Eigen::VectorXd interpolate(const Mesh& mesh, const DofMap& dofmap,
                            const std::function<double(const Point& x, int component)>& fn);

/// Morley interpolant from a function and its gradient.
Eigen::VectorXd morley_interpolate(const Mesh& mesh, const DofMap& dofmap,
                                   const std::function<double(const Point&)>& u,
                                   const std::function<Point(const Point&)>& grad_u);

}  // namespace rmplate
