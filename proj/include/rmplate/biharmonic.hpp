#pragma once

#include <functional>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "rmplate/fem.hpp"
#include "rmplate/mesh.hpp"
#include "rmplate/rm_system.hpp"

namespace rmplate {

enum class LimitBc { Clamped, Navier, Intermediate, Free };

std::string to_string(LimitBc bc);
LimitBc limit_bc_from_string(const std::string& s);

/// Boundary conditions reached by the biharmonic limit t -> 0 of each RM family.
/// Throws UnsupportedLimit for HardRigid and WeakNeumann.
LimitBc map_limit_bc(BcFamily bc);

/// Shifted Kirchhoff-Love pencil on Morley elements:
///   A = E/(12(1-s^2)) int [(1-s) D2u:D2v + s Lap u Lap v] + int u v,   B = int u v.
struct BiharmonicPencil {
    SparseSymMatrix A;
    SparseSymMatrix B;
    DofMap dofmap;  // vertex values, then edge normal derivatives
    std::shared_ptr<const Mesh> mesh;
    LimitBc bc = LimitBc::Clamped;
    double E = 1.0;
    double sigma = 0.3;
};

BiharmonicPencil assemble_biharmonic_pencil(const Mesh& tri_mesh, double E, double sigma, LimitBc bc);

/// Solves A u = (int f phi_i)_i; returns the full Morley coefficient vector (constrained dofs zero).
Eigen::VectorXd solve_biharmonic_source(const BiharmonicPencil& pencil, const std::function<double(const Point&)>& f,
                                        double* relative_residual = nullptr);

}  // namespace rmplate
