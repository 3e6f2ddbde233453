#pragma once

#include <array>
#include <string>

#include <Eigen/Dense>

#include "rmplate/fem.hpp"
#include "rmplate/mesh.hpp"

namespace rmplate {

struct MaterialParams {
    double E = 1.0;
    double sigma = 0.3;
    double k = 5.0 / 6.0;  // shear correction factor
    double t = 0.1;        // thickness
    int N = 2;             // space dimension the Poisson-ratio bound refers to

    /// Throws InvalidArgument unless E, k, t > 0 and -1/(N-1) < sigma < 1.
    void validate() const;

    /// Bending prefactor E / (12 (1 - sigma^2)).
    double bending_modulus() const { return E / (12.0 * (1.0 - sigma * sigma)); }
    /// Shear prefactor mu1 k / t^2 = E k / (2 (1 + sigma) t^2).
    double shear_modulus() const { return E * k / (2.0 * (1.0 + sigma) * t * t); }
    double rotary_inertia() const { return t * t / 12.0; }
};

struct Lame {
    double mu1;
    double mu2;
};

/// mu1 = E / (2 (1 + sigma)), mu2 = sigma E / (2 (1 - sigma^2)).
Lame lame_coefficients(const MaterialParams& params);

enum class BcFamily {
    HardClamped,
    SoftClamped,
    HardSimplySupported,
    SoftSimplySupported,
    FreeNeumann,
    HardRigid,
    SoftRigid,
    WeakNeumann
};

std::array<BcFamily, 8> all_bc_families();
std::string to_string(BcFamily bc);
/// Accepts the kebab-case names ("hard-clamped", "free", "weak-neumann", ...).
BcFamily bc_family_from_string(const std::string& s);

/// Essential traces realizing the (V, W) pair of a family.
struct BcSpaces {
    Trace beta;
    Trace w;
};
BcSpaces bc_spaces(BcFamily bc);

/// How the shear energy (grad w - beta).(grad v - eta) is integrated on Quad4.
///   Directional: x-component with 1x2 Gauss, y-component with 2x1 Gauss (no spurious modes)
///   OnePoint:    centroid rule for both components (has a checkerboard w mode)
///   Full:        2x2 Gauss (locks as t -> 0)
enum class ShearRule { Directional, OnePoint, Full };

/// Reissner-Mindlin pencil on a Quad4 mesh. Dof layout: beta_x at every node, then beta_y,
/// then w; matrices act on the free (unconstrained) dofs.
struct Pencil {
    SparseSymMatrix A;        // bending + shear (+ mass when shifted)
    SparseSymMatrix B;        // int w v + t^2/12 beta.eta
    SparseSymMatrix bending;  // the form a(beta, eta) alone
    SparseSymMatrix shear;
    SparseSymMatrix mass_all;  // B over all dofs, used for loads
    DofMap dofmap;
    MaterialParams params;
    BcFamily bc = BcFamily::FreeNeumann;
    bool shifted = true;
    int n_nodes = 0;

    /// Full-length vector [beta_x, beta_y, w] from nodal blocks.
    Eigen::VectorXd pack(const Eigen::VectorXd& beta, const Eigen::VectorXd& w) const;
};

struct FieldPair {
    Eigen::VectorXd beta;  // beta_x at all nodes, then beta_y
    Eigen::VectorXd w;
    double relative_residual = 0.0;

    Eigen::VectorXd packed() const;
};

Pencil assemble_rm_pencil(const Mesh& mesh, const MaterialParams& params, BcFamily bc, bool shifted,
                          ShearRule shear_rule = ShearRule::Directional);

/// Solves A (beta, w) = load with load = (t^2/12) int F.eta + int f v, data given as nodal
/// interpolant coefficients (F: 2 * nodes, f: nodes). Requires a shifted pencil.
FieldPair solve_rm_source(const Pencil& pencil, const Eigen::VectorXd& F, const Eigen::VectorXd& f);

/// Number of shifted eigenvalues within tol of 1, i.e. the kernel dimension of the unshifted form.
int kernel_count(const Pencil& pencil, double tol);

/// Solves K x = rhs for SPD K with a sparse LDL^T; throws SingularSystem on breakdown.
Eigen::VectorXd solve_spd(const SparseSymMatrix& K, const Eigen::VectorXd& rhs, double* relative_residual = nullptr);

}  // namespace rmplate
