#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rmplate/fem.hpp"

namespace rmplate {

struct EigOptions {
    int k = 6;              // number of smallest eigenvalues
    double shift = 0.0;     // A - shift * B is factorized
    double tol = 1e-9;      // relative residual ||Ax - lambda Bx|| / max(||Ax||, |lambda| ||Bx||)
    int max_iter = 200;     // restart cap
    std::uint64_t seed = 20240611;
    int block_size = 0;     // 0: k + 3
    int max_basis = 0;      // 0: max(6 * block_size, 96)
};

struct EigResult {
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // B-orthonormal columns
    Eigen::VectorXd residuals;
    /// Rounding level of each residual evaluation, eps (|A||x| + |lambda||B||x|) / denominator.
    /// A pair also counts as converged when its residual is within 100x this level.
    Eigen::VectorXd residual_floors;
    int iterations = 0;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, EigResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const EigResult& partial() const noexcept { return partial_; }

private:
    EigResult partial_;
};

/// k smallest eigenpairs of A x = lambda B x (A, B symmetric, B SPD) by block shift-and-invert
/// Krylov iteration: blocks are B-orthogonalized against the whole basis (twice), followed by a
/// Rayleigh-Ritz step on (A, B) and a thick restart from the leading Ritz vectors.
EigResult solve_gep_smallest(const SparseSymMatrix& A, const SparseSymMatrix& B, const EigOptions& opts);

/// Principal angles (ascending) between span(U) and span(V) in the B inner product.
/// Inputs need full column rank; they are B-orthonormalized internally.
std::vector<double> principal_angles(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, const SparseSymMatrix& B);

struct EigCluster {
    std::size_t first = 0;  // index into the eigenvalue list
    std::size_t size = 0;
    double mean = 0.0;
};

/// Groups ascending eigenvalues whose consecutive relative gap is below rel_tol.
std::vector<EigCluster> cluster_eigenvalues(const Eigen::VectorXd& values, double rel_tol = 1e-7);

/// Number of eigenvalues with |lambda - target| <= tol.
int count_near(const Eigen::VectorXd& values, double target, double tol);

}  // namespace rmplate
