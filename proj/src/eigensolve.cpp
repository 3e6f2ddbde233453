#include "rmplate/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseCholesky>

#include "rmplate/errors.hpp"

namespace rmplate {

namespace {

using Factorization = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>;

void factorize(Factorization& solver, const SparseSymMatrix& K) {
    solver.compute(K.lower());
    if (solver.info() != Eigen::Success) throw SingularSystem("LDL^T factorization of the shifted pencil failed");
    const Eigen::VectorXd d = solver.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.cwiseAbs().minCoeff();
    if (!(dmax > 0.0) || dmin <= 1e-14 * dmax || !d.allFinite())
        throw SingularSystem("shifted pencil is numerically singular (pivot ratio " + std::to_string(dmin / dmax) + ")");
}

/// Growing B-orthonormal basis with full reorthogonalization.
class KrylovBasis {
public:
    KrylovBasis(const SparseSymMatrix& B, Eigen::Index n, Eigen::Index capacity)
        : B_(B), q_(n, capacity), bq_(n, capacity) {}

    Eigen::Index size() const { return cols_; }
    Eigen::Index capacity() const { return q_.cols(); }
    auto basis() const { return q_.leftCols(cols_); }
    auto b_basis() const { return bq_.leftCols(cols_); }

    /// Appends the B-orthonormalized, deflated columns of w; returns the number accepted.
    Eigen::Index append(Eigen::MatrixXd w) {
        const Eigen::Index start = cols_;
        for (Eigen::Index c = 0; c < w.cols() && cols_ < capacity(); ++c) {
            Eigen::VectorXd v = w.col(c);
            Eigen::VectorXd bv = B_ * v;
            const double norm0 = std::sqrt(std::max(v.dot(bv), 0.0));
            if (!(norm0 > 0.0)) continue;
            for (int pass = 0; pass < 2; ++pass) {
                if (cols_ == 0) break;
                const Eigen::VectorXd coeff = bq_.leftCols(cols_).transpose() * v;
                v -= q_.leftCols(cols_) * coeff;
            }
            bv = B_ * v;
            const double norm = std::sqrt(std::max(v.dot(bv), 0.0));
            if (norm <= 1e-10 * norm0) continue;
            q_.col(cols_) = v / norm;
            bq_.col(cols_) = bv / norm;
            ++cols_;
        }
        return cols_ - start;
    }

private:
    const SparseSymMatrix& B_;
    Eigen::MatrixXd q_;
    Eigen::MatrixXd bq_;
    Eigen::Index cols_ = 0;
};

}  // namespace

EigResult solve_gep_smallest(const SparseSymMatrix& A, const SparseSymMatrix& B, const EigOptions& opts) {
    const Eigen::Index n = A.n();
    if (B.n() != n) throw InvalidArgument("pencil matrices differ in dimension");
    if (opts.k < 1 || opts.k > n) throw InvalidArgument("requested eigenvalue count out of range");
    if (!(opts.tol > 0.0)) throw InvalidArgument("eigensolver tolerance must be positive");

    const Eigen::Index k = opts.k;
    const Eigen::Index p = std::min<Eigen::Index>(n, opts.block_size > 0 ? opts.block_size : k + 3);
    const Eigen::Index m =
        std::min<Eigen::Index>(n, std::max<Eigen::Index>(opts.max_basis > 0 ? opts.max_basis : std::max<Eigen::Index>(6 * p, 96), p));

    const SparseSymMatrix K = opts.shift == 0.0 ? A : A.plus_scaled(-opts.shift, B);
    Factorization solver;
    factorize(solver, K);
    const Eigen::SparseMatrix<double> abs_a = A.full().cwiseAbs();
    const Eigen::SparseMatrix<double> abs_b = B.full().cwiseAbs();
    constexpr double eps = std::numeric_limits<double>::epsilon();

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);

    EigResult result;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        KrylovBasis basis(B, n, m);
        Eigen::Index block_start = 0;
        Eigen::Index accepted = basis.append(x);
        while (accepted > 0 && basis.size() < m) {
            const Eigen::MatrixXd rhs = basis.b_basis().middleCols(block_start, accepted);
            Eigen::MatrixXd w = solver.solve(rhs);
            if (solver.info() != Eigen::Success) throw SingularSystem("shift-invert solve failed");
            block_start = basis.size();
            accepted = basis.append(std::move(w));
        }

        const auto q = basis.basis();
        const Eigen::MatrixXd aq = A * Eigen::MatrixXd(q);
        Eigen::MatrixXd h = q.transpose() * aq;
        Eigen::MatrixXd g = q.transpose() * basis.b_basis();
        h = 0.5 * (h + h.transpose()).eval();
        g = 0.5 * (g + g.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> rr(h, g);
        if (rr.info() != Eigen::Success) throw SingularSystem("Rayleigh-Ritz projection failed");

        // thick restart: carry more Ritz vectors than requested to keep convergence steady
        const Eigen::Index keep = std::min<Eigen::Index>(std::max<Eigen::Index>(p, std::min<Eigen::Index>(2 * p, m / 2)), q.cols());
        x = q * rr.eigenvectors().leftCols(keep);
        const Eigen::MatrixXd ax = aq * rr.eigenvectors().leftCols(keep);
        const Eigen::MatrixXd bx = B * x;
        const Eigen::VectorXd ritz = rr.eigenvalues().head(keep);

        const Eigen::Index kk = std::min<Eigen::Index>(k, keep);
        result.eigenvalues = ritz.head(kk);
        result.eigenvectors = x.leftCols(kk);
        result.residuals.resize(kk);
        result.residual_floors.resize(kk);
        result.iterations = iter;
        bool converged = kk == k;
        for (Eigen::Index i = 0; i < kk; ++i) {
            const double lam = result.eigenvalues(i);
            const double denom = std::max(ax.col(i).norm(), std::abs(lam) * bx.col(i).norm());
            const double r = (ax.col(i) - lam * bx.col(i)).norm();
            result.residuals(i) = denom > 0.0 ? r / denom : r;
            const Eigen::VectorXd ax_abs = x.col(i).cwiseAbs();
            const double level = eps * ((abs_a * ax_abs).norm() + std::abs(lam) * (abs_b * ax_abs).norm());
            result.residual_floors(i) = denom > 0.0 ? level / denom : level;
            if (!(result.residuals(i) <= std::max(opts.tol, 100.0 * result.residual_floors(i)))) converged = false;
            const double bn = std::sqrt(x.col(i).dot(bx.col(i)));
            result.eigenvectors.col(i) /= bn;
        }
        if (converged) return result;
    }
    throw ConvergenceError("eigensolver did not converge in " + std::to_string(opts.max_iter) + " restarts",
                           std::move(result));
}

namespace {

Eigen::MatrixXd b_orthonormalize(const Eigen::MatrixXd& u, const SparseSymMatrix& B) {
    if (u.cols() == 0 || u.rows() != B.n()) throw InvalidArgument("subspace basis has wrong shape");
    const Eigen::MatrixXd gram = u.transpose() * (B * u);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (gram + gram.transpose()));
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > 1e-12 * lmax)) throw InvalidArgument("subspace basis is rank deficient");
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (gram + gram.transpose()));
    // u L^{-T}
    return llt.matrixU().solve<Eigen::OnTheRight>(u);
}

}  // namespace

std::vector<double> principal_angles(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, const SparseSymMatrix& B) {
    Eigen::MatrixXd u = b_orthonormalize(U, B);
    Eigen::MatrixXd v = b_orthonormalize(V, B);
    if (v.cols() > u.cols()) std::swap(u, v);
    const Eigen::MatrixXd bu = B * u;
    const Eigen::MatrixXd c = bu.transpose() * v;  // u^T B v
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    const Eigen::VectorXd cosines = svd.singularValues();  // descending
    const Eigen::MatrixXd r = v - u * c;                   // part of span(v) B-orthogonal to span(u)
    const Eigen::MatrixXd rgram = r.transpose() * (B * r);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (rgram + rgram.transpose()));
    const Eigen::VectorXd sines2 = es.eigenvalues();  // ascending
    std::vector<double> angles(static_cast<std::size_t>(v.cols()));
    for (Eigen::Index i = 0; i < v.cols(); ++i) {
        const double cs = std::clamp(cosines(i), 0.0, 1.0);
        const double sn = std::sqrt(std::clamp(sines2(i), 0.0, 1.0));
        angles[static_cast<std::size_t>(i)] = cs * cs >= 0.5 ? std::asin(sn) : std::acos(cs);
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

std::vector<EigCluster> cluster_eigenvalues(const Eigen::VectorXd& values, double rel_tol) {
    std::vector<EigCluster> out;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double lam = values(i);
        if (!out.empty() && std::abs(lam - values(i - 1)) <= rel_tol * std::max(1.0, std::abs(lam))) {
            auto& c = out.back();
            c.mean = (c.mean * static_cast<double>(c.size) + lam) / static_cast<double>(c.size + 1);
            ++c.size;
        } else {
            out.push_back(EigCluster{static_cast<std::size_t>(i), 1, lam});
        }
    }
    return out;
}

int count_near(const Eigen::VectorXd& values, double target, double tol) {
    int c = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (std::abs(values(i) - target) <= tol) ++c;
    return c;
}

}  // namespace rmplate
