#pragma once

#include <array>
#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "rmplate/fem.hpp"
#include "rmplate/mesh.hpp"
#include "rmplate/rm_system.hpp"

namespace rmplate {

/// (1 - s) s / ((1 - s) + d s): divergence coefficient of the dimension-reduced form.
double limit_div_coefficient(double sigma, int d);

/// Diagonal entry of the thin-direction strain left after eliminating the thin components:
/// q_jj = -s div_x(beta) / ((1 - s) + d s). Off-diagonal entries vanish.
double qjj_value(double sigma, int d, double divx_beta);

/// Weighted one-dimensional limit pencil on P2 x P2 (Phi block, then phi block), free ends:
///   A = D int [(1-s) + C_div] Phi' Psi' g + kappa int (phi' - Phi)(v' - Psi) g + int (phi v + t^2/12 Phi Psi) g
///   B = int (phi v + t^2/12 Phi Psi) g
/// with D = E/(12(1-s^2)), kappa = E k / (2 (1+s) t^2) and g the section measure sampled at the mesh nodes.
struct LimitPencil {
    SparseSymMatrix A;
    SparseSymMatrix B;
    SparseSymMatrix plain_mass;  // int g (Phi Psi + phi v): the H_0 inner product
    DofMap dofmap;
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> g_samples;  // g at the quadrature points, element by element
    int d = 1;
    MaterialParams params;

    int n_p2() const { return dofmap.n_dofs / 2; }
};

LimitPencil assemble_limit_pencil(const Mesh& interval_mesh, const ThinDomainSpec& spec, const MaterialParams& params,
                                  int d);

/// Solves A u = load, load = int g ((t^2/12) F Psi + f v) for data given as P2 coefficients.
Eigen::VectorXd solve_limit_source(const LimitPencil& pencil, const Eigen::VectorXd& data,
                                   double* relative_residual = nullptr);

/// Thin mesh of Omega_delta, matching interval mesh of the base domain and the maps between
/// their discrete spaces. Thin fields use the RM layout [beta_x, beta_y, w] over mesh nodes;
/// limit fields use [Phi, phi] over P2 dofs (vertices, then element midpoints).
class ConnectingSystem {
public:
    ConnectingSystem(const ThinDomainSpec& spec, int nx, int ny);

    const ThinDomainSpec& spec() const { return spec_; }
    const Mesh& thin_mesh() const { return *thin_; }
    const Mesh& interval_mesh() const { return *interval_; }
    const DofMap& thin_dofmap() const { return thin_dofs_; }
    const DofMap& limit_dofmap() const { return limit_dofs_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double delta() const { return spec_.delta; }
    /// Section measure of the reference domain at the interval nodes.
    const std::vector<double>& g_nodes() const { return g_nodes_; }

    /// Nodal Q1 interpolant of E_delta u0 = (Phi, 0, phi), constant in y.
    Eigen::VectorXd extend(const Eigen::VectorXd& limit_field) const;

    /// Section averages (M_delta beta_x, M_delta w) of a thin Q1 field as P2 coefficients.
    Eigen::VectorXd average(const Eigen::VectorXd& thin_field) const;
    /// Section average of one thin component (0: beta_x, 1: beta_y, 2: w) as P2 coefficients.
    Eigen::VectorXd average_component(const Eigen::VectorXd& thin_field, int component) const;

    /// ||u||_{H_delta} = (delta^{-d} int_{Omega_delta} |u|^2)^{1/2} of a thin Q1 field.
    double thin_norm(const Eigen::VectorXd& thin_field) const;
    /// ||u0||_{H_0} = (int g |u0|^2)^{1/2} of a limit P2 field.
    double limit_norm(const Eigen::VectorXd& limit_field) const;
    /// ||E_delta u0||_{H_delta}, with the extension evaluated exactly at thin quadrature points.
    double extended_norm(const Eigen::VectorXd& limit_field) const;
    /// ||u - E_delta u0||_{H_delta}.
    double gap_norm(const Eigen::VectorXd& thin_field, const Eigen::VectorXd& limit_field) const;

    /// delta^{-d} int_{Omega_delta} u . (E_delta v)
    double thin_pairing(const Eigen::VectorXd& thin_field, const Eigen::VectorXd& limit_field) const;
    /// int_Omega g a . b for limit fields.
    double limit_pairing(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

private:
    using PointIntegrand = std::function<double(const std::array<double, 3>& thin, const std::array<double, 3>& ext)>;
    /// delta^{-d} int over Omega_delta with 3x3 Gauss per cell (exact for the integrands used here).
    double integrate_thin(const PointIntegrand& fn, const Eigen::VectorXd* thin_field,
                          const Eigen::VectorXd* limit_field) const;
    std::array<double, 2> limit_value(const Eigen::VectorXd& limit_field, int element, double xi) const;
    double g_at(int element, double xi) const;

    ThinDomainSpec spec_;
    int nx_ = 0;
    int ny_ = 0;
    std::shared_ptr<const Mesh> thin_;
    std::shared_ptr<const Mesh> interval_;
    DofMap thin_dofs_;
    DofMap limit_dofs_;
    std::vector<double> g_nodes_;
};

/// Relative resolvent defect ||B_delta E_delta f0 - E_delta B_0 f0||_{H_delta} / ||f0||_{H_0}.
struct ResolventGap {
    double gap = 0.0;
    double f0_norm = 0.0;
    Eigen::VectorXd thin_solution;   // [beta_x, beta_y, w]
    Eigen::VectorXd limit_solution;  // [Phi, phi]
};

/// `thin_pencil` must be the shifted free pencil on system.thin_mesh().
ResolventGap resolvent_gap(const ConnectingSystem& system, const Pencil& thin_pencil, const LimitPencil& limit,
                           const Eigen::VectorXd& f0);

struct EnergyValue {
    double total = 0.0;        // F_delta
    double homogeneous = 0.0;  // F_delta without the load term
};

/// Energy F_delta(pair) = delta^{-d} [ a/2 + shear/2 + (1/2) int (t^2/12 |eta|^2 + v^2) - load ],
/// evaluated with the pencil's quadrature; the load is the same B-weighted data as solve_rm_source.
EnergyValue energy_functional(const ConnectingSystem& system, const Pencil& thin_pencil, const Eigen::VectorXd& pair,
                              const Eigen::VectorXd& f0);

}  // namespace rmplate
