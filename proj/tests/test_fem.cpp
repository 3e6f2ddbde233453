#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "rmplate/errors.hpp"
#include "rmplate/fem.hpp"

using namespace rmplate;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

double grad_dot(const FieldEval& u, const FieldEval& v) {
    return u.grad[0][0] * v.grad[0][0] + u.grad[0][1] * v.grad[0][1];
}

}  // namespace

TEST(Quadrature, GaussSegmentExactToOrder) {
    for (int n = 1; n <= 3; ++n) {
        const auto r = gauss_segment(n);
        EXPECT_EQ(r.order, 2 * n - 1);
        for (int p = 0; p <= r.order; ++p) {
            double s = 0.0;
            for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.points[q][0], p);
            const double exact = p % 2 == 0 ? 2.0 / (p + 1) : 0.0;
            EXPECT_NEAR(s, exact, 1e-14) << "n=" << n << " p=" << p;
        }
    }
    EXPECT_THROW(gauss_segment(4), InvalidArgument);
}

TEST(Quadrature, TensorRuleIntegratesMixedMonomials) {
    const auto r = gauss_quad(2, 3);
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.points[q][0], 2) * std::pow(r.points[q][1], 4);
    EXPECT_NEAR(s, (2.0 / 3.0) * (2.0 / 5.0), 1e-14);
}

TEST(Quadrature, TriangleRulesMatchMonomialFormula) {
    for (int n : {1, 3, 6}) {
        const auto r = triangle_rule(n);
        for (int a = 0; a <= r.order; ++a)
            for (int b = 0; a + b <= r.order; ++b) {
                double s = 0.0;
                for (std::size_t q = 0; q < r.size(); ++q)
                    s += r.weights[q] * std::pow(r.points[q][0], a) * std::pow(r.points[q][1], b);
                const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                EXPECT_NEAR(s, exact, 1e-12) << "n=" << n << " a=" << a << " b=" << b;
            }
    }
    EXPECT_THROW(triangle_rule(4), InvalidArgument);
}

TEST(SparseSym, DenseRoundTripAndAlgebra) {
    Eigen::MatrixXd m(3, 3);
    m << 4, 1, 0, 1, 3, 2, 0, 2, 5;
    const auto s = SparseSymMatrix::from_dense(m);
    EXPECT_TRUE(s.dense().isApprox(m));
    const Eigen::Vector3d x(1.0, -2.0, 0.5);
    EXPECT_TRUE((s * Eigen::VectorXd(x)).isApprox(m * x));
    EXPECT_NEAR(s.quadratic_form(x), x.dot(m * x), 1e-13);
    EXPECT_TRUE(s.plus_scaled(-2.0, s).dense().isApprox(-m));
    EXPECT_TRUE((s + s * 0.5).dense().isApprox(1.5 * m));
    EXPECT_THROW(SparseSymMatrix::from_dense(Eigen::MatrixXd::Zero(2, 3)), InvalidArgument);
}

TEST(SparseSym, TripletsAboveDiagonalAreMirrored) {
    const auto s = SparseSymMatrix::from_triplets(2, {{0, 1, 3.0}, {0, 0, 1.0}, {1, 1, 2.0}});
    EXPECT_DOUBLE_EQ(s.dense()(1, 0), 3.0);
    EXPECT_DOUBLE_EQ(s.dense()(0, 1), 3.0);
}

TEST(MatrixMarket, RoundTripIsExact) {
    const auto path = (std::filesystem::temp_directory_path() / "rmplate_mm_test.mtx").string();
    Eigen::MatrixXd m(3, 3);
    m << 1.0 / 3.0, 0.0, -1e-17, 0.0, 2.0, 0.1, -1e-17, 0.1, 7.25;
    write_matrix_market(SparseSymMatrix::from_dense(m), path);
    const auto r = read_matrix_market(path);
    EXPECT_EQ((r.dense() - m).cwiseAbs().maxCoeff(), 0.0);
    std::filesystem::remove(path);
    EXPECT_THROW(read_matrix_market("/nonexistent/file.mtx"), IoError);
}

TEST(Q1Element, UnitSquareStiffnessAndMass) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 1, 1);
    const DofMap dm = build_dofmap(m, SpaceKind::Q1scalar, no_essential());
    const Eigen::MatrixXd k = assemble(m, dm, grad_dot).dense();
    const Eigen::MatrixXd mass =
        assemble(m, dm, [](const FieldEval& u, const FieldEval& v) { return u.value[0] * v.value[0]; }).dense();
    // node order (0,0), (1,0), (0,1), (1,1)
    Eigen::MatrixXd k_ref(4, 4), m_ref(4, 4);
    k_ref << 4, -1, -1, -2, -1, 4, -2, -1, -1, -2, 4, -1, -2, -1, -1, 4;
    m_ref << 4, 2, 2, 1, 2, 4, 1, 2, 2, 1, 4, 2, 1, 2, 2, 4;
    EXPECT_LT((k - k_ref / 6.0).norm(), 1e-14);
    EXPECT_LT((mass - m_ref / 36.0).norm(), 1e-14);
}

TEST(Q1Element, StiffnessScalesWithAspectRatio) {
    const Mesh m = build_rect_mesh(2.0, 0.5, 1, 1);
    const DofMap dm = build_dofmap(m, SpaceKind::Q1scalar, no_essential());
    const Eigen::MatrixXd k = assemble(m, dm, grad_dot).dense();
    // ∫ phi_x^2 + phi_y^2 for the (0,0) shape on a hx x hy cell: hy/(3hx) + hx/(3hy)
    EXPECT_NEAR(k(0, 0), 0.5 / 6.0 + 2.0 / 1.5, 1e-14);
}

TEST(DofMapping, LagrangeConstraintCounts) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 2, 2);
    const auto full = build_dofmap(m, SpaceKind::Q1scalar, essential_everywhere(Trace::Full));
    EXPECT_EQ(full.n_dofs, 9);
    EXPECT_EQ(full.n_free, 1);
    const auto normal = build_dofmap(m, SpaceKind::Q1vector2, essential_everywhere(Trace::Normal));
    EXPECT_EQ(normal.n_dofs, 18);
    EXPECT_EQ(normal.num_constrained(), 12);
    const auto tangential = build_dofmap(m, SpaceKind::Q1vector2, essential_everywhere(Trace::Tangential));
    EXPECT_EQ(tangential.num_constrained(), 12);
    EXPECT_THROW(build_dofmap(m, SpaceKind::Q1scalar, essential_everywhere(Trace::Normal)), InvalidArgument);
    EXPECT_THROW(build_dofmap(m, SpaceKind::Morley, no_essential()), InvalidArgument);
}

TEST(DofMapping, NormalTraceOnThinDomainFollowsFacetAxis) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 1, 1);
    const auto dm = build_dofmap(m, SpaceKind::Q1vector2, [](BoundaryTag) { return Trace::Normal; });
    // every corner sits on an x- and a y-facing edge
    EXPECT_EQ(dm.n_free, 0);
}

TEST(DofMapping, RestrictExpandRoundTrip) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 3, 3);
    const auto dm = build_dofmap(m, SpaceKind::Q1scalar, essential_everywhere(Trace::Full));
    const Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(dm.n_free, 1.0, 2.0);
    const Eigen::VectorXd f = dm.expand_from_free(r);
    EXPECT_EQ(f.size(), dm.n_dofs);
    EXPECT_TRUE(dm.restrict_to_free(f).isApprox(r));
    for (int g = 0; g < dm.n_dofs; ++g)
        if (dm.is_constrained(g)) {
            EXPECT_EQ(f(g), 0.0);
        }
    EXPECT_THROW(dm.expand_from_free(Eigen::VectorXd::Zero(dm.n_free + 1)), InvalidArgument);
}

TEST(DofMapping, MorleyTopologyAndTraces) {
    const Mesh m = triangulate(build_rect_mesh(1.0, 1.0, 1, 1));
    const auto free = build_dofmap(m, SpaceKind::Morley, no_essential());
    EXPECT_EQ(free.edges.size(), 5u);
    EXPECT_EQ(free.n_dofs, 9);
    const auto clamped = build_dofmap(m, SpaceKind::Morley, essential_everywhere(Trace::FullAndNormalDerivative));
    EXPECT_EQ(clamped.n_free, 1);
    const auto simply = build_dofmap(m, SpaceKind::Morley, essential_everywhere(Trace::Full));
    EXPECT_EQ(simply.n_free, 5);
    EXPECT_THROW(build_dofmap(m, SpaceKind::Morley, essential_everywhere(Trace::Normal)), InvalidArgument);
}

TEST(DofMapping, StackedBlocksOffsetsAndConstraints) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 2, 2);
    const auto a = build_dofmap(m, SpaceKind::Q1vector2, no_essential());
    const auto b = build_dofmap(m, SpaceKind::Q1scalar, essential_everywhere(Trace::Full));
    const auto s = stack_dofmaps({a, b});
    EXPECT_EQ(s.n_dofs, 27);
    EXPECT_EQ(s.n_free, 19);
    ASSERT_EQ(s.blocks.size(), 2u);
    EXPECT_EQ(s.blocks[1].dof_offset, 18);
    EXPECT_EQ(s.blocks[1].first_component, 2);
    EXPECT_EQ(s.element_dofs[0].size(), 12u);
    EXPECT_THROW(stack_dofmaps({}), InvalidArgument);
}

TEST(Interpolation, P2ReproducesQuadraticsExactly) {
    const Mesh m = build_interval_mesh(0.0, 1.0, 3);
    const auto dm = build_dofmap(m, SpaceKind::P2scalar1D, no_essential());
    const auto u = [](double x) { return 2.0 * x * x - x + 0.5; };
    const Eigen::VectorXd c = interpolate(m, dm, [&](const Point& p, int) { return u(p[0]); });
    for (std::size_t e = 0; e < m.num_elements(); ++e)
        for (double xi : {-0.7, 0.1, 0.9}) {
            const FieldEval f = evaluate_field(m, dm, c, e, {xi, 0.0});
            EXPECT_NEAR(f.value[0], u(f.x[0]), 1e-13);
            EXPECT_NEAR(f.grad[0][0], 4.0 * f.x[0] - 1.0, 1e-12);
        }
}

TEST(Interpolation, LoadVectorSumsToIntegral) {
    const Mesh m = build_rect_mesh(2.0, 1.0, 4, 2);
    const auto dm = build_dofmap(m, SpaceKind::Q1scalar, no_essential());
    const Eigen::VectorXd l = assemble_load(m, dm, [](const FieldEval& v) { return v.x[0] * v.value[0]; });
    EXPECT_NEAR(l.sum(), 2.0, 1e-13);  // ∫ x over (0,2)x(0,1)
}

TEST(Morley, PatchTestReproducesQuadraticHessian) {
    const Mesh m = triangulate(build_rect_mesh(1.0, 1.0, 3, 2));
    const auto dm = build_dofmap(m, SpaceKind::Morley, no_essential());
    // u = x^2 - 3xy + 2y^2 + x
    const auto u = [](const Point& p) { return p[0] * p[0] - 3.0 * p[0] * p[1] + 2.0 * p[1] * p[1] + p[0]; };
    const auto gu = [](const Point& p) { return Point{2.0 * p[0] - 3.0 * p[1] + 1.0, -3.0 * p[0] + 4.0 * p[1]}; };
    const Eigen::VectorXd c = morley_interpolate(m, dm, u, gu);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const FieldEval f = evaluate_field(m, dm, c, e, {0.2, 0.3});
        EXPECT_NEAR(f.value[0], u(f.x), 1e-12);
        EXPECT_NEAR(f.grad[0][0], gu(f.x)[0], 1e-12);
        EXPECT_NEAR(f.grad[0][1], gu(f.x)[1], 1e-12);
        EXPECT_NEAR(f.hess[0], 2.0, 1e-11);
        EXPECT_NEAR(f.hess[1], -3.0, 1e-11);
        EXPECT_NEAR(f.hess[2], -3.0, 1e-11);
        EXPECT_NEAR(f.hess[3], 4.0, 1e-11);
    }
}

TEST(Morley, BendingEnergyOfQuadraticIsExact) {
    const Mesh m = triangulate(build_rect_mesh(1.0, 1.0, 2, 2));
    const auto dm = build_dofmap(m, SpaceKind::Morley, no_essential());
    const auto u = [](const Point& p) { return 0.5 * p[0] * p[0] + p[0] * p[1]; };
    const auto gu = [](const Point& p) { return Point{p[0] + p[1], p[0]}; };
    const Eigen::VectorXd c = morley_interpolate(m, dm, u, gu);
    const auto hh = [](const FieldEval& a, const FieldEval& b) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += a.hess[static_cast<std::size_t>(i)] * b.hess[static_cast<std::size_t>(i)];
        return s;
    };
    const auto rule = triangle_rule(1);
    // |D^2 u|^2 = 1 + 2 = 3 over the unit square
    EXPECT_NEAR(assemble(m, dm, hh, &rule).quadratic_form(c), 3.0, 1e-12);
}

TEST(Assembly, NonFiniteDensityRaisesWithElement) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 2, 2);
    const auto dm = build_dofmap(m, SpaceKind::Q1scalar, no_essential());
    try {
        assemble(m, dm, [](const FieldEval& u, const FieldEval&) {
            return u.x[0] > 0.5 && u.x[1] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
        });
        FAIL() << "expected AssemblyError";
    } catch (const AssemblyError& e) {
        EXPECT_EQ(e.element(), 3);
    }
}

TEST(Assembly, ReductionDropsConstrainedRows) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 2, 2);
    const auto dm = build_dofmap(m, SpaceKind::Q1scalar, essential_everywhere(Trace::Full));
    EXPECT_EQ(assemble(m, dm, grad_dot).n(), 1);
    EXPECT_EQ(assemble(m, dm, grad_dot, nullptr, Reduction::AllDofs).n(), 9);
    // interior hat on a 2x2 grid of unit-half cells: 4 * (4/6) = 8/3
    EXPECT_NEAR(assemble(m, dm, grad_dot).dense()(0, 0), 8.0 / 3.0, 1e-14);
}
