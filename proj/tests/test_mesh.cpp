#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "rmplate/errors.hpp"
#include "rmplate/mesh.hpp"

using namespace rmplate;

TEST(RectMesh, CountsAndMeasure) {
    const Mesh m = build_rect_mesh(2.0, 1.0, 4, 3);
    EXPECT_EQ(m.num_nodes(), 20u);
    EXPECT_EQ(m.num_elements(), 12u);
    EXPECT_EQ(m.facets.size(), 14u);
    EXPECT_NEAR(m.total_measure(), 2.0, 1e-14);
    EXPECT_NO_THROW(m.validate());
    ASSERT_TRUE(m.grid.has_value());
    EXPECT_EQ(m.grid->node(4, 3), 19);
}

TEST(RectMesh, FacetNormalsAreOutwardUnitVectors) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 3, 3);
    for (const auto& f : m.facets) {
        EXPECT_NEAR(std::hypot(f.normal[0], f.normal[1]), 1.0, 1e-14);
        const Point& a = m.nodes[static_cast<std::size_t>(f.nodes[0])];
        const Point& b = m.nodes[static_cast<std::size_t>(f.nodes[1])];
        const Point mid{0.5 * (a[0] + b[0]) - 0.5, 0.5 * (a[1] + b[1]) - 0.5};
        EXPECT_GT(mid[0] * f.normal[0] + mid[1] * f.normal[1], 0.0);
        EXPECT_EQ(f.tag, BoundaryTag::WholeBoundary);
    }
}

TEST(RectMesh, RejectsBadInput) {
    EXPECT_THROW(build_rect_mesh(0.0, 1.0, 2, 2), InvalidArgument);
    EXPECT_THROW(build_rect_mesh(1.0, 1.0, 0, 2), InvalidArgument);
}

TEST(IntervalMesh, EndpointNormals) {
    const Mesh m = build_interval_mesh(0.0, 2.0, 5);
    EXPECT_EQ(m.dim, 1);
    EXPECT_EQ(m.num_elements(), 5u);
    ASSERT_EQ(m.facets.size(), 2u);
    EXPECT_DOUBLE_EQ(m.facets[0].normal[0], -1.0);
    EXPECT_DOUBLE_EQ(m.facets[1].normal[0], 1.0);
    EXPECT_NEAR(m.total_measure(), 2.0, 1e-14);
    EXPECT_THROW(build_interval_mesh(1.0, 1.0, 4), InvalidArgument);
}

TEST(PiecewiseLinearFn, InterpolatesAndExtrapolatesConstant) {
    const PiecewiseLinear p({0.0, 1.0, 2.0}, {1.0, 3.0, 2.0});
    EXPECT_DOUBLE_EQ(p(0.5), 2.0);
    EXPECT_DOUBLE_EQ(p(1.5), 2.5);
    EXPECT_DOUBLE_EQ(p(-1.0), 1.0);
    EXPECT_DOUBLE_EQ(p(5.0), 2.0);
    EXPECT_DOUBLE_EQ(p.min_value(), 1.0);
    EXPECT_THROW(PiecewiseLinear({1.0, 0.0}, {1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(PiecewiseLinear({0.0, 1.0}, {1.0}), InvalidArgument);
}

TEST(ThinMesh, MeasureEqualsDeltaTimesIntegralOfG) {
    ThinDomainSpec s;
    s.a = 0.0;
    s.b = 1.0;
    s.f1 = PiecewiseLinear({0.0, 1.0}, {0.5, 0.25});
    s.f2 = PiecewiseLinear({0.0, 1.0}, {0.5, 1.0});
    s.delta = 0.1;
    const Mesh m = build_thin_mesh(s, 8, 3);
    // g = 1 + 0.25 x, integral 1.125
    EXPECT_NEAR(m.total_measure(), 0.1 * 1.125, 1e-14);
    EXPECT_NO_THROW(m.validate());
}

TEST(ThinMesh, LateralAndTopBottomTags) {
    const Mesh m = build_thin_mesh(ThinDomainSpec::cylinder(0.0, 1.0, 0.2), 4, 2);
    int lateral = 0, topbottom = 0;
    for (const auto& f : m.facets) {
        if (f.tag == BoundaryTag::Lateral) {
            ++lateral;
            EXPECT_NEAR(std::abs(f.normal[0]), 1.0, 1e-14);
        } else {
            ++topbottom;
            EXPECT_NEAR(std::abs(f.normal[1]), 1.0, 1e-14);
        }
    }
    EXPECT_EQ(lateral, 4);
    EXPECT_EQ(topbottom, 8);
}

TEST(ThinMesh, RejectsSeveralThinDirections) {
    ThinDomainSpec s = ThinDomainSpec::cylinder(0.0, 1.0, 0.1);
    s.d = 2;
    EXPECT_THROW(build_thin_mesh(s, 4, 2), UnsupportedConfiguration);
}

TEST(ThinMesh, ProfileValidation) {
    ThinDomainSpec s = ThinDomainSpec::cylinder(0.0, 1.0, 0.1);
    s.f1 = PiecewiseLinear({0.0, 1.0}, {0.5, 0.0});
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = ThinDomainSpec::cylinder(0.0, 1.0, -0.1);
    EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(ThinMesh, RescaleMapsToReferenceDomain) {
    const ThinDomainSpec s = ThinDomainSpec::cylinder(0.0, 1.0, 0.05);
    const Mesh thin = build_thin_mesh(s, 6, 2);
    const Mesh ref = rescale_to_reference(thin, s);
    EXPECT_NEAR(ref.total_measure(), 1.0, 1e-13);
    for (std::size_t i = 0; i < thin.num_nodes(); ++i) {
        EXPECT_DOUBLE_EQ(ref.nodes[i][0], thin.nodes[i][0]);
        EXPECT_NEAR(ref.nodes[i][1], thin.nodes[i][1] / 0.05, 1e-13);
    }
    const Mesh other = build_thin_mesh(ThinDomainSpec::cylinder(0.0, 1.0, 0.1), 6, 2);
    EXPECT_THROW(rescale_to_reference(other, s), InvalidArgument);
}

TEST(Triangulate, PreservesMeasureAndOrientation) {
    const Mesh q = build_rect_mesh(1.0, 2.0, 3, 4);
    const Mesh t = triangulate(q);
    EXPECT_EQ(t.kind, ElementKind::Tri3);
    EXPECT_EQ(t.num_elements(), 2 * q.num_elements());
    EXPECT_NEAR(t.total_measure(), 2.0, 1e-14);
    for (std::size_t e = 0; e < t.num_elements(); ++e) EXPECT_GT(t.element_measure(e), 0.0);
    EXPECT_NO_THROW(t.validate());
}

TEST(Translated, ShiftsNodesOnly) {
    const Mesh m = build_rect_mesh(1.0, 1.0, 2, 2);
    const Mesh s = translated(m, {3.0, -1.0});
    EXPECT_NEAR(s.total_measure(), 1.0, 1e-14);
    EXPECT_DOUBLE_EQ(s.nodes[0][0], 3.0);
    EXPECT_DOUBLE_EQ(s.nodes[0][1], -1.0);
}

TEST(MeshJson, RoundTrip) {
    const Mesh m = build_thin_mesh(ThinDomainSpec::cylinder(0.0, 1.0, 0.3), 4, 2);
    const Mesh r = mesh_from_json(mesh_to_json(m));
    EXPECT_EQ(r.kind, m.kind);
    EXPECT_EQ(r.elements, m.elements);
    ASSERT_EQ(r.facets.size(), m.facets.size());
    for (std::size_t i = 0; i < m.facets.size(); ++i) {
        EXPECT_EQ(r.facets[i].tag, m.facets[i].tag);
        EXPECT_EQ(r.facets[i].nodes, m.facets[i].nodes);
    }
    for (std::size_t i = 0; i < m.num_nodes(); ++i) EXPECT_EQ(r.nodes[i], m.nodes[i]);
}

TEST(MeshJson, FileRoundTripAndErrors) {
    const auto path = (std::filesystem::temp_directory_path() / "rmplate_mesh_test.json").string();
    const Mesh m = build_rect_mesh(1.0, 1.0, 2, 2);
    write_mesh(m, path);
    EXPECT_EQ(read_mesh(path).elements, m.elements);
    std::filesystem::remove(path);
    EXPECT_THROW(read_mesh("/nonexistent/dir/mesh.json"), IoError);
    nlohmann::json bad = mesh_to_json(m);
    bad["elements"][0][0] = 999;
    EXPECT_THROW(mesh_from_json(bad), InvalidArgument);
    EXPECT_THROW(mesh_from_json(nlohmann::json{{"dim", 2}}), InvalidArgument);
}

TEST(MeshValidate, DetectsClockwiseElement) {
    Mesh m = build_rect_mesh(1.0, 1.0, 1, 1);
    std::reverse(m.elements[0].begin(), m.elements[0].end());
    EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(ThinSpecJson, ReadsProfile) {
    const nlohmann::json j = {{"x", {0.0, 0.5, 1.0}}, {"f1", {0.5, 0.6, 0.5}}, {"f2", {0.5, 0.4, 0.5}}, {"delta", 0.2}};
    const ThinDomainSpec s = thin_spec_from_json(j);
    EXPECT_DOUBLE_EQ(s.a, 0.0);
    EXPECT_DOUBLE_EQ(s.b, 1.0);
    EXPECT_DOUBLE_EQ(s.g(0.25), 1.0);
    EXPECT_DOUBLE_EQ(s.delta, 0.2);
    EXPECT_THROW(thin_spec_from_json(nlohmann::json{{"x", {0.0, 1.0}}}), InvalidArgument);
}

TEST(Tags, StringRoundTrip) {
    for (BoundaryTag t : {BoundaryTag::Lateral, BoundaryTag::TopBottom, BoundaryTag::WholeBoundary})
        EXPECT_EQ(boundary_tag_from_string(to_string(t)), t);
    for (ElementKind k : {ElementKind::Segment, ElementKind::Quad4, ElementKind::Tri3})
        EXPECT_EQ(element_kind_from_string(to_string(k)), k);
    EXPECT_THROW(boundary_tag_from_string("sideways"), InvalidArgument);
}
