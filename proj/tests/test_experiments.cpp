#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rmplate/errors.hpp"
#include "rmplate/experiments.hpp"

using namespace rmplate;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    const auto d = std::filesystem::temp_directory_path() / ("rmplate_test_" + name);
    std::filesystem::remove_all(d);
    return d;
}

SweepReport tiny_kernel_report() {
    SweepConfig c = default_config(SweepKind::Kernel);
    c.mesh_levels = {2, 4};
    return run_kernel_census(c);
}

}  // namespace

TEST(FitRate, ExactPowerLaw) {
    std::vector<std::pair<double, double>> pts;
    for (double p : {0.4, 0.2, 0.1, 0.05}) pts.emplace_back(p, p * p);
    const RateFit f = fit_rate(pts);
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.intercept, 0.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_EQ(f.points.size(), 4u);
}

TEST(FitRate, ConstantErrorHasZeroSlope) {
    const RateFit f = fit_rate({{1.0, 3.0}, {0.5, 3.0}, {0.25, 3.0}});
    EXPECT_NEAR(f.slope, 0.0, 1e-14);
    EXPECT_GE(f.r2, 0.0);
    EXPECT_LE(f.r2, 1.0);
}

TEST(FitRate, NoisySquareRoot) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
    std::vector<std::pair<double, double>> pts;
    for (double p = 0.5; p > 1e-3; p /= 2.0) pts.emplace_back(p, 3.0 * std::sqrt(p) * (1.0 + noise(rng)));
    EXPECT_NEAR(fit_rate(pts).slope, 0.5, 0.02);
}

TEST(FitRate, ScaleInvarianceOfSlope) {
    const std::vector<std::pair<double, double>> pts = {{0.4, 0.11}, {0.2, 0.07}, {0.1, 0.031}, {0.05, 0.02}};
    std::vector<std::pair<double, double>> scaled;
    for (const auto& [p, e] : pts) scaled.emplace_back(7.3 * p, e);
    EXPECT_NEAR(fit_rate(pts).slope, fit_rate(scaled).slope, 1e-12);
}

TEST(FitRate, RejectsBadInput) {
    EXPECT_THROW(fit_rate({{1.0, 1.0}, {0.5, 0.5}}), InvalidArgument);
    EXPECT_THROW(fit_rate({{1.0, 1.0}, {0.5, 0.0}, {0.25, 1.0}}), InvalidArgument);
    EXPECT_THROW(fit_rate({{1.0, 1.0}, {0.5, -1.0}, {0.25, 1.0}}), InvalidArgument);
    EXPECT_THROW(fit_rate({{1.0, 1.0}, {1.0, 2.0}, {1.0, 3.0}}), InvalidArgument);
}

TEST(Config, DefaultsAreValid) {
    for (SweepKind k : {SweepKind::Thickness, SweepKind::Delta, SweepKind::Korn, SweepKind::Kernel, SweepKind::Poincare}) {
        EXPECT_NO_THROW(default_config(k).validate()) << to_string(k);
        EXPECT_EQ(sweep_kind_from_string(to_string(k)), k);
    }
    const SweepConfig t = default_config(SweepKind::Thickness);
    EXPECT_EQ(t.parameters, (std::vector<double>{0.2, 0.1, 0.05, 0.025}));
    EXPECT_DOUBLE_EQ(t.params.k, 5.0 / 6.0);
    EXPECT_THROW(sweep_kind_from_string("spin"), InvalidArgument);
}

TEST(Config, ValidationFailures) {
    SweepConfig c = default_config(SweepKind::Delta);
    c.parameters = {0.1, 0.2, 0.4};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = default_config(SweepKind::Delta);
    c.parameters = {0.4, 0.2};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = default_config(SweepKind::Thickness);
    c.mesh_levels = {16, 24, 48};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = default_config(SweepKind::Thickness);
    c.mesh_levels = {16, 32};
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.richardson = false;
    EXPECT_NO_THROW(c.validate());
    c.f0.kind = "cosine";
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Config, JsonOverridesAndRoundTrip) {
    const nlohmann::json j = {{"parameters", {0.3, 0.2, 0.1}}, {"params", {{"t", 0.05}}}, {"bc", "soft-clamped"}};
    const SweepConfig c = config_from_json(j, SweepKind::Thickness);
    EXPECT_EQ(c.parameters, (std::vector<double>{0.3, 0.2, 0.1}));
    EXPECT_DOUBLE_EQ(c.params.t, 0.05);
    EXPECT_DOUBLE_EQ(c.params.sigma, 0.3);
    EXPECT_EQ(c.bc, BcFamily::SoftClamped);
    const SweepConfig r = config_from_json(config_to_json(c), SweepKind::Thickness);
    EXPECT_EQ(r.parameters, c.parameters);
    EXPECT_EQ(r.mesh_levels, c.mesh_levels);
    EXPECT_EQ(r.bc, c.bc);
    EXPECT_THROW(config_from_json(nlohmann::json{{"kind", "korn"}}, SweepKind::Delta), InvalidArgument);
    EXPECT_THROW(config_from_json(nlohmann::json{{"parameters", "many"}}, SweepKind::Delta), InvalidArgument);
    EXPECT_THROW(config_from_json(nlohmann::json{{"parameters", {0.1, 0.2, 0.4}}}, SweepKind::Delta), InvalidArgument);
}

TEST(KernelCensus, ExpectedTableOnSmallMeshes) {
    const auto table = kernel_census(MaterialParams{}, build_rect_mesh(1.0, 1.0, 3, 3));
    ASSERT_EQ(table.size(), 8u);
    for (const auto& [bc, dim] : table) {
        const int expected = bc == BcFamily::FreeNeumann ? 3
                             : (bc == BcFamily::HardRigid || bc == BcFamily::SoftRigid || bc == BcFamily::WeakNeumann)
                                 ? 1
                                 : 0;
        EXPECT_EQ(dim, expected) << to_string(bc);
    }
    const SweepReport r = tiny_kernel_report();
    EXPECT_TRUE(r.all_passed());
    ASSERT_NE(r.find_check("mesh_independent"), nullptr);
    EXPECT_TRUE(r.find_check("mesh_independent")->passed);
    EXPECT_EQ(r.find_check("no_such_check"), nullptr);
}

TEST(Korn, RotationQuotientBoundsUnitSquareConstant) {
    // eta = (y, -x): int |D eta|^2 = 2, eps = 0, int |eta|^2 = 2/3, quotient 3
    EXPECT_GE(korn_constant(build_rect_mesh(1.0, 1.0, 4, 4)), 3.0);
    const double thick = korn_constant(build_thin_mesh(ThinDomainSpec::cylinder(0.0, 1.0, 0.4), 16, 4));
    const double thin = korn_constant(build_thin_mesh(ThinDomainSpec::cylinder(0.0, 1.0, 0.2), 16, 4));
    EXPECT_GT(thin, thick);
    EXPECT_GT(korn_constant(build_rect_mesh(1.0, 1.0, 4, 4), KornSpace::Clamped), 0.0);
}

TEST(Poincare, SmallSweep) {
    SweepConfig c = default_config(SweepKind::Poincare);
    c.mesh_levels = {8, 16, 32};
    c.thin_cells = 2;
    const SweepReport r = poincare_check(c);
    ASSERT_EQ(r.points.size(), 3u);
    for (const auto& p : r.points) EXPECT_GT(p.values[0], 0.0);
    EXPECT_LT(r.fits.at("dirichlet_eigenvalue").slope, -1.8);
    EXPECT_LT(r.extra.at("unit_square").at("relative_error").get<double>(), 0.01);
    ASSERT_NE(r.find_check("positive"), nullptr);
    EXPECT_TRUE(r.find_check("positive")->passed);
}

TEST(Poincare, SquareEigenvalueNearTwoPiSquared) {
    const double l = dirichlet_eigenvalue(build_rect_mesh(1.0, 1.0, 32, 32));
    EXPECT_NEAR(l, 2.0 * M_PI * M_PI, 0.01 * 2.0 * M_PI * M_PI);
}

TEST(Thickness, RigidFamiliesWithoutLimitAreRejected) {
    SweepConfig c = default_config(SweepKind::Thickness);
    c.bc = BcFamily::HardRigid;
    EXPECT_THROW(sweep_thickness(c), UnsupportedLimit);
}

TEST(Thickness, FreeKernelIsThicknessIndependent) {
    SweepConfig c = default_config(SweepKind::Thickness);
    c.bc = BcFamily::FreeNeumann;
    c.mesh_levels = {4, 8, 16};
    c.k_eigs = 3;
    const SweepReport r = sweep_thickness(c);
    ASSERT_EQ(r.points.size(), 4u);
    for (const auto& p : r.points)
        for (double g : p.gaps) EXPECT_LE(g, 1e-8);
}

TEST(Delta, RigidDataGivesNoResolventGap) {
    SweepConfig c = default_config(SweepKind::Delta);
    c.mesh_levels = {8, 16, 32};
    c.thin_cells = 2;
    c.k_eigs = 1;
    c.f0 = {"rigid", 0.5, -0.25};
    const SweepReport r = sweep_delta(c);
    ASSERT_EQ(r.points.size(), 4u);
    for (const auto& p : r.points) EXPECT_LE(p.resolvent_gap, 1e-8);
}

TEST(Report, JsonRoundTripIsBitExact) {
    std::vector<std::pair<double, double>> pts = {{0.4, 0.0123456789}, {0.2, 0.00654321}, {0.1, 0.0031}};
    SweepReport r = tiny_kernel_report();
    r.fits["synthetic"] = fit_rate(pts);
    r.primary_fit = "synthetic";
    const SweepReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
    EXPECT_EQ(back.fits.at("synthetic").slope, r.fits.at("synthetic").slope);
    EXPECT_EQ(back.fits.at("synthetic").intercept, r.fits.at("synthetic").intercept);
    EXPECT_EQ(back.points.size(), r.points.size());
    EXPECT_EQ(back.checks.size(), r.checks.size());
    EXPECT_EQ(back.kind, SweepKind::Kernel);
    EXPECT_THROW(report_from_json(nlohmann::json{{"kind", "kernel"}}), InvalidArgument);
}

TEST(Report, CsvColumnCountFollowsHeader) {
    SweepReport r;
    r.kind = SweepKind::Thickness;
    r.config = default_config(SweepKind::Thickness);
    for (double t : {0.2, 0.1, 0.05}) {
        SweepPoint p;
        p.parameter = t;
        p.mesh_n = 64;
        p.gaps = {t, 2 * t, 3 * t, 4 * t};
        p.resolvent_gap = std::nan("");
        r.points.push_back(p);
    }
    r.fits["gap_1"] = fit_rate({{0.2, 0.2}, {0.1, 0.1}, {0.05, 0.05}});
    r.primary_fit = "gap_1";
    std::istringstream csv(report_csv(r));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "parameter,mesh_n,gap_1,gap_2,gap_3,gap_4,resolvent_gap,fitted_slope");
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2 + 4 + 1 + 1 - 1);
        EXPECT_NE(line.find("nan"), std::string::npos);
    }
    EXPECT_EQ(rows, 3);
}

TEST(Report, EmitWritesBothFilesAndRefusesEmptySweeps) {
    const auto dir = scratch_dir("emit");
    const SweepReport r = tiny_kernel_report();
    emit_report(r, dir.string());
    EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "report.csv"));
    std::ifstream in(dir / "report.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("version").get<std::string>(), version_string());
    EXPECT_TRUE(j.contains("timings"));
    std::filesystem::remove_all(dir);

    const auto empty_dir = scratch_dir("empty");
    SweepReport empty;
    EXPECT_THROW(emit_report(empty, empty_dir.string()), InvalidArgument);
    EXPECT_FALSE(std::filesystem::exists(empty_dir / "report.json"));
}

TEST(Report, EmitToUnwritablePathRaisesIoError) {
    const auto file = std::filesystem::temp_directory_path() / "rmplate_test_blocker";
    std::ofstream(file) << "x";
    EXPECT_THROW(emit_report(tiny_kernel_report(), (file / "sub").string()), IoError);
    std::filesystem::remove(file);
}
