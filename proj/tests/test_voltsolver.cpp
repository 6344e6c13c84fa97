#include <gtest/gtest.h>

#include "twin_fixture.hpp"

using namespace trapsim;
using trapsim::testing::TwinDefault;

namespace {

// field and axial curvature actually produced by a voltage set
std::pair<Vec3, double> realized(const FieldModel& m, const ElectrodeGrouping& g, const Eigen::VectorXd& x, const Vec3& r) {
    Vec3 grad = Vec3::Zero();
    double curv = 0.0;
    for (const auto& [group, v] : g.expand(x)) {
        grad += v * m.group_gradient(group, r);
        curv += v * m.group_hessian(group, r)(2, 2);
    }
    return {-grad, curv};
}

}  // namespace

TEST(VoltSolver, GroupingCoversTwinLayout) {
    const auto& t = TwinDefault::get();
    EXPECT_NO_THROW(t.grouping.validate(t.model->layout()));
    EXPECT_EQ(t.grouping.names().size(), 8u);
}

TEST(VoltSolver, RoundTripTwoSites) {
    const auto& t = TwinDefault::get();
    const IonSpecies sp;
    const std::vector<SiteTarget> targets{{t.rf.left + Vec3(0, 0, 20e-6), Vec3(50.0, -30.0, 10.0), angular(0.9e6)},
                                          {t.rf.right + Vec3(0, 0, -40e-6), Vec3(0.0, 20.0, -15.0), angular(1.1e6)}};
    const ConstraintSystem cs = solve_voltages(*t.model, t.grouping, sp, targets);
    EXPECT_EQ(cs.rank, 8);
    for (const auto& s : targets) {
        const auto [e, curv] = realized(*t.model, t.grouping, cs.x, s.position);
        EXPECT_LT((e - s.field).norm(), 1e-3 * std::max(1.0, s.field.norm()));
        const double want = sp.mass * s.omega_z * s.omega_z / sp.charge;
        EXPECT_NEAR(curv, want, 1e-3 * want);
    }
}

TEST(VoltSolver, AxialFrequencyIsRealized) {
    const auto& t = TwinDefault::get();
    const TrapSite s = characterize_site(*t.land, minimize(*t.land, t.rf.left).point);
    EXPECT_NEAR(to_hz(s.secular[0]), 1e6, 1e-3 * 1e6);
    EXPECT_LT((s.position - t.rf.left).norm(), 0.1e-6);
}

TEST(VoltSolver, PeriodicSitesShareFrequency) {
    const auto& t = TwinDefault::get();
    for (double dz : {-306e-6, 306e-6}) {
        const MinimizeResult m = minimize(*t.land, t.rf.left + Vec3(0, 0, dz));
        ASSERT_TRUE(m.converged);
        const TrapSite s = characterize_site(*t.land, m.point);
        EXPECT_NEAR(to_hz(s.secular[0]), 1e6, 0.02e6);
    }
}

TEST(VoltSolver, VoltagesInExpectedRange) {
    const auto& t = TwinDefault::get();
    EXPECT_LT(t.system.x.cwiseAbs().maxCoeff(), 10.0);
    EXPECT_GT(t.system.x.cwiseAbs().maxCoeff(), 0.1);
}

TEST(VoltSolver, RejectsTooManyTargets) {
    const auto& t = TwinDefault::get();
    const IonSpecies sp;
    std::vector<SiteTarget> targets;
    for (int k = 0; k < 3; ++k) targets.push_back({t.rf.left + Vec3(0, 0, 50e-6 * k), Vec3::Zero(), angular(1e6)});
    EXPECT_ANY_THROW(solve_voltages(*t.model, t.grouping, sp, targets));
}

TEST(VoltSolver, UnknownGroupIsRejected) {
    const auto& t = TwinDefault::get();
    ElectrodeGrouping g;
    g.channels.push_back({"X", {"nope"}});
    EXPECT_THROW(g.validate(t.model->layout()), std::invalid_argument);
}

TEST(VoltSolver, AmplitudeBisectionHitsTarget) {
    const auto& t = TwinDefault::get();
    const IonSpecies sp;
    const std::map<std::string, double> w{{"RFi", 1.0}, {"RFo", 1.0}};
    const double u = bisect_rf_amplitude(t.model, sp, w, angular(23e6), 0.3, t.rf.left);
    EXPECT_NEAR(q_for_amplitude(t.model, sp, w, u, angular(23e6), t.rf.left), 0.3, 1e-6);
}
