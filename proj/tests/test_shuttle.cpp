#include <gtest/gtest.h>

#include "twin_fixture.hpp"

using namespace trapsim;
using trapsim::testing::TwinDefault;

namespace {

ScanResult small_axial(int n, bool depths) {
    const auto& t = TwinDefault::get();
    AxialScanOptions o;
    o.n = n;
    if (n == 1) o.z_lo = o.z_hi = 0.0;
    o.depths = depths;
    return scan_axial_translation(Landscape(t.model, t.rf.drive), t.grouping, t.rf.left, t.rf.right, o);
}

// synthetic axial scan whose voltages are linear in (a, b)
ScanResult linear_scan() {
    ScanResult s;
    s.kind = "axial";
    s.a_values = linspace(-1e-4, 1e-4, 3);
    s.b_values = linspace(-2e-4, 2e-4, 5);
    s.channels = {"A", "B"};
    for (double b : s.b_values)
        for (double a : s.a_values) {
            ScanPoint p;
            p.a = a;
            p.b = b;
            p.converged = true;
            p.voltages = {1e4 * a + 2e4 * b, 3.0 - 1e4 * b};
            s.points.push_back(p);
        }
    return s;
}

}  // namespace

TEST(Linspace, Endpoints) {
    const auto v = linspace(-1.0, 1.0, 5);
    ASSERT_EQ(v.size(), 5u);
    EXPECT_DOUBLE_EQ(v.front(), -1.0);
    EXPECT_DOUBLE_EQ(v.back(), 1.0);
    EXPECT_DOUBLE_EQ(v[2], 0.0);
    EXPECT_EQ(linspace(2.0, 3.0, 1), std::vector<double>{2.0});
    EXPECT_THROW(linspace(0, 1, 0), std::invalid_argument);
}

TEST(AxialScan, DegenerateGridGivesOneRow) {
    const ScanResult s = small_axial(1, true);
    ASSERT_EQ(s.points.size(), 1u);
    EXPECT_TRUE(s.points[0].converged) << s.points[0].error;
    EXPECT_NEAR(to_hz(s.points[0].left.secular[0]), 1e6, 1e3);
    EXPECT_GT(s.points[0].left.U_b, 0.0);
}

TEST(AxialScan, MirrorSymmetry) {
    const ScanResult s = small_axial(3, false);
    ASSERT_EQ(s.converged_count(), 9u);
    // swapping z_l and z_r swaps the left and right channel blocks
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const auto& p = s.at(i, j);
            const auto& q = s.at(j, i);
            for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(p.voltages[c], q.voltages[c + 4], 1e-6);
            EXPECT_NEAR(p.left.position.z(), s.a_values[i], 0.5e-6);
            EXPECT_NEAR(p.right.position.z(), s.b_values[j], 0.5e-6);
        }
}

TEST(AxialScan, RejectsRangeBeyondPeriod) {
    const auto& t = TwinDefault::get();
    AxialScanOptions o;
    o.z_lo = -200e-6;
    o.z_hi = 200e-6;
    EXPECT_THROW(scan_axial_translation(Landscape(t.model, t.rf.drive), t.grouping, t.rf.left, t.rf.right, o),
                 std::invalid_argument);
}

TEST(RfRatioScan, FailuresBecomeFlaggedRows) {
    const auto& t = TwinDefault::get();
    SpacingRequest rq;
    rq.weights = {{"RFi", 1.0}, {"RFo", 1.0}};
    rq.attenuated_group = "RFi";
    rq.left_guess = t.rf.left;
    rq.right_guess = t.rf.right;
    const ScanResult s = scan_rf_ratio(t.model, IonSpecies{}, rq, {0.5, 1.0});
    ASSERT_EQ(s.points.size(), 2u);
    EXPECT_FALSE(s.points[0].converged);
    EXPECT_FALSE(s.points[0].error.empty());
    EXPECT_TRUE(s.points[1].converged) << s.points[1].error;
    EXPECT_NEAR(s.points[1].s_x, 104.6e-6, 1e-6);
}

TEST(StaticScan, ValidatesWidths) {
    EXPECT_THROW(static_array_scan(IonSpecies{}, {50e-6}), std::invalid_argument);
    EXPECT_THROW(static_array_scan(IonSpecies{}, {0.0}), std::invalid_argument);
}

TEST(StaticScan, NarrowRailsNeedMoreDrive) {
    const ScanResult s = static_array_scan(IonSpecies{}, {4e-6, 12e-6, 20e-6});
    ASSERT_EQ(s.converged_count(), 3u);
    EXPECT_GT(s.points[0].u_rf, s.points[1].u_rf);
    EXPECT_GT(s.points[1].u_rf, s.points[2].u_rf);
    for (const auto& p : s.points) EXPECT_NEAR(p.left.q, 0.4, 1e-6);
}

TEST(Waveform, ReproducesGridAndInterpolatesLinearly) {
    const ScanResult s = linear_scan();
    const Waveform w = path_to_waveform(s, {{-1e-4, -2e-4}, {1e-4, 2e-4}}, 1e-3, 11);
    ASSERT_EQ(w.times.size(), 11u);
    EXPECT_DOUBLE_EQ(w.times.back(), 1e-3);
    for (std::size_t k = 0; k < w.times.size(); ++k) {
        const double f = double(k) / 10;
        const double a = -1e-4 + 2e-4 * f, b = -2e-4 + 4e-4 * f;
        EXPECT_NEAR(w.volts[k][0], 1e4 * a + 2e4 * b, 1e-12);
        EXPECT_NEAR(w.volts[k][1], 3.0 - 1e4 * b, 1e-12);
    }
}

TEST(Waveform, RejectsPathsOutsideScanOrThroughFailures) {
    ScanResult s = linear_scan();
    EXPECT_THROW(path_to_waveform(s, {{0.0, 0.0}, {2e-4, 0.0}}, 1e-3, 5), std::invalid_argument);
    s.points[4].converged = false;  // (a = 0, b = -1e-4)
    EXPECT_THROW(path_to_waveform(s, {{0.0, -2e-4}, {0.0, 0.0}}, 1e-3, 5), NumericalError);
}
