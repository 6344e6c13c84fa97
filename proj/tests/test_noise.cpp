#include <gtest/gtest.h>

#include <cmath>

#include "trapsim/geometry.hpp"
#include "trapsim/noise_coupling.hpp"

using namespace trapsim;

namespace {

// independent evaluation of Omega_c with textbook constants
double coupling_oracle(double mass_kg, double omega_z, double s, double varsigma) {
    const double e = 1.602176634e-19, eps0 = 8.8541878128e-12, pi = 3.14159265358979323846;
    return varsigma * e * e / (2 * pi * eps0 * mass_kg) / (omega_z * s * s * s);
}

}  // namespace

TEST(Coupling, MatchesOracle) {
    const IonSpecies sp;
    const double w = angular(1e6);
    EXPECT_NEAR(coupling_rate(sp, w, 40e-6, CouplingAxis::X), coupling_oracle(sp.mass, w, 40e-6, 0.5), 1e-9);
    EXPECT_NEAR(coupling_rate(sp, w, 40e-6, CouplingAxis::Z), coupling_oracle(sp.mass, w, 40e-6, 1.0), 1e-9);
}

TEST(Coupling, Scaling) {
    const IonSpecies sp;
    const double w = angular(1e6);
    EXPECT_DOUBLE_EQ(coupling_rate(sp, w, 40e-6, CouplingAxis::Z) / coupling_rate(sp, w, 80e-6, CouplingAxis::Z), 8.0);
    EXPECT_DOUBLE_EQ(coupling_rate(sp, w, 40e-6, CouplingAxis::X) * 2.0, coupling_rate(sp, w, 40e-6, CouplingAxis::Z));
    EXPECT_THROW(coupling_rate(sp, w, 0.0, CouplingAxis::X), std::invalid_argument);
    EXPECT_THROW(coupling_rate(sp, 0.0, 40e-6, CouplingAxis::X), std::invalid_argument);
}

TEST(LeadResistance, Formula) {
    EXPECT_NEAR(lead_resistance(2.58e-9, 3.56e-3, 20e-6, 1000e-9), 0.45924, 1e-5);
    EXPECT_DOUBLE_EQ(lead_resistance(1e-8, 1e-3, 20e-6, 1e-6) / lead_resistance(1e-8, 1e-3, 40e-6, 1e-6), 2.0);
    EXPECT_DOUBLE_EQ(lead_resistance(1e-8, 0.0, 20e-6, 1e-6), 0.0);
    EXPECT_THROW(lead_resistance(1e-8, 1e-3, 0.0, 1e-6), std::invalid_argument);
}

TEST(Johnson, FormulaAndScaling) {
    const IonSpecies sp;
    CircuitModel c;
    c.r_lead = 0.46;
    c.temperature = 20.0;
    const JohnsonHeating h = johnson_heating(sp, c, 2.19e-3, angular(1e6));
    const double kb = 1.380649e-23, hbar = 1.054571817e-34, e = 1.602176634e-19;
    const double se = 4 * kb * 20.0 * 0.46 / (2.19e-3 * 2.19e-3);
    EXPECT_NEAR(h.s_e, se, 1e-12 * se);
    EXPECT_NEAR(h.rate, e * e * se / (4 * sp.mass * hbar * angular(1e6)), 1e-12);
    const JohnsonHeating h2 = johnson_heating(sp, c, 2.19e-3, angular(2e6));
    EXPECT_NEAR(h.rate / h2.rate, 2.0, 1e-12);
    c.temperature = 0.0;
    const JohnsonHeating z = johnson_heating(sp, c, 2.19e-3, angular(1e6));
    EXPECT_EQ(z.s_e, 0.0);
    EXPECT_EQ(z.rate, 0.0);
}

TEST(Pickup, Limits) {
    CircuitModel c;
    const double w = angular(25e6);
    c.r_lead = 0.0;
    c.l_lead = 0.0;
    c.c_f = std::numeric_limits<double>::infinity();
    EXPECT_NEAR(std::abs(rf_pickup(c, w)), 0.0, 1e-300);
    CircuitModel s;
    s.c_p = 1e3;
    EXPECT_NEAR(std::abs(rf_pickup(s, w)), 1.0, 1e-6);
    CircuitModel bad;
    bad.c_p = 0.0;
    EXPECT_THROW(rf_pickup(bad, w), std::invalid_argument);
}

TEST(Pickup, MonotoneInResistanceAndCoupling) {
    const double w = angular(25e6);
    double prev = 0.0;
    for (double r : {0.046, 0.1, 0.2, 0.46, 1.0, 2.0, 4.6}) {
        CircuitModel c;
        c.r_lead = r;
        const double m = std::abs(rf_pickup(c, w));
        EXPECT_GT(m, prev);
        prev = m;
    }
    prev = 0.0;
    for (double cp : {1e-15, 2e-15, 5e-15, 1e-14, 2e-14, 5e-14, 1e-13}) {
        CircuitModel c;
        c.c_p = cp;
        const double m = std::abs(rf_pickup(c, w));
        EXPECT_GT(m, prev);
        prev = m;
    }
}

TEST(CharacteristicDistance, GroundOnlyIsInfinite) {
    TrapLayout l;
    // a pad a kilometre away contributes nothing measurable
    l.electrodes.push_back(rect_electrode("far", ElectrodeRole::DC, "far", 1e3, 1e3 + 1e-4, 1e3, 1e3 + 1e-4));
    const FieldModel m(l);
    EXPECT_THROW(characteristic_distance(m, {"far"}, {0, 1e-4, 0}, {0, 0, 1}), NumericalError);
    EXPECT_THROW(characteristic_distance(m, {}, {0, 1e-4, 0}, {0, 0, 1}), std::invalid_argument);
}

TEST(CharacteristicDistance, SingleRectangleField) {
    // symmetric pad under the site: field is purely vertical
    TrapLayout l;
    l.electrodes.push_back(rect_electrode("pad", ElectrodeRole::DC, "pad", -1e-4, 1e-4, -1e-4, 1e-4));
    const FieldModel m(l);
    const Vec3 r(0, 1e-4, 0);
    EXPECT_THROW(characteristic_distance(m, {"pad"}, r, {1, 0, 0}), NumericalError);
    const double d = characteristic_distance(m, {"pad"}, r, {0, 1, 0});
    const double h = 1e-9;
    const double e = (m.group_potential("pad", r - Vec3(0, h, 0)) - m.group_potential("pad", r + Vec3(0, h, 0))) / (2 * h);
    EXPECT_NEAR(d, 1.0 / std::abs(e), 1e-6 * d);
}

TEST(Pattern, BruteForceOrders) {
    const std::vector<double> ratios{5, 5 * std::sqrt(2.0), 10, 10 * std::sqrt(2.0)};
    for (int order = 0; order <= 4; ++order) {
        const DetuningPattern p = detuning_pattern(10, 20, angular(1e6), angular(1e3), ratios, 10.0, order);
        const PatternCheck c = verify_pattern(p);
        EXPECT_TRUE(c.ok) << c.message;
        // independent brute force over pair cells
        const int cc = p.cols / 2;
        for (int r = 0; r < p.rows; ++r)
            for (int c2 = 0; c2 < p.cols; c2 += 2) EXPECT_EQ(p.at(r, c2), p.at(r, c2 + 1));
        for (int i = 1; i <= order; ++i)
            for (int r = 0; r < p.rows; ++r)
                for (int c1 = 0; c1 < cc; ++c1)
                    for (int r2 = 0; r2 < p.rows; ++r2)
                        for (int c2 = 0; c2 < cc; ++c2) {
                            const int dr = std::abs(r2 - r), dc = std::abs(c2 - c1);
                            const bool at_order = (i == 1 && dr + dc == 1) || (i == 2 && dr == 1 && dc == 1) ||
                                                  (i == 3 && ((dr == 2 && dc == 0) || (dr == 0 && dc == 2))) ||
                                                  (i == 4 && dr == 2 && dc == 2);
                            if (!at_order) continue;
                            EXPECT_GE(std::abs(p.at(r, 2 * c1) - p.at(r2, 2 * c2)), p.delta[i - 1] * (1 - 1e-12));
                        }
    }
}

TEST(Pattern, DistinctFrequencies) {
    const std::vector<double> ratios{5, 5 * std::sqrt(2.0), 10, 10 * std::sqrt(2.0)};
    EXPECT_EQ(detuning_pattern(10, 10, angular(1e6), angular(1e3), ratios, 10, 4).distinct(), 16u);
    EXPECT_EQ(detuning_pattern(10, 10, angular(1e6), angular(1e3), ratios, 10, 0).distinct(), 1u);
    const DetuningPattern two = detuning_pattern(4, 4, angular(1e6), angular(1e3), ratios, 10, 2);
    EXPECT_EQ(two.distinct(), 4u);
    // {w +- d1, w +- (d1 + 2 d2)}
    std::set<long long> want;
    for (double v : {two.delta[0], -two.delta[0], two.delta[0] + 2 * two.delta[1], -(two.delta[0] + 2 * two.delta[1])})
        want.insert(std::llround((angular(1e6) + v) * 1e6));
    std::set<long long> got;
    for (double f : two.frequency) got.insert(std::llround(f * 1e6));
    EXPECT_EQ(got, want);
}

TEST(Pattern, FirstOrderDetuning) {
    const DetuningPattern p = detuning_pattern(2, 4, angular(1e6), angular(1e3), {5}, 10, 1);
    EXPECT_NEAR(to_hz(p.delta[0]), 80.0, 1e-9);
}

TEST(Pattern, RejectsOddDimensions) {
    EXPECT_THROW(detuning_pattern(3, 4, angular(1e6), angular(1e3), {5}, 10, 1), std::invalid_argument);
    EXPECT_THROW(detuning_pattern(4, 4, angular(1e6), angular(1e3), {5}, 0.5, 1), std::invalid_argument);
}
