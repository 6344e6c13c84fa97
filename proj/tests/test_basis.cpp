#include <gtest/gtest.h>

#include "trapsim/fields.hpp"

using namespace trapsim;

namespace {

PolygonElectrode rect(double x0, double x1, double z0, double z1) {
    return rect_electrode("e", ElectrodeRole::DC, "e", x0, x1, z0, z1);
}

const Vec3 probes[] = {{3e-5, 7e-5, -2e-5}, {-1.2e-4, 4e-5, 5e-5}, {2e-6, 2e-4, 1e-4}, {0.0, 1.5e-5, 0.0}};

}  // namespace

TEST(Basis, HarmonicWithoutTopPlane) {
    const ElectrodeBasis b(rect(-1e-4, 2e-4, -3e-4, 1e-4), std::nullopt);
    for (const Vec3& r : probes) EXPECT_NEAR(b.hessian(r).trace(), 0.0, 1e-6 * b.hessian(r).norm());
}

TEST(Basis, HarmonicWithTopPlane) {
    const ElectrodeBasis b(rect(-1e-4, 2e-4, -3e-4, 1e-4), 1e-3);
    for (const Vec3& r : probes) EXPECT_NEAR(b.hessian(r).trace(), 0.0, 1e-6 * b.hessian(r).norm());
}

TEST(Basis, GradientMatchesFiniteDifference) {
    const ElectrodeBasis b(rect(-1e-4, 2e-4, -3e-4, 1e-4), 1e-3);
    const double h = 1e-9;
    for (const Vec3& r : probes) {
        const Vec3 g = b.gradient(r);
        for (int i = 0; i < 3; ++i) {
            Vec3 a = r, c = r;
            a[i] += h;
            c[i] -= h;
            EXPECT_NEAR(g[i], (b.potential(a) - b.potential(c)) / (2 * h), 1e-5 * g.norm() + 1e-3);
        }
    }
}

TEST(Basis, ThirdDerivativesMatchHessianDifferences) {
    const ElectrodeBasis b(rect(-1e-4, 2e-4, -3e-4, 1e-4), std::nullopt);
    const Vec3 r = probes[0];
    Vec3 g;
    Mat3 hs;
    Tensor3 t;
    b.derivatives3(r, g, hs, t);
    const double h = 1e-9;
    for (int k = 0; k < 3; ++k) {
        Vec3 a = r, c = r;
        a[k] += h;
        c[k] -= h;
        const Mat3 fd = (b.hessian(a) - b.hessian(c)) / (2 * h);
        EXPECT_LT((t[k] - fd).norm(), 1e-4 * t[k].norm());
    }
}

TEST(Basis, SuperpositionOfSplitElectrode) {
    const ElectrodeBasis whole(rect(-1e-4, 2e-4, -3e-4, 1e-4), std::nullopt);
    const ElectrodeBasis left(rect(-1e-4, 5e-5, -3e-4, 1e-4), std::nullopt);
    const ElectrodeBasis right(rect(5e-5, 2e-4, -3e-4, 1e-4), std::nullopt);
    for (const Vec3& r : probes) {
        EXPECT_NEAR(whole.potential(r), left.potential(r) + right.potential(r), 1e-12);
        EXPECT_LT((whole.gradient(r) - left.gradient(r) - right.gradient(r)).norm(), 1e-9 * whole.gradient(r).norm() + 1e-9);
    }
}

TEST(Basis, PartitionOfUnity) {
    // four quadrants far larger than the probe heights tile the plane
    const double L = 1e3;
    double sum_at[4] = {};
    const PolygonElectrode q[4] = {rect(0, L, 0, L), rect(-L, 0, 0, L), rect(-L, 0, -L, 0), rect(0, L, -L, 0)};
    for (const auto& e : q) {
        const ElectrodeBasis b(e, std::nullopt);
        for (int i = 0; i < 4; ++i) sum_at[i] += b.potential(probes[i]);
    }
    for (double s : sum_at) EXPECT_NEAR(s, 1.0, 1e-6);
}

TEST(Basis, SuperpositionWithTopPlane) {
    const ImageSeries k = ImageSeries::fixed(6);
    const ElectrodeBasis whole(rect(-1e-4, 2e-4, -3e-4, 1e-4), 1e-3, k);
    const ElectrodeBasis left(rect(-1e-4, 5e-5, -3e-4, 1e-4), 1e-3, k);
    const ElectrodeBasis right(rect(5e-5, 2e-4, -3e-4, 1e-4), 1e-3, k);
    for (const Vec3& r : probes) EXPECT_NEAR(whole.potential(r), left.potential(r) + right.potential(r), 1e-12);
}

TEST(Basis, ElectrodeOnlyInPlane) {
    const ElectrodeBasis b(rect(-1e-4, 1e-4, -1e-4, 1e-4), std::nullopt);
    EXPECT_NEAR(b.potential({0.0, 1e-9, 0.0}), 1.0, 1e-4);
    EXPECT_NEAR(b.potential({5e-4, 1e-9, 0.0}), 0.0, 1e-4);
}

TEST(Basis, TopPlaneIsGrounded) {
    const double top = 1e-3;
    const ElectrodeBasis b(rect(-1e-4, 2e-4, -3e-4, 1e-4), top, ImageSeries::converged(1e-6));
    EXPECT_NEAR(b.potential({0.0, top * (1 - 1e-12), 0.0}), 0.0, 1e-6);
    const ElectrodeBasis open(rect(-1e-4, 2e-4, -3e-4, 1e-4), std::nullopt);
    EXPECT_GT(open.potential({0.0, top * 0.999, 0.0}), 1e-3);
}

TEST(Basis, RejectsPointsBelowPlane) {
    const ElectrodeBasis b(rect(-1e-4, 1e-4, -1e-4, 1e-4), std::nullopt);
    EXPECT_ANY_THROW(b.potential({0.0, -1e-6, 0.0}));
}

TEST(Landscape, PseudopotentialScalesWithAmplitudeSquared) {
    auto model = std::make_shared<const FieldModel>(build_layout(LayoutParams::twin_trap()));
    DriveConfig d;
    d.rf_angular_frequency = angular(23e6);
    d.rf_amplitudes = {{"RFi", 100.0}, {"RFo", 100.0}};
    const Landscape a(model, d);
    d.rf_amplitudes = {{"RFi", 200.0}, {"RFo", 200.0}};
    const Landscape b(model, d);
    const Vec3 r(1e-5, 1e-4, 2e-5);
    EXPECT_NEAR(b.energy(r), 4.0 * a.energy(r), 1e-9 * std::abs(b.energy(r)));
}
