#include <gtest/gtest.h>

#include <algorithm>

#include "trapsim/geometry.hpp"

using namespace trapsim;

namespace {

int count_role(const TrapLayout& l, ElectrodeRole r) {
    return int(std::count_if(l.electrodes.begin(), l.electrodes.end(), [&](const auto& e) { return e.role == r; }));
}

}  // namespace

TEST(Geometry, TwinTrapDefaults) {
    const TrapLayout l = build_layout(LayoutParams::twin_trap());
    EXPECT_EQ(count_role(l, ElectrodeRole::RF), 3);
    EXPECT_GT(count_role(l, ElectrodeRole::DC), 60);
    EXPECT_TRUE(l.has_group("RFi"));
    EXPECT_TRUE(l.has_group("RFo"));
    EXPECT_FALSE(l.top_ground_height.has_value());
    EXPECT_TRUE(validate_layout(l).empty());
}

TEST(Geometry, TwinTrapIsMirrorSymmetric) {
    const TrapLayout l = build_layout(LayoutParams::twin_trap());
    const BoundingBox b = l.bounds();
    EXPECT_NEAR(b.x0, -b.x1, 1e-12);
    EXPECT_NEAR(b.z0, -b.z1, 1e-12);
}

TEST(Geometry, LatticeArrayDefaults) {
    const TrapLayout l = build_layout(LayoutParams::lattice_array());
    EXPECT_EQ(count_role(l, ElectrodeRole::RF), 15);
    ASSERT_TRUE(l.top_ground_height.has_value());
    EXPECT_DOUBLE_EQ(*l.top_ground_height, 1e-3);
    EXPECT_TRUE(validate_layout(l).empty());
}

TEST(Geometry, StaticArray) {
    const TrapLayout l = build_layout(LayoutParams::static_array(40e-6, 10e-6));
    EXPECT_EQ(count_role(l, ElectrodeRole::RF), 15);
    EXPECT_TRUE(validate_layout(l).empty());
}

TEST(Geometry, RejectsNonPositiveDimensions) {
    LayoutParams p = LayoutParams::twin_trap();
    p.w_inner_rf = 0.0;
    EXPECT_THROW(build_layout(p), std::invalid_argument);
    LayoutParams s = LayoutParams::static_array(40e-6, 40e-6);
    EXPECT_THROW(build_layout(s), std::invalid_argument);
}

TEST(Geometry, DetectsOverlap) {
    TrapLayout l;
    l.electrodes.push_back(rect_electrode("a", ElectrodeRole::DC, "A", 0, 2e-4, 0, 1e-4));
    l.electrodes.push_back(rect_electrode("b", ElectrodeRole::DC, "B", 1e-4, 3e-4, 0, 1e-4));
    const auto v = validate_layout(l);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, "overlap");
}

TEST(Geometry, TouchingEdgesAreNotOverlaps) {
    TrapLayout l;
    l.electrodes.push_back(rect_electrode("a", ElectrodeRole::DC, "A", 0, 1e-4, 0, 1e-4));
    l.electrodes.push_back(rect_electrode("b", ElectrodeRole::DC, "B", 1e-4, 2e-4, 0, 1e-4));
    EXPECT_TRUE(validate_layout(l).empty());
}

TEST(Geometry, DetectsSelfIntersectionAndMissingGroups) {
    TrapLayout l;
    PolygonElectrode bow{"bow", ElectrodeRole::DC, {{{0, 0}, {1e-4, 1e-4}, {1e-4, 0}, {0, 1e-4}}}, "B"};
    l.electrodes.push_back(bow);
    auto v = validate_layout(l, {"missing"});
    EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const auto& x) { return x.kind == "polygon"; }));
    EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const auto& x) { return x.kind == "group"; }));
}
