#pragma once

// Default twin-trap configuration shared by several suites: RF drive at
// q = 0.4 and 23 MHz, DC set for 1 MHz wells at the two central nulls.

#include "trapsim/pipeline.hpp"

namespace trapsim::testing {

struct TwinDefault {
    std::shared_ptr<const FieldModel> model;
    RfSetup rf;
    ElectrodeGrouping grouping = ElectrodeGrouping::twin_periodic();
    ConstraintSystem system;
    std::shared_ptr<const Landscape> land;

    static const TwinDefault& get() {
        static const TwinDefault t = make();
        return t;
    }

private:
    static TwinDefault make() {
        TwinDefault t;
        const IonSpecies sp;
        t.model = std::make_shared<const FieldModel>(build_layout(LayoutParams::twin_trap()));
        t.rf = rf_setup(t.model, sp, {{"RFi", 1.0}, {"RFo", 1.0}}, angular(23e6), 0.4);
        t.system = solve_voltages(*t.model, t.grouping, sp,
                                  {{t.rf.left, Vec3::Zero(), angular(1e6)}, {t.rf.right, Vec3::Zero(), angular(1e6)}});
        DriveConfig d = t.rf.drive;
        d.dc_voltages = t.grouping.expand(t.system.x);
        t.land = std::make_shared<const Landscape>(t.model, d, sp);
        return t;
    }
};

}  // namespace trapsim::testing
