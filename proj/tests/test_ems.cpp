#include <gtest/gtest.h>

#include <cmath>

#include "pvfc/ems.hpp"

namespace {

using namespace pvfc;

SagStatus active_sag(double fraction) {
    SagStatus s;
    s.active = true;
    const double nom = 260.0 * std::numbers::sqrt2 / std::numbers::sqrt3;
    s.amplitude_v = {fraction * nom, nom, nom};
    s.min_fraction = fraction;
    s.onset_s = 1.0;
    return s;
}

TEST(EmsNormal, DeficitRoutedToFuelCell) {
    const auto d = ems_step({150e3, 0.0}, 100e3, {}, EmsLimits{});
    EXPECT_EQ(d.mode, EmsMode::normal);
    EXPECT_NEAR(d.p_fc_ref_w, 50e3, 1e-9);
    EXPECT_EQ(d.p_dump_ref_w, 0.0);
    EXPECT_NEAR(d.p_grid_ref_w, 150e3, 1e-9);
    EXPECT_EQ(d.q_grid_ref_var, 0.0);
}

TEST(EmsNormal, SurplusRoutedToDumpLoad) {
    const auto d = ems_step({80e3, 0.0}, 100e3, {}, EmsLimits{});
    EXPECT_EQ(d.p_fc_ref_w, 0.0);
    EXPECT_NEAR(d.p_dump_ref_w, 20e3, 1e-9);
    EXPECT_NEAR(d.p_grid_ref_w, 80e3, 1e-9);
}

TEST(EmsNormal, ExcessDemandClampedToPeakCapability) {
    const auto d = ems_step({220e3, 0.0}, 100e3, {}, EmsLimits{});
    EXPECT_NEAR(d.p_grid_ref_w, 200e3, 1e-9);
    EXPECT_NEAR(d.p_fc_ref_w, 100e3, 1e-9);
    EXPECT_EQ(d.p_dump_ref_w, 0.0);
}

TEST(EmsNormal, ReactiveTrimmedToApparentCircle) {
    const auto d = ems_step({200e3, 200e3}, 100e3, {}, EmsLimits{});
    EXPECT_NEAR(d.p_grid_ref_w, 200e3, 1e-9);
    EXPECT_NEAR(d.q_grid_ref_var, std::sqrt(220e3 * 220e3 - 200e3 * 200e3), 1e-6);
    EXPECT_NEAR(d.q_grid_ref_var, 91651.5, 1.0);

    const auto neg = ems_step({200e3, -200e3}, 100e3, {}, EmsLimits{});
    EXPECT_NEAR(neg.q_grid_ref_var, -91651.5, 1.0);

    const auto free = ems_step({100e3, 50e3}, 100e3, {}, EmsLimits{});
    EXPECT_EQ(free.q_grid_ref_var, 50e3);
}

TEST(EmsNormal, BranchExclusionAndPowerBookkeeping) {
    const EmsLimits lim;
    for (double p_star = 0.0; p_star <= 260e3; p_star += 10e3) {
        for (double p_pv : {0.0, 29e3, 100.6e3}) {
            const auto d = ems_step({p_star, 60e3}, p_pv, {}, lim);
            EXPECT_FALSE(d.p_fc_ref_w > 0.0 && d.p_dump_ref_w > 0.0);
            EXPECT_GE(d.p_fc_ref_w, 0.0);
            EXPECT_LE(d.p_fc_ref_w, lim.p_fc_rated_w);
            EXPECT_GE(d.p_dump_ref_w, 0.0);
            const double p_clamped = std::min(p_star, p_pv + lim.p_fc_rated_w);
            EXPECT_NEAR(d.p_fc_ref_w + p_pv - d.p_dump_ref_w, p_clamped, 1e-9);
            EXPECT_LE(d.p_grid_ref_w * d.p_grid_ref_w + d.q_grid_ref_var * d.q_grid_ref_var,
                      lim.s_max_va * lim.s_max_va + 1.0);
        }
    }
}

TEST(EmsNormal, FuelCellReferenceMonotoneInDemand) {
    double prev = -1.0;
    for (double p_star = 0.0; p_star <= 250e3; p_star += 5e3) {
        const auto d = ems_step({p_star, 0.0}, 100e3, {}, EmsLimits{});
        EXPECT_GE(d.p_fc_ref_w, prev);
        prev = d.p_fc_ref_w;
    }
}

TEST(EmsNormal, NegativePvRejected) {
    EXPECT_THROW(ems_step({100e3, 0.0}, -1.0, {}, EmsLimits{}), InvalidInput);
}

TEST(SagRefs, RequireActiveSag) {
    EXPECT_THROW(sag_power_refs({}, EmsLimits{}, 150e3, 1.7), InvalidInput);
}

TEST(SagRefs, SinglePhaseThirtyPercentOracle) {
    // Weakest phase at 0.7 pu shrinks the apparent ceiling to 0.7 * 220 kVA;
    // reactive support (k_q = 1.7) takes 1.7 * 0.3 of it, real power the rest.
    const auto refs = sag_power_refs(active_sag(0.7), EmsLimits{}, 150e3, 1.7);
    EXPECT_NEAR(refs.q_var, 1.7 * 0.3 * 0.7 * 220e3, 1e-6);
    EXPECT_NEAR(refs.q_var, 78540.0, 1e-6);
    EXPECT_NEAR(refs.p_w, std::sqrt(154e3 * 154e3 - 78540.0 * 78540.0), 1e-6);
    EXPECT_LT(refs.p_w, 150e3);
}

TEST(SagRefs, DeepSagSaturatesAtDynamicCeiling) {
    const auto refs = sag_power_refs(active_sag(0.2), EmsLimits{}, 150e3, 2.5);
    const double s_dyn = 0.2 * 220e3;
    EXPECT_NEAR(refs.q_var, s_dyn, 1e-9);  // k_q * 0.8 > 1 clamps at the ceiling
    EXPECT_EQ(refs.p_w, 0.0);
}

TEST(SagMode, FuelCellAndDumpIdleWithPvCap) {
    const auto d = ems_step({150e3, 0.0}, 70e3, active_sag(0.7), EmsLimits{}, 150e3, 100.6e3);
    EXPECT_EQ(d.mode, EmsMode::sag);
    EXPECT_EQ(d.p_fc_ref_w, 0.0);
    EXPECT_EQ(d.p_dump_ref_w, 0.0);
    EXPECT_NEAR(d.q_grid_ref_var, 78540.0, 1e-6);
    EXPECT_NEAR(d.p_grid_ref_w, 0.95 * 100.6e3, 1e-6);  // pre-sag PV bounds export
}

TEST(Manager, LatchesPreSagOperatingPoint) {
    EnergyManager ems;
    const Demand demand{150e3, 0.0};
    for (int k = 0; k < 50; ++k) ems.step(demand, 100e3, 150e3, {});

    // During the sag the measurements are already disturbed; the manager must
    // use the stored pre-sag levels instead.
    const auto d = ems.step(demand, 30e3, 60e3, active_sag(0.7));
    EXPECT_EQ(d.mode, EmsMode::sag);
    EXPECT_NEAR(ems.latched_p_grid_w(), 150e3, 1e-9);
    EXPECT_NEAR(ems.latched_p_pv_w(), 100e3, 1e-9);
    EXPECT_NEAR(d.p_grid_ref_w, 0.95 * 100e3, 1e-6);

    // Recover, run at a new operating point, and latch again on the next sag.
    for (int k = 0; k < 40; ++k) ems.step(demand, 29e3, 80e3, {});
    const auto d2 = ems.step(demand, 10e3, 20e3, active_sag(0.65));
    EXPECT_NEAR(ems.latched_p_grid_w(), 80e3, 1e-9);
    EXPECT_NEAR(d2.p_grid_ref_w, 0.95 * 29e3, 1e-6);
}

TEST(Manager, NormalModePassesThrough) {
    EnergyManager ems;
    const auto d = ems.step({150e3, 40e3}, 100e3, 148e3, {});
    EXPECT_EQ(d.mode, EmsMode::normal);
    EXPECT_NEAR(d.p_fc_ref_w, 50e3, 1e-9);
    EXPECT_EQ(d.q_grid_ref_var, 40e3);
}

}  // namespace
