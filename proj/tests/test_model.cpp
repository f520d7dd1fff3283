#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "dimer/dynamics.hpp"
#include "dimer/errors.hpp"
#include "dimer/model.hpp"
#include "helpers.hpp"

using namespace dimer;
using dimer::testing::ModelSpec;

TEST(Model, SingletAmplitudes) {
    const StateVector s = singlet(1, 2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(s(2) - r), 0.0, 1e-15);   // |eg>
    EXPECT_NEAR(std::abs(s(1) + r), 0.0, 1e-15);   // |ge>
    EXPECT_NEAR(std::abs(s(0)) + std::abs(s(3)), 0.0, 1e-15);
}

TEST(Model, PerfectMatchingCounts) {
    EXPECT_EQ(perfect_matchings(2).size(), 1u);
    EXPECT_EQ(perfect_matchings(4).size(), 3u);
    EXPECT_EQ(perfect_matchings(6).size(), 15u);
    EXPECT_EQ(perfect_matchings(8).size(), 105u);
    for (const auto& m : perfect_matchings(6)) {
        for (auto [i, j] : m) {
            EXPECT_LT(i, j);
        }
    }
    EXPECT_THROW(perfect_matchings(5), Error);
}

TEST(Model, TargetStates) {
    const auto multimer = target_state(PairingSpec::all_pairings(), 6);
    EXPECT_EQ(multimer.term_count, 15u);
    EXPECT_NEAR(multimer.vector.norm(), 1.0, 1e-14);
    const auto dimers = target_state(PairingSpec::adjacent_dimers(4), 4);
    const StateVector expected = Eigen::kroneckerProduct(singlet(1, 2, 2), singlet(1, 2, 2)).eval();
    EXPECT_NEAR((dimers.vector - expected).norm(), 0.0, 1e-15);
}

TEST(Model, PairingValidation) {
    EXPECT_THROW(target_state(PairingSpec::disjoint({{1, 2}, {2, 3}}), 4), Error);
    EXPECT_THROW(target_state(PairingSpec::disjoint({{2, 1}}), 2), Error);
    EXPECT_THROW(target_state(PairingSpec::disjoint({{1, 5}}), 4), Error);
    EXPECT_THROW(target_state(PairingSpec::all_pairings(), 5), Error);
    try {
        target_state(PairingSpec::disjoint({{1, 2}, {2, 3}}), 4);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Disjointness);
    }
}

TEST(Model, CoherentInteractionMatrixElement) {
    // <eg| H_C |ge> = (i/2)(gamma_R - gamma_L) for zero phases.
    const auto bath = BathConfig::from_chirality(1.0, 0.6);
    const Operator h = build_coherent_interaction(bath, 2);
    EXPECT_NEAR(std::abs(h(2, 1) - cd(0.0, 0.3)), 0.0, 1e-15);
    EXPECT_NEAR(ops::hermiticity_error(h), 0.0, 1e-15);
    EXPECT_NEAR(build_coherent_interaction(BathConfig::from_chirality(1.0, 0.0), 3).norm(), 0.0, 1e-15);
}

TEST(Model, BathValidation) {
    EXPECT_THROW(BathConfig::from_chirality(1.0, 1.5).validate(2), Error);
    BathConfig bad;
    bad.gamma_f = -0.1;
    EXPECT_THROW(bad.validate(2), Error);
    BathConfig phased;
    phased.phases = {0.0};
    EXPECT_THROW(phased.validate(2), Error);
}

TEST(Model, DriveSchedule) {
    const auto ramp = DriveProtocol::ramp(25.0, 1.0, 10.0);
    EXPECT_DOUBLE_EQ(drive_value(ramp, 0.5), 12.5);
    EXPECT_DOUBLE_EQ(drive_value(ramp, 1.0), 25.0);  // both halves of the step agree at t_f
    EXPECT_DOUBLE_EQ(drive_value(ramp, 3.0), 25.0);
    EXPECT_DOUBLE_EQ(drive_rate(ramp, 0.5), 25.0);
    EXPECT_DOUBLE_EQ(drive_rate(ramp, 2.0), 0.0);
    EXPECT_THROW(drive_value(ramp, -0.1), Error);
    // pi/2 (1 - e^{-4})
    EXPECT_NEAR(theta_of_omega(10.0, 0.4), 1.542026188505571, 1e-14);
}

TEST(Model, ControlModeNames) {
    for (auto mode : {ControlMode::ExactGenerator, ControlMode::ApproximateGenerator, ControlMode::LocalPauli,
                      ControlMode::Counterdiabatic, ControlMode::None}) {
        EXPECT_EQ(control_mode_from_string(to_string(mode)), mode);
    }
    EXPECT_THROW(control_mode_from_string("pauli"), Error);
}

TEST(Model, LocalPauliCalibrationMatchesPairGenerator) {
    const auto& cal = local_pauli_calibration();
    EXPECT_LT(cal.restriction_error, 1e-12);
    EXPECT_GT(cal.scale, 0.0);
}

TEST(Model, HamiltonianIsHermitianThroughoutRamp) {
    ModelSpec spec;
    spec.n = 4;
    spec.delta_gamma = 0.5;
    spec.protocol = DriveProtocol::ramp(5.0, 1.0);
    spec.detunings = {0.1, -0.1, 0.2, -0.2};
    for (auto mode : {ControlMode::ExactGenerator, ControlMode::ApproximateGenerator, ControlMode::LocalPauli}) {
        spec.control = mode;
        const auto model = spec.build();
        for (double t : {0.0, 0.3, 0.99, 1.0, 2.0}) {
            EXPECT_LT(ops::hermiticity_error(model.hamiltonian(t)), 1e-13) << to_string(mode) << " t=" << t;
        }
        EXPECT_LT(model.control_field(1.5).norm(), 1e-15);
    }
}

TEST(Model, CounterdiabaticOnlyForTwoQubits) {
    ModelSpec spec;
    spec.n = 4;
    spec.delta_gamma = 1.0;
    spec.protocol = DriveProtocol::ramp(1.0, 1.0);
    spec.control = ControlMode::Counterdiabatic;
    EXPECT_THROW(spec.build(), Error);
    spec.n = 2;
    spec.delta_gamma = 0.0;
    EXPECT_THROW(spec.build(), Error);
}

TEST(Model, CollectiveJumpAnnihilatesTargets) {
    for (int n : {2, 4, 6}) {
        const Operator c = ops::collective_lowering(std::vector<double>(static_cast<std::size_t>(n), 0.0), n);
        EXPECT_LT((c * target_state(PairingSpec::adjacent_dimers(n), n).vector).norm(), 1e-14);
        EXPECT_LT((c * target_state(PairingSpec::all_pairings(), n).vector).norm(), 1e-14);
    }
}

// Every target is a stationary dark state once the detunings vanish (non-chiral bath).
TEST(Model, DarkStateStationarity) {
    for (int n : {2, 4, 6, 8}) {
        for (bool all : {false, true}) {
            if (all && n == 8) {
                continue;
            }
            ModelSpec spec;
            spec.n = n;
            spec.protocol = DriveProtocol::constant(3.0);
            spec.pairing = all ? PairingSpec::all_pairings() : PairingSpec::adjacent_dimers(n);
            const auto model = spec.build();
            const DensityMatrix rho = pure_state(model.target().vector);
            EXPECT_LT(lindblad_rhs(model, rho, 0.0).norm(), 1e-10) << "n=" << n << " all=" << all;
        }
    }
}

// The chiral exchange term maps the singlet onto the triplet.
TEST(Model, ChiralityMovesSinglet) {
    ModelSpec spec;
    spec.delta_gamma = 0.7;
    spec.protocol = DriveProtocol::constant(3.0);
    const auto model = spec.build();
    EXPECT_GT(lindblad_rhs(model, pure_state(model.target().vector), 0.0).norm(), 0.1);
}

TEST(Model, NoisyControlBreaksNothingAfterRamp) {
    ModelSpec spec;
    spec.n = 2;
    spec.protocol = DriveProtocol::ramp(5.0, 1.0);
    spec.control = ControlMode::LocalPauli;
    spec.noise = {0.2, 0.2};
    const auto model = spec.build();
    EXPECT_FALSE(model.time_independent());
    EXPECT_LT(lindblad_rhs(model, pure_state(model.target().vector), 1.5).norm(), 1e-10);
}

TEST(Model, FrozenModelIsTimeIndependent) {
    ModelSpec spec;
    spec.n = 2;
    spec.protocol = DriveProtocol::ramp(5.0, 1.0);
    spec.control = ControlMode::LocalPauli;
    const auto frozen = spec.build().frozen(2.0);
    EXPECT_TRUE(frozen.time_independent());
    EXPECT_NEAR((frozen.drive(0.0) - build_drive(2.0, 2)).norm(), 0.0, 1e-15);
}

TEST(Model, PairExchangeSubspaceIsInvariant) {
    ModelSpec spec;
    spec.n = 6;
    spec.protocol = DriveProtocol::ramp(5.0, 1.0);
    spec.control = ControlMode::LocalPauli;
    spec.noise = {0.1, 0.1};
    const auto model = spec.build();
    const Operator p = pair_exchange_isometry({{1, 2}, {3, 4}, {5, 6}}, 6);
    EXPECT_NEAR((p.adjoint() * p - Operator::Identity(p.cols(), p.cols())).norm(), 0.0, 1e-13);
    EXPECT_LT(p.cols(), 64);
    EXPECT_LT(model.invariance_defect(p), 1e-12);
    spec.detunings = {0.1, -0.1, 0.2, -0.2, 0.3, -0.3};
    EXPECT_GT(spec.build().invariance_defect(p), 1e-3);
    spec.detunings.clear();
    spec.delta_gamma = 0.3;  // j < k ordering of the chiral exchange is not pair symmetric
    EXPECT_GT(spec.build().invariance_defect(p), 1e-3);
}
