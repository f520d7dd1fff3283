#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dimer/dynamics.hpp"
#include "dimer/errors.hpp"
#include "dimer/liouville.hpp"
#include "dimer/metrics.hpp"
#include "helpers.hpp"

using namespace dimer;
using dimer::testing::ModelSpec;

namespace {

DensityMatrix random_state(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    const auto d = static_cast<Eigen::Index>(ops::hilbert_dim(n));
    Operator a(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            a(i, j) = cd(g(rng), g(rng));
        }
    }
    DensityMatrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

ModelSpec static_spec(int n) {
    ModelSpec spec;
    spec.n = n;
    spec.delta_gamma = 0.4;
    spec.gamma_f = 0.05;
    spec.protocol = DriveProtocol::constant(1.5);
    spec.noise.eta1 = 0.2;
    spec.detunings.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        spec.detunings[static_cast<std::size_t>(i)] = 0.1 * (i + 1) * (i % 2 ? -1.0 : 1.0);
    }
    if (n % 2) {
        spec.pairing = PairingSpec::disjoint({{1, 2}});
    }
    return spec;
}

} // namespace

TEST(Dynamics, RhsIsTracelessAndHermitian) {
    auto spec = static_spec(3);
    spec.protocol = DriveProtocol::ramp(5.0, 1.0);
    spec.control = ControlMode::LocalPauli;
    spec.noise.eta2 = 0.1;
    const auto model = spec.build();
    const DensityMatrix rho = random_state(3, 1);
    for (double t : {0.0, 0.4, 1.7}) {
        const DensityMatrix d = lindblad_rhs(model, rho, t);
        EXPECT_LT(std::abs(d.trace()), 1e-13);
        EXPECT_LT(ops::hermiticity_error(d), 1e-13);
    }
}

TEST(Dynamics, RhsMatchesLiouvillian) {
    for (int n : {2, 3}) {
        const auto model = static_spec(n).build();
        const auto liou = build_liouvillian(model, 1.5);
        const DensityMatrix rho = random_state(n, 7u + static_cast<unsigned>(n));
        const Eigen::VectorXcd lhs = vectorize(lindblad_rhs(model, rho, 0.0));
        const Eigen::VectorXcd rhs = liou.matrix * vectorize(rho);
        EXPECT_LT((lhs - rhs).norm(), 1e-12) << n;
    }
}

TEST(Dynamics, RungeKuttaMatchesLiouvilleExponential) {
    for (int n : {2, 3, 4}) {
        const auto model = static_spec(n).build();
        const DensityMatrix rho0 = random_state(n, 3);
        const auto traj = evolve(model, rho0, 2.0, 0.01, 50);
        const DensityMatrix exact = liouville_propagate(build_liouvillian(model, 1.5), rho0, 2.0);
        EXPECT_LT((traj.final_state - exact).cwiseAbs().maxCoeff(), 1e-6) << n;
        EXPECT_LT(traj.max_trace_drift, 1e-8);
        EXPECT_LT(traj.max_hermiticity_error, 1e-9);
        EXPECT_GE(traj.min_eigenvalue, -1e-7);
    }
}

TEST(Dynamics, StepHalvingIsFourthOrder) {
    const auto model = static_spec(2).build();
    const DensityMatrix rho0 = pure_state(ops::ground_state(2));
    const DensityMatrix exact = liouville_propagate(build_liouvillian(model, 1.5), rho0, 2.0);
    EvolveOptions opt;
    opt.max_step_norm = 1e9;  // one RK4 step per macro step
    std::vector<double> errors;
    for (double dt : {0.1, 0.05, 0.025}) {
        const auto traj = evolve(model, rho0, 2.0, dt, 1000, opt);
        errors.push_back((traj.final_state - exact).norm());
    }
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        const double order = std::log2(errors[i] / errors[i + 1]);
        EXPECT_NEAR(order, 4.0, 0.3) << "errors " << errors[i] << " " << errors[i + 1];
    }
}

TEST(Dynamics, SamplingGridAndKinks) {
    auto spec = static_spec(2);
    spec.protocol = DriveProtocol::ramp(5.0, 0.333);
    spec.control = ControlMode::LocalPauli;
    const auto traj = evolve(spec.build(), pure_state(ops::ground_state(2)), 1.0, 0.1, 3);
    ASSERT_FALSE(traj.times.empty());
    EXPECT_DOUBLE_EQ(traj.times.front(), 0.0);
    EXPECT_NEAR(traj.times.back(), 1.0, 1e-12);
    EXPECT_NEAR(traj.times[1], 0.3, 1e-12);
    EXPECT_EQ(traj.samples.size(), traj.times.size());
}

TEST(Dynamics, StoragePolicy) {
    const auto model = static_spec(2).build();
    EvolveOptions opt;
    opt.storage = StoragePolicy::States;
    const auto with = evolve(model, pure_state(ops::ground_state(2)), 0.5, 0.1, 1, opt);
    EXPECT_EQ(with.states.size(), with.times.size());
    opt.storage = StoragePolicy::MetricsOnly;
    const auto without = evolve(model, pure_state(ops::ground_state(2)), 0.5, 0.1, 1, opt);
    EXPECT_TRUE(without.states.empty());
    EXPECT_NEAR((with.final_state - without.final_state).norm(), 0.0, 1e-15);
}

TEST(Dynamics, ObserverStopsEarly) {
    const auto model = static_spec(2).build();
    EvolveOptions opt;
    opt.observer = [](double t, const DensityMatrix&) { return t < 0.5; };
    const auto traj = evolve(model, pure_state(ops::ground_state(2)), 5.0, 0.1, 1, opt);
    EXPECT_TRUE(traj.stopped_early);
    EXPECT_NEAR(traj.times.back(), 0.5, 1e-12);
}

TEST(Dynamics, RejectsBadArguments) {
    const auto model = static_spec(2).build();
    const DensityMatrix rho = pure_state(ops::ground_state(2));
    EXPECT_THROW(evolve(model, rho, 1.0, 0.0, 1), Error);
    EXPECT_THROW(evolve(model, rho, 1.0, 0.1, 0), Error);
    EXPECT_THROW(evolve(model, pure_state(ops::ground_state(3)), 1.0, 0.1, 1), Error);
    EXPECT_THROW(evolve(model, 2.0 * rho, 1.0, 0.1, 1), Error);
}

// Integrating inside the pair-exchange subspace must reproduce the full-space result.
TEST(Dynamics, ReducedPathAgreesWithFullSpace) {
    ModelSpec spec;
    spec.n = 6;
    spec.protocol = DriveProtocol::ramp(10.0, 0.5);
    spec.control = ControlMode::LocalPauli;
    spec.noise = {0.1, 0.1};
    const auto model = spec.build();
    const DensityMatrix rho0 = pure_state(ops::ground_state(6));
    EvolveOptions full;
    full.reduce_symmetry = false;
    const auto a = evolve(model, rho0, 1.0, 0.01, 100);
    const auto b = evolve(model, rho0, 1.0, 0.01, 100, full);
    EXPECT_LT((a.final_state - b.final_state).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT(a.substeps, b.substeps);
}

TEST(Dynamics, LocalPauliPreparesDimer) {
    ModelSpec spec;
    spec.protocol = DriveProtocol::ramp(25.0, 1.0);
    spec.control = ControlMode::LocalPauli;
    const auto traj = evolve(spec.build(), pure_state(ops::ground_state(2)), 1.0, 0.01, 10);
    EXPECT_GE(traj.samples.back().mean_concurrence(), 0.99);
}

// Large control noise: the anti-Hermitian rounding component must not grow.
TEST(Dynamics, StrongControlNoiseStaysPhysical) {
    ModelSpec spec;
    spec.n = 4;
    spec.protocol = DriveProtocol::ramp(10.0, 1.0);
    spec.control = ControlMode::LocalPauli;
    spec.noise.eta2 = 0.3;
    const auto traj = evolve(spec.build(), pure_state(ops::ground_state(4)), 0.2, 0.01, 5);
    EXPECT_LT(traj.max_hermiticity_error, 1e-9);
    EXPECT_GE(traj.min_eigenvalue, -1e-7);
}

TEST(Dynamics, PairExchangeIsometryNeedsCover) {
    EXPECT_THROW(pair_exchange_isometry({{1, 2}}, 4), Error);
    const Operator p = pair_exchange_isometry({{1, 2}, {3, 4}}, 4);
    EXPECT_EQ(p.cols(), 10);  // symmetric square of a 4-dimensional pair space
}
