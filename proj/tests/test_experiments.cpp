#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <gtest/gtest.h>

#include "dimer/errors.hpp"
#include "dimer/experiments.hpp"

using namespace dimer;

TEST(Experiments, FormatNumberRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 123456789.123456789}) {
        const std::string s = format_number(v);
        EXPECT_EQ(std::stod(s), v) << s;
    }
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(format_number(25.0), "25");
}

TEST(Experiments, PairedDetunings) {
    const auto d = paired_detunings(6, 0.5, 0.01);
    const std::vector<double> expected{0.5, -0.5, 0.51, -0.51, 0.52, -0.52};
    ASSERT_EQ(d.size(), expected.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_NEAR(d[i], expected[i], 1e-15);
    }
    EXPECT_THROW(paired_detunings(5, 0.5, 0.01), Error);
}

TEST(Experiments, ScenarioNames) {
    for (auto id : all_scenarios()) {
        EXPECT_EQ(scenario_from_string(to_string(id)), id);
    }
    EXPECT_EQ(all_scenarios().size(), 8u);
    EXPECT_THROW(scenario_from_string("fig9"), Error);
}

TEST(Experiments, ResultTableAccess) {
    ResultTable t;
    t.scenario = "x";
    t.columns = {"t", "scheme"};
    t.add_row({0.5, std::string("ours")});
    t.add_row({1.0, std::string("adiabatic")});
    EXPECT_THROW(t.add_row({1.0}), Error);
    EXPECT_EQ(t.number(1, "t"), 1.0);
    EXPECT_EQ(t.text(0, "scheme"), "ours");
    EXPECT_THROW(t.column("missing"), Error);
    EXPECT_THROW(t.number(0, "scheme"), std::exception);
    EXPECT_EQ(t.select("scheme", "adiabatic"), std::vector<std::size_t>{1});
    ResultTable other = t;
    t.append(other);
    EXPECT_EQ(t.rows.size(), 4u);
    other.columns = {"t"};
    other.rows.clear();
    EXPECT_THROW(t.append(other), Error);
}

TEST(Experiments, ParallelForVisitsEachIndexOnce) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) {
        EXPECT_EQ(h.load(), 1);
    }
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw std::runtime_error("job failed");
                              }),
                 std::runtime_error);
}

TEST(Experiments, InvariantLedgerMerge) {
    InvariantLedger a, b;
    a.max_trace_drift = 1e-12;
    a.min_eigenvalue = -1e-9;
    a.trajectories = 2;
    b.max_hermiticity_error = 1e-14;
    b.min_eigenvalue = -1e-8;
    b.trajectories = 1;
    a.merge(b);
    EXPECT_EQ(a.trajectories, 3u);
    EXPECT_EQ(a.min_eigenvalue, -1e-8);
    EXPECT_EQ(a.max_trace_drift, 1e-12);
    EXPECT_EQ(a.max_hermiticity_error, 1e-14);
}

TEST(Experiments, PresetsCarryDocumentedParameters) {
    const auto fig2 = ScenarioConfig::preset(ScenarioId::Fig2SchemeComparison);
    EXPECT_EQ(fig2.n_qubits, 8);
    EXPECT_EQ(fig2.slope, 25.0);
    EXPECT_EQ(fig2.theta_k, 10.0);
    EXPECT_EQ(fig2.t_end, 3.0);
    const auto fig3 = ScenarioConfig::preset(ScenarioId::Fig3Robustness);
    EXPECT_EQ(fig3.eta1_grid.size(), 11u);
    EXPECT_EQ(fig3.slopes.size(), 11u);
    EXPECT_DOUBLE_EQ(fig3.eta1_grid.back(), 0.3);
    EXPECT_DOUBLE_EQ(fig3.slopes.back(), 50.0);
    const auto multimer = ScenarioConfig::preset(ScenarioId::MultimerN6);
    EXPECT_EQ(multimer.n_qubits, 6);
}

TEST(Experiments, TqdComparisonSmallRun) {
    auto cfg = ScenarioConfig::preset(ScenarioId::TqdComparison);
    cfg.slopes = {1.0};
    cfg.t_end = 0.5;
    cfg.sample_every = 10;
    const auto result = run_scenario(cfg);
    const auto& table = result.table;
    EXPECT_EQ(table.scenario, "tqd_comparison");
    EXPECT_FALSE(table.select("scheme", "counterdiabatic").empty());
    EXPECT_FALSE(table.select("scheme", "ours").empty());
    EXPECT_LT(result.invariants.max_trace_drift, 1e-8);
    EXPECT_GE(result.invariants.min_eigenvalue, -1e-7);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        EXPECT_GE(table.number(r, "concurrence"), 0.0);
        EXPECT_LE(table.number(r, "concurrence"), 1.0 + 1e-12);
    }
}

TEST(Experiments, RobustnessSweepMonotoneInNoise) {
    auto cfg = ScenarioConfig::preset(ScenarioId::Fig3Robustness);
    cfg.slopes = {10.0};
    cfg.eta1_grid = {};
    cfg.eta2_grid = {0.0, 0.3};
    cfg.steady_cap = 8.0;
    const auto result = run_scenario(cfg);
    const auto rows = result.table.select("axis", "eta2");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_GT(result.table.number(rows[0], "concurrence"), result.table.number(rows[1], "concurrence"));
}
