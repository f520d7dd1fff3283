// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dimer/dynamics.hpp"
#include "dimer/experiments.hpp"
#include "dimer/liouville.hpp"
#include "dimer/metrics.hpp"

using namespace dimer;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    // Records a labelled check and keeps the conjunction.
    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        detail << (ok ? "" : "!") << what << "; ";
    }
};

std::string fmt(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

InvariantLedger g_ledger;  // every scenario trajectory feeds criterion 11
int g_failures = 0;

void report(int id, const std::string& title, double budget_seconds, const std::function<void(Verdict&)>& body) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const std::exception& e) {
        v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_seconds > 0.0) {
        v.check(secs < budget_seconds, "runtime " + fmt(secs, 3) + " s < " + fmt(budget_seconds) + " s");
    }
    if (!v.pass) {
        ++g_failures;
    }
    std::printf("%s %2d %s [%.1f s] %s\n", v.pass ? "PASS" : "FAIL", id, title.c_str(), secs, v.detail.str().c_str());
    std::fflush(stdout);
}

SystemModel n2_model(double delta_gamma, double omega) {
    return SystemModel::assemble(BathConfig::from_chirality(1.0, delta_gamma), DetuningPattern::zeros(2),
                                 DriveProtocol::constant(omega), ControlMode::None,
                                 target_state(PairingSpec::adjacent_dimers(2), 2), {}, 2);
}

bool within(double value, double expected, double tol) { return std::abs(value - expected) <= tol; }

const ResultTable* g_table = nullptr;

std::size_t find_row(const ResultTable& t, const std::function<bool(std::size_t)>& pred) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (pred(r)) {
            return r;
        }
    }
    throw std::runtime_error("row not found in " + t.scenario);
}

ScenarioResult run_and_record(ScenarioId id) {
    auto result = run_scenario(ScenarioConfig::preset(id));
    g_ledger.merge(result.invariants);
    return result;
}

} // namespace

int main() {
    report(1, "N=2 closed-form steady state", 1.0, [](Verdict& v) {
        for (double r : {0.2, 1.0, 5.0, 50.0}) {
            const auto ss = steady_state(build_liouvillian(n2_model(1.0, r), r));
            const double f = fidelity_to_pure(ss.rho_ss, analytic_n2_steady_state(1.0, r));
            v.check(f >= 1.0 - 1e-8, "r=" + fmt(r) + " 1-F=" + fmt(1.0 - f, 3));
        }
    });

    report(2, "Liouvillian gap asymptotics", 5.0, [](Verdict& v) {
        const double weak = liouvillian_gap(build_liouvillian(n2_model(1.0, 0.01), 0.01)).gap;
        v.check(std::abs(weak / 0.5 - 1.0) <= 0.005, "gap(0.01)=" + fmt(weak));
        const double strong = liouvillian_gap(build_liouvillian(n2_model(1.0, 100.0), 100.0)).gap;
        const double expected = 1.0 / (3.0 * 100.0 * 100.0);
        v.check(std::abs(strong / expected - 1.0) <= 0.02, "gap(100)=" + fmt(strong) + " vs " + fmt(expected));
    });

    report(3, "fidelity-time relation", 5.0, [](Verdict& v) {
        for (double r : {5.0, 10.0, 20.0}) {
            const auto liou = build_liouvillian(n2_model(1.0, r), r);
            const double f = fidelity_to_pure(steady_state(liou).rho_ss, singlet(1, 2, 2));
            const double tau = 1.0 / liouvillian_gap(liou).gap;
            const double predicted = 2.0 * tau / (2.0 * tau + 3.0);
            v.check(std::abs(f / predicted - 1.0) <= 0.01, "r=" + fmt(r) + " F=" + fmt(f) + " pred=" + fmt(predicted));
        }
    });

    report(5, "theta schedule at k Omega = 4", 10.0, [](Verdict& v) {
        // Ramp to Omega = 0.4 with k = 10 and hold it there.
        const double slope = 4.0;
        const double tf = 0.1;
        const auto model = SystemModel::assemble(BathConfig::from_chirality(1.0, 0.0), DetuningPattern::zeros(2),
                                                 DriveProtocol::ramp(slope, tf, 10.0), ControlMode::ExactGenerator,
                                                 target_state(PairingSpec::adjacent_dimers(2), 2), {}, 2);
        const auto traj = evolve(model, pure_state(ops::ground_state(2)), 1.0, 0.001, 1);
        g_ledger.absorb(traj);
        double at_tf = std::nan("");
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            if (std::abs(traj.times[i] - tf) < 1e-12) {
                at_tf = traj.samples[i].fidelity_to_target;
            }
        }
        v.check(within(at_tf, 0.999, 0.001), "F(t_f)=" + fmt(at_tf));
        const double held = traj.samples.back().fidelity_to_target;
        v.check(within(held, 0.999, 0.001), "F(1)=" + fmt(held));
    });

    report(6, "counterdiabatic ceiling", 30.0, [](Verdict& v) {
        auto cfg = ScenarioConfig::preset(ScenarioId::TqdComparison);
        cfg.slopes = {1.0};
        const auto result = run_scenario(cfg);
        g_ledger.merge(result.invariants);
        const auto& t = result.table;
        double cd_peak = 0.0, ours_peak = 0.0;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            double& peak = t.text(r, "scheme") == "ours" ? ours_peak : cd_peak;
            peak = std::max(peak, t.number(r, "concurrence"));
        }
        v.check(within(cd_peak, 2.0 / 3.0, 0.01), "CD peak=" + fmt(cd_peak));
        v.check(ours_peak >= 0.99, "ours peak=" + fmt(ours_peak));
    });

    report(9, "speed-limit functional", 1.0, [](Verdict& v) {
        const auto bath = BathConfig::from_chirality(1.0, 1.0);
        const double dark = qsl_activity(singlet(1, 2, 2), bath).activity;
        v.check(dark == 0.0, "A(singlet)=" + fmt(dark));
        const double a1 = qsl_activity(analytic_n2_steady_state(1.0, 1.0), bath).activity;
        v.check(std::abs(a1 - 2.0 / 3.0) <= 1e-10, "A(dg/Omega=1)=" + fmt(a1, 15));
        // Least-squares slope of log(1/A) against log(Omega) deep in the strong-drive regime.
        std::vector<double> xs, ys;
        for (double omega = 10.0; omega <= 1000.0; omega *= std::sqrt(10.0)) {
            xs.push_back(std::log(omega));
            ys.push_back(std::log(1.0 / qsl_activity(analytic_n2_steady_state(1.0, omega), bath).activity));
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i] / static_cast<double>(xs.size());
            my += ys[i] / static_cast<double>(xs.size());
        }
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        const double slope = sxy / sxx;
        v.check(std::abs(slope / 2.0 - 1.0) <= 0.01, "slope=" + fmt(slope));
    });

    report(10, "N=6 multimer", 0.0, [](Verdict& v) {
        const auto result = run_and_record(ScenarioId::MultimerN6);
        const auto& t = result.table;
        double best = 0.0;
        double first = std::nan("");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (t.number(r, "t") <= 1.0 + 1e-12) {
                best = std::max(best, t.number(r, "fidelity"));
                if (std::isnan(first) && t.number(r, "fidelity") >= 0.99) {
                    first = t.number(r, "t");
                }
            }
        }
        v.check(best >= 0.99, "max F(t<=1)=" + fmt(best) + " first t(F>=0.99)=" + fmt(first));
        v.check(t.metadata.at("target_terms") == "15", "terms=" + t.metadata.at("target_terms"));
    });

    report(7, "steady states with free-space decay", 0.0, [](Verdict& v) {
        const auto result = run_and_record(ScenarioId::SpontaneousEmission);
        static ResultTable table;
        table = result.table;
        g_table = &table;
        auto cell = [&](int n, double gf, const std::string& scheme) {
            return find_row(table, [&](std::size_t r) {
                return table.number(r, "n_qubits") == n && std::abs(table.number(r, "gamma_f") - gf) < 1e-12 &&
                       table.text(r, "scheme") == scheme;
            });
        };
        const auto h4 = cell(4, 0.01, "time_independent_half");
        const double c4 = table.number(h4, "steady_concurrence"), f4 = table.number(h4, "steady_fidelity");
        v.check(within(c4, 0.137, 0.005), "N4 C=" + fmt(c4, 4));
        v.check(within(f4, 0.684, 0.005), "N4 F=" + fmt(f4, 4));
        const auto h6 = cell(6, 0.01, "time_independent_half");
        const double c6 = table.number(h6, "steady_concurrence"), f6 = table.number(h6, "steady_fidelity");
        v.check(within(c6, 0.015, 0.005), "N6 C=" + fmt(c6, 4));
        v.check(within(f6, 0.650, 0.01), "N6 F=" + fmt(f6, 4));
        for (int n : {4, 6}) {
            const auto s = cell(n, 0.01, "time_independent_small");
            const double c = table.number(s, "steady_concurrence"), f = table.number(s, "steady_fidelity");
            v.check(c == 0.0, "N" + std::to_string(n) + " small-delta C=" + fmt(c, 4));
            v.check(within(f, 0.489, 0.005), "N" + std::to_string(n) + " small-delta F=" + fmt(f, 4));
        }
    });

    report(8, "maximal concurrence with free-space decay", 0.0, [](Verdict& v) {
        if (!g_table) {
            v.check(false, "table from criterion 7 unavailable");
            return;
        }
        const auto& table = *g_table;
        auto max_c = [&](int n, double gf, const std::string& scheme) {
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                if (table.number(r, "n_qubits") == n && std::abs(table.number(r, "gamma_f") - gf) < 1e-12 &&
                    table.text(r, "scheme") == scheme) {
                    return table.number(r, "max_concurrence");
                }
            }
            return std::nan("");
        };
        const double ti4 = max_c(4, 0.01, "time_independent_half");
        v.check(within(ti4, 0.163, 0.01), "TI N4 gf0.01=" + fmt(ti4, 4));
        const double ti8 = max_c(8, 0.1, "time_independent_half");
        v.check(within(ti8, 0.055, 0.01), "TI N8 gf0.1=" + fmt(ti8, 4));
        for (int n : {4, 6, 8}) {
            for (double gf : {0.01, 0.1}) {
                const double c = max_c(n, gf, "ours");
                v.check(c >= 0.995, "ours N" + std::to_string(n) + " gf" + fmt(gf) + "=" + fmt(c, 5));
            }
        }
    });

    report(4, "Fig 2 scheme comparison", 0.0, [](Verdict& v) {
        const auto result = run_and_record(ScenarioId::Fig2SchemeComparison);
        const auto& t = result.table;
        auto c12 = [&](const std::string& scheme) {
            const auto r = find_row(t, [&](std::size_t i) {
                return t.text(i, "scheme") == scheme && std::abs(t.number(i, "t") - 1.0) < 1e-9;
            });
            return t.number(r, "concurrence_12");
        };
        const double d0 = c12("ours_dg0"), d1 = c12("ours_dg1"), ti = c12("time_independent");
        v.check(d0 >= 0.99, "ours dg=0 C12=" + fmt(d0));
        v.check(within(d1, 0.97, 0.02), "ours dg=1 C12=" + fmt(d1));
        v.check(ti < 0.2, "time-independent C12=" + fmt(ti));
    });

    report(12, "robustness sweep", 0.0, [](Verdict& v) {
        const auto cfg = ScenarioConfig::preset(ScenarioId::Fig3Robustness);
        const auto result = run_scenario(cfg);
        g_ledger.merge(result.invariants);
        const auto& t = result.table;
        double worst_low_noise = 1.0;
        for (auto r : t.select("axis", "eta1")) {
            if (t.number(r, "eta1") <= 0.1 + 1e-12) {
                worst_low_noise = std::min(worst_low_noise, t.number(r, "concurrence"));
            }
        }
        v.check(worst_low_noise >= 0.99, "min C(eta1<=0.1)=" + fmt(worst_low_noise));
        const auto rows = t.select("axis", "eta2");
        auto c_at = [&](double eta2, double m) {
            for (auto r : rows) {
                if (t.number(r, "eta2") == eta2 && t.number(r, "m") == m) {
                    return t.number(r, "concurrence");
                }
            }
            return std::nan("");
        };
        std::size_t eta_violations = 0, m_violations = 0;
        double worst_eta = 0.0, worst_m = 0.0;
        for (double m : cfg.slopes) {
            for (std::size_t i = 0; i + 1 < cfg.eta2_grid.size(); ++i) {
                const double rise = c_at(cfg.eta2_grid[i + 1], m) - c_at(cfg.eta2_grid[i], m);
                if (!(rise <= 0.0)) {
                    ++eta_violations;
                    worst_eta = std::max(worst_eta, rise);
                }
            }
        }
        for (double eta2 : cfg.eta2_grid) {
            if (eta2 <= 0.0) {
                continue;
            }
            for (std::size_t i = 0; i + 1 < cfg.slopes.size(); ++i) {
                const double rise = c_at(eta2, cfg.slopes[i + 1]) - c_at(eta2, cfg.slopes[i]);
                if (!(rise <= 0.0)) {
                    ++m_violations;
                    worst_m = std::max(worst_m, rise);
                }
            }
        }
        std::size_t unconverged = 0;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            unconverged += t.number(r, "converged") == 0.0 ? 1 : 0;
        }
        v.check(eta_violations == 0, "C non-increasing in eta2 (" + std::to_string(eta_violations) +
                                         " rises, max " + fmt(worst_eta, 3) + ")");
        v.check(m_violations == 0, "C non-increasing in m (" + std::to_string(m_violations) + " rises, max " +
                                       fmt(worst_m, 3) + ")");
        v.detail << "unconverged cells " << unconverged << "; ";
    });

    report(11, "property suite", 0.0, [](Verdict& v) {
        v.check(g_ledger.max_trace_drift < 1e-8, "trace drift " + fmt(g_ledger.max_trace_drift, 3));
        v.check(g_ledger.max_hermiticity_error < 1e-9, "hermiticity " + fmt(g_ledger.max_hermiticity_error, 3));
        v.check(g_ledger.min_eigenvalue >= -1e-7, "min eigenvalue " + fmt(g_ledger.min_eigenvalue, 3));
        v.detail << g_ledger.trajectories << " trajectories; ";

        double dark = 0.0;
        for (int n : {2, 4, 6, 8}) {
            for (bool all : {false, true}) {
                if (all && n == 8) {
                    continue;  // 105-term multimer: covered at N <= 6
                }
                const auto target = target_state(all ? PairingSpec::all_pairings() : PairingSpec::adjacent_dimers(n), n);
                const auto model = SystemModel::assemble(BathConfig::from_chirality(1.0, 0.0), DetuningPattern::zeros(n),
                                                         DriveProtocol::constant(5.0), ControlMode::None, target, {}, n);
                dark = std::max(dark, lindblad_rhs(model, pure_state(target.vector), 0.0).norm());
            }
        }
        v.check(dark < 1e-10, "dark residual " + fmt(dark, 3));

        double rk_gap = 0.0;
        for (int n : {2, 3, 4}) {
            std::vector<double> det(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                det[static_cast<std::size_t>(i)] = 0.15 * (i + 1) * (i % 2 ? -1.0 : 1.0);
            }
            const auto pairing = n % 2 ? PairingSpec::disjoint({{1, 2}}) : PairingSpec::adjacent_dimers(n);
            const auto model = SystemModel::assemble(BathConfig::from_chirality(1.0, 0.5, 0.05), DetuningPattern{det},
                                                     DriveProtocol::constant(2.0), ControlMode::None,
                                                     target_state(pairing, n), {0.1, 0.0}, n);
            const DensityMatrix rho0 = pure_state(ops::ground_state(n));
            const auto traj = evolve(model, rho0, 2.0, 0.01, 200);
            const DensityMatrix exact = liouville_propagate(build_liouvillian(model, 2.0), rho0, 2.0);
            rk_gap = std::max(rk_gap, (traj.final_state - exact).cwiseAbs().maxCoeff());
        }
        v.check(rk_gap < 1e-6, "RK vs exp " + fmt(rk_gap, 3));

        const auto model = n2_model(0.5, 2.0);
        const DensityMatrix rho0 = pure_state(ops::ground_state(2));
        const DensityMatrix exact = liouville_propagate(build_liouvillian(model, 2.0), rho0, 2.0);
        EvolveOptions single;
        single.max_step_norm = 1e9;
        std::vector<double> err;
        for (double dt : {0.1, 0.05, 0.025}) {
            err.push_back((evolve(model, rho0, 2.0, dt, 1000, single).final_state - exact).norm());
        }
        const double p1 = std::log2(err[0] / err[1]), p2 = std::log2(err[1] / err[2]);
        v.check(std::abs(p1 - 4.0) < 0.3 && std::abs(p2 - 4.0) < 0.3, "orders " + fmt(p1, 3) + ", " + fmt(p2, 3));
    });

    std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
