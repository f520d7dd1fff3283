#pragma once

// Fixed-step RK4 integration of the time-dependent Lindblad equation.

#include <cstddef>
#include <functional>
#include <vector>

#include "dimer/metrics.hpp"
#include "dimer/model.hpp"

namespace dimer {

// -i[H(t), rho] + sum_k r_k D[L_k] rho, D[L] rho = L rho L^dag - {L^dag L, rho} / 2
DensityMatrix lindblad_rhs(const SystemModel& model, const DensityMatrix& rho, double t);

enum class StoragePolicy { Auto, States, MetricsOnly };

struct EvolveOptions {
    // RK4 substeps are shortened until h * generator_norm_bound <= this cap.
    double max_step_norm = 0.025;
    StoragePolicy storage = StoragePolicy::Auto;
    bool check_positivity = true;
    // Integrate inside the pair-exchange symmetric subspace when the model and the
    // initial state both respect it (exact, only a speedup).
    bool reduce_symmetry = true;
    // Called at every sample after renormalization; return false to stop early.
    std::function<bool(double t, const DensityMatrix& rho)> observer;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;   // empty under MetricsOnly
    std::vector<MetricSample> samples;
    DensityMatrix final_state;

    double max_trace_drift = 0.0;        // |tr rho - 1| before renormalization
    double max_hermiticity_error = 0.0;  // max |rho - rho^dag| before re-Hermitization
    double min_eigenvalue = 1.0;
    std::size_t substeps = 0;
    bool stopped_early = false;
};

// Integrates from t = 0 to t_end in macro steps of `dt`, sampling every `sample_every`
// macro steps and always at t_end. Ramp kinks are hit exactly.
Trajectory evolve(const SystemModel& model, const DensityMatrix& rho0, double t_end, double dt,
                  std::size_t sample_every, const EvolveOptions& options = {});

// Columns span the states symmetric under exchanging whole pairs (i_p, j_p) <-> (i_q, j_q).
// The pairs must cover every qubit.
Operator pair_exchange_isometry(const std::vector<std::pair<int, int>>& pairs, int n_qubits);

// Pure-state density matrix |psi><psi|.
DensityMatrix pure_state(const StateVector& psi);

} // namespace dimer
