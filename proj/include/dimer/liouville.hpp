#pragma once

// Liouville-space view of the master equation: superoperator matrices, steady states,
// spectral gaps, and the dissipative speed-limit functional.
//
// Vectorization is row-major: |i><j| -> |i> (x) |j>, so A rho -> (A (x) 1) v and
// rho B -> (1 (x) B^T) v.

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dimer/dynamics.hpp"
#include "dimer/model.hpp"

namespace dimer {

inline constexpr int kMaxDenseLiouvillianQubits = 6;

Eigen::VectorXcd vectorize(const DensityMatrix& rho);
DensityMatrix devectorize(const Eigen::VectorXcd& v);

struct LiouvillianMatrix {
    int n_qubits = 0;
    double built_at_omega = 0.0;
    Eigen::SparseMatrix<cd> matrix;  // 4^N x 4^N

    Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(matrix); }
};

// Superoperator of `model` with the drive frozen at `omega_const`. The model must not carry
// an active control field.
LiouvillianMatrix build_liouvillian(const SystemModel& model, double omega_const);

struct SteadyStateResult {
    DensityMatrix rho_ss;
    double residual = 0.0;       // ||L v(rho_ss)||_2
    std::size_t null_dim = 0;
    double clipped = 0.0;        // magnitude of negative eigenvalues removed by the PSD projection
    std::vector<DensityMatrix> basis;  // nullspace basis when null_dim > 1
};

// Nullspace by SVD thresholding (sigma < 1e-10 sigma_max) up to 1024-dimensional Liouville
// spaces; above that a trace-bordered sparse LU solve, which assumes a unique solution and
// reports null_dim = 1 once two differently bordered solves agree.
SteadyStateResult steady_state(const LiouvillianMatrix& liou, bool require_unique = true);

struct EvolutionSteadyState {
    SteadyStateResult result;
    double time_reached = 0.0;
    bool converged = false;  // residual fell below the tolerance before max_time
};

// Long-time integration until ||lindblad_rhs||_F < tolerance, for sizes beyond the dense cap.
EvolutionSteadyState steady_state_by_evolution(const SystemModel& model, const DensityMatrix& rho0, double max_time,
                                               double check_every, double tolerance = 1e-6,
                                               const EvolveOptions& options = {});

struct GapResult {
    Eigen::VectorXcd eigenvalues;
    double gap = 0.0;               // min |Re lambda| over modes with |Re lambda| >= 1e-10
    std::size_t zero_modes = 0;
    double max_real_part = 0.0;     // should be <= 1e-10 for a physical generator
};

GapResult liouvillian_gap(const LiouvillianMatrix& liou);

// exp(L t) v(rho), dense matrix exponential; intended for small oracle checks.
DensityMatrix liouville_propagate(const LiouvillianMatrix& liou, const DensityMatrix& rho, double t);

// Delta_gamma * tau for a steady-state fidelity F in (0, 1), and the inverse map.
double fidelity_to_time(double fidelity);
double time_to_fidelity(double delta_gamma_tau);

// ((i dg / Omega)|gg> - |ge> + |eg>) / sqrt(2 + (dg / Omega)^2)
StateVector analytic_n2_steady_state(double delta_gamma, double omega);

struct QslResult {
    double activity = 0.0;  // Gamma * || c^dag |Phi><Phi| c ||_F
    double bound = std::numeric_limits<double>::infinity();  // 1 / activity, infinite for dark targets
    bool dark = true;
};

QslResult qsl_activity(const StateVector& target, const BathConfig& bath);

} // namespace dimer
