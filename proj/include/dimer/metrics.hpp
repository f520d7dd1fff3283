#pragma once

// Entanglement and state-quality measures on density matrices.

#include <span>
#include <vector>

#include "dimer/model.hpp"
#include "dimer/operators.hpp"

namespace dimer {

using DensityMatrix = Operator;

// Keeps the 1-based sites in `keep` (any order, result follows ascending site order).
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep, int n_qubits);

// Wootters concurrence of a 4x4 two-qubit state.
double concurrence(const DensityMatrix& rho2);

double purity(const DensityMatrix& rho);

// <phi| rho |phi>
double fidelity_to_pure(const DensityMatrix& rho, const StateVector& target);

// sqrt(<phi| rho |phi>), the root-fidelity convention used in tabulated steady states.
double root_fidelity(const DensityMatrix& rho, const StateVector& target);

// Smallest eigenvalue of the Hermitian part.
double min_eigenvalue(const DensityMatrix& rho);

struct MetricSample {
    double t = 0.0;
    std::vector<double> concurrence_per_pair;
    std::vector<double> purity_per_pair;
    std::vector<double> singlet_fidelity_per_pair;  // <S|rho_pair|S>
    double global_purity = 0.0;
    double fidelity_to_target = 0.0;

    double mean_concurrence() const;
    double mean_singlet_fidelity() const;
};

// Pair metrics use the target's pairs (empty for all-pairings targets).
MetricSample sample_metrics(double t, const DensityMatrix& rho, const TargetState& target);

} // namespace dimer
