#pragma once

// Single-site and collective qubit operators on the 2^N-dimensional space.
//
// Basis: |g> <-> 0, |e> <-> 1. Multi-qubit indices are big-endian in site order,
// so site 1 is the most significant bit and the leftmost tensor factor.
// sigma^z |e> = +|e>, which makes sigma^dagger sigma = (1 + sigma^z) / 2.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dimer {

using cd = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using SparseOperator = Eigen::SparseMatrix<cd, Eigen::RowMajor>;
using LocalOperator = Eigen::Matrix2cd;

inline constexpr int kDefaultMaxQubits = 10;

namespace ops {

LocalOperator identity2();
LocalOperator lowering();   // |g><e|
LocalOperator raising();    // |e><g|
LocalOperator pauli_x();
LocalOperator pauli_y();
LocalOperator pauli_z();

std::size_t hilbert_dim(int n_qubits, int max_qubits = kDefaultMaxQubits);

// identity (x) ... (x) local (x) ... (x) identity, local at 1-based `site`.
Operator embed_site_operator(const LocalOperator& local, int site, int n_qubits,
                             int max_qubits = kDefaultMaxQubits);

// sum_j e^{i phi_j} sigma_j
Operator collective_lowering(std::span<const double> phases, int n_qubits);

Operator adjoint(const Operator& op);

SparseOperator to_sparse(const Operator& op, double drop_below = 0.0);

// Largest entry of |A - A^dagger|.
double hermiticity_error(const Operator& op);

StateVector ground_state(int n_qubits);

// Product state from a string over {'g','e'}, site 1 first, e.g. "eg".
StateVector product_state(std::string_view config);

// Normalizes in place and returns the original norm. Throws on a zero vector.
double normalize(StateVector& psi);

} // namespace ops
} // namespace dimer
