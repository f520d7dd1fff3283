#include "dimer/operators.hpp"

#include <cmath>
#include <string>

#include "dimer/errors.hpp"

namespace dimer::ops {

LocalOperator identity2() { return LocalOperator::Identity(); }

LocalOperator lowering() {
    LocalOperator m = LocalOperator::Zero();
    m(0, 1) = 1.0;
    return m;
}

LocalOperator raising() { return lowering().adjoint(); }

LocalOperator pauli_x() {
    LocalOperator m;
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

// With |e> as spin-up in (g, e) order: sigma^y |g> = -i|e>, sigma^y |e> = i|g>.
LocalOperator pauli_y() {
    LocalOperator m;
    m << 0.0, cd(0.0, 1.0), cd(0.0, -1.0), 0.0;
    return m;
}

LocalOperator pauli_z() {
    LocalOperator m = LocalOperator::Zero();
    m(0, 0) = -1.0;
    m(1, 1) = 1.0;
    return m;
}

std::size_t hilbert_dim(int n_qubits, int max_qubits) {
    if (n_qubits < 1) {
        throw Error(ErrorKind::Domain, "n_qubits must be >= 1, got " + std::to_string(n_qubits));
    }
    if (n_qubits > max_qubits) {
        throw Error(ErrorKind::Capacity, "n_qubits = " + std::to_string(n_qubits) +
                                             " exceeds the maximum of " + std::to_string(max_qubits));
    }
    return std::size_t{1} << n_qubits;
}

Operator embed_site_operator(const LocalOperator& local, int site, int n_qubits, int max_qubits) {
    const std::size_t dim = hilbert_dim(n_qubits, max_qubits);
    if (site < 1 || site > n_qubits) {
        throw Error(ErrorKind::Index, "site " + std::to_string(site) + " outside 1.." +
                                          std::to_string(n_qubits));
    }
    const std::size_t shift = static_cast<std::size_t>(n_qubits - site);
    const std::size_t mask = std::size_t{1} << shift;
    Operator out = Operator::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t col = 0; col < dim; ++col) {
        const std::size_t cbit = (col >> shift) & 1U;
        const std::size_t rest = col & ~mask;
        for (std::size_t rbit = 0; rbit < 2; ++rbit) {
            const cd v = local(static_cast<Eigen::Index>(rbit), static_cast<Eigen::Index>(cbit));
            if (v != cd(0.0)) {
                out(static_cast<Eigen::Index>(rest | (rbit << shift)), static_cast<Eigen::Index>(col)) = v;
            }
        }
    }
    return out;
}

Operator collective_lowering(std::span<const double> phases, int n_qubits) {
    if (phases.size() != static_cast<std::size_t>(n_qubits)) {
        throw Error(ErrorKind::Shape, "expected " + std::to_string(n_qubits) + " phases, got " +
                                          std::to_string(phases.size()));
    }
    const auto dim = static_cast<Eigen::Index>(hilbert_dim(n_qubits));
    Operator c = Operator::Zero(dim, dim);
    for (int j = 1; j <= n_qubits; ++j) {
        c += std::polar(1.0, phases[static_cast<std::size_t>(j - 1)]) *
             embed_site_operator(lowering(), j, n_qubits);
    }
    return c;
}

Operator adjoint(const Operator& op) { return op.adjoint(); }

SparseOperator to_sparse(const Operator& op, double drop_below) {
    return op.sparseView(1.0, drop_below);
}

double hermiticity_error(const Operator& op) {
    if (op.rows() != op.cols()) {
        throw Error(ErrorKind::Shape, "hermiticity check needs a square matrix");
    }
    return (op - op.adjoint()).cwiseAbs().maxCoeff();
}

StateVector ground_state(int n_qubits) {
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(hilbert_dim(n_qubits)));
    psi(0) = 1.0;
    return psi;
}

StateVector product_state(std::string_view config) {
    const int n = static_cast<int>(config.size());
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(hilbert_dim(n)));
    std::size_t index = 0;
    for (char ch : config) {
        index <<= 1U;
        if (ch == 'e') {
            index |= 1U;
        } else if (ch != 'g') {
            throw Error(ErrorKind::Domain, std::string("product state expects 'g' or 'e', got '") + ch + "'");
        }
    }
    psi(static_cast<Eigen::Index>(index)) = 1.0;
    return psi;
}

double normalize(StateVector& psi) {
    const double norm = psi.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorKind::Normalization, "cannot normalize a zero or non-finite vector");
    }
    psi /= norm;
    return norm;
}

} // namespace dimer::ops
