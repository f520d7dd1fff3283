#include "dimer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "dimer/errors.hpp"

namespace dimer {

namespace {

constexpr double kClip = 1e-10;

void require_square(const DensityMatrix& rho, const char* what) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        throw Error(ErrorKind::Shape, std::string(what) + " needs a nonempty square matrix");
    }
}

} // namespace

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep, int n_qubits) {
    if (keep.empty()) {
        throw Error(ErrorKind::Domain, "partial trace needs at least one kept site");
    }
    const std::size_t dim = ops::hilbert_dim(n_qubits);
    if (static_cast<std::size_t>(rho.rows()) != dim || rho.rows() != rho.cols()) {
        throw Error(ErrorKind::Shape, "density matrix does not match 2^n");
    }
    std::vector<int> sites(keep.begin(), keep.end());
    std::sort(sites.begin(), sites.end());
    if (std::adjacent_find(sites.begin(), sites.end()) != sites.end()) {
        throw Error(ErrorKind::Domain, "partial trace sites must be distinct");
    }
    for (int s : sites) {
        if (s < 1 || s > n_qubits) {
            throw Error(ErrorKind::Index, "site " + std::to_string(s) + " outside 1.." + std::to_string(n_qubits));
        }
    }
    const int kept = static_cast<int>(sites.size());
    const std::size_t kdim = std::size_t{1} << kept;
    std::size_t keep_mask = 0;
    for (int s : sites) {
        keep_mask |= std::size_t{1} << (n_qubits - s);
    }

    // Compress the kept bits of a full index into a reduced index, site order preserved.
    auto reduce = [&](std::size_t full) {
        std::size_t r = 0;
        for (int s : sites) {
            r = (r << 1U) | ((full >> (n_qubits - s)) & 1U);
        }
        return r;
    };

    DensityMatrix out = DensityMatrix::Zero(static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(kdim));
    for (std::size_t i = 0; i < dim; ++i) {
        const std::size_t env = i & ~keep_mask;
        const std::size_t ri = reduce(i);
        for (std::size_t j = 0; j < dim; ++j) {
            if ((j & ~keep_mask) != env) {
                continue;
            }
            out(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(reduce(j))) +=
                rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return out;
}

double concurrence(const DensityMatrix& rho2) {
    if (rho2.rows() != 4 || rho2.cols() != 4) {
        throw Error(ErrorKind::Shape, "concurrence needs a 4x4 density matrix");
    }
    const Eigen::Matrix4cd r = 0.5 * (rho2 + rho2.adjoint());
    Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    const Eigen::Matrix4cd tilde = yy * r.conjugate() * yy;
    const Eigen::Matrix4cd prod = r * tilde;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> solver(prod, false);
    std::array<double, 4> lambda{};
    for (int k = 0; k < 4; ++k) {
        const double ev = solver.eigenvalues()(k).real();
        if (ev < -kClip) {
            throw Error(ErrorKind::InvalidState, "Wootters matrix has eigenvalue " + std::to_string(ev) +
                                                     " below the clipping threshold");
        }
        lambda[static_cast<std::size_t>(k)] = std::sqrt(std::max(ev, 0.0));
    }
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    return std::clamp(lambda[0] - lambda[1] - lambda[2] - lambda[3], 0.0, 1.0);
}

double purity(const DensityMatrix& rho) {
    require_square(rho, "purity");
    // tr(rho^2) = sum_ij rho_ij rho_ji = sum |rho_ij|^2 for Hermitian rho
    return (rho.array() * rho.transpose().array()).sum().real();
}

double fidelity_to_pure(const DensityMatrix& rho, const StateVector& target) {
    require_square(rho, "fidelity");
    if (target.size() != rho.rows()) {
        throw Error(ErrorKind::Shape, "target dimension does not match the density matrix");
    }
    return target.dot(rho * target).real();
}

double root_fidelity(const DensityMatrix& rho, const StateVector& target) {
    return std::sqrt(std::max(fidelity_to_pure(rho, target), 0.0));
}

double min_eigenvalue(const DensityMatrix& rho) {
    require_square(rho, "eigenvalue check");
    const DensityMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DensityMatrix> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

double MetricSample::mean_concurrence() const {
    if (concurrence_per_pair.empty()) {
        return 0.0;
    }
    return std::accumulate(concurrence_per_pair.begin(), concurrence_per_pair.end(), 0.0) /
           static_cast<double>(concurrence_per_pair.size());
}

double MetricSample::mean_singlet_fidelity() const {
    if (singlet_fidelity_per_pair.empty()) {
        return 0.0;
    }
    return std::accumulate(singlet_fidelity_per_pair.begin(), singlet_fidelity_per_pair.end(), 0.0) /
           static_cast<double>(singlet_fidelity_per_pair.size());
}

MetricSample sample_metrics(double t, const DensityMatrix& rho, const TargetState& target) {
    MetricSample sample;
    sample.t = t;
    sample.global_purity = purity(rho);
    sample.fidelity_to_target = fidelity_to_pure(rho, target.vector);
    if (target.pairing.kind == PairingSpec::Kind::DisjointPairs) {
        const StateVector s = singlet(1, 2, 2);
        for (auto [i, j] : target.pairing.pairs) {
            const std::array<int, 2> keep{i, j};
            const DensityMatrix pair = partial_trace(rho, keep, target.n_qubits);
            sample.concurrence_per_pair.push_back(concurrence(pair));
            sample.purity_per_pair.push_back(purity(pair));
            sample.singlet_fidelity_per_pair.push_back(fidelity_to_pure(pair, s));
        }
    }
    return sample;
}

} // namespace dimer
