#include "dimer/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

#include "dimer/errors.hpp"

namespace dimer {

namespace {

using SparseColMajor = Eigen::SparseMatrix<cd>;
using Triplet = Eigen::Triplet<cd>;

constexpr double kNullThreshold = 1e-10;
constexpr double kZeroMode = 1e-10;
constexpr double kEigenClip = 1e-12;
constexpr std::size_t kSvdLimit = 1024;

// Appends (a (x) b) * scale to the triplet list.
void kron_into(const SparseColMajor& a, const SparseColMajor& b, cd scale, std::vector<Triplet>& out) {
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SparseColMajor::InnerIterator ia(a, ka); ia; ++ia) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SparseColMajor::InnerIterator ib(b, kb); ib; ++ib) {
                    out.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                                     scale * ia.value() * ib.value());
                }
            }
        }
    }
}

SparseColMajor sparse_of(const Operator& op) {
    SparseColMajor s = op.sparseView();
    s.makeCompressed();
    return s;
}

// Hermitize, clip negative eigenvalues, renormalize.
DensityMatrix project_to_state(const DensityMatrix& raw, double& clipped) {
    DensityMatrix h = 0.5 * (raw + raw.adjoint());
    const cd tr = h.trace();
    if (std::abs(tr) < 1e-300) {
        throw Error(ErrorKind::InvalidState, "nullspace vector has zero trace");
    }
    h /= tr;
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<DensityMatrix> solver(h);
    Eigen::VectorXd w = solver.eigenvalues();
    clipped = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        if (w(k) < 0.0) {
            clipped = std::max(clipped, -w(k));
            if (w(k) < -kEigenClip) {
                w(k) = 0.0;
            }
        }
    }
    DensityMatrix out = solver.eigenvectors() * w.cast<cd>().asDiagonal() * solver.eigenvectors().adjoint();
    out /= out.trace().real();
    return out;
}

Eigen::VectorXcd bordered_solve(const SparseColMajor& l, Eigen::Index replaced_row, Eigen::Index d) {
    // Replace one diagonal-population equation by tr(rho) = 1.
    SparseColMajor rows = SparseColMajor(l.transpose());
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(l.nonZeros() + d));
    for (int k = 0; k < rows.outerSize(); ++k) {
        for (SparseColMajor::InnerIterator it(rows, k); it; ++it) {
            // rows is L^T: entry (col of L, row of L)
            if (it.col() != replaced_row) {
                triplets.emplace_back(it.col(), it.row(), it.value());
            }
        }
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        triplets.emplace_back(replaced_row, i * d + i, 1.0);
    }
    SparseColMajor a(l.rows(), l.cols());
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<SparseColMajor> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) {
        throw DegeneracyError(2, "bordered Liouvillian is singular; the steady state is not unique");
    }
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(l.rows());
    rhs(replaced_row) = 1.0;
    Eigen::VectorXcd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite()) {
        throw DegeneracyError(2, "bordered Liouvillian solve failed; the steady state is not unique");
    }
    return x;
}

} // namespace

Eigen::VectorXcd vectorize(const DensityMatrix& rho) {
    if (rho.rows() != rho.cols()) {
        throw Error(ErrorKind::Shape, "vectorize needs a square matrix");
    }
    const Eigen::Index d = rho.rows();
    Eigen::VectorXcd v(d * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            v(i * d + j) = rho(i, j);
        }
    }
    return v;
}

DensityMatrix devectorize(const Eigen::VectorXcd& v) {
    const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (d * d != v.size()) {
        throw Error(ErrorKind::Shape, "vector length " + std::to_string(v.size()) + " is not a square");
    }
    DensityMatrix rho(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            rho(i, j) = v(i * d + j);
        }
    }
    return rho;
}

LiouvillianMatrix build_liouvillian(const SystemModel& model, double omega_const) {
    if (model.n_qubits() > kMaxDenseLiouvillianQubits) {
        throw Error(ErrorKind::Capacity, "Liouvillian for n = " + std::to_string(model.n_qubits()) +
                                             " exceeds the cap of " +
                                             std::to_string(kMaxDenseLiouvillianQubits) +
                                             " qubits; use steady_state_by_evolution");
    }
    if (model.control_mode() != ControlMode::None && !model.time_independent()) {
        throw Error(ErrorKind::Unsupported, std::string("Liouvillian needs a time-independent generator, but control mode '") +
                                                to_string(model.control_mode()) + "' is active");
    }
    const SystemModel frozen = model.frozen(omega_const);
    const auto d = static_cast<Eigen::Index>(frozen.dim());
    const SparseColMajor id = sparse_of(Operator::Identity(d, d));

    std::vector<Triplet> triplets;
    const Operator h = frozen.hamiltonian(0.0);
    const SparseColMajor hs = sparse_of(h);
    const SparseColMajor ht = sparse_of(h.transpose());
    kron_into(hs, id, cd(0.0, -1.0), triplets);
    kron_into(id, ht, cd(0.0, 1.0), triplets);
    for (const auto& jump : frozen.jumps(0.0)) {
        const Operator ldl = jump.op.adjoint() * jump.op;
        kron_into(sparse_of(jump.op), sparse_of(jump.op.conjugate()), jump.rate, triplets);
        kron_into(sparse_of(ldl), id, -0.5 * jump.rate, triplets);
        kron_into(id, sparse_of(ldl.transpose()), -0.5 * jump.rate, triplets);
    }
    LiouvillianMatrix liou;
    liou.n_qubits = model.n_qubits();
    liou.built_at_omega = omega_const;
    liou.matrix = SparseColMajor(d * d, d * d);
    liou.matrix.setFromTriplets(triplets.begin(), triplets.end());
    liou.matrix.prune(cd(0.0));
    liou.matrix.makeCompressed();
    return liou;
}

SteadyStateResult steady_state(const LiouvillianMatrix& liou, bool require_unique) {
    const Eigen::Index n = liou.matrix.rows();
    const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
    SteadyStateResult result;

    if (static_cast<std::size_t>(n) <= kSvdLimit) {
        const Eigen::MatrixXcd l = liou.dense();
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(l, Eigen::ComputeFullV);
        const auto& sigma = svd.singularValues();
        const double cutoff = kNullThreshold * std::max(sigma(0), 1e-300);
        std::vector<Eigen::Index> null_cols;
        for (Eigen::Index k = 0; k < sigma.size(); ++k) {
            if (sigma(k) < cutoff) {
                null_cols.push_back(k);
            }
        }
        result.null_dim = null_cols.size();
        if (result.null_dim == 0) {
            throw Error(ErrorKind::InvalidState, "Liouvillian has no numerical nullspace");
        }
        if (result.null_dim > 1) {
            for (Eigen::Index k : null_cols) {
                result.basis.push_back(devectorize(svd.matrixV().col(k)));
            }
            if (require_unique) {
                throw DegeneracyError(result.null_dim, "steady state is degenerate (nullspace dimension " +
                                                           std::to_string(result.null_dim) + ")");
            }
        }
        result.rho_ss = project_to_state(devectorize(svd.matrixV().col(null_cols.front())), result.clipped);
    } else {
        const Eigen::VectorXcd x0 = bordered_solve(liou.matrix, 0, d);
        const Eigen::VectorXcd x1 = bordered_solve(liou.matrix, (d - 1) * d + (d - 1), d);
        const double disagreement = (x0 - x1).norm() / std::max(x0.norm(), 1e-300);
        if (disagreement > 1e-6) {
            result.null_dim = 2;
            if (require_unique) {
                throw DegeneracyError(2, "bordered solves disagree by " + std::to_string(disagreement) +
                                             "; the steady state is not unique");
            }
        } else {
            result.null_dim = 1;
        }
        result.rho_ss = project_to_state(devectorize(x0), result.clipped);
    }
    result.residual = (liou.matrix * vectorize(result.rho_ss)).norm();
    return result;
}

EvolutionSteadyState steady_state_by_evolution(const SystemModel& model, const DensityMatrix& rho0, double max_time,
                                               double check_every, double tolerance, const EvolveOptions& options) {
    EvolutionSteadyState out;
    EvolveOptions opts = options;
    opts.storage = StoragePolicy::MetricsOnly;
    double last_residual = std::numeric_limits<double>::infinity();
    opts.observer = [&](double t, const DensityMatrix& rho) {
        last_residual = lindblad_rhs(model, rho, t).norm();
        out.time_reached = t;
        if (options.observer && !options.observer(t, rho)) {
            return false;
        }
        return !(t > 0.0 && last_residual < tolerance);
    };
    const Trajectory traj = evolve(model, rho0, max_time, check_every, 1, opts);
    out.converged = last_residual < tolerance;
    out.result.rho_ss = traj.final_state;
    out.result.residual = last_residual;
    out.result.null_dim = 1;
    return out;
}

GapResult liouvillian_gap(const LiouvillianMatrix& liou) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(liou.dense(), false);
    GapResult out;
    out.eigenvalues = solver.eigenvalues();
    out.max_real_part = -std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < out.eigenvalues.size(); ++k) {
        const double re = out.eigenvalues(k).real();
        out.max_real_part = std::max(out.max_real_part, re);
        if (std::abs(re) < kZeroMode) {
            ++out.zero_modes;
        } else {
            gap = std::min(gap, std::abs(re));
        }
    }
    out.gap = gap;
    return out;
}

DensityMatrix liouville_propagate(const LiouvillianMatrix& liou, const DensityMatrix& rho, double t) {
    const Eigen::MatrixXcd prop = (liou.dense() * t).exp();
    return devectorize(prop * vectorize(rho));
}

double fidelity_to_time(double fidelity) {
    if (!(fidelity > 0.0 && fidelity < 1.0)) {
        throw Error(ErrorKind::Domain, "fidelity must lie in (0, 1), got " + std::to_string(fidelity));
    }
    return 1.5 * (1.0 / (1.0 - fidelity) - 1.0);
}

double time_to_fidelity(double delta_gamma_tau) {
    if (!(delta_gamma_tau >= 0.0)) {
        throw Error(ErrorKind::Domain, "time must be non-negative");
    }
    if (std::isinf(delta_gamma_tau)) {
        return 1.0;
    }
    return 2.0 * delta_gamma_tau / (2.0 * delta_gamma_tau + 3.0);
}

StateVector analytic_n2_steady_state(double delta_gamma, double omega) {
    if (!(omega > 0.0)) {
        // Omega -> 0 limit of the closed form
        return ops::ground_state(2);
    }
    const double r = delta_gamma / omega;
    StateVector s(4);
    s << cd(0.0, r), -1.0, 1.0, 0.0;
    s /= std::sqrt(2.0 + r * r);
    return s;
}

QslResult qsl_activity(const StateVector& target, const BathConfig& bath) {
    const auto dim = static_cast<std::size_t>(target.size());
    int n = 0;
    while ((std::size_t{1} << n) < dim) {
        ++n;
    }
    if ((std::size_t{1} << n) != dim || n == 0) {
        throw Error(ErrorKind::Shape, "target length is not a power of two");
    }
    if (std::abs(target.norm() - 1.0) > 1e-10) {
        throw Error(ErrorKind::Normalization, "QSL target must be normalized");
    }
    const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
    const Operator c = ops::collective_lowering(zero, n);
    const StateVector raised = c.adjoint() * target;
    // c^dag |Phi><Phi| c is rank one, so its Frobenius norm is ||c^dag Phi||^2
    QslResult out;
    out.activity = std::abs(bath.total()) * raised.squaredNorm();
    out.dark = out.activity == 0.0;
    if (!out.dark) {
        out.bound = 1.0 / out.activity;
    }
    return out;
}

} // namespace dimer
