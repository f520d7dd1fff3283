#include "dimer/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "dimer/errors.hpp"

namespace dimer {

namespace {

constexpr double kTraceLimit = 1e-6;
constexpr double kPositivityLimit = -1e-5;
constexpr double kInvarianceTolerance = 1e-12;

// Row-major storage keeps sparse-times-dense products streaming over contiguous rows.
using WorkMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Generator restricted to an invariant subspace.
struct ReducedGenerator {
    WorkMatrix effective;
    std::vector<std::pair<double, WorkMatrix>> jumps;
};

struct Workspace {
    WorkMatrix a;
    WorkMatrix b;
};

// K rho + (K rho)^dag + sum_k r_k L_k (L_k rho)^dag, valid for Hermitian rho
void apply_generator(const SystemModel::SparseGenerator& gen, const WorkMatrix& rho, WorkMatrix& out,
                     Workspace& ws) {
    ws.a.noalias() = gen.effective * rho;
    out = ws.a + ws.a.adjoint();
    for (const auto& jump : gen.jumps) {
        ws.a.noalias() = jump.op * rho;
        ws.b = ws.a.adjoint();
        out.noalias() += jump.rate * (jump.op * ws.b);
    }
}

void apply_generator(const ReducedGenerator& gen, const WorkMatrix& rho, WorkMatrix& out, Workspace& ws) {
    ws.a.noalias() = gen.effective * rho;
    out = ws.a + ws.a.adjoint();
    for (const auto& [rate, op] : gen.jumps) {
        ws.a.noalias() = op * rho;
        out.noalias() += rate * (op * ws.a.adjoint());
    }
}

template <class Generator>
class Rk4Stepper {
public:
    explicit Rk4Stepper(Eigen::Index dim)
        : k1_(dim, dim), k2_(dim, dim), k3_(dim, dim), k4_(dim, dim), stage_(dim, dim) {}

    void step(const Generator& g0, const Generator& gm, const Generator& g1, double h, WorkMatrix& rho) {
        apply_generator(g0, rho, k1_, ws_);
        stage_ = rho + (0.5 * h) * k1_;
        apply_generator(gm, stage_, k2_, ws_);
        stage_ = rho + (0.5 * h) * k2_;
        apply_generator(gm, stage_, k3_, ws_);
        stage_ = rho + h * k3_;
        apply_generator(g1, stage_, k4_, ws_);
        rho += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    WorkMatrix k1_, k2_, k3_, k4_, stage_;
    Workspace ws_;
};

// Plain RK4 on the full space with sparse generators.
class FullScheme {
public:
    explicit FullScheme(const SystemModel& model) : model_(model), stepper_(static_cast<Eigen::Index>(model.dim())) {}

    WorkMatrix enter(const DensityMatrix& rho) const { return WorkMatrix(rho); }
    DensityMatrix lift(const WorkMatrix& rho) const { return DensityMatrix(rho); }
    double bound(double t) const { return model_.generator_norm_bound(t); }

    void freeze(double t, double /*h*/) { frozen_ = model_.sparse_generator(t); }
    void step_frozen(double h, WorkMatrix& rho) { stepper_.step(*frozen_, *frozen_, *frozen_, h, rho); }

    void step(double t, double h, WorkMatrix& rho) {
        const auto g0 = model_.sparse_generator(t);
        const auto gm = model_.sparse_generator(t + 0.5 * h);
        const auto g1 = model_.sparse_generator(t + h);
        stepper_.step(g0, gm, g1, h, rho);
    }

private:
    const SystemModel& model_;
    Rk4Stepper<SystemModel::SparseGenerator> stepper_;
    std::optional<SystemModel::SparseGenerator> frozen_;
};

// Integrating-factor (Lawson) RK4 inside an invariant subspace. The drive Hamiltonian and
// its noise dissipator are functions of one operator D, so in the eigenbasis of D they act
// elementwise and are integrated exactly; RK4 only sees the remainder.
class ReducedScheme {
public:
    ReducedScheme(const SystemModel& model, const Operator& isometry)
        : model_(model), compression_(model.compress(isometry)) {
        const Operator unit = 0.5 * (compression_.drive_unit + compression_.drive_unit.adjoint());
        Eigen::SelfAdjointEigenSolver<Operator> solver(unit);
        basis_ = solver.eigenvectors();
        lift_ = isometry * basis_;
        lift_adj_ = lift_.adjoint();
        const Eigen::VectorXd d = solver.eigenvalues();
        const Eigen::Index n = d.size();
        gap_.resize(n, n);
        for (Eigen::Index a = 0; a < n; ++a) {
            for (Eigen::Index b = 0; b < n; ++b) {
                gap_(a, b) = d(a) - d(b);
            }
        }
        const double eta1 = model.noise().eta1;
        dephasing_ = 0.5 * eta1 * eta1;
        k1_.resize(n, n);
        k2_.resize(n, n);
        k3_.resize(n, n);
        k4_.resize(n, n);
        stage_.resize(n, n);
    }

    WorkMatrix enter(const DensityMatrix& rho) const { return WorkMatrix(lift_adj_ * rho * lift_); }
    DensityMatrix lift(const WorkMatrix& rho) const { return DensityMatrix(lift_ * rho * lift_adj_); }
    double bound(double t) const { return model_.generator_norm_bound_without_drive(t); }

    void freeze(double t, double h) {
        frozen_ = generator(t);
        frozen_half_ = factor(t, t + 0.5 * h);
        frozen_full_ = frozen_half_.cwiseProduct(frozen_half_);
    }

    void step_frozen(double h, WorkMatrix& rho) {
        lawson(*frozen_, *frozen_, *frozen_, frozen_half_, frozen_half_, frozen_full_, h, rho);
    }

    void step(double t, double h, WorkMatrix& rho) {
        const auto g0 = generator(t);
        const auto gm = generator(t + 0.5 * h);
        const auto g1 = generator(t + h);
        const WorkMatrix e1 = factor(t, t + 0.5 * h);
        const WorkMatrix e2 = factor(t + 0.5 * h, t + h);
        const WorkMatrix ef = e1.cwiseProduct(e2);
        lawson(g0, gm, g1, e1, e2, ef, h, rho);
    }

private:
    ReducedGenerator generator(double t) const {
        auto dense = model_.compressed_generator(compression_, t, true);
        ReducedGenerator g;
        g.effective = basis_.adjoint() * dense.effective * basis_;
        for (auto& jump : dense.jumps) {
            g.jumps.emplace_back(jump.rate, WorkMatrix(basis_.adjoint() * jump.op * basis_));
        }
        return g;
    }

    // exp of the drive part integrated from a to b (Simpson is exact for the piecewise-linear drive).
    WorkMatrix factor(double a, double b) const {
        const auto& protocol = model_.protocol();
        const double wa = drive_value(protocol, a);
        const double wm = drive_value(protocol, 0.5 * (a + b));
        const double wb = drive_value(protocol, b);
        const double i1 = (b - a) / 6.0 * (wa + 4.0 * wm + wb);
        const double i2 = (b - a) / 6.0 * (wa * wa + 4.0 * wm * wm + wb * wb);
        WorkMatrix e(gap_.rows(), gap_.cols());
        for (Eigen::Index r = 0; r < gap_.rows(); ++r) {
            for (Eigen::Index c = 0; c < gap_.cols(); ++c) {
                const double g = gap_(r, c);
                e(r, c) = std::exp(cd(-dephasing_ * i2 * g * g, -i1 * g));
            }
        }
        return e;
    }

    void lawson(const ReducedGenerator& g0, const ReducedGenerator& gm, const ReducedGenerator& g1,
                const WorkMatrix& e1, const WorkMatrix& e2, const WorkMatrix& ef, double h, WorkMatrix& rho) {
        apply_generator(g0, rho, k1_, ws_);
        stage_ = e1.cwiseProduct(rho + (0.5 * h) * k1_);
        apply_generator(gm, stage_, k2_, ws_);
        stage_ = e1.cwiseProduct(rho) + (0.5 * h) * k2_;
        apply_generator(gm, stage_, k3_, ws_);
        stage_ = ef.cwiseProduct(rho) + h * e2.cwiseProduct(k3_);
        apply_generator(g1, stage_, k4_, ws_);
        rho = ef.cwiseProduct(rho) +
              (h / 6.0) * (ef.cwiseProduct(k1_) + 2.0 * e2.cwiseProduct(k2_ + k3_) + k4_);
    }

    const SystemModel& model_;
    SystemModel::Compression compression_;
    Operator basis_;
    Operator lift_;
    Operator lift_adj_;
    Eigen::MatrixXd gap_;
    double dephasing_ = 0.0;
    std::optional<ReducedGenerator> frozen_;
    WorkMatrix frozen_half_, frozen_full_;
    WorkMatrix k1_, k2_, k3_, k4_, stage_;
    Workspace ws_;
};

std::string step_advice(double t, double dt) {
    std::ostringstream os;
    os << "at t = " << t << "; retry with a smaller step than dt = " << dt << " or a smaller max_step_norm";
    return os.str();
}

template <class Scheme>
Trajectory integrate(const SystemModel& model, Scheme& scheme, const DensityMatrix& rho0, double t_end, double dt,
                     std::size_t sample_every, const EvolveOptions& options) {
    const bool keep_states = options.storage == StoragePolicy::States ||
                             (options.storage == StoragePolicy::Auto && model.n_qubits() <= 4);
    Trajectory traj;
    WorkMatrix rho = scheme.enter(rho0);
    const auto breaks = model.breakpoints();
    const double cap = options.max_step_norm;
    WorkMatrix skew;

    // The generator kernels assume a Hermitian argument; on the anti-Hermitian part they act
    // with flipped dissipator signs and amplify rounding, so every substep is projected back.
    auto hermitize = [&] {
        skew = rho.adjoint();
        traj.max_hermiticity_error = std::max(traj.max_hermiticity_error, (rho - skew).cwiseAbs().maxCoeff());
        rho += skew;
        rho *= 0.5;
    };

    auto record = [&](double t) {
        hermitize();
        const cd trace = rho.trace();
        const double drift = std::abs(trace - 1.0);
        traj.max_trace_drift = std::max(traj.max_trace_drift, drift);
        if (drift > kTraceLimit || !std::isfinite(drift)) {
            throw Error(ErrorKind::Stability, "trace drifted by " + std::to_string(drift) + " " + step_advice(t, dt));
        }
        rho /= trace.real();
        const DensityMatrix state = scheme.lift(rho);
        if (options.check_positivity) {
            const double lo = min_eigenvalue(state);
            traj.min_eigenvalue = std::min(traj.min_eigenvalue, lo);
            if (lo < kPositivityLimit) {
                throw Error(ErrorKind::Stability, "eigenvalue " + std::to_string(lo) + " " + step_advice(t, dt));
            }
        }
        traj.times.push_back(t);
        traj.samples.push_back(sample_metrics(t, state, model.target()));
        if (keep_states) {
            traj.states.push_back(state);
        }
        return !options.observer || options.observer(t, state);
    };

    auto segment = [&](double a, double b) {
        const double len = b - a;
        if (len <= 0.0) {
            return;
        }
        if (model.time_independent() || a >= model.protocol().control_end()) {
            const double bound = std::max(scheme.bound(a), scheme.bound(b));
            const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(len * bound / cap)));
            const double h = len / static_cast<double>(n);
            scheme.freeze(0.5 * (a + b), h);
            for (std::size_t s = 0; s < n; ++s) {
                scheme.step_frozen(h, rho);
                hermitize();
            }
            traj.substeps += n;
            return;
        }
        // Step lengths follow the local bound, so short control bursts do not set the pace
        // for the whole macro step.
        double t = a;
        while (t < b) {
            const double remaining = b - t;
            double h = std::min(remaining, cap / std::max(scheme.bound(t), 1e-300));
            h = std::min(h, cap / std::max({scheme.bound(t), scheme.bound(t + 0.5 * h), scheme.bound(t + h), 1e-300}));
            if (h >= remaining * (1.0 - 1e-12)) {
                h = remaining;
            } else if (h > 0.5 * remaining) {
                h = 0.5 * remaining;
            }
            scheme.step(t, h, rho);
            hermitize();
            ++traj.substeps;
            t = h == remaining ? b : t + h;
        }
    };

    bool running = record(0.0);
    const auto macro_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    for (std::size_t step = 1; running && step <= macro_steps; ++step) {
        const double a = dt * static_cast<double>(step - 1);
        const double b = step == macro_steps ? t_end : dt * static_cast<double>(step);
        double cursor = a;
        for (double kink : breaks) {
            if (kink > a && kink < b) {
                segment(cursor, kink);
                cursor = kink;
            }
        }
        segment(cursor, b);
        if (step % sample_every == 0 || step == macro_steps) {
            running = record(b);
        }
    }
    traj.stopped_early = !running;
    traj.final_state = scheme.lift(rho);
    return traj;
}

} // namespace

DensityMatrix pure_state(const StateVector& psi) { return psi * psi.adjoint(); }

DensityMatrix lindblad_rhs(const SystemModel& model, const DensityMatrix& rho, double t) {
    const auto d = static_cast<Eigen::Index>(model.dim());
    if (rho.rows() != d || rho.cols() != d) {
        throw Error(ErrorKind::Shape, "density matrix is " + std::to_string(rho.rows()) + "x" +
                                          std::to_string(rho.cols()) + ", model needs " + std::to_string(d));
    }
    const WorkMatrix work = rho;
    WorkMatrix out(d, d);
    Workspace ws;
    apply_generator(model.sparse_generator(t), work, out, ws);
    return out;
}

Operator pair_exchange_isometry(const std::vector<std::pair<int, int>>& pairs, int n_qubits) {
    const std::size_t dim = ops::hilbert_dim(n_qubits);
    if (pairs.size() * 2 != static_cast<std::size_t>(n_qubits)) {
        throw Error(ErrorKind::Shape, "pair-exchange basis needs pairs covering every qubit");
    }
    PairingSpec::disjoint(pairs).validate(n_qubits);
    const std::size_t count = pairs.size();
    std::vector<std::vector<std::size_t>> columns;

    // Multisets of per-pair local states 0..3, enumerated as non-decreasing sequences.
    std::vector<int> multiset(count, 0);
    while (true) {
        std::vector<int> perm = multiset;
        std::vector<std::size_t> members;
        do {
            std::size_t index = 0;
            for (std::size_t p = 0; p < count; ++p) {
                const auto [i, j] = pairs[p];
                if (perm[p] & 2) {
                    index |= std::size_t{1} << (n_qubits - i);
                }
                if (perm[p] & 1) {
                    index |= std::size_t{1} << (n_qubits - j);
                }
            }
            members.push_back(index);
        } while (std::next_permutation(perm.begin(), perm.end()));
        columns.push_back(std::move(members));

        std::size_t pos = count;
        while (pos > 0 && multiset[pos - 1] == 3) {
            --pos;
        }
        if (pos == 0) {
            break;
        }
        const int next = multiset[pos - 1] + 1;
        std::fill(multiset.begin() + static_cast<std::ptrdiff_t>(pos - 1), multiset.end(), next);
    }

    Operator iso = Operator::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const double amp = 1.0 / std::sqrt(static_cast<double>(columns[c].size()));
        for (std::size_t index : columns[c]) {
            iso(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(c)) = amp;
        }
    }
    return iso;
}

Trajectory evolve(const SystemModel& model, const DensityMatrix& rho0, double t_end, double dt,
                  std::size_t sample_every, const EvolveOptions& options) {
    const auto d = static_cast<Eigen::Index>(model.dim());
    if (rho0.rows() != d || rho0.cols() != d) {
        throw Error(ErrorKind::Shape, "initial state does not match the model dimension");
    }
    if (!(dt > 0.0) || !(t_end > 0.0) || !std::isfinite(dt) || !std::isfinite(t_end)) {
        throw Error(ErrorKind::Domain, "evolve needs dt > 0 and t_end > 0");
    }
    if (!(options.max_step_norm > 0.0)) {
        throw Error(ErrorKind::Domain, "max_step_norm must be positive");
    }
    if (sample_every == 0) {
        throw Error(ErrorKind::Domain, "sample_every must be at least 1");
    }

    std::optional<Operator> iso;
    const auto& target = model.target();
    if (options.reduce_symmetry && model.n_qubits() >= 6 && target.pairing.kind == PairingSpec::Kind::DisjointPairs &&
        target.pairing.pairs.size() * 2 == static_cast<std::size_t>(model.n_qubits())) {
        Operator p = pair_exchange_isometry(target.pairing.pairs, model.n_qubits());
        const double outside = (rho0 - p * (p.adjoint() * rho0 * p) * p.adjoint()).cwiseAbs().maxCoeff();
        if (outside < kInvarianceTolerance && model.invariance_defect(p) < kInvarianceTolerance) {
            iso = std::move(p);
        }
    }

    if (!iso) {
        FullScheme scheme(model);
        return integrate(model, scheme, rho0, t_end, dt, sample_every, options);
    }
    ReducedScheme scheme(model, *iso);
    return integrate(model, scheme, rho0, t_end, dt, sample_every, options);
}

} // namespace dimer
