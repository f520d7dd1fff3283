#include "dimer/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "dimer/errors.hpp"

namespace dimer {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNormTolerance = 1e-10;

double induced_inf_norm(const Operator& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

double induced_one_norm(const Operator& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff();
}

void require_finite_nonnegative(double value, const char* name) {
    if (!std::isfinite(value) || value < 0.0) {
        throw Error(ErrorKind::Domain, std::string(name) + " must be finite and >= 0, got " + std::to_string(value));
    }
}

Operator zeros(std::size_t dim) {
    return Operator::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration types

BathConfig BathConfig::from_chirality(double total, double delta_gamma, double gamma_f) {
    BathConfig bath;
    bath.gamma_R = 0.5 * (total + delta_gamma);
    bath.gamma_L = 0.5 * (total - delta_gamma);
    bath.gamma_f = gamma_f;
    return bath;
}

std::vector<double> BathConfig::phases_for(int n_qubits) const {
    if (phases.empty()) {
        return std::vector<double>(static_cast<std::size_t>(n_qubits), 0.0);
    }
    if (phases.size() != static_cast<std::size_t>(n_qubits)) {
        throw Error(ErrorKind::Shape, "bath has " + std::to_string(phases.size()) + " phases for " +
                                          std::to_string(n_qubits) + " qubits");
    }
    return phases;
}

bool BathConfig::phases_trivial(int n_qubits) const {
    const auto phi = phases_for(n_qubits);
    return std::all_of(phi.begin(), phi.end(), [&](double p) {
        return std::abs(std::remainder(p - phi.front(), 2.0 * kPi)) < 1e-12;
    });
}

void BathConfig::validate(int n_qubits) const {
    require_finite_nonnegative(gamma_L, "gamma_L");
    require_finite_nonnegative(gamma_R, "gamma_R");
    require_finite_nonnegative(gamma_f, "gamma_f");
    if (!(total() > 0.0)) {
        throw Error(ErrorKind::Domain, "gamma_L + gamma_R must be positive");
    }
    for (double p : phases_for(n_qubits)) {
        if (!std::isfinite(p)) {
            throw Error(ErrorKind::Domain, "bath phases must be finite");
        }
    }
}

DetuningPattern DetuningPattern::zeros(int n_qubits) {
    return DetuningPattern{std::vector<double>(static_cast<std::size_t>(n_qubits), 0.0)};
}

DetuningPattern DetuningPattern::alternating(std::span<const double> pair_values) {
    DetuningPattern pattern;
    for (double d : pair_values) {
        pattern.deltas.push_back(d);
        pattern.deltas.push_back(-d);
    }
    return pattern;
}

DriveProtocol DriveProtocol::ramp(double slope, double saturation_time, double theta_k) {
    DriveProtocol p;
    p.mode = Mode::Ramp;
    p.slope = slope;
    p.saturation_time = saturation_time;
    p.theta_k = theta_k;
    return p;
}

DriveProtocol DriveProtocol::constant(double omega, double theta_k) {
    DriveProtocol p;
    p.mode = Mode::Constant;
    p.constant_omega = omega;
    p.theta_k = theta_k;
    return p;
}

void DriveProtocol::validate() const {
    if (!(theta_k > 0.0) || !std::isfinite(theta_k)) {
        throw Error(ErrorKind::Domain, "theta_k must be positive");
    }
    if (mode == Mode::Ramp) {
        require_finite_nonnegative(slope, "ramp slope");
        if (!(saturation_time > 0.0) || !std::isfinite(saturation_time)) {
            throw Error(ErrorKind::Domain, "saturation time must be positive");
        }
    } else {
        require_finite_nonnegative(constant_omega, "constant omega");
    }
}

double drive_value(const DriveProtocol& protocol, double t) {
    if (!(t >= 0.0)) {
        throw Error(ErrorKind::Domain, "drive evaluated at negative time " + std::to_string(t));
    }
    if (protocol.mode == DriveProtocol::Mode::Constant) {
        return protocol.constant_omega;
    }
    const double tf = protocol.saturation_time;
    auto heaviside = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5); };
    return protocol.slope * t * heaviside(tf - t) + protocol.slope * tf * heaviside(t - tf);
}

double drive_rate(const DriveProtocol& protocol, double t) {
    if (!(t >= 0.0)) {
        throw Error(ErrorKind::Domain, "drive rate evaluated at negative time");
    }
    if (protocol.mode == DriveProtocol::Mode::Constant) {
        return 0.0;
    }
    return t <= protocol.saturation_time ? protocol.slope : 0.0;
}

double theta_of_omega(double k, double omega_over_gamma) {
    return 0.5 * kPi * (1.0 - std::exp(-k * omega_over_gamma));
}

double theta_rate(const DriveProtocol& protocol, double gamma_total, double t) {
    if (protocol.mode == DriveProtocol::Mode::Constant || t > protocol.control_end()) {
        return 0.0;
    }
    const double k = protocol.theta_k / gamma_total;
    const double dtheta_domega = 0.5 * kPi * k * std::exp(-k * drive_value(protocol, t));
    return dtheta_domega * drive_rate(protocol, t);
}

PairingSpec PairingSpec::disjoint(std::vector<std::pair<int, int>> pairs) {
    PairingSpec spec;
    spec.kind = Kind::DisjointPairs;
    spec.pairs = std::move(pairs);
    return spec;
}

PairingSpec PairingSpec::all_pairings() {
    PairingSpec spec;
    spec.kind = Kind::AllPairings;
    return spec;
}

PairingSpec PairingSpec::adjacent_dimers(int n_qubits) {
    std::vector<std::pair<int, int>> pairs;
    for (int k = 1; k + 1 <= n_qubits; k += 2) {
        pairs.emplace_back(k, k + 1);
    }
    return disjoint(std::move(pairs));
}

void PairingSpec::validate(int n_qubits) const {
    if (kind == Kind::AllPairings) {
        if (n_qubits % 2 != 0) {
            throw Error(ErrorKind::Parity, "all-pairings target needs an even number of qubits, got " +
                                               std::to_string(n_qubits));
        }
        return;
    }
    if (pairs.empty()) {
        throw Error(ErrorKind::Domain, "pairing list is empty");
    }
    std::set<int> used;
    for (auto [i, j] : pairs) {
        if (i >= j) {
            throw Error(ErrorKind::Ordering, "pair (" + std::to_string(i) + "," + std::to_string(j) +
                                                 ") must satisfy i < j");
        }
        if (i < 1 || j > n_qubits) {
            throw Error(ErrorKind::Index, "pair (" + std::to_string(i) + "," + std::to_string(j) +
                                              ") outside 1.." + std::to_string(n_qubits));
        }
        if (!used.insert(i).second || !used.insert(j).second) {
            throw Error(ErrorKind::Disjointness, "pairs overlap at (" + std::to_string(i) + "," +
                                                     std::to_string(j) + ")");
        }
    }
}

namespace {

void extend_matchings(std::vector<bool>& used, Matching& current, std::vector<Matching>& out) {
    const auto first = std::find(used.begin(), used.end(), false);
    if (first == used.end()) {
        out.push_back(current);
        return;
    }
    const auto i = static_cast<int>(first - used.begin());
    used[static_cast<std::size_t>(i)] = true;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < used.size(); ++j) {
        if (used[j]) {
            continue;
        }
        used[j] = true;
        current.emplace_back(i + 1, static_cast<int>(j) + 1);
        extend_matchings(used, current, out);
        current.pop_back();
        used[j] = false;
    }
    used[static_cast<std::size_t>(i)] = false;
}

// Product of singlets over disjoint pairs, ground state elsewhere.
StateVector singlet_product(const Matching& pairs, int n_qubits) {
    const std::size_t dim = ops::hilbert_dim(n_qubits);
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(dim));
    std::size_t paired_mask = 0;
    for (auto [i, j] : pairs) {
        paired_mask |= std::size_t{1} << (n_qubits - i);
        paired_mask |= std::size_t{1} << (n_qubits - j);
    }
    const double amp = std::pow(0.5, 0.5 * static_cast<double>(pairs.size()));
    for (std::size_t b = 0; b < dim; ++b) {
        if ((b & ~paired_mask) != 0) {
            continue;
        }
        double sign = 1.0;
        bool allowed = true;
        for (auto [i, j] : pairs) {
            const auto bi = (b >> (n_qubits - i)) & 1U;
            const auto bj = (b >> (n_qubits - j)) & 1U;
            if (bi == bj) {
                allowed = false;
                break;
            }
            if (bj == 1U) {
                sign = -sign;  // |g>_i |e>_j carries the minus sign
            }
        }
        if (allowed) {
            psi(static_cast<Eigen::Index>(b)) = sign * amp;
        }
    }
    return psi;
}

} // namespace

std::vector<Matching> perfect_matchings(int n_qubits) {
    if (n_qubits < 2 || n_qubits % 2 != 0) {
        throw Error(ErrorKind::Parity, "perfect matchings need an even number of qubits, got " +
                                           std::to_string(n_qubits));
    }
    std::vector<bool> used(static_cast<std::size_t>(n_qubits), false);
    Matching current;
    std::vector<Matching> out;
    extend_matchings(used, current, out);
    return out;
}

StateVector singlet(int i, int j, int n_qubits) {
    if (i >= j) {
        throw Error(ErrorKind::Ordering, "singlet(" + std::to_string(i) + "," + std::to_string(j) +
                                             ") requires i < j");
    }
    if (i < 1 || j > n_qubits) {
        throw Error(ErrorKind::Index, "singlet sites outside 1.." + std::to_string(n_qubits));
    }
    return singlet_product({{i, j}}, n_qubits);
}

TargetState target_state(const PairingSpec& spec, int n_qubits) {
    ops::hilbert_dim(n_qubits);
    spec.validate(n_qubits);
    TargetState target;
    target.pairing = spec;
    target.n_qubits = n_qubits;
    if (spec.kind == PairingSpec::Kind::DisjointPairs) {
        target.vector = singlet_product(spec.pairs, n_qubits);
        target.term_count = 1;
    } else {
        const auto matchings = perfect_matchings(n_qubits);
        target.vector = StateVector::Zero(static_cast<Eigen::Index>(ops::hilbert_dim(n_qubits)));
        for (const auto& m : matchings) {
            target.vector += singlet_product(m, n_qubits);
        }
        target.term_count = matchings.size();
    }
    ops::normalize(target.vector);
    return target;
}

const char* to_string(ControlMode mode) {
    switch (mode) {
    case ControlMode::ExactGenerator: return "exact";
    case ControlMode::ApproximateGenerator: return "approximate";
    case ControlMode::LocalPauli: return "local-pauli";
    case ControlMode::Counterdiabatic: return "counterdiabatic";
    case ControlMode::None: return "none";
    }
    return "none";
}

ControlMode control_mode_from_string(const std::string& name) {
    for (auto mode : {ControlMode::ExactGenerator, ControlMode::ApproximateGenerator, ControlMode::LocalPauli,
                      ControlMode::Counterdiabatic, ControlMode::None}) {
        if (name == to_string(mode)) {
            return mode;
        }
    }
    throw Error(ErrorKind::Domain, "unknown control mode '" + name + "'");
}

void NoiseConfig::validate() const {
    require_finite_nonnegative(eta1, "eta1");
    require_finite_nonnegative(eta2, "eta2");
}

// ---------------------------------------------------------------------------
// Operator builders

Operator build_coherent_interaction(const BathConfig& bath, int n_qubits) {
    const std::size_t dim = ops::hilbert_dim(n_qubits);
    const auto phi = bath.phases_for(n_qubits);
    std::vector<Operator> lower;
    lower.reserve(static_cast<std::size_t>(n_qubits));
    for (int j = 1; j <= n_qubits; ++j) {
        lower.push_back(ops::embed_site_operator(ops::lowering(), j, n_qubits));
    }
    Operator upper_half = zeros(dim);
    const cd i_unit(0.0, 1.0);
    for (int j = 0; j < n_qubits; ++j) {
        for (int k = j + 1; k < n_qubits; ++k) {
            const double phase = phi[static_cast<std::size_t>(k)] - phi[static_cast<std::size_t>(j)];
            const cd coupling = 0.5 * i_unit *
                                (bath.gamma_R * std::polar(1.0, -phase) - bath.gamma_L * std::polar(1.0, phase));
            upper_half += coupling * (lower[static_cast<std::size_t>(j)].adjoint() * lower[static_cast<std::size_t>(k)]);
        }
    }
    return upper_half + upper_half.adjoint();
}

Operator build_drive(double omega, int n_qubits) {
    if (!(omega >= 0.0) || !std::isfinite(omega)) {
        throw Error(ErrorKind::Domain, "drive amplitude must be finite and >= 0");
    }
    const std::size_t dim = ops::hilbert_dim(n_qubits);
    Operator h = zeros(dim);
    for (int j = 1; j <= n_qubits; ++j) {
        h += ops::embed_site_operator(ops::pauli_x(), j, n_qubits);
    }
    return 0.5 * omega * h;
}

Operator build_detuning(const DetuningPattern& detunings, int n_qubits) {
    const std::size_t dim = ops::hilbert_dim(n_qubits);
    if (detunings.deltas.size() != static_cast<std::size_t>(n_qubits)) {
        throw Error(ErrorKind::Shape, "detuning pattern has " + std::to_string(detunings.deltas.size()) +
                                          " entries for " + std::to_string(n_qubits) + " qubits");
    }
    Operator h = zeros(dim);
    for (std::size_t b = 0; b < dim; ++b) {
        double energy = 0.0;
        for (int j = 1; j <= n_qubits; ++j) {
            if ((b >> (n_qubits - j)) & 1U) {
                energy -= detunings.deltas[static_cast<std::size_t>(j - 1)];
            }
        }
        h(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) = energy;
    }
    return h;
}

Operator build_x_operator(const StateVector& target, int n_qubits) {
    const std::size_t dim = ops::hilbert_dim(n_qubits);
    if (static_cast<std::size_t>(target.size()) != dim) {
        throw Error(ErrorKind::Shape, "target dimension does not match 2^n");
    }
    if (std::abs(target.norm() - 1.0) > kNormTolerance) {
        throw Error(ErrorKind::Normalization, "target state is not normalized (norm " +
                                                  std::to_string(target.norm()) + ")");
    }
    const StateVector ground = ops::ground_state(n_qubits);
    return ground * target.adjoint() + target * ground.adjoint();
}

namespace {

Operator two_site(const LocalOperator& a, int site_a, const LocalOperator& b, int site_b, int n_qubits) {
    return ops::embed_site_operator(a, site_a, n_qubits) * ops::embed_site_operator(b, site_b, n_qubits);
}

Operator pauli_pair_form(int k, int l, int n_qubits, double z_sign) {
    const LocalOperator x = ops::pauli_x();
    const LocalOperator z = z_sign * ops::pauli_z();
    return 0.5 * (ops::embed_site_operator(x, k, n_qubits) - ops::embed_site_operator(x, l, n_qubits)) +
           0.5 * (two_site(x, k, z, l, n_qubits) - two_site(z, k, x, l, n_qubits));
}

LocalPauliCalibration calibrate() {
    const Operator x_pair = build_x_operator(singlet(1, 2, 2), 2);
    const StateVector gg = ops::ground_state(2);
    const StateVector s = singlet(1, 2, 2);
    Eigen::Matrix<cd, 4, 2> basis;
    basis.col(0) = gg;
    basis.col(1) = s;

    LocalPauliCalibration best;
    double best_overlap = 0.0;
    for (double z_sign : {1.0, -1.0}) {
        const Operator v = pauli_pair_form(1, 2, 2, z_sign);
        const cd overlap = s.dot(v * gg);  // <S| V |gg>
        if (std::abs(overlap) <= best_overlap) {
            continue;
        }
        best_overlap = std::abs(overlap);
        best.z_sign = z_sign;
        best.scale = 1.0 / overlap.real();
        const Operator scaled = best.scale * v;
        best.restriction_error =
            (basis.adjoint() * scaled * basis - basis.adjoint() * x_pair * basis).cwiseAbs().maxCoeff();
        best.full_error = (scaled - x_pair).cwiseAbs().maxCoeff();
    }
    if (best_overlap < 1e-12) {
        throw Error(ErrorKind::Unsupported, "two-body Pauli form has no component on the pair subspace");
    }
    return best;
}

} // namespace

const LocalPauliCalibration& local_pauli_calibration() {
    static const LocalPauliCalibration calibration = calibrate();
    return calibration;
}

Operator local_pauli_pair(int k, int l, int n_qubits) {
    const auto& cal = local_pauli_calibration();
    return cal.scale * pauli_pair_form(k, l, n_qubits, cal.z_sign);
}

namespace {

struct CounterdiabaticPieces {
    Operator first;
    Operator second;
    Operator third;
};

// The closed form is written with sigma^z |g> = +|g> and sigma^y = [[0,-i],[i,0]]
// in (g, e) order, i.e. both flipped relative to ops::pauli_z / ops::pauli_y.
CounterdiabaticPieces counterdiabatic_pieces() {
    const LocalOperator x = ops::pauli_x();
    const LocalOperator y = -ops::pauli_y();
    const LocalOperator z = -ops::pauli_z();
    const Operator x1 = ops::embed_site_operator(x, 1, 2);
    const Operator x2 = ops::embed_site_operator(x, 2, 2);
    const Operator xz = two_site(x, 1, z, 2, 2) - two_site(z, 1, x, 2, 2);
    CounterdiabaticPieces p;
    p.first = x1 - x2 + xz;
    p.second = two_site(x, 1, y, 2, 2) + two_site(y, 1, x, 2, 2);
    p.third = -x1 + x2 + xz;
    return p;
}

std::array<double, 3> counterdiabatic_coefficients(double slope, double delta_gamma, double t) {
    const double m = slope / delta_gamma;
    const double mt2 = (m * t) * (m * t);
    const double slow = 1.0 + 6.0 * mt2 + 8.0 * mt2 * mt2;
    return {0.5 * m / (1.0 + 2.0 * mt2), 0.5 * 2.0 * m * m * t / slow, 0.5 * m / slow};
}

} // namespace

Operator counterdiabatic_field(double slope, double delta_gamma, double t) {
    if (delta_gamma == 0.0) {
        throw Error(ErrorKind::Unsupported, "counterdiabatic driving needs nonzero chirality");
    }
    static const CounterdiabaticPieces pieces = counterdiabatic_pieces();
    const auto c = counterdiabatic_coefficients(slope, delta_gamma, t);
    return c[0] * pieces.first + c[1] * pieces.second + c[2] * pieces.third;
}

Operator build_control_field(ControlMode mode, const TargetState& target, const DriveProtocol& protocol,
                             const BathConfig& bath, double t) {
    const int n = target.n_qubits;
    const std::size_t dim = ops::hilbert_dim(n);
    if (!(t >= 0.0)) {
        throw Error(ErrorKind::Domain, "control field evaluated at negative time");
    }
    if (mode == ControlMode::Counterdiabatic && n != 2) {
        throw Error(ErrorKind::Unsupported, "counterdiabatic control is only defined for 2 qubits");
    }
    if (mode == ControlMode::LocalPauli && target.pairing.kind != PairingSpec::Kind::DisjointPairs) {
        throw Error(ErrorKind::Unsupported, "local Pauli control needs a disjoint-pairs target");
    }
    if (mode == ControlMode::None || protocol.mode == DriveProtocol::Mode::Constant ||
        t > protocol.control_end()) {
        return zeros(dim);
    }
    const double rate = theta_rate(protocol, bath.total(), t);
    switch (mode) {
    case ControlMode::ApproximateGenerator:
        return rate * build_x_operator(target.vector, n);
    case ControlMode::ExactGenerator:
        return rate * build_x_operator(target.vector, n) - build_coherent_interaction(bath, n) -
               build_drive(drive_value(protocol, t), n);
    case ControlMode::LocalPauli: {
        Operator v = zeros(dim);
        for (auto [k, l] : target.pairing.pairs) {
            v += local_pauli_pair(k, l, n);
        }
        return rate * v;
    }
    case ControlMode::Counterdiabatic:
        return counterdiabatic_field(protocol.slope, bath.chirality(), t);
    case ControlMode::None:
        break;
    }
    return zeros(dim);
}

// ---------------------------------------------------------------------------
// SystemModel

SystemModel SystemModel::assemble(const BathConfig& bath, const DetuningPattern& detunings,
                                  const DriveProtocol& protocol, ControlMode control, const TargetState& target,
                                  const NoiseConfig& noise, int n_qubits, Options options) {
    SystemModel model;
    model.dim_ = ops::hilbert_dim(n_qubits);
    model.n_qubits_ = n_qubits;
    bath.validate(n_qubits);
    protocol.validate();
    noise.validate();
    if (detunings.deltas.size() != static_cast<std::size_t>(n_qubits)) {
        throw Error(ErrorKind::Shape, "detuning pattern length " + std::to_string(detunings.deltas.size()) +
                                          " does not match n = " + std::to_string(n_qubits));
    }
    if (target.n_qubits != n_qubits || static_cast<std::size_t>(target.vector.size()) != model.dim_) {
        throw Error(ErrorKind::Shape, "target state built for a different qubit count");
    }
    if (control == ControlMode::Counterdiabatic) {
        if (n_qubits != 2) {
            throw Error(ErrorKind::Unsupported, "counterdiabatic control is only defined for 2 qubits");
        }
        if (bath.chirality() == 0.0) {
            throw Error(ErrorKind::Unsupported, "counterdiabatic driving needs nonzero chirality");
        }
    }
    if (control == ControlMode::LocalPauli && target.pairing.kind != PairingSpec::Kind::DisjointPairs) {
        throw Error(ErrorKind::Unsupported, "local Pauli control needs a disjoint-pairs target");
    }

    model.bath_ = bath;
    model.detunings_ = detunings;
    model.protocol_ = protocol;
    model.control_ = control;
    model.target_ = target;
    model.noise_ = noise;

    const bool trivial = bath.phases_trivial(n_qubits);
    switch (options.channels) {
    case BathChannels::Auto: model.merged_ = trivial; break;
    case BathChannels::Merged:
        if (!trivial) {
            throw Error(ErrorKind::Unsupported, "merged bath channel requires vanishing pairwise phases");
        }
        model.merged_ = true;
        break;
    case BathChannels::Split: model.merged_ = false; break;
    }

    auto& pieces = model.dense_pieces_;
    pieces[kDetuning] = build_detuning(detunings, n_qubits);
    pieces[kCoherent] = build_coherent_interaction(bath, n_qubits);
    pieces[kDriveUnit] = build_drive(1.0, n_qubits);
    if (control == ControlMode::ApproximateGenerator || control == ControlMode::ExactGenerator) {
        pieces[kX] = build_x_operator(target.vector, n_qubits);
    }
    if (control == ControlMode::LocalPauli) {
        pieces[kLocalPauli] = zeros(model.dim_);
        for (auto [k, l] : target.pairing.pairs) {
            pieces[kLocalPauli] += local_pauli_pair(k, l, n_qubits);
        }
    }
    if (control == ControlMode::Counterdiabatic) {
        const auto cd_pieces = counterdiabatic_pieces();
        pieces[kTqd1] = cd_pieces.first;
        pieces[kTqd2] = cd_pieces.second;
        pieces[kTqd3] = cd_pieces.third;
    }
    for (std::size_t p = 0; p < kPieceCount; ++p) {
        if (pieces[p].size() == 0) {
            continue;
        }
        model.sparse_pieces_[p] = ops::to_sparse(pieces[p]);
        model.sparse_pieces_[p].makeCompressed();
        model.piece_norms_[p] = induced_inf_norm(pieces[p]);
    }

    const auto phi = bath.phases_for(n_qubits);
    if (model.merged_) {
        const std::vector<double> zero(static_cast<std::size_t>(n_qubits), 0.0);
        model.static_jumps_.push_back({bath.total(), ops::collective_lowering(zero, n_qubits), "bath"});
    } else {
        std::vector<double> minus(phi.size());
        std::transform(phi.begin(), phi.end(), minus.begin(), [](double p) { return -p; });
        if (bath.gamma_L > 0.0) {
            model.static_jumps_.push_back({bath.gamma_L, ops::collective_lowering(phi, n_qubits), "bath_left"});
        }
        if (bath.gamma_R > 0.0) {
            model.static_jumps_.push_back({bath.gamma_R, ops::collective_lowering(minus, n_qubits), "bath_right"});
        }
    }
    if (bath.gamma_f > 0.0) {
        for (int j = 1; j <= n_qubits; ++j) {
            model.static_jumps_.push_back({bath.gamma_f, ops::embed_site_operator(ops::lowering(), j, n_qubits),
                                           "free_space_" + std::to_string(j)});
        }
    }
    for (const auto& jump : model.static_jumps_) {
        model.static_jump_bound_ += jump.rate * induced_inf_norm(jump.op) * induced_one_norm(jump.op);
        SparseOperator s = ops::to_sparse(jump.op);
        s.makeCompressed();
        model.sparse_static_jumps_.push_back({jump.rate, std::move(s)});
    }
    const auto d = static_cast<Eigen::Index>(model.dim_);
    model.sparse_static_decay_ = SparseOperator(d, d);
    for (const auto& jump : model.sparse_static_jumps_) {
        const SparseOperator adj = jump.op.adjoint();
        model.sparse_static_decay_ += jump.rate * SparseOperator(adj * jump.op);
    }
    model.sparse_static_decay_.makeCompressed();
    return model;
}

std::vector<SystemModel::Term> SystemModel::control_terms(double t) const {
    std::vector<Term> terms;
    if (control_ == ControlMode::None || protocol_.mode == DriveProtocol::Mode::Constant ||
        t > protocol_.control_end()) {
        return terms;
    }
    const double rate = theta_rate(protocol_, bath_.total(), t);
    switch (control_) {
    case ControlMode::ApproximateGenerator:
        terms.push_back({rate, kX});
        break;
    case ControlMode::ExactGenerator:
        terms.push_back({rate, kX});
        terms.push_back({-1.0, kCoherent});
        terms.push_back({-drive_value(protocol_, t), kDriveUnit});
        break;
    case ControlMode::LocalPauli:
        terms.push_back({rate, kLocalPauli});
        break;
    case ControlMode::Counterdiabatic: {
        const auto c = counterdiabatic_coefficients(protocol_.slope, bath_.chirality(), t);
        terms.push_back({c[0], kTqd1});
        terms.push_back({c[1], kTqd2});
        terms.push_back({c[2], kTqd3});
        break;
    }
    case ControlMode::None:
        break;
    }
    return terms;
}

std::vector<SystemModel::Term> SystemModel::hamiltonian_terms(double t) const {
    std::array<double, kPieceCount> coeff{};
    coeff[kDetuning] = 1.0;
    coeff[kCoherent] = 1.0;
    coeff[kDriveUnit] = drive_value(protocol_, t);
    for (const auto& term : control_terms(t)) {
        coeff[term.piece] += term.coeff;
    }
    std::vector<Term> terms;
    for (std::size_t p = 0; p < kPieceCount; ++p) {
        if (coeff[p] != 0.0 && dense_pieces_[p].size() != 0) {
            terms.push_back({coeff[p], static_cast<Piece>(p)});
        }
    }
    return terms;
}

Operator SystemModel::dense(const std::vector<Term>& terms) const {
    Operator out = zeros(dim_);
    for (const auto& term : terms) {
        out += term.coeff * dense_pieces_[term.piece];
    }
    return out;
}

SparseOperator SystemModel::sparse(const std::vector<Term>& terms) const {
    const auto d = static_cast<Eigen::Index>(dim_);
    SparseOperator out(d, d);
    for (const auto& term : terms) {
        out += term.coeff * sparse_pieces_[term.piece];
    }
    out.prune(cd(0.0));
    out.makeCompressed();
    return out;
}

Operator SystemModel::hamiltonian(double t) const { return dense(hamiltonian_terms(t)); }

Operator SystemModel::control_field(double t) const { return dense(control_terms(t)); }

Operator SystemModel::drive(double t) const { return drive_value(protocol_, t) * dense_pieces_[kDriveUnit]; }

std::vector<JumpTerm> SystemModel::jumps(double t) const {
    std::vector<JumpTerm> out = static_jumps_;
    if (noise_.eta1 > 0.0) {
        const double omega = drive_value(protocol_, t);
        if (omega != 0.0) {
            out.push_back({noise_.eta1 * noise_.eta1, omega * dense_pieces_[kDriveUnit], "drive_noise"});
        }
    }
    if (noise_.eta2 > 0.0) {
        const auto terms = control_terms(t);
        if (!terms.empty()) {
            out.push_back({noise_.eta2 * noise_.eta2, dense(terms), "control_noise"});
        }
    }
    return out;
}

SystemModel::SparseGenerator SystemModel::sparse_generator(double t) const {
    SparseGenerator gen;
    gen.hamiltonian = sparse(hamiltonian_terms(t));
    gen.jumps = sparse_static_jumps_;
    gen.decay = sparse_static_decay_;
    auto add_noise = [&gen](double rate, SparseOperator op) {
        const SparseOperator adj = op.adjoint();
        gen.decay += rate * SparseOperator(adj * op);
        gen.jumps.push_back({rate, std::move(op)});
    };
    if (noise_.eta1 > 0.0) {
        const double omega = drive_value(protocol_, t);
        if (omega != 0.0) {
            add_noise(noise_.eta1 * noise_.eta1, sparse({{omega, kDriveUnit}}));
        }
    }
    if (noise_.eta2 > 0.0) {
        const auto terms = control_terms(t);
        if (!terms.empty()) {
            add_noise(noise_.eta2 * noise_.eta2, sparse(terms));
        }
    }
    gen.effective = cd(0.0, -1.0) * gen.hamiltonian - 0.5 * gen.decay;
    gen.effective.makeCompressed();
    return gen;
}

double SystemModel::norm_bound(double t, bool include_drive) const {
    double bound = 0.0;
    for (const auto& term : hamiltonian_terms(t)) {
        if (term.piece != kDriveUnit || include_drive) {
            bound += std::abs(term.coeff) * piece_norms_[term.piece];
        }
    }
    bound += static_jump_bound_;
    if (noise_.eta1 > 0.0 && include_drive) {
        const double h = drive_value(protocol_, t) * piece_norms_[kDriveUnit];
        bound += noise_.eta1 * noise_.eta1 * h * h;
    }
    if (noise_.eta2 > 0.0) {
        double h = 0.0;
        for (const auto& term : control_terms(t)) {
            h += std::abs(term.coeff) * piece_norms_[term.piece];
        }
        bound += noise_.eta2 * noise_.eta2 * h * h;
    }
    return bound;
}

double SystemModel::generator_norm_bound(double t) const { return norm_bound(t, true); }

double SystemModel::generator_norm_bound_without_drive(double t) const { return norm_bound(t, false); }

std::vector<double> SystemModel::breakpoints() const {
    if (protocol_.mode == DriveProtocol::Mode::Ramp) {
        return {protocol_.saturation_time};
    }
    return {};
}

bool SystemModel::time_independent() const { return protocol_.mode == DriveProtocol::Mode::Constant; }

SystemModel SystemModel::frozen(double omega) const {
    Options options;
    options.channels = merged_ ? BathChannels::Merged : BathChannels::Split;
    return assemble(bath_, detunings_, DriveProtocol::constant(omega, protocol_.theta_k), ControlMode::None,
                    target_, noise_, n_qubits_, options);
}

double SystemModel::invariance_defect(const Operator& isometry) const {
    if (static_cast<std::size_t>(isometry.rows()) != dim_) {
        throw Error(ErrorKind::Shape, "isometry rows do not match the model dimension");
    }
    const Operator projector_c = Operator::Identity(isometry.rows(), isometry.rows()) - isometry * isometry.adjoint();
    double worst = 0.0;
    auto check = [&](const Operator& a) {
        if (a.size() == 0) {
            return;
        }
        worst = std::max(worst, (projector_c * (a * isometry)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (projector_c * (a.adjoint() * isometry)).cwiseAbs().maxCoeff());
    };
    for (const auto& piece : dense_pieces_) {
        check(piece);
    }
    for (const auto& jump : static_jumps_) {
        check(jump.op);
    }
    return worst;
}

SystemModel::Compression SystemModel::compress(const Operator& isometry) const {
    if (static_cast<std::size_t>(isometry.rows()) != dim_) {
        throw Error(ErrorKind::Shape, "isometry rows do not match the model dimension");
    }
    Compression c;
    c.isometry = isometry;
    const Operator adj = isometry.adjoint();
    for (const auto& piece : dense_pieces_) {
        c.pieces.push_back(piece.size() == 0 ? Operator() : Operator(adj * piece * isometry));
    }
    c.drive_unit = c.pieces[kDriveUnit];
    c.static_decay = Operator::Zero(isometry.cols(), isometry.cols());
    for (const auto& jump : static_jumps_) {
        Operator reduced = adj * jump.op * isometry;
        c.static_decay += jump.rate * reduced.adjoint() * reduced;
        c.static_jumps.push_back({jump.rate, std::move(reduced)});
    }
    return c;
}

SystemModel::DenseGenerator SystemModel::compressed_generator(const Compression& compression, double t,
                                                              bool exclude_drive) const {
    const Eigen::Index d = compression.static_decay.rows();
    auto combine = [&](const std::vector<Term>& terms) {
        Operator out = Operator::Zero(d, d);
        for (const auto& term : terms) {
            out += term.coeff * compression.pieces[term.piece];
        }
        return out;
    };
    DenseGenerator gen;
    gen.jumps = compression.static_jumps;
    Operator decay = compression.static_decay;
    auto add_noise = [&](double rate, Operator op) {
        decay += rate * op.adjoint() * op;
        gen.jumps.push_back({rate, std::move(op)});
    };
    if (noise_.eta1 > 0.0 && !exclude_drive) {
        const double omega = drive_value(protocol_, t);
        if (omega != 0.0) {
            add_noise(noise_.eta1 * noise_.eta1, omega * compression.pieces[kDriveUnit]);
        }
    }
    if (noise_.eta2 > 0.0) {
        const auto terms = control_terms(t);
        if (!terms.empty()) {
            add_noise(noise_.eta2 * noise_.eta2, combine(terms));
        }
    }
    auto terms = hamiltonian_terms(t);
    if (exclude_drive) {
        std::erase_if(terms, [](const Term& term) { return term.piece == kDriveUnit; });
    }
    gen.effective = cd(0.0, -1.0) * combine(terms) - 0.5 * decay;
    return gen;
}

} // namespace dimer
