#pragma once

// Physics of N qubits driven locally and decaying collectively into a 1D bath,
// plus the control fields that rotate |g...g> into a dark target state.
//
// Rates are in units of the total bath rate Gamma, times in units of 1/Gamma.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dimer/operators.hpp"

namespace dimer {

struct BathConfig {
    double gamma_L = 0.5;
    double gamma_R = 0.5;
    std::vector<double> phases;  // per-qubit phi_j; empty means all zero
    double gamma_f = 0.0;        // free-space decay rate

    static BathConfig from_chirality(double total, double delta_gamma, double gamma_f = 0.0);

    double total() const { return gamma_L + gamma_R; }
    double chirality() const { return gamma_R - gamma_L; }
    std::vector<double> phases_for(int n_qubits) const;
    // True when every pairwise phase phi_k - phi_j vanishes mod 2 pi.
    bool phases_trivial(int n_qubits) const;
    void validate(int n_qubits) const;
};

struct DetuningPattern {
    std::vector<double> deltas;

    static DetuningPattern zeros(int n_qubits);
    // [d1, -d1, d2, -d2, ...] from the per-pair magnitudes.
    static DetuningPattern alternating(std::span<const double> pair_values);
};

struct DriveProtocol {
    enum class Mode { Ramp, Constant };

    Mode mode = Mode::Ramp;
    double slope = 25.0;            // m, Omega(t) = m t during the ramp
    double saturation_time = 1.0;   // t_f
    double theta_k = 10.0;          // k in theta(Omega) = pi/2 (1 - exp(-k Omega / Gamma))
    double constant_omega = 0.0;

    static DriveProtocol ramp(double slope, double saturation_time, double theta_k = 10.0);
    static DriveProtocol constant(double omega, double theta_k = 10.0);

    void validate() const;
    // End of the window in which control fields may be nonzero.
    double control_end() const { return mode == Mode::Ramp ? saturation_time : 0.0; }
};

// Omega(t) with Heaviside(0) = 1/2 at the saturation point.
double drive_value(const DriveProtocol& protocol, double t);
// dOmega/dt, left derivative at the kink.
double drive_rate(const DriveProtocol& protocol, double t);

double theta_of_omega(double k, double omega_over_gamma);
// d theta / dt through the chain rule; zero after the control window.
double theta_rate(const DriveProtocol& protocol, double gamma_total, double t);

struct PairingSpec {
    enum class Kind { DisjointPairs, AllPairings };

    Kind kind = Kind::DisjointPairs;
    std::vector<std::pair<int, int>> pairs;  // 1-based, only for DisjointPairs

    static PairingSpec disjoint(std::vector<std::pair<int, int>> pairs);
    static PairingSpec all_pairings();
    // (1,2), (3,4), ..., (n-1, n)
    static PairingSpec adjacent_dimers(int n_qubits);

    void validate(int n_qubits) const;
};

using Matching = std::vector<std::pair<int, int>>;

// All perfect matchings of 1..n with each pair ordered (i < j); (n-1)!! of them.
std::vector<Matching> perfect_matchings(int n_qubits);

struct TargetState {
    PairingSpec pairing;
    int n_qubits = 0;
    StateVector vector;
    std::size_t term_count = 0;  // number of singlet products summed
};

StateVector singlet(int i, int j, int n_qubits);
TargetState target_state(const PairingSpec& spec, int n_qubits);

enum class ControlMode { ExactGenerator, ApproximateGenerator, LocalPauli, Counterdiabatic, None };

const char* to_string(ControlMode mode);
ControlMode control_mode_from_string(const std::string& name);

struct NoiseConfig {
    double eta1 = 0.0;  // drive noise
    double eta2 = 0.0;  // control noise

    void validate() const;
};

Operator build_coherent_interaction(const BathConfig& bath, int n_qubits);
Operator build_drive(double omega, int n_qubits);
Operator build_detuning(const DetuningPattern& detunings, int n_qubits);
Operator build_x_operator(const StateVector& target, int n_qubits);

// The two-body Pauli form 1/2 (x_k - x_l) + 1/2 (x_k z_l - z_k x_l) differs from
// X_pair = |gg><S| + |S><gg| by the sigma^z sign convention and an overall factor.
// Calibration picks the z sign whose pair-subspace restriction is nonzero and the
// scale that makes it equal X_pair there.
struct LocalPauliCalibration {
    double z_sign = 1.0;   // multiplies ops::pauli_z()
    double scale = 1.0;
    double restriction_error = 0.0;  // max |scale * V - X| on span{|gg>, |S>}
    double full_error = 0.0;         // same over the whole pair space
};

const LocalPauliCalibration& local_pauli_calibration();

// Unit-rate two-body form for pair (k, l) embedded in n qubits, calibration applied.
Operator local_pauli_pair(int k, int l, int n_qubits);

// Counterdiabatic field for two qubits with Omega(t) = m t. The closed form is for
// unit chirality; other chiralities enter through m / delta_gamma.
Operator counterdiabatic_field(double slope, double delta_gamma, double t);

Operator build_control_field(ControlMode mode, const TargetState& target, const DriveProtocol& protocol,
                             const BathConfig& bath, double t);

struct JumpTerm {
    double rate = 0.0;
    Operator op;
    std::string label;
};

class SystemModel {
public:
    enum class BathChannels { Auto, Merged, Split };

    struct Options {
        BathChannels channels = BathChannels::Auto;
    };

    struct SparseJump {
        double rate;
        SparseOperator op;
    };

    struct SparseGenerator {
        SparseOperator hamiltonian;
        std::vector<SparseJump> jumps;
        SparseOperator decay;      // sum_k r_k L_k^dagger L_k
        SparseOperator effective;  // -i H - decay / 2
    };

    struct DenseJump {
        double rate;
        Operator op;
    };

    // Every piece and jump compressed to P^dag A P for an isometry P with invariant range.
    struct Compression {
        Operator isometry;
        std::vector<Operator> pieces;
        Operator drive_unit;  // P^dag H_drive P at Omega = 1
        std::vector<DenseJump> static_jumps;
        Operator static_decay;
    };

    struct DenseGenerator {
        std::vector<DenseJump> jumps;
        Operator effective;  // -i H - decay / 2
    };

    static SystemModel assemble(const BathConfig& bath, const DetuningPattern& detunings,
                                const DriveProtocol& protocol, ControlMode control,
                                const TargetState& target, const NoiseConfig& noise, int n_qubits,
                                Options options);
    static SystemModel assemble(const BathConfig& bath, const DetuningPattern& detunings,
                                const DriveProtocol& protocol, ControlMode control,
                                const TargetState& target, const NoiseConfig& noise, int n_qubits) {
        return assemble(bath, detunings, protocol, control, target, noise, n_qubits, Options{});
    }

    int n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return dim_; }
    const BathConfig& bath() const { return bath_; }
    const DetuningPattern& detunings() const { return detunings_; }
    const DriveProtocol& protocol() const { return protocol_; }
    ControlMode control_mode() const { return control_; }
    const TargetState& target() const { return target_; }
    const NoiseConfig& noise() const { return noise_; }
    bool bath_merged() const { return merged_; }

    Operator hamiltonian(double t) const;
    Operator control_field(double t) const;
    Operator drive(double t) const;
    std::vector<JumpTerm> jumps(double t) const;

    SparseGenerator sparse_generator(double t) const;
    // Cheap upper bound on the generator's operator norm at t (induced infinity norms).
    double generator_norm_bound(double t) const;

    // Times where the generator is not smooth.
    std::vector<double> breakpoints() const;

    // True when the drive is constant and no control field is ever applied.
    bool time_independent() const;

    // Same physics with the drive frozen at `omega` and the control disabled.
    SystemModel frozen(double omega) const;

    // Largest entry of (1 - P P^dag) A P over every Hamiltonian piece and jump A (and A^dag),
    // for an isometry P. Zero means range(P) is invariant under the whole generator.
    double invariance_defect(const Operator& isometry) const;

    Compression compress(const Operator& isometry) const;
    // Generator at t inside the compressed space; valid only when invariance_defect is ~0.
    // With exclude_drive the drive Hamiltonian and its noise dissipator are left out.
    DenseGenerator compressed_generator(const Compression& compression, double t, bool exclude_drive = false) const;
    // generator_norm_bound without the drive Hamiltonian and drive noise.
    double generator_norm_bound_without_drive(double t) const;

private:
    enum Piece : std::size_t { kDetuning, kCoherent, kDriveUnit, kX, kLocalPauli, kTqd1, kTqd2, kTqd3, kPieceCount };

    struct Term {
        double coeff;
        Piece piece;
    };

    std::vector<Term> control_terms(double t) const;
    std::vector<Term> hamiltonian_terms(double t) const;
    double norm_bound(double t, bool include_drive) const;
    Operator dense(const std::vector<Term>& terms) const;
    SparseOperator sparse(const std::vector<Term>& terms) const;

    int n_qubits_ = 0;
    std::size_t dim_ = 0;
    BathConfig bath_;
    DetuningPattern detunings_;
    DriveProtocol protocol_;
    ControlMode control_ = ControlMode::None;
    TargetState target_;
    NoiseConfig noise_;
    bool merged_ = true;

    std::array<Operator, kPieceCount> dense_pieces_;
    std::array<SparseOperator, kPieceCount> sparse_pieces_;
    std::array<double, kPieceCount> piece_norms_{};
    double static_jump_bound_ = 0.0;
    std::vector<JumpTerm> static_jumps_;
    std::vector<SparseJump> sparse_static_jumps_;
    SparseOperator sparse_static_decay_;
};

} // namespace dimer
