#pragma once

#include "dimer/model.hpp"

namespace dimer::testing {

// Model with the common defaults; callers override what they need.
struct ModelSpec {
    int n = 2;
    double delta_gamma = 0.0;
    double gamma_f = 0.0;
    DriveProtocol protocol = DriveProtocol::constant(1.0);
    ControlMode control = ControlMode::None;
    PairingSpec pairing;
    std::vector<double> detunings;
    NoiseConfig noise;

    SystemModel build() const {
        const PairingSpec p = pairing.pairs.empty() && pairing.kind == PairingSpec::Kind::DisjointPairs
                                  ? PairingSpec::adjacent_dimers(n)
                                  : pairing;
        const DetuningPattern det = detunings.empty() ? DetuningPattern::zeros(n) : DetuningPattern{detunings};
        return SystemModel::assemble(BathConfig::from_chirality(1.0, delta_gamma, gamma_f), det, protocol, control,
                                     target_state(p, n), noise, n);
    }
};

} // namespace dimer::testing
