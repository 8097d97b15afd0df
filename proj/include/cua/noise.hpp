// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "cua/common.hpp"

namespace cua {

/// Hardware-calibrated error rates plus shot count. Defaults are the Heron r2
/// median figures used throughout the experiments.
struct NoiseModel {
    double p_sx = 2.45e-4;
    double p_cz = 1.78e-3;
    double p_readout = 6.8e-3;
    long n_shots = 8192;

    void validate() const {
        require(p_sx >= 0 && p_sx <= 1, "NoiseModel: p_sx outside [0,1]");
        require(p_cz >= 0 && p_cz <= 1, "NoiseModel: p_cz outside [0,1]");
        require(p_readout >= 0 && p_readout <= 1, "NoiseModel: p_readout outside [0,1]");
        require(n_shots >= 1, "NoiseModel: n_shots must be positive");
    }
};

inline NoiseModel noiseless_model() { return NoiseModel{0.0, 0.0, 0.0, 8192}; }

NoiseModel load_noise_model_file(const std::string& path);
void save_noise_model_file(const std::string& path, const NoiseModel& model);

}  // namespace cua
