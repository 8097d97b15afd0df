// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/noise.hpp"

#include <fstream>

#include <json.hpp>

namespace cua {

NoiseModel load_noise_model_file(const std::string& path) {
    std::ifstream is(path);
    if (!is.good()) throw std::runtime_error("load_noise_model_file: cannot open " + path);
    nlohmann::json j;
    is >> j;
    NoiseModel m;
    m.p_sx = j.value("p_sx", m.p_sx);
    m.p_cz = j.value("p_cz", m.p_cz);
    m.p_readout = j.value("p_readout", m.p_readout);
    m.n_shots = j.value("n_shots", m.n_shots);
    m.validate();
    return m;
}

void save_noise_model_file(const std::string& path, const NoiseModel& model) {
    model.validate();
    nlohmann::json j{{"p_sx", model.p_sx},
                     {"p_cz", model.p_cz},
                     {"p_readout", model.p_readout},
                     {"n_shots", model.n_shots}};
    std::ofstream os(path);
    require(os.good(), "save_noise_model_file: cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace cua
