// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/circuit_plan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cua {

GateBudget gate_budget_for_block(int n_qubits) {
    require(n_qubits >= 2 && n_qubits <= 8, "gate_budget_for_block: n_qubits must be in [2,8]");
    // Exact-synthesis unit sizes per block, by qubit count.
    static const long kSx[] = {20, 188, 992, 4526, 18708, 75804, 306846};
    static const long kCz[] = {4, 45, 273, 1331, 5534, 22396, 91000};
    GateBudget b;
    b.sx_count = kSx[n_qubits - 2];
    b.cz_count = kCz[n_qubits - 2];
    b.rz_count = 0;  // virtual on the target gate set; not tracked per block
    b.depth = n_qubits == 2
                  ? 19
                  : static_cast<int>((b.sx_count + 2 * b.cz_count + n_qubits - 1) / n_qubits);
    return b;
}

GateBudget encode_unitary_measure_circuit() { return GateBudget{12, 9, 3, 2, 19}; }

GateBudget packed_circuit_budget() { return GateBudget{904, 916, 192, 128, 23}; }

InfidelityReport gate_infidelity(const GateBudget& budget, const NoiseModel& noise,
                                 int n_qubits) {
    noise.validate();
    require(budget.sx_count >= 0 && budget.cz_count >= 0, "gate_infidelity: negative count");
    require(n_qubits >= 1, "gate_infidelity: n_qubits must be positive");
    InfidelityReport r;
    r.lambda_1q = 1.0 - std::pow(1.0 - noise.p_sx, static_cast<double>(budget.sx_count));
    r.lambda_2q = 1.0 - std::pow(1.0 - noise.p_cz, static_cast<double>(budget.cz_count));
    r.lambda_total = 1.0 - (1.0 - r.lambda_1q) * (1.0 - r.lambda_2q);
    r.epsilon_readout = 1.0 - std::pow(1.0 - noise.p_readout, static_cast<double>(n_qubits));
    return r;
}

void CouplingMap::validate() const {
    require(num_qubits >= 0, "CouplingMap: negative qubit count");
    for (const auto& [u, v] : edges) {
        require(u >= 0 && v >= 0 && u < num_qubits && v < num_qubits,
                "CouplingMap: edge endpoint out of range");
        require(u != v, "CouplingMap: self-loop");
    }
}

CouplingMap heavy_hex_map(int rows, int cols) {
    require(rows >= 1 && cols >= 1, "heavy_hex_map: rows and cols must be positive");
    // Honeycomb as a brick wall: lattice points (y, x) with y in [0, rows],
    // x in [0, 2*cols]; all horizontal unit segments, verticals where
    // (x + y) is even. Every segment is then subdivided by a bridge qubit.
    const int width = 2 * cols + 1;
    auto vertex = [&](int y, int x) { return y * width + x; };
    const int base_count = (rows + 1) * width;

    std::vector<std::pair<int, int>> base_edges;
    for (int y = 0; y <= rows; ++y)
        for (int x = 0; x + 1 <= 2 * cols; ++x)
            base_edges.emplace_back(vertex(y, x), vertex(y, x + 1));
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x <= 2 * cols; ++x)
            if ((x + y) % 2 == 0) base_edges.emplace_back(vertex(y, x), vertex(y + 1, x));
    std::sort(base_edges.begin(), base_edges.end());

    CouplingMap map;
    map.num_qubits = base_count + static_cast<int>(base_edges.size());
    int bridge = base_count;
    for (const auto& [u, v] : base_edges) {
        map.edges.emplace_back(std::min(u, bridge), std::max(u, bridge));
        map.edges.emplace_back(std::min(v, bridge), std::max(v, bridge));
        ++bridge;
    }
    std::sort(map.edges.begin(), map.edges.end());
    map.validate();
    return map;
}

std::vector<std::pair<int, int>> greedy_max_matching(const CouplingMap& map, int max_pairs) {
    require(max_pairs >= 0, "greedy_max_matching: max_pairs must be nonnegative");
    map.validate();
    std::vector<std::pair<int, int>> edges = map.edges;
    std::sort(edges.begin(), edges.end());
    std::vector<char> used(static_cast<size_t>(map.num_qubits), 0);
    std::vector<std::pair<int, int>> picked;
    for (const auto& [u, v] : edges) {
        if (static_cast<int>(picked.size()) >= max_pairs) break;
        if (used[static_cast<size_t>(u)] || used[static_cast<size_t>(v)]) continue;
        used[static_cast<size_t>(u)] = used[static_cast<size_t>(v)] = 1;
        picked.emplace_back(u, v);
    }
    return picked;
}

PackingSchedule packing_schedule(int num_blocks, int lanes_per_circuit) {
    require(num_blocks >= 0, "packing_schedule: negative block count");
    require(lanes_per_circuit >= 1, "packing_schedule: lanes_per_circuit must be positive");
    PackingSchedule s;
    s.num_circuits = (num_blocks + lanes_per_circuit - 1) / lanes_per_circuit;
    s.lane_assignment.resize(static_cast<size_t>(s.num_circuits));
    for (int b = 0; b < num_blocks; ++b)
        s.lane_assignment[static_cast<size_t>(b / lanes_per_circuit)].push_back(b);
    return s;
}

long token_circuit_estimate(long num_tokens, long circuits_per_token) {
    require(num_tokens >= 0 && circuits_per_token >= 0, "token_circuit_estimate: negative input");
    return num_tokens * circuits_per_token;
}

CouplingMap load_coupling_map_file(const std::string& path) {
    std::ifstream is(path);
    if (!is.good()) throw std::runtime_error("load_coupling_map_file: cannot open " + path);
    std::string tag;
    CouplingMap map;
    is >> tag >> map.num_qubits;
    require(tag == "qubits" && is.good(), "load_coupling_map_file: expected 'qubits N' header");
    int u, v;
    while (is >> u >> v) map.edges.emplace_back(std::min(u, v), std::max(u, v));
    std::sort(map.edges.begin(), map.edges.end());
    map.edges.erase(std::unique(map.edges.begin(), map.edges.end()), map.edges.end());
    map.validate();
    return map;
}

void save_coupling_map_file(const std::string& path, const CouplingMap& map) {
    map.validate();
    std::ofstream os(path);
    require(os.good(), "save_coupling_map_file: cannot open " + path);
    os << "qubits " << map.num_qubits << "\n";
    for (const auto& [u, v] : map.edges) os << u << " " << v << "\n";
}

}  // namespace cua
