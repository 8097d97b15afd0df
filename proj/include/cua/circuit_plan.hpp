// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cua/common.hpp"
#include "cua/noise.hpp"

namespace cua {

/// Native-gate counts for one synthesis unit.
struct GateBudget {
    long sx_count = 0;
    long rz_count = 0;
    long cz_count = 0;
    long reset_count = 0;
    int depth = 0;
};

/// Per-block exact-synthesis budgets for 2..8 qubits (table-driven; exact
/// synthesis itself is out of scope). Depth is only measured for the 2-qubit
/// unit; larger rows carry a structural lower bound ceil((sx + 2 cz)/n).
GateBudget gate_budget_for_block(int n_qubits);

/// The single encode-unitary-measure circuit as transpiled for one 2-qubit
/// block (depth 19, 12 SX + 9 RZ + 3 CZ, 2 resets).
GateBudget encode_unitary_measure_circuit();

/// One packed 64-lane wide circuit (depth 23, 904 SX + 916 RZ + 192 CZ +
/// 128 resets).
GateBudget packed_circuit_budget();

struct InfidelityReport {
    double lambda_1q = 0;
    double lambda_2q = 0;
    double lambda_total = 0;
    double epsilon_readout = 0;
};

/// Compounded depolarising accounting:
///   lambda_1q = 1 - (1 - p_sx)^sx,   lambda_2q = 1 - (1 - p_cz)^cz,
///   lambda    = 1 - (1 - lambda_1q)(1 - lambda_2q),
///   eps_ro    = 1 - (1 - p_ro)^n.
InfidelityReport gate_infidelity(const GateBudget& budget, const NoiseModel& noise, int n_qubits);

/// Undirected device connectivity. Edges are stored normalised (u < v) in
/// ascending order; that order is the deterministic greedy tie-break.
struct CouplingMap {
    int num_qubits = 0;
    std::vector<std::pair<int, int>> edges;

    void validate() const;
};

/// Heavy-hexagon lattice patch with `rows` x `cols` hexagonal cells in a
/// brick-wall arrangement, every edge subdivided by a bridge qubit. Maximum
/// degree 3; deterministic indexing (lattice vertices first, then bridges in
/// edge order).
CouplingMap heavy_hex_map(int rows, int cols);

/// Greedy maximal matching over the edge list in ascending order, capped at
/// max_pairs. Returned pairs are vertex-disjoint and at least half the size
/// of a maximum matching (before the cap).
std::vector<std::pair<int, int>> greedy_max_matching(const CouplingMap& map, int max_pairs);

struct PackingSchedule {
    int num_circuits = 0;
    // lane_assignment[c] lists the block indices executed by circuit c.
    std::vector<std::vector<int>> lane_assignment;
};

/// Round-robin fill: ceil(num_blocks / lanes_per_circuit) circuits, every
/// block assigned exactly once.
PackingSchedule packing_schedule(int num_blocks, int lanes_per_circuit);

long token_circuit_estimate(long num_tokens, long circuits_per_token);

/// Edge-list text format: first line "qubits N", then one "u v" pair per line.
CouplingMap load_coupling_map_file(const std::string& path);
void save_coupling_map_file(const std::string& path, const CouplingMap& map);

}  // namespace cua
