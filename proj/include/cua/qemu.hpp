// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cua/adapter.hpp"
#include "cua/circuit_plan.hpp"
#include "cua/common.hpp"
#include "cua/noise.hpp"
#include "cua/rng.hpp"

namespace cua {

/// Threshold below which an input slice is treated as zero and bypasses the
/// quantum path entirely (its reconstruction is zero by definition).
inline constexpr double kZeroSliceNorm = 1e-12;

/// Clipping bounds applied to measured frequencies before the square root.
inline constexpr double kProbClipLo = 1e-12;
inline constexpr double kProbClipHi = 1.0;

/// Amplitude-encoded slice: unit-norm amplitudes plus the classically stored
/// norm and element signs needed for reconstruction.
struct EncodedSlice {
    Vector amplitudes;
    double norm = 0.0;
    IntVector signs;  // entries in {-1, 0, +1}
    bool zero_slice = false;
};

struct ShotCounts {
    std::vector<long> counts;
    long total = 0;
};

/// Normalise a power-of-two-length vector into an encoded slice.
EncodedSlice amplitude_encode(const Vector& x);

/// p_k = |(Q a)_k|^2 for the encoded amplitudes a.
Vector ideal_probabilities(const Matrix& q, const EncodedSlice& slice);

/// p' = (1 - lambda) p + lambda / b. For computational-basis measurement
/// this diagonal action equals the full density-matrix depolarising channel
/// (see dm_reference_probabilities for the cross-check path).
Vector apply_depolarizing(const Vector& p, double lambda);

/// Tensor-product symmetric bit-flip confusion: p' = C^{(x) n} p with
/// C = [[1-p, p], [p, 1-p]].
Vector apply_readout_confusion(const Vector& p, double p_readout, int n_qubits);

/// Multinomial draw over outcomes, deterministic per generator state.
ShotCounts sample_shots(const Vector& p, long n_shots, Rng& rng);

/// y_k = sqrt(clip(c_k / N)) * sign_k * norm; indices with sign 0 stay 0.
Vector reconstruct(const ShotCounts& counts, const EncodedSlice& slice);

/// Infinite-shot limit of reconstruct: frequencies replaced by exact
/// probabilities.
Vector reconstruct_from_probabilities(const Vector& p, const EncodedSlice& slice);

/// Aggregated depolarising parameter for one b = 2^n block under the
/// table-driven synthesis budget.
double block_lambda(const NoiseModel& noise, int n_qubits);

enum class EmulationPath { ExactProb, Sampled };

struct EmulationOptions {
    EmulationPath path = EmulationPath::Sampled;
    /// Depolarising lambda; negative means "derive from the gate budget of
    /// the block size and the noise model".
    double lambda_override = -1.0;
    bool apply_readout = true;
    uint64_t seed = 0;
    uint64_t token_index = 0;  // stream component for per-slice rngs
    uint64_t site_tag = 0;     // distinguishes co-located adapter sites
};

/// Emulated pre-W map: splits x into b-long slices, runs
/// encode -> probabilities -> depolarise -> confusion -> (shots) ->
/// reconstruct per slice, concatenates. The transform must carry orthogonal
/// blocks (Cayley backend).
Vector emulated_sign_map(const AdapterTransform& t, const Vector& x, const NoiseModel& noise,
                         const EmulationOptions& opts);

/// Full emulated layer: W applied to the emulated pre-W map. In noiseless
/// exact-probability mode this equals forward_sign_constrained to 1e-10.
Vector emulated_forward(const CuaLayer& layer, const Vector& x, const NoiseModel& noise,
                        const EmulationOptions& opts);

/// Density-matrix reference for n <= 4 qubits: evolves rho = a a^T through Q,
/// applies the depolarising channel to the full density matrix and readout
/// confusion to the diagonal, returns outcome probabilities. Used to verify
/// the probability-vector shortcut.
Vector dm_reference_probabilities(const Matrix& q, const EncodedSlice& slice, double lambda,
                                  double p_readout);

/// Shot-trace rows "slice_id,outcome,count" (zero counts omitted). Callers
/// write their own header line.
void append_shot_trace(std::ostream& os, long slice_id, const ShotCounts& counts);

}  // namespace cua
