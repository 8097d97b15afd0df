// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cua/cayley.hpp"
#include "cua/common.hpp"
#include "cua/rng.hpp"

namespace cua {

/// Bipartition of an operator of dimension dim_a * dim_b.
struct Bipartition {
    long dim_a = 0;
    long dim_b = 0;
};

/// Normalised operator Schmidt spectrum across one bipartition.
/// sigmas are descending with sum sigma^2 = 1; rank counts values above
/// 1e-10 * sigma_max (numerically nonzero, distinct from the 1% effective
/// bond dimension threshold).
struct OperatorSchmidtSpectrum {
    Vector sigmas;
    long rank = 0;
    long rank_bound = 0;  // min(dim_a^2, dim_b^2)
    double entropy_bits = 0.0;
};

/// Relative cutoff for counting a singular value as nonzero.
inline constexpr double kSchmidtRankCutoff = 1e-10;

/// Operator Schmidt decomposition: reshape
/// U[(ia,ib),(ja,jb)] -> M[(ia,ja),(ib,jb)], take singular values of M,
/// normalise so sum sigma^2 = 1 (for unitary U this equals dividing by
/// sqrt(dim_a*dim_b)). Structurally zero rows/columns of M are dropped
/// before the SVD, which keeps block-diagonal operators cheap; dense
/// operators go through a thin QR + SVD.
OperatorSchmidtSpectrum operator_schmidt(const Matrix& u, const Bipartition& cut);

/// Count of singular values strictly exceeding threshold_fraction * sigma_max.
long effective_bond_dim(const OperatorSchmidtSpectrum& spec, double threshold_fraction = 0.01);

/// S_op / S_max with S_max = n/2 bits (Haar-random n-qubit maximum).
double entropy_ratio(const OperatorSchmidtSpectrum& spec, int n_qubits);

/// 1 - sum sigma^4 (zero exactly when the spectrum is rank one).
double purity_deficit(const OperatorSchmidtSpectrum& spec);

/// Monte Carlo entangling power of a 4x4 gate: average linear entanglement
/// entropy generated on Haar-random product states, normalised by the same
/// estimate for CNOT (common random numbers). Identity and SWAP give 0,
/// CNOT gives 1 by construction.
double entangling_power(const Matrix& gate, long samples = 200000, uint64_t seed = 0);

/// Haar-random rotation (det +1) of the given dimension.
Matrix haar_special_orthogonal(int dim, Rng& rng);

/// Block-diagonal operator of Haar-random SO(block_dim) blocks.
BlockDiagonalUnitary haar_so_bdu(int block_dim, int num_blocks, uint64_t seed);

/// Alternating brickwork of Haar SO(4) gates: odd layers on pairs
/// (0,1),(2,3),..., even layers on (1,2),(3,4),.... depth 0 is the identity.
Matrix brickwork_unitary(int n_qubits, int depth, uint64_t seed);

/// Rescale every skew generator by s and rebuild the operator.
BlockDiagonalUnitary stress_scale(const SkewBlockParams& params, double s);

/// Direct sum with an identity block up to the next power of two;
/// orthogonality is preserved.
Matrix pad_to_pow2(const Matrix& u);

}  // namespace cua
