// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cua/common.hpp"
#include "cua/rng.hpp"

namespace cua {

/// Free parameters of a block-diagonal orthogonal operator: for each of the
/// k blocks, the b(b-1)/2 upper-triangular entries (row-major above the
/// diagonal) of a skew-symmetric generator K_i.
struct SkewBlockParams {
    int block_dim = 0;           // b
    int num_blocks = 0;          // k
    std::vector<double> values;  // k * b(b-1)/2 entries

    static SkewBlockParams zeros(int block_dim, int num_blocks);
    static SkewBlockParams random(int block_dim, int num_blocks, double scale, Rng& rng);

    int params_per_block() const { return block_dim * (block_dim - 1) / 2; }
    long total_params() const { return static_cast<long>(num_blocks) * params_per_block(); }
    long input_dim() const { return static_cast<long>(num_blocks) * block_dim; }

    std::span<const double> block_values(int block_index) const;
    std::span<double> block_values(int block_index);

    /// Shape / finiteness check; throws on violation.
    void validate() const;
};

/// Q = Q_1 (+) Q_2 (+) ... (+) Q_k, each block a b x b rotation.
struct BlockDiagonalUnitary {
    int block_dim = 0;
    std::vector<Matrix> blocks;

    long input_dim() const { return static_cast<long>(blocks.size()) * block_dim; }
};

/// A single dense m x m orthogonal operator (full-input-dimension regime).
struct DenseOrthogonal {
    Matrix matrix;
};

/// Validated wrapper: throws unless ||Q^T Q - I||_F <= 1e-10.
DenseOrthogonal make_dense_orthogonal(Matrix m);

/// Materialise the skew-symmetric generator of one block. The returned
/// matrix is exactly antisymmetric by construction.
Matrix skew_from_params(const SkewBlockParams& params, int block_index);

/// Q = (I - K/2)(I + K/2)^{-1}. The input must be square and skew-symmetric
/// (checked to 1e-10); the result is a rotation (det +1, no eigenvalue -1).
/// The inverse is applied through a pivoted solve, never formed explicitly.
Matrix cayley_transform(const Matrix& skew);

/// Inverse map: recovers K with cayley_transform(K) == Q. Throws
/// std::domain_error when Q has an eigenvalue within 1e-8 of -1 (the Cayley
/// chart does not cover that set).
Matrix cayley_inverse(const Matrix& orthogonal);

/// Build all k blocks from the parameter vector.
BlockDiagonalUnitary assemble_bdu(const SkewBlockParams& params);

/// Apply the block-diagonal operator to a vector of length k*b.
Vector bdu_apply(const BlockDiagonalUnitary& bdu, const Vector& x);

/// Dense d x d materialisation (zeros off the block diagonal).
Matrix bdu_to_dense(const BlockDiagonalUnitary& bdu);

/// Chain rule through the Cayley transform for one block: given
/// G = dL/dQ, returns dL/dK as a full (unprojected) matrix.
/// dQ = -1/2 (I + Q) dK (I + K/2)^{-1}, so
/// dL/dK = -1/2 (I + Q)^T G (I + K/2)^{-T}.
Matrix cayley_grad_generator(const Matrix& q, const Matrix& k_skew, const Matrix& upstream);

/// Project a full dL/dK matrix onto the free upper-triangular parameters
/// (dL/dtheta_ij = [dL/dK]_ij - [dL/dK]_ji for i < j).
void project_skew_gradient(const Matrix& grad_k, std::span<double> out);

/// Gradient of a scalar loss with respect to all Cayley parameters, given
/// the per-block upstream gradients dL/dQ_i. Matches central finite
/// differences to 1e-6 relative.
std::vector<double> cayley_gradient(const SkewBlockParams& params,
                                    std::span<const Matrix> upstream_per_block);

}  // namespace cua
