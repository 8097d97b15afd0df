// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/cayley.hpp"

#include <cmath>

namespace cua {

SkewBlockParams SkewBlockParams::zeros(int block_dim, int num_blocks) {
    require(block_dim >= 1, "SkewBlockParams: block_dim must be positive");
    require(num_blocks >= 1, "SkewBlockParams: num_blocks must be positive");
    SkewBlockParams p;
    p.block_dim = block_dim;
    p.num_blocks = num_blocks;
    p.values.assign(static_cast<size_t>(p.total_params()), 0.0);
    return p;
}

SkewBlockParams SkewBlockParams::random(int block_dim, int num_blocks, double scale, Rng& rng) {
    SkewBlockParams p = zeros(block_dim, num_blocks);
    for (auto& v : p.values) v = rng.uniform(-scale, scale);
    return p;
}

std::span<const double> SkewBlockParams::block_values(int block_index) const {
    require(block_index >= 0 && block_index < num_blocks,
            "SkewBlockParams: block index out of range");
    const size_t n = static_cast<size_t>(params_per_block());
    return {values.data() + n * static_cast<size_t>(block_index), n};
}

std::span<double> SkewBlockParams::block_values(int block_index) {
    require(block_index >= 0 && block_index < num_blocks,
            "SkewBlockParams: block index out of range");
    const size_t n = static_cast<size_t>(params_per_block());
    return {values.data() + n * static_cast<size_t>(block_index), n};
}

void SkewBlockParams::validate() const {
    require(block_dim >= 1 && num_blocks >= 1, "SkewBlockParams: empty shape");
    require(values.size() == static_cast<size_t>(total_params()),
            "SkewBlockParams: value count does not match k*b(b-1)/2");
    for (double v : values)
        require(std::isfinite(v), "SkewBlockParams: non-finite parameter");
}

Matrix skew_from_params(const SkewBlockParams& params, int block_index) {
    params.validate();
    const int b = params.block_dim;
    const auto vals = params.block_values(block_index);
    Matrix k = Matrix::Zero(b, b);
    size_t idx = 0;
    for (int i = 0; i < b; ++i) {
        for (int j = i + 1; j < b; ++j) {
            k(i, j) = vals[idx];
            k(j, i) = -vals[idx];
            ++idx;
        }
    }
    return k;
}

namespace {

void check_skew(const Matrix& k) {
    require(k.rows() == k.cols(), "cayley_transform: matrix must be square");
    const double scale = std::max(1.0, k.norm());
    require((k + k.transpose()).norm() <= 1e-10 * scale,
            "cayley_transform: matrix is not skew-symmetric");
}

}  // namespace

Matrix cayley_transform(const Matrix& skew) {
    check_skew(skew);
    const auto b = skew.rows();
    const Matrix half = 0.5 * skew;
    const Matrix m = Matrix::Identity(b, b) + half;
    // Solve Q M = I - K/2, i.e. M^T Q^T = (I - K/2)^T, with partial pivoting.
    Eigen::PartialPivLU<Matrix> lu(m.transpose());
    Matrix qt = lu.solve((Matrix::Identity(b, b) - half).transpose());
    return qt.transpose();
}

Matrix cayley_inverse(const Matrix& orthogonal) {
    require(orthogonal.rows() == orthogonal.cols(), "cayley_inverse: matrix must be square");
    const auto b = orthogonal.rows();
    const Matrix m = Matrix::Identity(b, b) + orthogonal;
    Eigen::FullPivLU<Matrix> lu(m);
    // Eigenvalue -1 makes (I + Q) singular; detect via pivot magnitude.
    const double pivot_floor = 1e-8 * std::max(1.0, m.norm());
    if (lu.rank() < b || lu.matrixLU().diagonal().cwiseAbs().minCoeff() < pivot_floor)
        throw std::domain_error("cayley_inverse: operator has an eigenvalue at -1");
    // Q = (I - K/2)(I + K/2)^{-1}  =>  K = 2 (I + Q)^{-1} (I - Q).
    Matrix k = 2.0 * lu.solve(Matrix::Identity(b, b) - orthogonal);
    // Symmetrise away the solve round-off so the result is exactly skew.
    return 0.5 * (k - k.transpose().eval());
}

DenseOrthogonal make_dense_orthogonal(Matrix m) {
    require(m.rows() == m.cols() && m.rows() >= 1, "make_dense_orthogonal: square matrix expected");
    const auto n = m.rows();
    require((m.transpose() * m - Matrix::Identity(n, n)).norm() <= 1e-10,
            "make_dense_orthogonal: operator is not orthogonal");
    return DenseOrthogonal{std::move(m)};
}

BlockDiagonalUnitary assemble_bdu(const SkewBlockParams& params) {
    params.validate();
    BlockDiagonalUnitary bdu;
    bdu.block_dim = params.block_dim;
    bdu.blocks.reserve(static_cast<size_t>(params.num_blocks));
    for (int i = 0; i < params.num_blocks; ++i)
        bdu.blocks.push_back(cayley_transform(skew_from_params(params, i)));
    return bdu;
}

Vector bdu_apply(const BlockDiagonalUnitary& bdu, const Vector& x) {
    require(x.size() == bdu.input_dim(), "bdu_apply: input length does not match k*b");
    const int b = bdu.block_dim;
    Vector y(x.size());
    for (size_t i = 0; i < bdu.blocks.size(); ++i)
        y.segment(static_cast<long>(i) * b, b).noalias() =
            bdu.blocks[i] * x.segment(static_cast<long>(i) * b, b);
    return y;
}

Matrix bdu_to_dense(const BlockDiagonalUnitary& bdu) {
    const long d = bdu.input_dim();
    const int b = bdu.block_dim;
    Matrix out = Matrix::Zero(d, d);
    for (size_t i = 0; i < bdu.blocks.size(); ++i)
        out.block(static_cast<long>(i) * b, static_cast<long>(i) * b, b, b) = bdu.blocks[i];
    return out;
}

Matrix cayley_grad_generator(const Matrix& q, const Matrix& k_skew, const Matrix& upstream) {
    const auto b = q.rows();
    const Matrix m = Matrix::Identity(b, b) + 0.5 * k_skew;
    // dL/dK = -1/2 (I + Q)^T G M^{-T}; computed as a solve against M.
    const Matrix lhs = -0.5 * (Matrix::Identity(b, b) + q).transpose() * upstream;
    Eigen::PartialPivLU<Matrix> lu(m);
    return lu.solve(lhs.transpose()).transpose();
}

void project_skew_gradient(const Matrix& grad_k, std::span<double> out) {
    const auto b = grad_k.rows();
    size_t idx = 0;
    for (long i = 0; i < b; ++i)
        for (long j = i + 1; j < b; ++j)
            out[idx++] = grad_k(i, j) - grad_k(j, i);
}

std::vector<double> cayley_gradient(const SkewBlockParams& params,
                                    std::span<const Matrix> upstream_per_block) {
    params.validate();
    require(upstream_per_block.size() == static_cast<size_t>(params.num_blocks),
            "cayley_gradient: one upstream matrix per block expected");
    std::vector<double> grad(static_cast<size_t>(params.total_params()), 0.0);
    const size_t per_block = static_cast<size_t>(params.params_per_block());
    for (int i = 0; i < params.num_blocks; ++i) {
        const Matrix k = skew_from_params(params, i);
        const Matrix q = cayley_transform(k);
        const Matrix gk = cayley_grad_generator(q, k, upstream_per_block[static_cast<size_t>(i)]);
        project_skew_gradient(gk, {grad.data() + per_block * static_cast<size_t>(i), per_block});
    }
    return grad;
}

}  // namespace cua
