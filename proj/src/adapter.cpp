// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/adapter.hpp"

#include <algorithm>
#include <numeric>

namespace cua {

const char* to_string(AdapterMode mode) {
    switch (mode) {
        case AdapterMode::SignConstrained: return "sign_constrained";
        case AdapterMode::Orthogonal: return "orthogonal";
        case AdapterMode::Unconstrained: return "unconstrained";
    }
    return "?";
}

const char* to_string(AblationKind kind) {
    switch (kind) {
        case AblationKind::Identity: return "identity";
        case AblationKind::SignedDiagonal: return "signed_diagonal";
        case AblationKind::RandomGaussian: return "random_gaussian";
        case AblationKind::RandomUnitary: return "random_unitary";
        case AblationKind::RandomPermutation: return "random_permutation";
    }
    return "?";
}

AdapterMode adapter_mode_from_string(const std::string& s) {
    if (s == "sign_constrained") return AdapterMode::SignConstrained;
    if (s == "orthogonal") return AdapterMode::Orthogonal;
    if (s == "unconstrained") return AdapterMode::Unconstrained;
    throw std::invalid_argument("unknown adapter mode: " + s);
}

AblationKind ablation_kind_from_string(const std::string& s) {
    if (s == "identity") return AblationKind::Identity;
    if (s == "signed_diagonal") return AblationKind::SignedDiagonal;
    if (s == "random_gaussian") return AblationKind::RandomGaussian;
    if (s == "random_unitary") return AblationKind::RandomUnitary;
    if (s == "random_permutation") return AblationKind::RandomPermutation;
    throw std::invalid_argument("unknown ablation kind: " + s);
}

long AdapterTransform::trainable_param_count() const {
    if (fixed) return 0;
    if (cayley_backend()) return params.total_params();
    return static_cast<long>(dense_blocks.size()) * block_dim * block_dim;
}

void AdapterTransform::refresh() {
    if (cayley_backend()) q = assemble_bdu(params);
}

Vector AdapterTransform::apply(const Vector& x) const {
    require(x.size() == dim, "AdapterTransform: input length mismatch");
    if (cayley_backend()) return bdu_apply(q, x);
    Vector y(dim);
    const int b = block_dim;
    for (size_t i = 0; i < dense_blocks.size(); ++i)
        y.segment(static_cast<long>(i) * b, b).noalias() =
            dense_blocks[i] * x.segment(static_cast<long>(i) * b, b);
    return y;
}

Matrix AdapterTransform::apply_rows(const Matrix& rows) const {
    require(rows.cols() == dim, "AdapterTransform: row width mismatch");
    Matrix out(rows.rows(), rows.cols());
    const int b = block_dim;
    const auto& blocks = cayley_backend() ? q.blocks : dense_blocks;
    for (size_t i = 0; i < blocks.size(); ++i)
        out.middleCols(static_cast<long>(i) * b, b).noalias() =
            rows.middleCols(static_cast<long>(i) * b, b) * blocks[i].transpose();
    return out;
}

Matrix AdapterTransform::to_dense() const {
    if (cayley_backend()) return bdu_to_dense(q);
    Matrix out = Matrix::Zero(dim, dim);
    const int b = block_dim;
    for (size_t i = 0; i < dense_blocks.size(); ++i)
        out.block(static_cast<long>(i) * b, static_cast<long>(i) * b, b, b) = dense_blocks[i];
    return out;
}

AdapterTransform AdapterTransform::identity(AdapterMode mode, int dim, int block_dim) {
    require(dim >= 1 && block_dim >= 1 && dim % block_dim == 0,
            "AdapterTransform: dim must be a multiple of block_dim");
    AdapterTransform t;
    t.mode = mode;
    t.dim = dim;
    t.block_dim = block_dim;
    const int k = dim / block_dim;
    if (mode == AdapterMode::Unconstrained) {
        t.dense_blocks.assign(static_cast<size_t>(k), Matrix::Identity(block_dim, block_dim));
    } else {
        t.params = SkewBlockParams::zeros(block_dim, k);
        t.refresh();
    }
    return t;
}

AdapterTransform AdapterTransform::fixed_operator(AdapterMode mode, Matrix op) {
    require(op.rows() == op.cols() && op.rows() >= 1, "fixed_operator: square matrix expected");
    AdapterTransform t;
    t.mode = mode;
    t.dim = static_cast<int>(op.rows());
    t.block_dim = t.dim;
    t.fixed = true;
    t.dense_blocks.push_back(std::move(op));
    return t;
}

Vector sign_corrected_map(const AdapterTransform& t, const Vector& x) {
    Vector u = t.apply(x);
    for (long i = 0; i < u.size(); ++i) u[i] = std::abs(u[i]) * sgn(x[i]);
    return u;
}

Matrix sign_corrected_map_rows(const AdapterTransform& t, const Matrix& rows) {
    Matrix u = t.apply_rows(rows);
    for (long j = 0; j < u.cols(); ++j)
        for (long i = 0; i < u.rows(); ++i) u(i, j) = std::abs(u(i, j)) * sgn(rows(i, j));
    return u;
}

Vector forward_sign_constrained(const CuaLayer& layer, const Vector& x) {
    require(layer.transform.mode == AdapterMode::SignConstrained,
            "forward_sign_constrained: layer is not sign-constrained");
    require(layer.frozen_weight.cols() == x.size(),
            "forward_sign_constrained: input length mismatch");
    return layer.frozen_weight * sign_corrected_map(layer.transform, x);
}

Vector forward_plain(const CuaLayer& layer, const Vector& x) {
    require(layer.transform.mode != AdapterMode::SignConstrained,
            "forward_plain: sign-constrained layer requires the sign-corrected forward");
    require(layer.frozen_weight.cols() == x.size(), "forward_plain: input length mismatch");
    return layer.frozen_weight * layer.transform.apply(x);
}

Matrix make_ablation(AblationKind kind, int dim, uint64_t seed) {
    require(dim >= 1, "make_ablation: dim must be positive");
    Rng rng = Rng::derive(seed, 0xab1a710a, static_cast<uint64_t>(kind));
    switch (kind) {
        case AblationKind::Identity:
            return Matrix::Identity(dim, dim);
        case AblationKind::SignedDiagonal: {
            Matrix m = Matrix::Zero(dim, dim);
            for (int i = 0; i < dim; ++i) m(i, i) = rng.next_u64() & 1 ? 1.0 : -1.0;
            return m;
        }
        case AblationKind::RandomGaussian: {
            Matrix m(dim, dim);
            const double s = 1.0 / std::sqrt(static_cast<double>(dim));
            for (int j = 0; j < dim; ++j)
                for (int i = 0; i < dim; ++i) m(i, j) = s * rng.gaussian();
            return m;
        }
        case AblationKind::RandomUnitary: {
            Matrix g(dim, dim);
            for (int j = 0; j < dim; ++j)
                for (int i = 0; i < dim; ++i) g(i, j) = rng.gaussian();
            Eigen::HouseholderQR<Matrix> qr(g);
            Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
            const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
            for (int j = 0; j < dim; ++j)
                if (r(j, j) < 0) q.col(j) = -q.col(j);
            return q;
        }
        case AblationKind::RandomPermutation: {
            std::vector<int> perm(static_cast<size_t>(dim));
            std::iota(perm.begin(), perm.end(), 0);
            for (int i = dim - 1; i > 0; --i)
                std::swap(perm[static_cast<size_t>(i)],
                          perm[static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)))]);
            Matrix m = Matrix::Zero(dim, dim);
            for (int j = 0; j < dim; ++j) m(perm[static_cast<size_t>(j)], j) = 1.0;
            return m;
        }
    }
    throw std::logic_error("make_ablation: unreachable");
}

void AdapterGrad::init(const AdapterTransform& t) {
    d_op.assign(static_cast<size_t>(t.num_blocks()),
                Matrix::Zero(t.block_dim, t.block_dim));
}

void AdapterGrad::zero() {
    for (auto& m : d_op) m.setZero();
}

namespace {

// Shared core: given dL/dU with U = T x (per block), accumulate dL/dT and
// return dL/dx.
Vector backprop_operator(const AdapterTransform& t, const Vector& x, const Vector& du,
                         AdapterGrad& acc) {
    const int b = t.block_dim;
    const auto& blocks = t.cayley_backend() ? t.q.blocks : t.dense_blocks;
    Vector dx(x.size());
    for (size_t i = 0; i < blocks.size(); ++i) {
        const long off = static_cast<long>(i) * b;
        acc.d_op[i].noalias() += du.segment(off, b) * x.segment(off, b).transpose();
        dx.segment(off, b).noalias() = blocks[i].transpose() * du.segment(off, b);
    }
    return dx;
}

Matrix backprop_operator_rows(const AdapterTransform& t, const Matrix& rows, const Matrix& du,
                              AdapterGrad& acc) {
    const int b = t.block_dim;
    const auto& blocks = t.cayley_backend() ? t.q.blocks : t.dense_blocks;
    Matrix dx(rows.rows(), rows.cols());
    for (size_t i = 0; i < blocks.size(); ++i) {
        const long off = static_cast<long>(i) * b;
        acc.d_op[i].noalias() += du.middleCols(off, b).transpose() * rows.middleCols(off, b);
        dx.middleCols(off, b).noalias() = du.middleCols(off, b) * blocks[i];
    }
    return dx;
}

}  // namespace

Vector adapter_backward_map(const AdapterTransform& t, const Vector& x, const Vector& d_pre,
                            AdapterGrad& acc) {
    require(x.size() == t.dim && d_pre.size() == t.dim, "adapter_backward_map: size mismatch");
    if (t.mode == AdapterMode::SignConstrained) {
        Vector u = t.apply(x);
        Vector du(u.size());
        for (long i = 0; i < u.size(); ++i) du[i] = d_pre[i] * sgn(x[i]) * sgn(u[i]);
        return backprop_operator(t, x, du, acc);
    }
    return backprop_operator(t, x, d_pre, acc);
}

Matrix adapter_backward_map_rows(const AdapterTransform& t, const Matrix& rows,
                                 const Matrix& d_pre, AdapterGrad& acc) {
    require(rows.cols() == t.dim && d_pre.cols() == t.dim && rows.rows() == d_pre.rows(),
            "adapter_backward_map_rows: shape mismatch");
    if (t.mode == AdapterMode::SignConstrained) {
        Matrix u = t.apply_rows(rows);
        Matrix du(u.rows(), u.cols());
        for (long j = 0; j < u.cols(); ++j)
            for (long i = 0; i < u.rows(); ++i)
                du(i, j) = d_pre(i, j) * sgn(rows(i, j)) * sgn(u(i, j));
        return backprop_operator_rows(t, rows, du, acc);
    }
    return backprop_operator_rows(t, rows, d_pre, acc);
}

std::vector<double> cayley_param_gradient(const AdapterTransform& t, const AdapterGrad& acc) {
    require(t.cayley_backend(), "cayley_param_gradient: transform has no Cayley backend");
    return cayley_gradient(t.params, acc.d_op);
}

AdapterBackwardResult adapter_backward(const CuaLayer& layer, const Vector& x,
                                       const Vector& upstream) {
    const auto& t = layer.transform;
    require(upstream.size() == layer.frozen_weight.rows(),
            "adapter_backward: upstream length mismatch");
    AdapterGrad acc;
    acc.init(t);
    const Vector d_pre = layer.frozen_weight.transpose() * upstream;
    AdapterBackwardResult out;
    out.grad_input = adapter_backward_map(t, x, d_pre, acc);
    if (t.cayley_backend())
        out.grad_params = cayley_param_gradient(t, acc);
    else
        out.grad_dense = acc.d_op;
    return out;
}

}  // namespace cua
