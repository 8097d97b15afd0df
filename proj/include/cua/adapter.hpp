// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cua/cayley.hpp"
#include "cua/common.hpp"
#include "cua/rng.hpp"

namespace cua {

/// The three adapter regimes. SignConstrained composes the operator with the
/// measurement-compatible magnitude/sign map; Orthogonal applies the rotation
/// directly; Unconstrained trains arbitrary dense blocks.
enum class AdapterMode { SignConstrained, Orthogonal, Unconstrained };

enum class AblationKind { Identity, SignedDiagonal, RandomGaussian, RandomUnitary, RandomPermutation };

const char* to_string(AdapterMode mode);
const char* to_string(AblationKind kind);
AdapterMode adapter_mode_from_string(const std::string& s);
AblationKind ablation_kind_from_string(const std::string& s);

/// The d x d operator inside a CUA layer. Two storage backends:
///  - Cayley: SkewBlockParams + materialised rotation blocks
///    (SignConstrained / Orthogonal regimes; block_dim == dim gives the
///    dense-orthogonal regime),
///  - dense blocks (Unconstrained regime, or a fixed operator installed for
///    an ablation run).
struct AdapterTransform {
    AdapterMode mode = AdapterMode::SignConstrained;
    int dim = 0;
    int block_dim = 0;
    bool fixed = false;  // fixed operators are never trained

    SkewBlockParams params;              // Cayley backend
    BlockDiagonalUnitary q;              // materialised from params
    std::vector<Matrix> dense_blocks;    // dense backend

    bool cayley_backend() const { return mode != AdapterMode::Unconstrained && !fixed; }
    int num_blocks() const { return dim / block_dim; }
    long trainable_param_count() const;

    /// Rebuild the materialised blocks after a parameter update.
    void refresh();

    /// Raw operator application x -> T x (no sign logic).
    Vector apply(const Vector& x) const;
    /// Row-wise application: each row r of `rows` maps to (T r^T)^T.
    Matrix apply_rows(const Matrix& rows) const;

    Matrix to_dense() const;

    /// Identity-initialised trainable transform (K = 0 or A = I).
    static AdapterTransform identity(AdapterMode mode, int dim, int block_dim);
    /// Wrap a fixed full-dimension operator (ablation baselines).
    static AdapterTransform fixed_operator(AdapterMode mode, Matrix op);
};

/// One adapted projection: frozen weight W composed with a transform on its
/// input side.
struct CuaLayer {
    AdapterTransform transform;
    Matrix frozen_weight;  // d_out x d_in, d_in == transform.dim
};

/// elementwise sign with sgn(0) = 0.
inline double sgn(double v) { return (v > 0.0) - (v < 0.0); }

/// |T x| ⊙ sgn(x) — the measurement-compatible map before W.
Vector sign_corrected_map(const AdapterTransform& t, const Vector& x);
Matrix sign_corrected_map_rows(const AdapterTransform& t, const Matrix& rows);

/// y = W (|T x| ⊙ sgn(x)). Requires SignConstrained mode.
Vector forward_sign_constrained(const CuaLayer& layer, const Vector& x);

/// y = W (T x). Requires Orthogonal or Unconstrained mode.
Vector forward_plain(const CuaLayer& layer, const Vector& x);

/// Stochastic / structural baseline operators, deterministic per seed.
Matrix make_ablation(AblationKind kind, int dim, uint64_t seed);

/// Accumulator for dL/dT over a batch, one matrix per block. Converted to
/// parameter gradients once per optimisation step.
struct AdapterGrad {
    std::vector<Matrix> d_op;

    void init(const AdapterTransform& t);
    void zero();
};

/// Backward through the pre-W map. `d_pre` is dL/d(map output); returns
/// dL/dx and accumulates dL/dT into `acc`. The sign map uses the a.e.
/// subgradient d|u|/du = sgn(u) (zero at kinks), and sgn(x) is treated as
/// locally constant.
Vector adapter_backward_map(const AdapterTransform& t, const Vector& x, const Vector& d_pre,
                            AdapterGrad& acc);
Matrix adapter_backward_map_rows(const AdapterTransform& t, const Matrix& rows,
                                 const Matrix& d_pre, AdapterGrad& acc);

/// Fold accumulated dL/dQ through the Cayley transform into flat parameter
/// gradients (Cayley backend only).
std::vector<double> cayley_param_gradient(const AdapterTransform& t, const AdapterGrad& acc);

struct AdapterBackwardResult {
    std::vector<double> grad_params;  // Cayley parameters (Cayley backend)
    std::vector<Matrix> grad_dense;   // per-block dense gradients (dense backend)
    Vector grad_input;                // dL/dx
};

/// Full backward for one layer: upstream is dL/dy with y = W(map(x)).
AdapterBackwardResult adapter_backward(const CuaLayer& layer, const Vector& x,
                                       const Vector& upstream);

}  // namespace cua
