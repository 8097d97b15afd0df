// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cua/adapter.hpp"
#include "cua/common.hpp"
#include "cua/noise.hpp"
#include "cua/qemu.hpp"
#include "cua/rng.hpp"

namespace cua {

struct ToyLmConfig {
    int num_layers = 2;
    int width = 32;  // residual stream, divisible by the adapter block size
    int num_heads = 4;
    int vocab_size = 256;  // byte-level
    int context_length = 64;
    int mlp_hidden = 64;

    void validate() const;
};

/// The seven projection sites of one block.
enum class ProjKind { Q = 0, K, V, O, Gate, Up, Down };
inline constexpr int kNumProjKinds = 7;

const char* to_string(ProjKind kind);
ProjKind proj_kind_from_string(const std::string& s);

struct AdapterSite {
    int layer = 0;
    ProjKind proj = ProjKind::Q;

    int flat_index() const { return layer * kNumProjKinds + static_cast<int>(proj); }
    bool operator==(const AdapterSite&) const = default;
};

std::vector<AdapterSite> all_sites(const ToyLmConfig& cfg);

/// Inference-time routing of sign-constrained adapters through the emulated
/// measurement pipeline. Off by default (exact classical math).
struct EmulationSettings {
    bool enabled = false;
    EmulationPath path = EmulationPath::ExactProb;
    double lambda = 0.0;      // aggregated depolarising parameter
    bool apply_readout = false;
    NoiseModel noise;         // p_readout / n_shots for the emulated path
    uint64_t seed = 0;
    uint64_t stream_base = 0; // callers advance this per evaluation window
};

/// Decoder-only causal byte LM with RMSNorm, multi-head attention and a
/// SiLU-gated MLP; every projection can carry an adapter on its input side.
class ToyLm {
public:
    struct LayerWeights {
        Vector attn_gain, mlp_gain;
        Matrix wq, wk, wv, wo;    // width x width
        Matrix wgate, wup;        // hidden x width
        Matrix wdown;             // width x hidden
        std::array<std::optional<AdapterTransform>, kNumProjKinds> adapters;
    };

    struct Cache {
        Matrix x0;
        struct LayerCache {
            Matrix x_in;
            Matrix xn_attn;  // normalised rows (pre-gain)
            Vector inv_r_attn;
            Matrix a;        // gained, input of q/k/v
            Matrix aq, ak, av;  // adapter outputs (empty when not adapted)
            Matrix q, k, v;
            std::vector<Matrix> attn_probs;  // one S x S matrix per head
            Matrix ctx;
            Matrix ao;
            Matrix xn_mlp;
            Vector inv_r_mlp;
            Matrix b;
            Matrix ag, au;
            Matrix gate_pre, up_pre;   // projections before the nonlinearity
            Matrix hc;                 // silu(gate) .* up
            Matrix ad;
            Matrix x_mid;
        };
        std::vector<LayerCache> layers;
        Matrix xn_final;
        Vector inv_r_final;
        Matrix f;
    };

    struct Grads {
        Matrix embed;
        struct LayerGrads {
            Vector attn_gain, mlp_gain;
            Matrix wq, wk, wv, wo, wgate, wup, wdown;
            std::array<AdapterGrad, kNumProjKinds> adapters;
        };
        std::vector<LayerGrads> layers;
        Vector final_gain;
        Matrix head;

        void init(const ToyLm& model);
        void zero();
    };

    ToyLmConfig cfg;
    Matrix embed;  // vocab x width
    std::vector<LayerWeights> layers;
    Vector final_gain;
    Matrix head;  // vocab x width
    EmulationSettings emu;

    static ToyLm build(const ToyLmConfig& cfg, uint64_t seed);

    /// Forward over one token window; returns S x vocab logits. The cache is
    /// optional and only needed for a subsequent backward pass.
    Matrix forward(std::span<const int> tokens, Cache* cache) const;

    /// Accumulates gradients for all weights and adapter parameters.
    void backward(std::span<const int> tokens, const Cache& cache, const Matrix& d_logits,
                  Grads& grads) const;

    const std::optional<AdapterTransform>& adapter_at(const AdapterSite& site) const;
    std::optional<AdapterTransform>& adapter_at(const AdapterSite& site);
    int proj_input_dim(ProjKind kind) const;
    const Matrix& proj_weight(const AdapterSite& site) const;
    Matrix& proj_weight(const AdapterSite& site);

    /// Hash of every backbone tensor (everything except adapters).
    uint64_t backbone_checksum() const;
    long backbone_param_count() const;
    long adapter_param_count() const;

    /// Backbone tensors in a fixed enumeration order (shared with Grads).
    std::vector<Matrix*> backbone_matrices();
    std::vector<Vector*> backbone_vectors();
};

/// Deterministic model blob ("TLM1"), adapters excluded. Bit-exact round
/// trip.
void save_backbone_file(const std::string& path, const ToyLm& model);
ToyLm load_backbone_file(const std::string& path);

}  // namespace cua
