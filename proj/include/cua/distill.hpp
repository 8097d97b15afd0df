// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cua/common.hpp"
#include "cua/corpus.hpp"
#include "cua/toy_lm.hpp"

namespace cua {

inline constexpr int kIgnoreLabel = -1;

/// Distillation loss configuration and optimiser schedule.
struct TrainConfig {
    double alpha_kd = 0.1;
    double beta = 2.0;
    double temperature = 1.5;
    double learning_rate = 1e-4;  // adaptive-moment steps with warmup + linear decay
    int warmup_steps = 20;
    int epochs = 1;
    int batch_size = 8;
    int max_steps = -1;  // overrides the epoch-derived step count when >= 0
    uint64_t seed = 0;

    void validate() const;
};

struct KdLossResult {
    double total = 0;
    double kd_term = 0;  // alpha * T^2 * KL(teacher || student), mean over counted tokens
    double ce_term = 0;  // beta * CE(student, labels), mean over counted tokens
    long counted = 0;
    Matrix d_student;  // gradient of total w.r.t. student logits
};

/// Combined distillation objective. Positions labelled kIgnoreLabel
/// contribute to neither term.
KdLossResult kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                     std::span<const int> labels, const TrainConfig& cfg);

/// Rank-truncate every projection weight (the seven per block) via SVD;
/// embeddings, gains and the head are untouched.
ToyLm compress_svd(const ToyLm& model, double rank_fraction);

/// Install identity-initialised adapters. The adapted forward equals the
/// unadapted forward exactly at initialisation.
void insert_adapters(ToyLm& model, std::span<const AdapterSite> sites, AdapterMode mode,
                     int block_dim);

/// Install a fixed (non-trainable) operator at one site, applied through the
/// sign-corrected map. Used by the ablation study.
void insert_fixed_operator(ToyLm& model, const AdapterSite& site, const Matrix& op);

void remove_adapters(ToyLm& model);

/// exp(mean token negative log likelihood) over consecutive non-overlapping
/// context windows of the byte stream.
double perplexity(const ToyLm& model, std::span<const uint8_t> bytes);

struct PretrainConfig {
    double learning_rate = 3e-3;
    int warmup_steps = 50;
    int steps = 1500;
    int batch_size = 8;
    uint64_t seed = 1;
};

/// Cross-entropy pretraining of every backbone weight (harness plumbing to
/// obtain a teacher with real structure).
std::vector<double> pretrain_lm(ToyLm& model, std::span<const uint8_t> train_bytes,
                                const PretrainConfig& cfg);

struct TrainStepRecord {
    long step = 0;
    double loss = 0, kd_term = 0, ce_term = 0, lr = 0;
};

/// Divergence guard on the rolling training-loss mean (window 50): once the
/// window is full, a mean more than 25% above its historical minimum aborts
/// the run.
class LossTrendGuard {
public:
    void push(double loss, long step);

private:
    std::vector<double> window_;
    size_t next_ = 0;
    double best_ = 1e300;
};

struct TrainReport {
    std::vector<TrainStepRecord> history;
    double initial_heldout_ppl = 0;
    double final_heldout_ppl = 0;
    uint64_t checksum_before = 0;
    uint64_t checksum_after = 0;
    long steps_run = 0;
};

/// Distillation training of adapter parameters only; backbone weights are
/// untouched (checksums recorded in the report). Aborts with a diagnostic on
/// divergence (non-finite loss, or the 50-step rolling mean rising more than
/// 25% above its historical minimum).
TrainReport train_adapters(ToyLm& student, const ToyLm& teacher, const Corpus& corpus,
                           const TrainConfig& cfg);

struct SensitivityScore {
    AdapterSite site;
    double bdu_compatibility = 0;  // rho_G
    double grad_norm_init = 0;
    double energy_fraction = 0;
    double position_penalty = 0;
    double composite = 0;
};

/// Composite site ranking: mean of the min-max-normalised positive
/// components minus the depth penalty; sites with zero probe activation rank
/// strictly last; descending order with deterministic index tie-break.
std::vector<SensitivityScore> sensitivity_rank(const ToyLm& model,
                                               const std::vector<std::vector<int>>& probe_windows,
                                               int block_dim);

struct NoiseSweepPoint {
    double lambda = 0;
    double ppl = 0;
};

/// Held-out perplexity with every sign-constrained adapter routed through the
/// exact-probability emulated path at each aggregated depolarising lambda
/// (readout and shot noise off, so lambda = 0 reproduces the noiseless value).
std::vector<NoiseSweepPoint> noise_phase_sweep(ToyLm& model, std::span<const uint8_t> bytes,
                                               std::span<const double> lambda_grid);

/// Deterministic batch of token windows drawn from a byte stream.
std::vector<std::vector<int>> sample_windows(std::span<const uint8_t> bytes, int window,
                                             int count, Rng& rng);

}  // namespace cua
