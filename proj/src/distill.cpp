// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/distill.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

namespace cua {

void TrainConfig::validate() const {
    require(alpha_kd >= 0.0 && beta >= 0.0, "TrainConfig: loss weights must be nonnegative");
    require(temperature > 0.0, "TrainConfig: temperature must be positive");
    require(learning_rate > 0.0, "TrainConfig: learning rate must be positive");
    require(batch_size >= 1 && epochs >= 0, "TrainConfig: bad schedule");
    require(warmup_steps >= 0, "TrainConfig: negative warmup");
}

namespace {

// Row log-softmax, stable.
void log_softmax_row(const Eigen::RowVectorXd& logits, Eigen::RowVectorXd& out) {
    const double mx = logits.maxCoeff();
    out = logits.array() - mx;
    const double lse = std::log(out.array().exp().sum());
    out.array() -= lse;
}

}  // namespace

KdLossResult kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                     std::span<const int> labels, const TrainConfig& cfg) {
    cfg.validate();
    require(student_logits.rows() == teacher_logits.rows() &&
                student_logits.cols() == teacher_logits.cols(),
            "kd_loss: student/teacher shapes differ");
    require(static_cast<long>(labels.size()) == student_logits.rows(),
            "kd_loss: one label per row expected");

    KdLossResult res;
    res.d_student = Matrix::Zero(student_logits.rows(), student_logits.cols());
    const long vocab = student_logits.cols();
    const double t = cfg.temperature;

    long counted = 0;
    for (long s = 0; s < student_logits.rows(); ++s) {
        const int label = labels[static_cast<size_t>(s)];
        if (label == kIgnoreLabel) continue;
        require(label >= 0 && label < vocab, "kd_loss: label out of range");
        ++counted;
    }
    res.counted = counted;
    if (counted == 0) return res;
    const double inv_n = 1.0 / static_cast<double>(counted);

    double ce_sum = 0.0, kl_sum = 0.0;
    Eigen::RowVectorXd ls, ls_t, lt_t;
    for (long s = 0; s < student_logits.rows(); ++s) {
        const int label = labels[static_cast<size_t>(s)];
        if (label == kIgnoreLabel) continue;

        log_softmax_row(student_logits.row(s), ls);
        ce_sum += -ls[label];
        // d(CE)/d(logits) = softmax - onehot
        res.d_student.row(s) += cfg.beta * inv_n * ls.array().exp().matrix();
        res.d_student(s, label) -= cfg.beta * inv_n;

        if (cfg.alpha_kd > 0.0) {
            log_softmax_row(student_logits.row(s) / t, ls_t);
            log_softmax_row(teacher_logits.row(s) / t, lt_t);
            const Eigen::RowVectorXd pt = lt_t.array().exp().matrix();
            const Eigen::RowVectorXd ps = ls_t.array().exp().matrix();
            kl_sum += (pt.array() * (lt_t - ls_t).array()).sum();
            // d(alpha T^2 KL)/d(logits) = alpha T (ps - pt)
            res.d_student.row(s) += cfg.alpha_kd * t * inv_n * (ps - pt);
        }
    }
    res.ce_term = cfg.beta * ce_sum * inv_n;
    res.kd_term = cfg.alpha_kd * t * t * kl_sum * inv_n;
    res.total = res.ce_term + res.kd_term;
    return res;
}

ToyLm compress_svd(const ToyLm& model, double rank_fraction) {
    require(rank_fraction > 0.0 && rank_fraction < 1.0 + 1e-9,
            "compress_svd: rank fraction must be in (0, 1)");
    ToyLm out = model;
    for (auto& layer : out.layers) {
        for (Matrix* w : {&layer.wq, &layer.wk, &layer.wv, &layer.wo, &layer.wgate, &layer.wup,
                          &layer.wdown}) {
            const long full = std::min(w->rows(), w->cols());
            const long rank = std::clamp<long>(
                static_cast<long>(std::ceil(rank_fraction * static_cast<double>(full))), 1, full);
            if (rank == full) continue;
            Eigen::JacobiSVD<Matrix> svd(*w, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const auto& sv = svd.singularValues();
            *w = svd.matrixU().leftCols(rank) * sv.head(rank).asDiagonal() *
                 svd.matrixV().leftCols(rank).transpose();
        }
    }
    return out;
}

void insert_adapters(ToyLm& model, std::span<const AdapterSite> sites, AdapterMode mode,
                     int block_dim) {
    for (const auto& site : sites) {
        require(site.layer >= 0 && site.layer < model.cfg.num_layers,
                "insert_adapters: layer out of range");
        const int dim = model.proj_input_dim(site.proj);
        require(dim % block_dim == 0, "insert_adapters: block size does not divide input dim");
        model.adapter_at(site) = AdapterTransform::identity(mode, dim, block_dim);
    }
}

void insert_fixed_operator(ToyLm& model, const AdapterSite& site, const Matrix& op) {
    const int dim = model.proj_input_dim(site.proj);
    require(op.rows() == dim && op.cols() == dim, "insert_fixed_operator: shape mismatch");
    model.adapter_at(site) =
        AdapterTransform::fixed_operator(AdapterMode::SignConstrained, op);
}

void remove_adapters(ToyLm& model) {
    for (auto& layer : model.layers)
        for (auto& a : layer.adapters) a.reset();
}

double perplexity(const ToyLm& model, std::span<const uint8_t> bytes) {
    require(bytes.size() >= 2, "perplexity: corpus too small");
    const int ctx = model.cfg.context_length;
    double nll = 0.0;
    long predicted = 0;
    std::vector<int> tokens;
    Eigen::RowVectorXd ls;
    for (size_t pos = 0; pos + 2 <= bytes.size(); pos += static_cast<size_t>(ctx)) {
        const size_t len = std::min<size_t>(static_cast<size_t>(ctx), bytes.size() - pos);
        if (len < 2) break;
        tokens.assign(bytes.begin() + static_cast<long>(pos),
                      bytes.begin() + static_cast<long>(pos + len));
        const Matrix logits = model.forward(tokens, nullptr);
        for (size_t s = 0; s + 1 < len; ++s) {
            log_softmax_row(logits.row(static_cast<long>(s)), ls);
            nll += -ls[tokens[s + 1]];
            ++predicted;
        }
    }
    require(predicted > 0, "perplexity: no predictable tokens");
    return std::exp(nll / static_cast<double>(predicted));
}

std::vector<std::vector<int>> sample_windows(std::span<const uint8_t> bytes, int window,
                                             int count, Rng& rng) {
    require(bytes.size() > static_cast<size_t>(window), "sample_windows: stream shorter than window");
    std::vector<std::vector<int>> out;
    out.reserve(static_cast<size_t>(count));
    const uint64_t span = bytes.size() - static_cast<size_t>(window);
    for (int i = 0; i < count; ++i) {
        const size_t start = static_cast<size_t>(rng.below(span + 1));
        std::vector<int> w(static_cast<size_t>(window));
        for (int j = 0; j < window; ++j) w[static_cast<size_t>(j)] = bytes[start + static_cast<size_t>(j)];
        out.push_back(std::move(w));
    }
    return out;
}

namespace {

double lr_schedule(double base, int warmup, long step, long total) {
    if (warmup > 0 && step < warmup)
        return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
    if (total <= warmup) return base;
    const double remain =
        static_cast<double>(total - step) / static_cast<double>(total - warmup);
    return base * std::max(0.0, remain);
}

class Adam {
public:
    int register_size(long n) {
        m_.emplace_back(Vector::Zero(n));
        v_.emplace_back(Vector::Zero(n));
        return static_cast<int>(m_.size()) - 1;
    }

    void begin_step() { ++t_; }

    void update(int slot, double* w, const double* g, long n, double lr) {
        Vector& m = m_[static_cast<size_t>(slot)];
        Vector& v = v_[static_cast<size_t>(slot)];
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (long i = 0; i < n; ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    std::vector<Vector> m_, v_;
    long t_ = 0;
};

std::vector<int> next_token_labels(const std::vector<int>& window) {
    std::vector<int> labels(window.size(), kIgnoreLabel);
    for (size_t s = 0; s + 1 < window.size(); ++s) labels[s] = window[s + 1];
    return labels;
}

}  // namespace

void LossTrendGuard::push(double loss, long step) {
    constexpr size_t kWindow = 50;
    if (window_.size() < kWindow) {
        window_.push_back(loss);
    } else {
        window_[next_] = loss;
        next_ = (next_ + 1) % kWindow;
    }
    if (window_.size() < kWindow) return;
    double mean = 0.0;
    for (double v : window_) mean += v;
    mean /= static_cast<double>(window_.size());
    best_ = std::min(best_, mean);
    if (mean > 1.25 * best_ + 1e-12) {
        std::ostringstream msg;
        msg << "training aborted: smoothed loss " << mean << " rose above minimum " << best_
            << " at step " << step;
        throw std::runtime_error(msg.str());
    }
}

std::vector<double> pretrain_lm(ToyLm& model, std::span<const uint8_t> train_bytes,
                                const PretrainConfig& cfg) {
    require(cfg.steps >= 0 && cfg.batch_size >= 1, "pretrain_lm: bad schedule");
    Adam adam;
    auto mats = model.backbone_matrices();
    auto vecs = model.backbone_vectors();
    std::vector<int> mat_slots, vec_slots;
    for (Matrix* m : mats) mat_slots.push_back(adam.register_size(m->size()));
    for (Vector* v : vecs) vec_slots.push_back(adam.register_size(v->size()));

    TrainConfig loss_cfg;
    loss_cfg.alpha_kd = 0.0;
    loss_cfg.beta = 1.0;

    ToyLm::Grads grads;
    grads.init(model);
    std::vector<double> history;
    history.reserve(static_cast<size_t>(cfg.steps));
    LossTrendGuard guard;

    for (long step = 0; step < cfg.steps; ++step) {
        Rng rng = Rng::derive(cfg.seed, 0x9e7, static_cast<uint64_t>(step));
        const auto windows =
            sample_windows(train_bytes, model.cfg.context_length, cfg.batch_size, rng);
        grads.zero();
        double loss = 0.0;
        const double inv_batch = 1.0 / static_cast<double>(windows.size());
        for (const auto& w : windows) {
            ToyLm::Cache cache;
            const Matrix logits = model.forward(w, &cache);
            const auto labels = next_token_labels(w);
            auto res = kd_loss(logits, logits, labels, loss_cfg);
            loss += res.total * inv_batch;
            res.d_student *= inv_batch;
            model.backward(w, cache, res.d_student, grads);
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("pretrain_lm: loss diverged at step " +
                                     std::to_string(step));
        const double lr = lr_schedule(cfg.learning_rate, cfg.warmup_steps, step, cfg.steps);
        adam.begin_step();
        // Gradient tensors mirror the backbone enumeration order.
        std::vector<Matrix*> gmats{&grads.embed};
        for (auto& lg : grads.layers) {
            gmats.push_back(&lg.wq);
            gmats.push_back(&lg.wk);
            gmats.push_back(&lg.wv);
            gmats.push_back(&lg.wo);
            gmats.push_back(&lg.wgate);
            gmats.push_back(&lg.wup);
            gmats.push_back(&lg.wdown);
        }
        gmats.push_back(&grads.head);
        std::vector<Vector*> gvecs;
        for (auto& lg : grads.layers) {
            gvecs.push_back(&lg.attn_gain);
            gvecs.push_back(&lg.mlp_gain);
        }
        gvecs.push_back(&grads.final_gain);
        for (size_t i = 0; i < mats.size(); ++i)
            adam.update(mat_slots[i], mats[i]->data(), gmats[i]->data(), mats[i]->size(), lr);
        for (size_t i = 0; i < vecs.size(); ++i)
            adam.update(vec_slots[i], vecs[i]->data(), gvecs[i]->data(), vecs[i]->size(), lr);
        history.push_back(loss);
        guard.push(loss, step);
    }
    return history;
}

TrainReport train_adapters(ToyLm& student, const ToyLm& teacher, const Corpus& corpus,
                           const TrainConfig& cfg) {
    cfg.validate();
    require(student.cfg.vocab_size == teacher.cfg.vocab_size &&
                student.cfg.context_length == teacher.cfg.context_length,
            "train_adapters: student and teacher must share the token space");

    struct SiteRef {
        AdapterSite site;
        AdapterTransform* t;
        std::vector<int> slots;  // one per dense block, or a single Cayley slot
    };
    Adam adam;
    std::vector<SiteRef> refs;
    for (int l = 0; l < student.cfg.num_layers; ++l) {
        for (int p = 0; p < kNumProjKinds; ++p) {
            const AdapterSite site{l, static_cast<ProjKind>(p)};
            auto& slot = student.adapter_at(site);
            if (!slot || slot->fixed) continue;
            SiteRef ref{site, &*slot, {}};
            if (slot->cayley_backend()) {
                ref.slots.push_back(adam.register_size(slot->params.total_params()));
            } else {
                for (const auto& blk : slot->dense_blocks)
                    ref.slots.push_back(adam.register_size(blk.size()));
            }
            refs.push_back(std::move(ref));
        }
    }

    TrainReport report;
    report.checksum_before = student.backbone_checksum();
    report.initial_heldout_ppl = perplexity(student, corpus.heldout);

    const long tokens_per_step =
        static_cast<long>(cfg.batch_size) * student.cfg.context_length;
    const long epoch_steps =
        std::max<long>(1, static_cast<long>(corpus.train.size()) / tokens_per_step);
    const long total_steps =
        cfg.max_steps >= 0 ? cfg.max_steps : epoch_steps * cfg.epochs;

    ToyLm::Grads grads;
    grads.init(student);
    LossTrendGuard guard;

    for (long step = 0; step < total_steps && !refs.empty(); ++step) {
        Rng rng = Rng::derive(cfg.seed, 0xd15711, static_cast<uint64_t>(step));
        const auto windows =
            sample_windows(corpus.train, student.cfg.context_length, cfg.batch_size, rng);
        grads.zero();
        double loss = 0.0, kd = 0.0, ce = 0.0;
        const double inv_batch = 1.0 / static_cast<double>(windows.size());
        for (const auto& w : windows) {
            ToyLm::Cache cache;
            const Matrix s_logits = student.forward(w, &cache);
            const Matrix t_logits = teacher.forward(w, nullptr);
            const auto labels = next_token_labels(w);
            auto res = kd_loss(s_logits, t_logits, labels, cfg);
            loss += res.total * inv_batch;
            kd += res.kd_term * inv_batch;
            ce += res.ce_term * inv_batch;
            res.d_student *= inv_batch;
            student.backward(w, cache, res.d_student, grads);
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("train_adapters: loss diverged (non-finite) at step " +
                                     std::to_string(step));

        const double lr = lr_schedule(cfg.learning_rate, cfg.warmup_steps, step, total_steps);
        adam.begin_step();
        for (auto& ref : refs) {
            auto& acc = grads.layers[static_cast<size_t>(ref.site.layer)]
                            .adapters[static_cast<size_t>(static_cast<int>(ref.site.proj))];
            if (ref.t->cayley_backend()) {
                const auto g = cayley_param_gradient(*ref.t, acc);
                adam.update(ref.slots[0], ref.t->params.values.data(), g.data(),
                            static_cast<long>(g.size()), lr);
                ref.t->refresh();
            } else {
                for (size_t b = 0; b < ref.t->dense_blocks.size(); ++b)
                    adam.update(ref.slots[b], ref.t->dense_blocks[b].data(),
                                acc.d_op[b].data(), acc.d_op[b].size(), lr);
            }
        }
        report.history.push_back({step, loss, kd, ce, lr});
        guard.push(loss, step);
        ++report.steps_run;
    }

    report.checksum_after = student.backbone_checksum();
    if (report.checksum_after != report.checksum_before)
        throw std::logic_error("train_adapters: frozen backbone changed during training");
    report.final_heldout_ppl = perplexity(student, corpus.heldout);
    return report;
}

std::vector<SensitivityScore> sensitivity_rank(const ToyLm& model,
                                               const std::vector<std::vector<int>>& probe_windows,
                                               int block_dim) {
    require(!probe_windows.empty(), "sensitivity_rank: empty probe batch");
    ToyLm probe = model;
    remove_adapters(probe);
    std::vector<AdapterSite> sites;
    for (const auto& site : all_sites(probe.cfg))
        if (probe.proj_input_dim(site.proj) % block_dim == 0) sites.push_back(site);
    insert_adapters(probe, sites, AdapterMode::SignConstrained, block_dim);

    TrainConfig ce_only;
    ce_only.alpha_kd = 0.0;
    ce_only.beta = 1.0;

    ToyLm::Grads grads;
    grads.init(probe);
    std::vector<double> energy(sites.size(), 0.0);
    for (const auto& w : probe_windows) {
        ToyLm::Cache cache;
        const Matrix logits = probe.forward(w, &cache);
        auto res = kd_loss(logits, logits, next_token_labels(w), ce_only);
        probe.backward(w, cache, res.d_student, grads);
        for (size_t i = 0; i < sites.size(); ++i) {
            const auto& lc = cache.layers[static_cast<size_t>(sites[i].layer)];
            const Matrix* input = nullptr;
            switch (sites[i].proj) {
                case ProjKind::Q:
                case ProjKind::K:
                case ProjKind::V: input = &lc.a; break;
                case ProjKind::O: input = &lc.ctx; break;
                case ProjKind::Gate:
                case ProjKind::Up: input = &lc.b; break;
                case ProjKind::Down: input = &lc.hc; break;
            }
            energy[i] += input->squaredNorm() /
                         static_cast<double>(input->size() * static_cast<long>(probe_windows.size()));
        }
    }

    std::vector<SensitivityScore> scores(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) {
        auto& sc = scores[i];
        sc.site = sites[i];
        sc.energy_fraction = energy[i];

        const Matrix& w = probe.proj_weight(sites[i]);
        const Matrix gram = w.transpose() * w;
        double block_energy = 0.0;
        for (long off = 0; off < gram.rows(); off += block_dim)
            block_energy += gram.block(off, off, block_dim, block_dim).squaredNorm();
        sc.bdu_compatibility = gram.squaredNorm() > 0 ? block_energy / gram.squaredNorm() : 0.0;

        const auto& acc = grads.layers[static_cast<size_t>(sites[i].layer)]
                              .adapters[static_cast<size_t>(static_cast<int>(sites[i].proj))];
        const auto g = cayley_param_gradient(*probe.adapter_at(sites[i]), acc);
        double g2 = 0.0;
        for (double v : g) g2 += v * v;
        sc.grad_norm_init = std::sqrt(g2);

        const int layers = probe.cfg.num_layers;
        if (layers > 1) {
            const double depth =
                2.0 * static_cast<double>(sites[i].layer) / static_cast<double>(layers - 1) - 1.0;
            sc.position_penalty = depth * depth;
        }
    }

    auto minmax_norm = [&](auto getter) {
        double lo = 1e300, hi = -1e300;
        for (const auto& sc : scores) {
            lo = std::min(lo, getter(sc));
            hi = std::max(hi, getter(sc));
        }
        std::vector<double> out(scores.size(), 0.5);
        if (hi > lo)
            for (size_t i = 0; i < scores.size(); ++i)
                out[i] = (getter(scores[i]) - lo) / (hi - lo);
        return out;
    };
    const auto n_rho = minmax_norm([](const SensitivityScore& s) { return s.bdu_compatibility; });
    const auto n_grad = minmax_norm([](const SensitivityScore& s) { return s.grad_norm_init; });
    const auto n_energy = minmax_norm([](const SensitivityScore& s) { return s.energy_fraction; });
    for (size_t i = 0; i < scores.size(); ++i) {
        if (scores[i].energy_fraction <= 1e-30) {
            scores[i].composite = -2.0;  // dead site, strictly below any live score
            continue;
        }
        scores[i].composite =
            (n_rho[i] + n_grad[i] + n_energy[i]) / 3.0 - scores[i].position_penalty;
    }

    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        if (a.composite != b.composite) return a.composite > b.composite;
        return a.site.flat_index() < b.site.flat_index();
    });
    return scores;
}

std::vector<NoiseSweepPoint> noise_phase_sweep(ToyLm& model, std::span<const uint8_t> bytes,
                                               std::span<const double> lambda_grid) {
    bool has_sign_adapter = false;
    for (const auto& layer : model.layers)
        for (const auto& a : layer.adapters)
            if (a && a->mode == AdapterMode::SignConstrained && a->cayley_backend())
                has_sign_adapter = true;
    require(has_sign_adapter, "noise_phase_sweep: no sign-constrained adapters installed");

    const EmulationSettings saved = model.emu;
    std::vector<NoiseSweepPoint> points;
    for (double lambda : lambda_grid) {
        require(lambda >= 0.0 && lambda <= 1.0, "noise_phase_sweep: lambda outside [0,1]");
        EmulationSettings emu;
        emu.enabled = true;
        emu.path = EmulationPath::ExactProb;
        emu.lambda = lambda;
        emu.apply_readout = false;
        emu.noise = noiseless_model();
        model.emu = emu;
        points.push_back({lambda, perplexity(model, bytes)});
    }
    model.emu = saved;
    return points;
}

}  // namespace cua
