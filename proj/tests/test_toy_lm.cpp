// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>

#include "cua/distill.hpp"
#include "cua/toy_lm.hpp"

using namespace cua;

namespace {

ToyLmConfig tiny_config() {
    ToyLmConfig cfg;
    cfg.num_layers = 2;
    cfg.width = 8;
    cfg.num_heads = 2;
    cfg.vocab_size = 12;
    cfg.context_length = 6;
    cfg.mlp_hidden = 8;
    return cfg;
}

std::vector<int> tiny_tokens() { return {3, 1, 4, 1, 5, 9}; }

std::vector<int> labels_of(const std::vector<int>& tokens) {
    std::vector<int> labels(tokens.size(), kIgnoreLabel);
    for (size_t i = 0; i + 1 < tokens.size(); ++i) labels[i] = tokens[i + 1];
    return labels;
}

double model_loss(const ToyLm& model, const std::vector<int>& tokens) {
    TrainConfig cfg;
    cfg.alpha_kd = 0.0;
    cfg.beta = 1.0;
    const Matrix logits = model.forward(tokens, nullptr);
    return kd_loss(logits, logits, labels_of(tokens), cfg).total;
}

// Analytic gradients for a CE loss on one window.
ToyLm::Grads analytic_grads(const ToyLm& model, const std::vector<int>& tokens) {
    TrainConfig cfg;
    cfg.alpha_kd = 0.0;
    cfg.beta = 1.0;
    ToyLm::Cache cache;
    const Matrix logits = model.forward(tokens, &cache);
    auto res = kd_loss(logits, logits, labels_of(tokens), cfg);
    ToyLm::Grads grads;
    grads.init(model);
    model.backward(tokens, cache, res.d_student, grads);
    return grads;
}

void check_entries(const ToyLm& model, const std::vector<int>& tokens, Matrix& weight,
                   const Matrix& analytic, int samples, Rng& rng) {
    const double step = 1e-5;
    for (int i = 0; i < samples; ++i) {
        const long idx = static_cast<long>(rng.below(static_cast<uint64_t>(weight.size())));
        const double saved = weight.data()[idx];
        weight.data()[idx] = saved + step;
        const double hi = model_loss(model, tokens);
        weight.data()[idx] = saved - step;
        const double lo = model_loss(model, tokens);
        weight.data()[idx] = saved;
        const double fd = (hi - lo) / (2 * step);
        CHECK(analytic.data()[idx] ==
              doctest::Approx(fd).epsilon(2e-4).scale(std::max(1.0, std::abs(fd))));
    }
}

}  // namespace

TEST_SUITE("toy_lm") {

TEST_CASE("construction is deterministic and shaped correctly") {
    const auto cfg = tiny_config();
    const ToyLm a = ToyLm::build(cfg, 42);
    const ToyLm b = ToyLm::build(cfg, 42);
    CHECK(a.backbone_checksum() == b.backbone_checksum());
    const ToyLm c = ToyLm::build(cfg, 43);
    CHECK(a.backbone_checksum() != c.backbone_checksum());

    CHECK(a.backbone_param_count() ==
          12 * 8 + 2 * (4 * 64 + 2 * 64 + 64 + 2 * 8) + 8 + 12 * 8);

    const auto tokens = tiny_tokens();
    const Matrix logits = a.forward(tokens, nullptr);
    CHECK(logits.rows() == 6);
    CHECK(logits.cols() == 12);
    CHECK(logits.allFinite());
}

TEST_CASE("backbone gradients match finite differences") {
    const ToyLm model = ToyLm::build(tiny_config(), 7);
    const auto tokens = tiny_tokens();
    const auto grads = analytic_grads(model, tokens);

    ToyLm work = model;
    Rng rng(123);
    check_entries(work, tokens, work.embed, grads.embed, 6, rng);
    check_entries(work, tokens, work.head, grads.head, 6, rng);
    for (int li = 0; li < 2; ++li) {
        auto& lw = work.layers[static_cast<size_t>(li)];
        const auto& lg = grads.layers[static_cast<size_t>(li)];
        check_entries(work, tokens, lw.wq, lg.wq, 4, rng);
        check_entries(work, tokens, lw.wk, lg.wk, 4, rng);
        check_entries(work, tokens, lw.wv, lg.wv, 4, rng);
        check_entries(work, tokens, lw.wo, lg.wo, 4, rng);
        check_entries(work, tokens, lw.wgate, lg.wgate, 4, rng);
        check_entries(work, tokens, lw.wup, lg.wup, 4, rng);
        check_entries(work, tokens, lw.wdown, lg.wdown, 4, rng);
    }

    // Gain vectors.
    const double step = 1e-5;
    for (int li = 0; li < 2; ++li) {
        auto& gain = work.layers[static_cast<size_t>(li)].attn_gain;
        for (long idx : {0L, 5L}) {
            const double saved = gain[idx];
            gain[idx] = saved + step;
            const double hi = model_loss(work, tokens);
            gain[idx] = saved - step;
            const double lo = model_loss(work, tokens);
            gain[idx] = saved;
            const double fd = (hi - lo) / (2 * step);
            CHECK(grads.layers[static_cast<size_t>(li)].attn_gain[idx] ==
                  doctest::Approx(fd).epsilon(2e-4).scale(std::max(1.0, std::abs(fd))));
        }
    }
}

TEST_CASE("adapter gradients flow through the whole network") {
    for (auto mode : {AdapterMode::SignConstrained, AdapterMode::Orthogonal,
                      AdapterMode::Unconstrained}) {
        ToyLm model = ToyLm::build(tiny_config(), 11);
        const std::vector<AdapterSite> sites{{0, ProjKind::V},   {0, ProjKind::Up},
                                             {1, ProjKind::Q},   {1, ProjKind::Gate},
                                             {1, ProjKind::Down}};
        insert_adapters(model, sites, mode, 4);
        // Move off the identity so sign kinks are not at the operating point.
        Rng prng(5);
        for (const auto& site : sites) {
            auto& t = *model.adapter_at(site);
            if (t.cayley_backend()) {
                t.params = SkewBlockParams::random(t.block_dim, t.num_blocks(), 0.7, prng);
                t.refresh();
            } else {
                for (auto& blk : t.dense_blocks)
                    for (long i = 0; i < blk.size(); ++i) blk.data()[i] += 0.1 * prng.gaussian();
            }
        }

        const auto tokens = tiny_tokens();
        const auto grads = analytic_grads(model, tokens);

        const double step = 1e-5;
        for (const auto& site : sites) {
            auto& t = *model.adapter_at(site);
            const auto& acc = grads.layers[static_cast<size_t>(site.layer)]
                                  .adapters[static_cast<size_t>(static_cast<int>(site.proj))];
            if (t.cayley_backend()) {
                const auto analytic = cayley_param_gradient(t, acc);
                for (size_t pi = 0; pi < analytic.size(); pi += 3) {
                    const double saved = t.params.values[pi];
                    t.params.values[pi] = saved + step;
                    t.refresh();
                    const double hi = model_loss(model, tokens);
                    t.params.values[pi] = saved - step;
                    t.refresh();
                    const double lo = model_loss(model, tokens);
                    t.params.values[pi] = saved;
                    t.refresh();
                    const double fd = (hi - lo) / (2 * step);
                    CHECK(analytic[pi] ==
                          doctest::Approx(fd).epsilon(5e-4).scale(std::max(1.0, std::abs(fd))));
                }
            } else {
                for (size_t b = 0; b < t.dense_blocks.size(); b += 2) {
                    auto& blk = t.dense_blocks[b];
                    const long idx = 2;
                    const double saved = blk.data()[idx];
                    blk.data()[idx] = saved + step;
                    const double hi = model_loss(model, tokens);
                    blk.data()[idx] = saved - step;
                    const double lo = model_loss(model, tokens);
                    blk.data()[idx] = saved;
                    const double fd = (hi - lo) / (2 * step);
                    CHECK(acc.d_op[b].data()[idx] ==
                          doctest::Approx(fd).epsilon(5e-4).scale(std::max(1.0, std::abs(fd))));
                }
            }
        }
    }
}

TEST_CASE("identity adapters leave logits untouched at initialisation") {
    ToyLm base = ToyLm::build(tiny_config(), 3);
    const auto tokens = tiny_tokens();
    const Matrix before = base.forward(tokens, nullptr);
    for (auto mode : {AdapterMode::SignConstrained, AdapterMode::Orthogonal,
                      AdapterMode::Unconstrained}) {
        ToyLm adapted = base;
        const auto sites = all_sites(adapted.cfg);
        insert_adapters(adapted, sites, mode, 4);
        const Matrix after = adapted.forward(tokens, nullptr);
        CHECK((after - before).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(adapted.adapter_param_count() > 0);
    }
}

TEST_CASE("adapter parameter counts scale linearly with site count") {
    ToyLm model = ToyLm::build(tiny_config(), 3);
    const std::vector<AdapterSite> one{{0, ProjKind::V}};
    insert_adapters(model, one, AdapterMode::SignConstrained, 4);
    const long single = model.adapter_param_count();
    const std::vector<AdapterSite> three{{0, ProjKind::V}, {1, ProjKind::V}, {0, ProjKind::Q}};
    remove_adapters(model);
    insert_adapters(model, three, AdapterMode::SignConstrained, 4);
    CHECK(model.adapter_param_count() == 3 * single);

    const uint64_t before = model.backbone_checksum();
    insert_adapters(model, one, AdapterMode::SignConstrained, 4);
    CHECK(model.backbone_checksum() == before);
}

TEST_CASE("emulated inference in the noiseless limit matches classical") {
    ToyLm model = ToyLm::build(tiny_config(), 17);
    const auto sites = all_sites(model.cfg);
    insert_adapters(model, sites, AdapterMode::SignConstrained, 4);
    Rng prng(2);
    for (const auto& site : sites) {
        auto& t = *model.adapter_at(site);
        t.params = SkewBlockParams::random(t.block_dim, t.num_blocks(), 0.6, prng);
        t.refresh();
    }
    const auto tokens = tiny_tokens();
    const Matrix classical = model.forward(tokens, nullptr);

    model.emu.enabled = true;
    model.emu.path = EmulationPath::ExactProb;
    model.emu.lambda = 0.0;
    model.emu.apply_readout = false;
    model.emu.noise = noiseless_model();
    const Matrix emulated = model.forward(tokens, nullptr);
    CHECK((emulated - classical).cwiseAbs().maxCoeff() <= 1e-9);

    ToyLm::Cache cache;
    CHECK_THROWS(model.forward(tokens, &cache));  // emulated path is inference-only
}

TEST_CASE("backbone blob round trip is bit exact") {
    const ToyLm model = ToyLm::build(tiny_config(), 23);
    const auto path = std::filesystem::temp_directory_path() / "cua_tlm_test.bin";
    save_backbone_file(path.string(), model);
    const ToyLm loaded = load_backbone_file(path.string());
    CHECK(loaded.backbone_checksum() == model.backbone_checksum());
    CHECK(loaded.cfg.width == model.cfg.width);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
