// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// cualab: command-line laboratory wiring the adapter, emulation, planning,
// entanglement and distillation modules into reproducible experiments.
// Subcommands: train, noise-sweep, entangle, pack, ablate. Every run copies
// its effective configuration into the output directory; re-running from
// that file reproduces all numeric outputs bit-identically.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cua/checkpoint.hpp"
#include "cua/circuit_plan.hpp"
#include "cua/corpus.hpp"
#include "cua/distill.hpp"
#include "cua/entanglement.hpp"
#include "cua/qemu.hpp"
#include "cua/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cua;

namespace {

json default_config() {
    return json{
        {"seed", 42},
        {"model",
         {{"num_layers", 2},
          {"width", 32},
          {"num_heads", 4},
          {"vocab_size", 256},
          {"context_length", 64},
          {"mlp_hidden", 64}}},
        {"corpus",
         {{"bytes", 1048576}, {"seed", 0xC0FFEE}, {"heldout_fraction", 0.1}, {"file", ""}}},
        {"pretrain",
         {{"steps", 1200},
          {"batch_size", 8},
          {"learning_rate", 3e-3},
          {"warmup_steps", 50},
          {"seed", 1}}},
        {"compress", {{"rank_fraction", 0.5}}},
        {"adapters", {{"mode", "sign_constrained"}, {"block_dim", 4}, {"sites", "all"}}},
        {"train",
         {{"alpha_kd", 0.1},
          {"beta", 2.0},
          {"temperature", 1.5},
          {"learning_rate", 0.02},
          {"warmup_steps", 30},
          {"epochs", 1},
          {"batch_size", 8},
          {"max_steps", 500}}},
        {"planted_rotation", {{"enabled", false}, {"scale", 0.8}}},
        {"noise",
         {{"p_sx", 2.45e-4}, {"p_cz", 1.78e-3}, {"p_readout", 6.8e-3}, {"n_shots", 8192}}},
        {"sweep",
         {{"lambdas", {0.0, 0.012, 0.119, 0.3, 0.5, 0.8, 1.0}},
          {"shots", {1024, 2048, 4096, 8192, 16384}},
          {"shot_trials", 400}}},
        {"entangle",
         {{"source", "haar-bdu"},
          {"block_dim", 4},
          {"num_blocks", 1024},
          {"n_qubits", 12},
          {"depths", {1, 2, 3, 4, 5, 6}},
          {"stress_scales", {0.0, 1.0, 4.0, 10.0}},
          {"angle_scale", 0.05},
          {"checkpoint", ""},
          {"site", {{"layer", 0}, {"proj", "v"}}},
          {"spectra", false}}},
        {"pack",
         {{"map_file", ""},
          {"hex_rows", 5},
          {"hex_cols", 6},
          {"num_blocks", 1024},
          {"max_lanes", 64},
          {"tokens", 129},
          {"circuits_per_token", 3}}},
        {"ablate", {{"num_seeds", 3}, {"site", "top"}}},
    };
}

void merge_into(json& base, const json& overlay) {
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

json load_config(const std::string& path, uint64_t seed_override, bool has_seed) {
    json cfg = default_config();
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is.good()) throw std::runtime_error("cannot open config file " + path);
        json file_cfg;
        is >> file_cfg;
        merge_into(cfg, file_cfg);
    }
    if (has_seed) cfg["seed"] = seed_override;
    return cfg;
}

ToyLmConfig model_config(const json& cfg) {
    const auto& m = cfg.at("model");
    ToyLmConfig out;
    out.num_layers = m.at("num_layers");
    out.width = m.at("width");
    out.num_heads = m.at("num_heads");
    out.vocab_size = m.at("vocab_size");
    out.context_length = m.at("context_length");
    out.mlp_hidden = m.at("mlp_hidden");
    out.validate();
    return out;
}

NoiseModel noise_model(const json& cfg) {
    const auto& n = cfg.at("noise");
    NoiseModel out;
    out.p_sx = n.at("p_sx");
    out.p_cz = n.at("p_cz");
    out.p_readout = n.at("p_readout");
    out.n_shots = n.at("n_shots");
    out.validate();
    return out;
}

Corpus corpus_from(const json& cfg) {
    const auto& c = cfg.at("corpus");
    const std::string file = c.at("file");
    if (!file.empty()) return load_corpus_file(file, c.at("heldout_fraction"));
    return make_builtin_corpus(c.at("bytes"), c.at("seed"), c.at("heldout_fraction"));
}

struct PipelineArtifacts {
    Corpus corpus;
    ToyLm teacher;
    ToyLm compressed;
    double teacher_ppl = 0;
    double compressed_ppl = 0;
};

PipelineArtifacts build_pipeline(const json& cfg, bool verbose) {
    PipelineArtifacts art{corpus_from(cfg), ToyLm::build(model_config(cfg), cfg.at("seed")),
                          {}};
    const auto& p = cfg.at("pretrain");
    PretrainConfig pc;
    pc.steps = p.at("steps");
    pc.batch_size = p.at("batch_size");
    pc.learning_rate = p.at("learning_rate");
    pc.warmup_steps = p.at("warmup_steps");
    pc.seed = p.at("seed");
    if (verbose) std::cerr << "[cualab] pretraining teacher (" << pc.steps << " steps)\n";
    pretrain_lm(art.teacher, art.corpus.train, pc);
    art.teacher_ppl = perplexity(art.teacher, art.corpus.heldout);
    art.compressed = compress_svd(art.teacher, cfg.at("compress").at("rank_fraction"));
    art.compressed_ppl = perplexity(art.compressed, art.corpus.heldout);
    if (verbose)
        std::cerr << "[cualab] teacher ppl " << art.teacher_ppl << ", compressed ppl "
                  << art.compressed_ppl << "\n";
    return art;
}

std::vector<AdapterSite> resolve_sites(const json& cfg, const PipelineArtifacts& art,
                                       int block_dim) {
    const auto& spec = cfg.at("adapters").at("sites");
    if (spec.is_string()) {
        const std::string s = spec;
        if (s == "all") return all_sites(art.compressed.cfg);
        if (s.rfind("top:", 0) == 0) {
            const int n = std::stoi(s.substr(4));
            Rng rng = Rng::derive(cfg.at("seed"), 0x5e9);
            const auto windows = sample_windows(art.corpus.train,
                                                art.compressed.cfg.context_length, 8, rng);
            const auto scores = sensitivity_rank(art.compressed, windows, block_dim);
            std::vector<AdapterSite> out;
            for (int i = 0; i < n && i < static_cast<int>(scores.size()); ++i)
                out.push_back(scores[static_cast<size_t>(i)].site);
            return out;
        }
        throw std::runtime_error("adapters.sites: expected \"all\", \"top:N\" or a list");
    }
    std::vector<AdapterSite> out;
    for (const auto& e : spec)
        out.push_back({e.at("layer"), proj_kind_from_string(e.at("proj"))});
    return out;
}

TrainConfig train_config(const json& cfg) {
    const auto& t = cfg.at("train");
    TrainConfig out;
    out.alpha_kd = t.at("alpha_kd");
    out.beta = t.at("beta");
    out.temperature = t.at("temperature");
    out.learning_rate = t.at("learning_rate");
    out.warmup_steps = t.at("warmup_steps");
    out.epochs = t.at("epochs");
    out.batch_size = t.at("batch_size");
    out.max_steps = t.at("max_steps");
    out.seed = cfg.at("seed");
    out.validate();
    return out;
}

void write_effective_config(const fs::path& out_dir, const json& cfg) {
    fs::create_directories(out_dir);
    std::ofstream os(out_dir / "config.json");
    if (!os.good()) throw std::runtime_error("cannot write config copy");
    os << cfg.dump(2) << "\n";
}

uint64_t cfg_hash(const json& cfg) { return config_hash(cfg.dump()); }

void maybe_write_json(const fs::path& path, const json& payload, const std::string& format) {
    if (format != "json") return;
    std::ofstream os(path);
    os << payload.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_train(const json& cfg, const std::string& out_dir, const std::string& format,
              bool verbose) {
    write_effective_config(out_dir, cfg);
    auto art = build_pipeline(cfg, verbose);
    const uint64_t seed = cfg.at("seed");

    const AdapterMode mode = adapter_mode_from_string(cfg.at("adapters").at("mode"));
    const int block_dim = cfg.at("adapters").at("block_dim");
    const bool planted = cfg.at("planted_rotation").at("enabled");

    ToyLm student = planted ? art.teacher : art.compressed;
    const auto sites = resolve_sites(cfg, art, block_dim);
    if (planted) {
        // Hide a random block rotation inside the frozen weights; the
        // optimum adapter undoes it exactly, so recovery is measurable.
        Rng rng = Rng::derive(seed, 0x9a37ed);
        const double scale = cfg.at("planted_rotation").at("scale");
        for (const auto& site : sites) {
            const int dim = student.proj_input_dim(site.proj);
            const auto params =
                SkewBlockParams::random(block_dim, dim / block_dim, scale, rng);
            student.proj_weight(site) = student.proj_weight(site) *
                                        bdu_to_dense(assemble_bdu(params));
        }
    }
    const double start_ppl = perplexity(student, art.corpus.heldout);
    insert_adapters(student, sites, planted ? AdapterMode::Orthogonal : mode, block_dim);

    const auto report = train_adapters(student, art.teacher, art.corpus, train_config(cfg));

    {
        CsvReport metrics((fs::path(out_dir) / "metrics.csv").string(), cfg_hash(cfg), seed);
        metrics.header({"step", "loss", "kd_term", "ce_term", "lr"});
        for (const auto& rec : report.history)
            metrics.row({CsvReport::num(rec.step), CsvReport::num(rec.loss),
                         CsvReport::num(rec.kd_term), CsvReport::num(rec.ce_term),
                         CsvReport::num(rec.lr)});
    }

    save_checkpoint((fs::path(out_dir) / "checkpoint").string(), student, seed);

    json summary{{"teacher_ppl", art.teacher_ppl},
                 {"baseline_ppl", start_ppl},
                 {"identity_init_ppl", report.initial_heldout_ppl},
                 {"adapted_ppl", report.final_heldout_ppl},
                 {"adapter_params", student.adapter_param_count()},
                 {"backbone_params", student.backbone_param_count()},
                 {"steps_run", report.steps_run},
                 {"frozen_backbone_intact",
                  report.checksum_before == report.checksum_after}};
    if (planted)
        summary["recovery_gap"] =
            report.final_heldout_ppl / art.teacher_ppl - 1.0;
    else
        summary["compressed_ppl"] = art.compressed_ppl;

    {
        CsvReport sum((fs::path(out_dir) / "summary.csv").string(), cfg_hash(cfg), seed);
        sum.header({"metric", "value"});
        for (auto it = summary.begin(); it != summary.end(); ++it)
            sum.row({it.key(), it->dump()});
    }
    maybe_write_json(fs::path(out_dir) / "summary.json", summary, format);

    std::cout << "teacher ppl " << art.teacher_ppl << "\n"
              << (planted ? "planted" : "compressed") << " ppl " << start_ppl << "\n"
              << "adapted ppl " << report.final_heldout_ppl << "\n";
    if (planted) std::cout << "recovery gap " << summary["recovery_gap"].dump() << "\n";
    return 0;
}

int cmd_noise_sweep(const json& cfg, const std::string& out_dir, const std::string& format,
                    const std::string& checkpoint, bool identity, bool verbose) {
    write_effective_config(out_dir, cfg);
    const uint64_t seed = cfg.at("seed");
    const NoiseModel noise = noise_model(cfg);

    ToyLm model = [&] {
        if (!checkpoint.empty()) return load_checkpoint(checkpoint);
        if (!identity)
            throw std::runtime_error(
                "noise-sweep: missing checkpoint (pass --checkpoint DIR or --identity)");
        auto art = build_pipeline(cfg, verbose);
        ToyLm m = art.compressed;
        insert_adapters(m, resolve_sites(cfg, art, cfg.at("adapters").at("block_dim")),
                        AdapterMode::SignConstrained, cfg.at("adapters").at("block_dim"));
        return m;
    }();

    Corpus corpus = corpus_from(cfg);
    std::vector<double> lambdas = cfg.at("sweep").at("lambdas");
    const auto points = noise_phase_sweep(model, corpus.heldout, lambdas);

    CsvReport rep((fs::path(out_dir) / "noise_sweep.csv").string(), cfg_hash(cfg), seed);
    rep.header({"kind", "n_qubits", "block", "sx", "cz", "lambda_1q", "lambda_2q", "lambda",
                "eps_ro", "ppl", "rel_ppl", "n_shots", "rmse"});
    json payload{{"qubit_infidelity", json::array()},
                 {"ppl_sweep", json::array()},
                 {"shot_rmse", json::array()}};

    for (int n = 2; n <= 8; ++n) {
        const auto budget = gate_budget_for_block(n);
        const auto inf = gate_infidelity(budget, noise, n);
        rep.row({"qubit_infidelity", CsvReport::num(static_cast<long>(n)),
                 CsvReport::num(1L << n), CsvReport::num(budget.sx_count),
                 CsvReport::num(budget.cz_count), CsvReport::num(inf.lambda_1q),
                 CsvReport::num(inf.lambda_2q), CsvReport::num(inf.lambda_total),
                 CsvReport::num(inf.epsilon_readout), "", "", "", ""});
        payload["qubit_infidelity"].push_back(
            {{"n", n}, {"lambda", inf.lambda_total}, {"eps_ro", inf.epsilon_readout}});
    }

    for (const auto& pt : points) {
        rep.row({"ppl_sweep", "", "", "", "", "", "", CsvReport::num(pt.lambda), "",
                 CsvReport::num(pt.ppl), CsvReport::num(pt.ppl / points.front().ppl), "", ""});
        payload["ppl_sweep"].push_back({{"lambda", pt.lambda}, {"ppl", pt.ppl}});
    }

    // Pure shot-noise reconstruction error over random slices.
    std::vector<long> shot_grid;
    for (const auto& s : cfg.at("sweep").at("shots")) shot_grid.push_back(s);
    const int trials = cfg.at("sweep").at("shot_trials");
    for (long shots : shot_grid) {
        double mse = 0.0;
        for (int trial = 0; trial < trials; ++trial) {
            Rng rng = Rng::derive(seed, 0x5407, static_cast<uint64_t>(trial));
            const Matrix q = haar_special_orthogonal(4, rng);
            Vector x(4);
            for (int i = 0; i < 4; ++i) x[i] = rng.gaussian();
            const auto slice = amplitude_encode(x);
            const Vector p = ideal_probabilities(q, slice);
            Rng srng = Rng::derive(seed, 0x5407f, static_cast<uint64_t>(trial) * 31 +
                                                      static_cast<uint64_t>(shots));
            const auto counts = sample_shots(p, shots, srng);
            mse += (reconstruct(counts, slice) - reconstruct_from_probabilities(p, slice))
                       .squaredNorm();
        }
        const double rmse = std::sqrt(mse / trials);
        rep.row({"shot_rmse", "", "", "", "", "", "", "", "", "", "",
                 CsvReport::num(shots), CsvReport::num(rmse)});
        payload["shot_rmse"].push_back({{"n_shots", shots}, {"rmse", rmse}});
    }

    maybe_write_json(fs::path(out_dir) / "noise_sweep.json", payload, format);
    std::cout << "noise sweep written to " << out_dir << "\n";
    return 0;
}

int cmd_entangle(const json& cfg, const std::string& out_dir, const std::string& format,
                 bool verbose) {
    write_effective_config(out_dir, cfg);
    const uint64_t seed = cfg.at("seed");
    const auto& ecfg = cfg.at("entangle");
    const std::string source = ecfg.at("source");
    const bool dump_spectra = ecfg.at("spectra");

    struct Row {
        std::string object;
        std::string cut;
        long rank_max;
        long rank;
        double sigma_max;
        double deficit;
        OperatorSchmidtSpectrum spec;
    };
    std::vector<Row> rows;

    auto analyze = [&](const std::string& object, const Matrix& u, Bipartition cut,
                       const std::string& cut_name) {
        if (verbose) std::cerr << "[cualab] operator-schmidt " << object << " " << cut_name << "\n";
        auto spec = operator_schmidt(u, cut);
        rows.push_back({object, cut_name, spec.rank_bound, spec.rank, spec.sigmas[0],
                        purity_deficit(spec), std::move(spec)});
    };

    if (source == "identity") {
        const int block = ecfg.at("block_dim");
        const int blocks = ecfg.at("num_blocks");
        const long dim = static_cast<long>(block) * blocks;
        analyze("identity", Matrix::Identity(dim, dim), {blocks, block}, "natural");
    } else if (source == "haar-bdu") {
        const int block = ecfg.at("block_dim");
        const int blocks = ecfg.at("num_blocks");
        const Matrix dense = bdu_to_dense(haar_so_bdu(block, blocks, seed));
        analyze("haar_so_bdu", dense, {blocks, block}, "natural");
        const long dim = static_cast<long>(block) * blocks;
        if (is_power_of_two(dim)) {
            const long half = 1L << (log2_exact(dim) / 2);
            analyze("haar_so_bdu", dense, {half, dim / half}, "equal");
        }
    } else if (source == "brickwork") {
        const int n = ecfg.at("n_qubits");
        for (const auto& d : ecfg.at("depths")) {
            const Matrix u = brickwork_unitary(n, d, seed);
            analyze("brickwork_depth_" + std::to_string(static_cast<int>(d)), u,
                    {1L << (n - 2), 4}, "natural");
        }
    } else if (source == "stress") {
        const int block = ecfg.at("block_dim");
        const int blocks = ecfg.at("num_blocks");
        Rng rng = Rng::derive(seed, 0x57e5);
        const auto params =
            SkewBlockParams::random(block, blocks, ecfg.at("angle_scale"), rng);
        for (const auto& s : ecfg.at("stress_scales")) {
            const Matrix dense = bdu_to_dense(stress_scale(params, s));
            analyze("stress_s_" + CsvReport::num(static_cast<double>(s)), dense,
                    {blocks, block}, "natural");
        }
    } else if (source == "checkpoint") {
        const std::string dir = ecfg.at("checkpoint");
        if (dir.empty()) throw std::runtime_error("entangle: checkpoint source needs a path");
        const ToyLm model = load_checkpoint(dir);
        const AdapterSite site{ecfg.at("site").at("layer"),
                               proj_kind_from_string(ecfg.at("site").at("proj"))};
        const auto& adapter = model.adapter_at(site);
        if (!adapter) throw std::runtime_error("entangle: no adapter at the requested site");
        // Cayley-backed adapters must materialise to a genuine rotation.
        const Matrix dense =
            adapter->cayley_backend()
                ? pad_to_pow2(make_dense_orthogonal(adapter->to_dense()).matrix)
                : pad_to_pow2(adapter->to_dense());
        const long blocks = dense.rows() / adapter->block_dim;
        analyze("checkpoint_adapter", dense, {blocks, adapter->block_dim}, "natural");
    } else {
        throw std::runtime_error("entangle: unknown source " + source);
    }

    CsvReport rep((fs::path(out_dir) / "entangle.csv").string(), cfg_hash(cfg), seed);
    rep.header({"object", "cut", "rank_max", "rank_achieved", "sigma_max", "purity_deficit",
                "entropy_bits"});
    json payload = json::array();
    for (const auto& r : rows) {
        rep.row({r.object, r.cut, CsvReport::num(r.rank_max), CsvReport::num(r.rank),
                 CsvReport::num(r.sigma_max), CsvReport::num(r.deficit),
                 CsvReport::num(r.spec.entropy_bits)});
        payload.push_back({{"object", r.object},
                           {"cut", r.cut},
                           {"rank_max", r.rank_max},
                           {"rank_achieved", r.rank},
                           {"sigma_max", r.sigma_max},
                           {"purity_deficit", r.deficit}});
    }
    if (dump_spectra) {
        CsvReport spectra((fs::path(out_dir) / "spectra.csv").string(), cfg_hash(cfg), seed);
        spectra.header({"object", "cut", "k", "sigma"});
        for (const auto& r : rows)
            for (long k = 0; k < r.spec.sigmas.size(); ++k)
                spectra.row({r.object, r.cut, CsvReport::num(k),
                             CsvReport::num(r.spec.sigmas[k])});
    }
    maybe_write_json(fs::path(out_dir) / "entangle.json", payload, format);
    std::cout << "entanglement report written to " << out_dir << "\n";
    return 0;
}

int cmd_pack(const json& cfg, const std::string& out_dir, const std::string& format) {
    write_effective_config(out_dir, cfg);
    const uint64_t seed = cfg.at("seed");
    const auto& pcfg = cfg.at("pack");

    const std::string map_file = pcfg.at("map_file");
    const CouplingMap map = map_file.empty()
                                ? heavy_hex_map(pcfg.at("hex_rows"), pcfg.at("hex_cols"))
                                : load_coupling_map_file(map_file);

    const int max_lanes = pcfg.at("max_lanes");
    const auto lanes = greedy_max_matching(map, max_lanes);
    const int num_blocks = pcfg.at("num_blocks");
    // No lanes means nothing can be scheduled; report an empty schedule.
    const auto schedule = lanes.empty()
                              ? packing_schedule(0, 1)
                              : packing_schedule(num_blocks, static_cast<int>(lanes.size()));
    const long tokens = pcfg.at("tokens");
    const long cpt = pcfg.at("circuits_per_token");

    CsvReport rep((fs::path(out_dir) / "pack.csv").string(), cfg_hash(cfg), seed);
    rep.header({"metric", "value"});
    rep.row({"num_qubits", CsvReport::num(static_cast<long>(map.num_qubits))});
    rep.row({"num_edges", CsvReport::num(static_cast<long>(map.edges.size()))});
    rep.row({"lanes_found", CsvReport::num(static_cast<long>(lanes.size()))});
    rep.row({"qubits_used", CsvReport::num(static_cast<long>(2 * lanes.size()))});
    rep.row({"num_blocks", CsvReport::num(static_cast<long>(num_blocks))});
    rep.row({"packed_circuits", CsvReport::num(static_cast<long>(schedule.num_circuits))});
    rep.row({"tokens", CsvReport::num(tokens)});
    rep.row({"circuits_per_token", CsvReport::num(cpt)});
    rep.row({"total_circuits", CsvReport::num(token_circuit_estimate(tokens, cpt))});
    const auto single = encode_unitary_measure_circuit();
    rep.row({"single_circuit_depth", CsvReport::num(static_cast<long>(single.depth))});
    const auto packed = packed_circuit_budget();
    rep.row({"packed_circuit_depth", CsvReport::num(static_cast<long>(packed.depth))});

    CsvReport lane_rep((fs::path(out_dir) / "lanes.csv").string(), cfg_hash(cfg), seed);
    lane_rep.header({"lane", "qubit_a", "qubit_b"});
    for (size_t i = 0; i < lanes.size(); ++i)
        lane_rep.row({CsvReport::num(static_cast<long>(i)),
                      CsvReport::num(static_cast<long>(lanes[i].first)),
                      CsvReport::num(static_cast<long>(lanes[i].second))});

    maybe_write_json(fs::path(out_dir) / "pack.json",
                     json{{"num_qubits", map.num_qubits},
                          {"lanes_found", lanes.size()},
                          {"packed_circuits", schedule.num_circuits},
                          {"total_circuits", token_circuit_estimate(tokens, cpt)}},
                     format);
    std::cout << "lanes " << lanes.size() << ", packed circuits " << schedule.num_circuits
              << "\n";
    return 0;
}

int cmd_ablate(const json& cfg, const std::string& out_dir, const std::string& format,
               bool verbose) {
    write_effective_config(out_dir, cfg);
    const uint64_t seed = cfg.at("seed");
    auto art = build_pipeline(cfg, verbose);
    const int block_dim = cfg.at("adapters").at("block_dim");

    AdapterSite site{0, ProjKind::Up};
    const auto& site_cfg = cfg.at("ablate").at("site");
    if (site_cfg.is_string() && site_cfg == "top") {
        Rng rng = Rng::derive(seed, 0x5e9);
        const auto windows =
            sample_windows(art.corpus.train, art.compressed.cfg.context_length, 8, rng);
        site = sensitivity_rank(art.compressed, windows, block_dim)[0].site;
    } else if (site_cfg.is_object()) {
        site = {site_cfg.at("layer"), proj_kind_from_string(site_cfg.at("proj"))};
    }

    const int num_seeds = cfg.at("ablate").at("num_seeds");
    CsvReport rep((fs::path(out_dir) / "ablate.csv").string(), cfg_hash(cfg), seed);
    rep.header({"adapter_type", "mean_ppl", "sd_ppl", "delta_vs_baseline"});
    json payload{{"site", {{"layer", site.layer}, {"proj", to_string(site.proj)}}},
                 {"rows", json::array()}};

    auto emit = [&](const std::string& name, double mean, double sd) {
        rep.row({name, CsvReport::num(mean), CsvReport::num(sd),
                 CsvReport::num(mean - art.compressed_ppl)});
        payload["rows"].push_back({{"adapter_type", name}, {"mean_ppl", mean}, {"sd_ppl", sd}});
    };

    emit("teacher", art.teacher_ppl, 0.0);
    emit("compressed_baseline", art.compressed_ppl, 0.0);

    for (auto kind : {AblationKind::Identity, AblationKind::SignedDiagonal,
                      AblationKind::RandomGaussian, AblationKind::RandomUnitary,
                      AblationKind::RandomPermutation}) {
        const int trials =
            (kind == AblationKind::Identity) ? 1 : num_seeds;
        double sum = 0.0, sum2 = 0.0;
        for (int t = 0; t < trials; ++t) {
            ToyLm m = art.compressed;
            insert_fixed_operator(
                m, site,
                make_ablation(kind, m.proj_input_dim(site.proj), seed + static_cast<uint64_t>(t)));
            const double ppl = perplexity(m, art.corpus.heldout);
            sum += ppl;
            sum2 += ppl * ppl;
        }
        const double mean = sum / trials;
        const double var = trials > 1 ? std::max(0.0, sum2 / trials - mean * mean) : 0.0;
        emit(to_string(kind), mean, std::sqrt(var));
    }

    maybe_write_json(fs::path(out_dir) / "ablate.json", payload, format);
    std::cout << "ablation table written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cualab: block-rotation adapter laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", format = "csv", checkpoint;
    uint64_t seed = 0;
    bool identity = false, verbose = false;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override keys)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--format", format, "report format: csv adds json when set to json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", seed, "top-level seed")->each([&](const std::string&) {
            seed_given = true;
        });
        sub->add_flag("--verbose", verbose, "progress notes on stderr");
    };

    auto* train = app.add_subcommand("train", "pretrain, compress, insert and train adapters");
    add_common(train);
    bool planted = false;
    train->add_flag("--planted-rotation", planted,
                    "hide a block rotation in the frozen weights and measure recovery");

    auto* sweep = app.add_subcommand("noise-sweep", "infidelity table and ppl-vs-lambda curve");
    add_common(sweep);
    sweep->add_option("--checkpoint", checkpoint, "trained checkpoint directory");
    sweep->add_flag("--identity", identity, "rebuild the identity-adapter pipeline instead");

    auto* entangle = app.add_subcommand("entangle", "operator Schmidt reports");
    add_common(entangle);

    auto* pack = app.add_subcommand("pack", "coupling-map matching and circuit packing");
    add_common(pack);

    auto* ablate = app.add_subcommand("ablate", "stochastic baseline table at one site");
    add_common(ablate);

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = load_config(config_path, seed, seed_given);
        if (train->parsed()) {
            if (planted) cfg["planted_rotation"]["enabled"] = true;
            return cmd_train(cfg, out_dir, format, verbose);
        }
        if (sweep->parsed()) return cmd_noise_sweep(cfg, out_dir, format, checkpoint, identity, verbose);
        if (entangle->parsed()) return cmd_entangle(cfg, out_dir, format, verbose);
        if (pack->parsed()) return cmd_pack(cfg, out_dir, format);
        if (ablate->parsed()) return cmd_ablate(cfg, out_dir, format, verbose);
    } catch (const std::exception& e) {
        std::cerr << "cualab: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
