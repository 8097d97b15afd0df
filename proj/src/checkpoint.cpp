// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cua/serialize.hpp"

namespace cua {

namespace fs = std::filesystem;
using nlohmann::json;

void save_checkpoint(const std::string& dir, const ToyLm& model, uint64_t seed) {
    fs::create_directories(dir);
    save_backbone_file((fs::path(dir) / "backbone.bin").string(), model);

    json manifest;
    manifest["format"] = "cua-checkpoint-v1";
    manifest["backbone"] = "backbone.bin";
    manifest["seed"] = seed;
    manifest["backbone_checksum"] = model.backbone_checksum();
    manifest["adapters"] = json::array();
    for (int l = 0; l < model.cfg.num_layers; ++l) {
        for (int p = 0; p < kNumProjKinds; ++p) {
            const AdapterSite site{l, static_cast<ProjKind>(p)};
            const auto& a = model.adapter_at(site);
            if (!a) continue;
            require(!a->fixed, "save_checkpoint: fixed ablation operators are not checkpointed");
            const std::string stem =
                "adapter_" + std::to_string(l) + "_" + to_string(site.proj);
            json entry{{"layer", l},
                       {"proj", to_string(site.proj)},
                       {"mode", to_string(a->mode)},
                       {"block_dim", a->block_dim}};
            if (a->cayley_backend()) {
                entry["blob"] = stem + ".cua1";
                save_skew_params_file((fs::path(dir) / (stem + ".cua1")).string(), a->params);
            } else {
                entry["blob"] = stem + ".cud1";
                std::ofstream os(fs::path(dir) / (stem + ".cud1"), std::ios::binary);
                require(os.good(), "save_checkpoint: cannot open dense blob");
                save_dense_blocks(os, a->block_dim, a->dense_blocks);
            }
            manifest["adapters"].push_back(std::move(entry));
        }
    }
    std::ofstream os(fs::path(dir) / "manifest.json");
    require(os.good(), "save_checkpoint: cannot write manifest");
    os << manifest.dump(2) << "\n";
}

ToyLm load_checkpoint(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is.good())
        throw std::runtime_error("load_checkpoint: missing manifest in " + dir);
    json manifest;
    is >> manifest;
    require(manifest.value("format", "") == "cua-checkpoint-v1",
            "load_checkpoint: unknown manifest format");

    ToyLm model = load_backbone_file(
        (fs::path(dir) / manifest.value("backbone", "backbone.bin")).string());
    if (manifest.contains("backbone_checksum"))
        require(model.backbone_checksum() == manifest["backbone_checksum"].get<uint64_t>(),
                "load_checkpoint: backbone checksum mismatch");

    for (const auto& entry : manifest["adapters"]) {
        const AdapterSite site{entry["layer"].get<int>(),
                               proj_kind_from_string(entry["proj"].get<std::string>())};
        const AdapterMode mode = adapter_mode_from_string(entry["mode"].get<std::string>());
        const std::string blob = (fs::path(dir) / entry["blob"].get<std::string>()).string();
        AdapterTransform t;
        t.mode = mode;
        t.dim = model.proj_input_dim(site.proj);
        if (mode == AdapterMode::Unconstrained) {
            std::ifstream bs(blob, std::ios::binary);
            if (!bs.good()) throw std::runtime_error("load_checkpoint: cannot open " + blob);
            t.dense_blocks = load_dense_blocks(bs, &t.block_dim);
        } else {
            t.params = load_skew_params_file(blob);
            t.block_dim = t.params.block_dim;
            t.refresh();
        }
        require(t.block_dim == entry["block_dim"].get<int>(),
                "load_checkpoint: block size mismatch for " + blob);
        require(t.dim == t.block_dim * t.num_blocks(),
                "load_checkpoint: adapter does not cover the projection input");
        model.adapter_at(site) = std::move(t);
    }
    return model;
}

}  // namespace cua
