// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cua {

/// Byte-level corpus with a fixed train / held-out split.
struct Corpus {
    std::vector<uint8_t> train;
    std::vector<uint8_t> heldout;
};

/// Deterministic pseudo-English generator: templated sentences over fixed
/// word banks plus correct small-number arithmetic lines, paragraph breaks
/// every few sentences. Identical bytes for identical (target_bytes, seed).
std::vector<uint8_t> generate_builtin_text(size_t target_bytes, uint64_t seed);

/// The bundled corpus: ~1 MiB of generated text, last `heldout_fraction`
/// held out (split snapped to a newline).
Corpus make_builtin_corpus(size_t target_bytes = 1 << 20, uint64_t seed = 0xC0FFEE,
                           double heldout_fraction = 0.1);

/// Plain-bytes corpus file with the same split rule.
Corpus load_corpus_file(const std::string& path, double heldout_fraction = 0.1);

}  // namespace cua
