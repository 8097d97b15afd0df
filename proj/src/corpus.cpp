// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/corpus.hpp"

#include <array>
#include <fstream>
#include <stdexcept>
#include <string>

#include "cua/common.hpp"
#include "cua/rng.hpp"

namespace cua {

namespace {

const char* kDeterminers[] = {"the", "a", "every", "this", "that", "one"};
const char* kAdjectives[] = {"small", "bright", "quiet", "old",   "green", "heavy",
                             "quick", "plain",  "warm",  "sharp", "round", "pale",
                             "deep",  "thin",   "broad", "clear"};
const char* kNouns[] = {"river",  "stone",  "garden", "window", "engine", "ladder",
                        "market", "signal", "harbor", "forest", "letter", "bridge",
                        "mirror", "wheel",  "candle", "meadow", "tower",  "valley",
                        "basket", "stream", "anchor", "orchard"};
const char* kVerbsTrans[] = {"carries", "follows", "covers", "holds",  "crosses",
                             "guards",  "lifts",   "meets",  "passes", "turns",
                             "watches", "fills"};
const char* kVerbsIntrans[] = {"waits", "shines", "settles", "drifts", "rests",
                               "grows", "fades",  "stands",  "sinks",  "rises"};
const char* kAdverbs[] = {"slowly", "quietly", "again", "together", "alone",
                          "early",  "late",    "often", "gently"};
const char* kPreps[] = {"near", "beyond", "under", "beside", "above", "along"};
const char* kNames[] = {"mara", "oskar", "lena", "felix", "iris", "anton", "greta", "pavel"};

template <size_t N>
const char* pick(const char* (&bank)[N], Rng& rng) {
    return bank[rng.below(N)];
}

void append_word(std::string& out, const char* word, bool capitalize) {
    if (capitalize && word[0] >= 'a' && word[0] <= 'z') {
        out.push_back(static_cast<char>(word[0] - 'a' + 'A'));
        out.append(word + 1);
    } else {
        out.append(word);
    }
}

void noun_phrase(std::string& out, Rng& rng, bool capitalize) {
    append_word(out, pick(kDeterminers, rng), capitalize);
    out.push_back(' ');
    if (rng.uniform() < 0.6) {
        out.append(pick(kAdjectives, rng));
        out.push_back(' ');
    }
    out.append(pick(kNouns, rng));
}

void sentence(std::string& out, Rng& rng) {
    const double form = rng.uniform();
    if (form < 0.12) {
        // Correct small arithmetic keeps a learnable exact structure in the mix.
        const long a = static_cast<long>(rng.below(20));
        const long b = static_cast<long>(rng.below(20));
        if (rng.uniform() < 0.5) {
            out += std::to_string(a) + " plus " + std::to_string(b) + " is " +
                   std::to_string(a + b) + ".";
        } else {
            out += std::to_string(a) + " times " + std::to_string(b) + " is " +
                   std::to_string(a * b) + ".";
        }
        return;
    }
    if (form < 0.3) {
        append_word(out, pick(kNames, rng), true);
        out.push_back(' ');
        out.append(pick(kVerbsIntrans, rng));
        if (rng.uniform() < 0.5) {
            out.push_back(' ');
            out.append(pick(kAdverbs, rng));
        }
        out.push_back('.');
        return;
    }
    noun_phrase(out, rng, true);
    out.push_back(' ');
    out.append(pick(kVerbsTrans, rng));
    out.push_back(' ');
    noun_phrase(out, rng, false);
    if (rng.uniform() < 0.4) {
        out.push_back(' ');
        out.append(pick(kPreps, rng));
        out.push_back(' ');
        noun_phrase(out, rng, false);
    }
    out.push_back('.');
}

}  // namespace

std::vector<uint8_t> generate_builtin_text(size_t target_bytes, uint64_t seed) {
    require(target_bytes >= 256, "generate_builtin_text: target too small");
    std::string text;
    text.reserve(target_bytes + 256);
    Rng rng = Rng::derive(seed, 0xc0d9);
    while (text.size() < target_bytes) {
        const int sentences = 3 + static_cast<int>(rng.below(5));
        for (int s = 0; s < sentences && text.size() < target_bytes; ++s) {
            sentence(text, rng);
            text.push_back(' ');
        }
        if (!text.empty() && text.back() == ' ') text.pop_back();
        text.push_back('\n');
    }
    text.resize(target_bytes);
    return {text.begin(), text.end()};
}

namespace {

Corpus split_corpus(std::vector<uint8_t> bytes, double heldout_fraction) {
    require(heldout_fraction > 0.0 && heldout_fraction < 1.0,
            "corpus: heldout fraction must be in (0,1)");
    require(bytes.size() >= 64, "corpus: too few bytes");
    size_t cut = static_cast<size_t>(static_cast<double>(bytes.size()) * (1.0 - heldout_fraction));
    while (cut < bytes.size() && bytes[cut] != '\n') ++cut;  // snap to a line break
    if (cut >= bytes.size()) cut = bytes.size() - 1;
    Corpus c;
    c.train.assign(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    c.heldout.assign(bytes.begin() + static_cast<long>(cut), bytes.end());
    return c;
}

}  // namespace

Corpus make_builtin_corpus(size_t target_bytes, uint64_t seed, double heldout_fraction) {
    return split_corpus(generate_builtin_text(target_bytes, seed), heldout_fraction);
}

Corpus load_corpus_file(const std::string& path, double heldout_fraction) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw std::runtime_error("load_corpus_file: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                               std::istreambuf_iterator<char>());
    return split_corpus(std::move(bytes), heldout_fraction);
}

}  // namespace cua
