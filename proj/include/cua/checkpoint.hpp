// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "cua/toy_lm.hpp"

namespace cua {

/// Checkpoint directory layout:
///   backbone.bin                  "TLM1" blob
///   adapter_<layer>_<proj>.cua1   Cayley parameter blob per adapted site
///   adapter_<layer>_<proj>.cud1   dense blocks (unconstrained regime)
///   manifest.json                 sites, modes, block sizes, blob names
void save_checkpoint(const std::string& dir, const ToyLm& model, uint64_t seed);

ToyLm load_checkpoint(const std::string& dir);

}  // namespace cua
