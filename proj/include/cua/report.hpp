// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "cua/common.hpp"

namespace cua {

/// CSV report with a '#'-prefixed provenance header (config hash, seed,
/// version). Numeric cells are printed with enough digits to round trip.
class CsvReport {
public:
    CsvReport(const std::string& path, uint64_t config_hash, uint64_t seed);

    void header(const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);

    static std::string num(double v);
    static std::string num(long v);

private:
    std::ofstream os_;
};

inline constexpr const char* kToolVersion = "0.1.0";

/// Stable hash of a canonical configuration string.
uint64_t config_hash(const std::string& canonical_config);

}  // namespace cua
