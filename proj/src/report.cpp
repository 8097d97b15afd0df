// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/report.hpp"

#include <cinttypes>
#include <cstdio>

namespace cua {

CsvReport::CsvReport(const std::string& path, uint64_t cfg_hash, uint64_t seed)
    : os_(path) {
    require(os_.good(), "CsvReport: cannot open " + path);
    char line[160];
    std::snprintf(line, sizeof line, "# config_hash=%016" PRIx64 " seed=%" PRIu64 " version=%s",
                  cfg_hash, seed, kToolVersion);
    os_ << line << "\n";
}

void CsvReport::header(const std::vector<std::string>& columns) { row(columns); }

void CsvReport::row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) os_ << ",";
        os_ << cells[i];
    }
    os_ << "\n";
}

std::string CsvReport::num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string CsvReport::num(long v) { return std::to_string(v); }

uint64_t config_hash(const std::string& canonical_config) {
    return fnv1a(canonical_config.data(), canonical_config.size());
}

}  // namespace cua
