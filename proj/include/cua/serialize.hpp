// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cua/cayley.hpp"
#include "cua/common.hpp"

namespace cua {

// Little-endian primitives. Files produced here are byte-identical across
// platforms; readers reject foreign magics and truncated payloads.

void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_f64(std::ostream& os, double v);
uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

/// Adapter parameter blob: magic "CUA1", then b and k as u32 LE, then
/// k*b(b-1)/2 float64 LE values. Round trips bit-exactly.
void save_skew_params(std::ostream& os, const SkewBlockParams& params);
SkewBlockParams load_skew_params(std::istream& is);
void save_skew_params_file(const std::string& path, const SkewBlockParams& params);
SkewBlockParams load_skew_params_file(const std::string& path);

/// Dense-block blob (unconstrained adapter regime): magic "CUD1", b, k,
/// then k dense b x b blocks in block order, column-major float64 LE.
void save_dense_blocks(std::ostream& os, int block_dim, const std::vector<Matrix>& blocks);
std::vector<Matrix> load_dense_blocks(std::istream& is, int* block_dim_out);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const void* data, size_t n);

}  // namespace cua
