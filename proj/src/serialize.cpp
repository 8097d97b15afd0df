// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/serialize.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace cua {

namespace {

void write_bytes_le(std::ostream& os, uint64_t v, int nbytes) {
    char buf[8];
    for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, nbytes);
}

uint64_t read_bytes_le(std::istream& is, int nbytes) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), nbytes);
    if (!is) throw std::runtime_error("serialize: truncated input");
    uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void write_u32(std::ostream& os, uint32_t v) { write_bytes_le(os, v, 4); }
void write_u64(std::ostream& os, uint64_t v) { write_bytes_le(os, v, 8); }

void write_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_bytes_le(os, bits, 8);
}

uint32_t read_u32(std::istream& is) { return static_cast<uint32_t>(read_bytes_le(is, 4)); }
uint64_t read_u64(std::istream& is) { return read_bytes_le(is, 8); }

double read_f64(std::istream& is) {
    const uint64_t bits = read_bytes_le(is, 8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_matrix(std::ostream& os, const Matrix& m) {
    write_u64(os, static_cast<uint64_t>(m.rows()));
    write_u64(os, static_cast<uint64_t>(m.cols()));
    for (long j = 0; j < m.cols(); ++j)
        for (long i = 0; i < m.rows(); ++i) write_f64(os, m(i, j));
}

Matrix read_matrix(std::istream& is) {
    const auto rows = static_cast<long>(read_u64(is));
    const auto cols = static_cast<long>(read_u64(is));
    require(rows >= 0 && cols >= 0 && rows < (1L << 32) && cols < (1L << 32),
            "read_matrix: implausible shape");
    Matrix m(rows, cols);
    for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i) m(i, j) = read_f64(is);
    return m;
}

namespace {
constexpr char kParamsMagic[4] = {'C', 'U', 'A', '1'};
constexpr char kDenseMagic[4] = {'C', 'U', 'D', '1'};

void expect_magic(std::istream& is, const char (&magic)[4], const char* what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        throw std::runtime_error(std::string("serialize: bad magic for ") + what);
}
}  // namespace

void save_skew_params(std::ostream& os, const SkewBlockParams& params) {
    params.validate();
    os.write(kParamsMagic, 4);
    write_u32(os, static_cast<uint32_t>(params.block_dim));
    write_u32(os, static_cast<uint32_t>(params.num_blocks));
    for (double v : params.values) write_f64(os, v);
}

SkewBlockParams load_skew_params(std::istream& is) {
    expect_magic(is, kParamsMagic, "adapter parameter blob");
    SkewBlockParams p;
    p.block_dim = static_cast<int>(read_u32(is));
    p.num_blocks = static_cast<int>(read_u32(is));
    require(p.block_dim >= 1 && p.num_blocks >= 1, "load_skew_params: bad header");
    p.values.resize(static_cast<size_t>(p.total_params()));
    for (auto& v : p.values) v = read_f64(is);
    return p;
}

void save_skew_params_file(const std::string& path, const SkewBlockParams& params) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "save_skew_params_file: cannot open " + path);
    save_skew_params(os, params);
}

SkewBlockParams load_skew_params_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw std::runtime_error("load_skew_params_file: cannot open " + path);
    return load_skew_params(is);
}

void save_dense_blocks(std::ostream& os, int block_dim, const std::vector<Matrix>& blocks) {
    os.write(kDenseMagic, 4);
    write_u32(os, static_cast<uint32_t>(block_dim));
    write_u32(os, static_cast<uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        require(b.rows() == block_dim && b.cols() == block_dim,
                "save_dense_blocks: block shape mismatch");
        for (long j = 0; j < b.cols(); ++j)
            for (long i = 0; i < b.rows(); ++i) write_f64(os, b(i, j));
    }
}

std::vector<Matrix> load_dense_blocks(std::istream& is, int* block_dim_out) {
    expect_magic(is, kDenseMagic, "dense block blob");
    const int b = static_cast<int>(read_u32(is));
    const int k = static_cast<int>(read_u32(is));
    require(b >= 1 && k >= 1, "load_dense_blocks: bad header");
    std::vector<Matrix> blocks(static_cast<size_t>(k));
    for (auto& blk : blocks) {
        blk.resize(b, b);
        for (long j = 0; j < b; ++j)
            for (long i = 0; i < b; ++i) blk(i, j) = read_f64(is);
    }
    if (block_dim_out) *block_dim_out = b;
    return blocks;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw std::runtime_error("read_file_bytes: cannot open " + path);
    is.seekg(0, std::ios::end);
    const auto n = static_cast<size_t>(is.tellg());
    is.seekg(0);
    std::vector<uint8_t> out(n);
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n));
    return out;
}

void write_file_bytes(const std::string& path, const void* data, size_t n) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "write_file_bytes: cannot open " + path);
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

}  // namespace cua
