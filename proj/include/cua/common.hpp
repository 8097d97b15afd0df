// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cua {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

/// Throws std::invalid_argument when a precondition does not hold.
inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

/// FNV-1a over an arbitrary byte range. Used for frozen-weight checksums
/// and report provenance hashes.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a(const Matrix& m, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(m.data(), sizeof(double) * static_cast<size_t>(m.size()), h);
}

inline uint64_t fnv1a(const Vector& v, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(v.data(), sizeof(double) * static_cast<size_t>(v.size()), h);
}

inline bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

inline int log2_exact(long n) {
    require(is_power_of_two(n), "log2_exact: not a power of two");
    int k = 0;
    while ((1L << k) < n) ++k;
    return k;
}

}  // namespace cua
