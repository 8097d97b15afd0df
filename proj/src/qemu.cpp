// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/qemu.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace cua {

EncodedSlice amplitude_encode(const Vector& x) {
    require(is_power_of_two(x.size()) && x.size() >= 2,
            "amplitude_encode: slice length must be a power of two >= 2");
    EncodedSlice s;
    s.norm = x.norm();
    s.signs.resize(x.size());
    for (long i = 0; i < x.size(); ++i) s.signs[i] = static_cast<int>(sgn(x[i]));
    if (s.norm < kZeroSliceNorm) {
        s.zero_slice = true;
        s.amplitudes = Vector::Zero(x.size());
        s.norm = 0.0;
        return s;
    }
    s.amplitudes = x / s.norm;
    return s;
}

Vector ideal_probabilities(const Matrix& q, const EncodedSlice& slice) {
    require(q.rows() == q.cols() && q.cols() == slice.amplitudes.size(),
            "ideal_probabilities: dimension mismatch");
    if (slice.zero_slice) return Vector::Zero(slice.amplitudes.size());
    Vector p = (q * slice.amplitudes).cwiseAbs2();
    return p;
}

Vector apply_depolarizing(const Vector& p, double lambda) {
    require(lambda >= 0.0 && lambda <= 1.0, "apply_depolarizing: lambda outside [0,1]");
    const double uniform = 1.0 / static_cast<double>(p.size());
    return (1.0 - lambda) * p + Vector::Constant(p.size(), lambda * uniform);
}

Vector apply_readout_confusion(const Vector& p, double p_readout, int n_qubits) {
    require(p.size() == (1L << n_qubits), "apply_readout_confusion: size is not 2^n");
    require(p_readout >= 0.0 && p_readout <= 1.0, "apply_readout_confusion: rate outside [0,1]");
    if (p_readout == 0.0) return p;
    // Apply the 2x2 confusion matrix along each qubit axis in turn.
    Vector cur = p;
    Vector next(p.size());
    const double stay = 1.0 - p_readout;
    for (int qb = 0; qb < n_qubits; ++qb) {
        const long stride = 1L << qb;
        for (long base = 0; base < p.size(); ++base) {
            if (base & stride) continue;
            const double a = cur[base];
            const double b = cur[base | stride];
            next[base] = stay * a + p_readout * b;
            next[base | stride] = p_readout * a + stay * b;
        }
        std::swap(cur, next);
    }
    return cur;
}

ShotCounts sample_shots(const Vector& p, long n_shots, Rng& rng) {
    require(n_shots >= 1, "sample_shots: n_shots must be positive");
    const double total = p.sum();
    require(std::abs(total - 1.0) < 1e-9 || total > 0.0,
            "sample_shots: probabilities must have positive mass");
    Vector cdf(p.size());
    double acc = 0.0;
    for (long i = 0; i < p.size(); ++i) {
        require(p[i] >= -1e-12, "sample_shots: negative probability");
        acc += std::max(0.0, p[i]);
        cdf[i] = acc;
    }
    ShotCounts out;
    out.counts.assign(static_cast<size_t>(p.size()), 0);
    out.total = n_shots;
    for (long s = 0; s < n_shots; ++s) {
        const double u = rng.uniform() * acc;
        long lo = 0, hi = p.size() - 1;
        while (lo < hi) {
            const long mid = (lo + hi) / 2;
            if (u < cdf[mid])
                hi = mid;
            else
                lo = mid + 1;
        }
        ++out.counts[static_cast<size_t>(lo)];
    }
    return out;
}

namespace {

double clipped_sqrt_freq(double freq) {
    return std::sqrt(std::clamp(freq, kProbClipLo, kProbClipHi));
}

}  // namespace

Vector reconstruct(const ShotCounts& counts, const EncodedSlice& slice) {
    require(counts.total > 0, "reconstruct: empty shot record");
    require(static_cast<long>(counts.counts.size()) == slice.signs.size(),
            "reconstruct: outcome count mismatch");
    Vector y = Vector::Zero(slice.signs.size());
    if (slice.zero_slice) return y;
    for (long k = 0; k < y.size(); ++k) {
        if (slice.signs[k] == 0) continue;
        const double freq =
            static_cast<double>(counts.counts[static_cast<size_t>(k)]) /
            static_cast<double>(counts.total);
        y[k] = clipped_sqrt_freq(freq) * slice.signs[k] * slice.norm;
    }
    return y;
}

Vector reconstruct_from_probabilities(const Vector& p, const EncodedSlice& slice) {
    require(p.size() == slice.signs.size(), "reconstruct_from_probabilities: size mismatch");
    Vector y = Vector::Zero(p.size());
    if (slice.zero_slice) return y;
    for (long k = 0; k < y.size(); ++k) {
        if (slice.signs[k] == 0) continue;
        y[k] = clipped_sqrt_freq(p[k]) * slice.signs[k] * slice.norm;
    }
    return y;
}

double block_lambda(const NoiseModel& noise, int n_qubits) {
    return gate_infidelity(gate_budget_for_block(n_qubits), noise, n_qubits).lambda_total;
}

Vector emulated_sign_map(const AdapterTransform& t, const Vector& x, const NoiseModel& noise,
                         const EmulationOptions& opts) {
    require(t.mode == AdapterMode::SignConstrained,
            "emulated_sign_map: transform must be sign-constrained");
    require(t.cayley_backend(), "emulated_sign_map: orthogonal blocks required");
    require(x.size() == t.dim, "emulated_sign_map: input length mismatch");
    require(is_power_of_two(t.block_dim), "emulated_sign_map: block size must be 2^n");
    noise.validate();

    const int b = t.block_dim;
    const int n_qubits = log2_exact(b);
    const double lambda =
        opts.lambda_override >= 0.0 ? opts.lambda_override : block_lambda(noise, n_qubits);
    require(lambda <= 1.0, "emulated_sign_map: lambda outside [0,1]");

    Vector out(x.size());
    const long num_slices = x.size() / b;
    for (long s = 0; s < num_slices; ++s) {
        const Vector xs = x.segment(s * b, b);
        const EncodedSlice slice = amplitude_encode(xs);
        if (slice.zero_slice) {
            out.segment(s * b, b).setZero();
            continue;
        }
        Vector p = ideal_probabilities(t.q.blocks[static_cast<size_t>(s)], slice);
        if (lambda > 0.0) p = apply_depolarizing(p, lambda);
        if (opts.apply_readout && noise.p_readout > 0.0)
            p = apply_readout_confusion(p, noise.p_readout, n_qubits);
        if (opts.path == EmulationPath::Sampled) {
            Rng rng = Rng::derive(opts.seed, opts.token_index,
                                  (opts.site_tag << 32) | static_cast<uint64_t>(s));
            const ShotCounts counts = sample_shots(p, noise.n_shots, rng);
            out.segment(s * b, b) = reconstruct(counts, slice);
        } else {
            out.segment(s * b, b) = reconstruct_from_probabilities(p, slice);
        }
    }
    return out;
}

Vector emulated_forward(const CuaLayer& layer, const Vector& x, const NoiseModel& noise,
                        const EmulationOptions& opts) {
    require(layer.frozen_weight.cols() == x.size(), "emulated_forward: input length mismatch");
    return layer.frozen_weight * emulated_sign_map(layer.transform, x, noise, opts);
}

void append_shot_trace(std::ostream& os, long slice_id, const ShotCounts& counts) {
    for (size_t k = 0; k < counts.counts.size(); ++k) {
        if (counts.counts[k] == 0) continue;
        os << slice_id << "," << k << "," << counts.counts[k] << "\n";
    }
}

Vector dm_reference_probabilities(const Matrix& q, const EncodedSlice& slice, double lambda,
                                  double p_readout) {
    const long b = q.rows();
    require(b <= 16, "dm_reference_probabilities: reference path is limited to n <= 4 qubits");
    require(lambda >= 0.0 && lambda <= 1.0, "dm_reference_probabilities: lambda outside [0,1]");
    if (slice.zero_slice) return Vector::Zero(b);
    const Vector psi = q * slice.amplitudes;
    Matrix rho = psi * psi.transpose();
    rho = (1.0 - lambda) * rho +
          (lambda / static_cast<double>(b)) * Matrix::Identity(b, b);
    Vector p = rho.diagonal();
    return apply_readout_confusion(p, p_readout, log2_exact(b));
}

}  // namespace cua
