// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace cua {

namespace {

// Reshaped-row access: row r = (ia, ja) of M is the (ia, ja) block of U in
// the "tall" orientation (dim_a >= dim_b), or r = (ib, jb) gathering strided
// entries in the "wide" orientation. Both orientations share the singular
// values.
struct ReshapeView {
    const Matrix& u;
    long da, db;
    bool tall;  // rows indexed by (ia, ja) when true, by (ib, jb) otherwise

    long num_rows() const { return tall ? da * da : db * db; }
    long num_cols() const { return tall ? db * db : da * da; }

    void fill_row(long r, double* out) const {
        if (tall) {
            const long ia = r / da, ja = r % da;
            for (long ib = 0; ib < db; ++ib)
                for (long jb = 0; jb < db; ++jb) out[ib * db + jb] = u(ia * db + ib, ja * db + jb);
        } else {
            const long ib = r / db, jb = r % db;
            for (long ia = 0; ia < da; ++ia)
                for (long ja = 0; ja < da; ++ja) out[ia * da + ja] = u(ia * db + ib, ja * db + jb);
        }
    }

    bool row_is_zero(long r) const {
        if (tall) {
            const long ia = r / da, ja = r % da;
            for (long ib = 0; ib < db; ++ib)
                for (long jb = 0; jb < db; ++jb)
                    if (u(ia * db + ib, ja * db + jb) != 0.0) return false;
            return true;
        }
        const long ib = r / db, jb = r % db;
        for (long ia = 0; ia < da; ++ia)
            for (long ja = 0; ja < da; ++ja)
                if (u(ia * db + ib, ja * db + jb) != 0.0) return false;
        return true;
    }
};

Vector singular_values_tall(Matrix m) {
    // Reduce a tall matrix through QR before the SVD; singular values of R
    // equal those of m.
    if (m.rows() > 2 * m.cols()) {
        Eigen::HouseholderQR<Matrix> qr(std::move(m));
        Matrix r = qr.matrixQR().topRows(qr.matrixQR().cols()).triangularView<Eigen::Upper>();
        Eigen::BDCSVD<Matrix> svd(r);
        return svd.singularValues();
    }
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues();
}

}  // namespace

OperatorSchmidtSpectrum operator_schmidt(const Matrix& u, const Bipartition& cut) {
    require(u.rows() == u.cols(), "operator_schmidt: operator must be square");
    require(cut.dim_a >= 2 && cut.dim_b >= 2, "operator_schmidt: both cut factors must be >= 2");
    require(cut.dim_a * cut.dim_b == u.rows(),
            "operator_schmidt: cut does not factor the operator dimension");

    ReshapeView view{u, cut.dim_a, cut.dim_b, cut.dim_a >= cut.dim_b};

    std::vector<long> live;
    for (long r = 0; r < view.num_rows(); ++r)
        if (!view.row_is_zero(r)) live.push_back(r);
    require(!live.empty(), "operator_schmidt: zero operator has no spectrum");

    Matrix m(static_cast<long>(live.size()), view.num_cols());
    std::vector<double> rowbuf(static_cast<size_t>(view.num_cols()));
    for (size_t i = 0; i < live.size(); ++i) {
        view.fill_row(live[i], rowbuf.data());
        for (long j = 0; j < view.num_cols(); ++j) m(static_cast<long>(i), j) = rowbuf[static_cast<size_t>(j)];
    }

    Vector s = m.rows() >= m.cols() ? singular_values_tall(std::move(m))
                                    : singular_values_tall(m.transpose());

    OperatorSchmidtSpectrum spec;
    spec.rank_bound = std::min(cut.dim_a * cut.dim_a, cut.dim_b * cut.dim_b);
    const double frob = s.norm();
    require(frob > 0.0, "operator_schmidt: zero spectrum");
    spec.sigmas = s / frob;
    std::sort(spec.sigmas.data(), spec.sigmas.data() + spec.sigmas.size(),
              std::greater<double>());

    const double cutoff = kSchmidtRankCutoff * spec.sigmas[0];
    spec.rank = 0;
    double entropy = 0.0;
    for (long i = 0; i < spec.sigmas.size(); ++i) {
        const double w = spec.sigmas[i] * spec.sigmas[i];
        if (spec.sigmas[i] > cutoff) ++spec.rank;
        if (w > 0.0) entropy -= w * std::log2(w);
    }
    spec.entropy_bits = entropy;
    return spec;
}

long effective_bond_dim(const OperatorSchmidtSpectrum& spec, double threshold_fraction) {
    require(spec.sigmas.size() > 0, "effective_bond_dim: empty spectrum");
    const double cutoff = threshold_fraction * spec.sigmas[0];
    long count = 0;
    for (long i = 0; i < spec.sigmas.size(); ++i)
        if (spec.sigmas[i] > cutoff) ++count;
    return count;
}

double entropy_ratio(const OperatorSchmidtSpectrum& spec, int n_qubits) {
    require(n_qubits >= 2, "entropy_ratio: need at least 2 qubits");
    return spec.entropy_bits / (0.5 * n_qubits);
}

double purity_deficit(const OperatorSchmidtSpectrum& spec) {
    double sum4 = 0.0;
    for (long i = 0; i < spec.sigmas.size(); ++i) {
        const double w = spec.sigmas[i] * spec.sigmas[i];
        sum4 += w * w;
    }
    return 1.0 - sum4;
}

double entangling_power(const Matrix& gate, long samples, uint64_t seed) {
    require(gate.rows() == 4 && gate.cols() == 4, "entangling_power: 4x4 gate expected");
    require(samples >= 1, "entangling_power: need at least one sample");
    using Cx = std::complex<double>;
    Matrix cnot = Matrix::Zero(4, 4);
    cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;

    auto linear_entropy_sum = [samples, seed](const Matrix& g) {
        Rng rng = Rng::derive(seed, 0xe9, 0);
        double total = 0.0;
        for (long s = 0; s < samples; ++s) {
            // Haar product state |a> (x) |b>, complex Gaussian components.
            Cx a0(rng.gaussian(), rng.gaussian()), a1(rng.gaussian(), rng.gaussian());
            Cx b0(rng.gaussian(), rng.gaussian()), b1(rng.gaussian(), rng.gaussian());
            const double na = std::sqrt(std::norm(a0) + std::norm(a1));
            const double nb = std::sqrt(std::norm(b0) + std::norm(b1));
            a0 /= na; a1 /= na; b0 /= nb; b1 /= nb;
            const Cx in[4] = {a0 * b0, a0 * b1, a1 * b0, a1 * b1};
            Cx out[4] = {};
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) out[i] += g(i, j) * in[j];
            // One-qubit reduced purity of a 2-qubit pure state:
            // 1 - tr(rho_A^2) = 2 |det Psi|^2 with Psi the 2x2 amplitude matrix.
            const Cx det = out[0] * out[3] - out[1] * out[2];
            total += 2.0 * std::norm(det);
        }
        return total;
    };

    const double reference = linear_entropy_sum(cnot);
    return linear_entropy_sum(gate) / reference;
}

Matrix haar_special_orthogonal(int dim, Rng& rng) {
    require(dim >= 1, "haar_special_orthogonal: dim must be positive");
    Matrix g(dim, dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i) g(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    if (q.determinant() < 0) q.col(0) = -q.col(0);
    return q;
}

BlockDiagonalUnitary haar_so_bdu(int block_dim, int num_blocks, uint64_t seed) {
    require(block_dim >= 2 && num_blocks >= 1, "haar_so_bdu: bad shape");
    BlockDiagonalUnitary bdu;
    bdu.block_dim = block_dim;
    bdu.blocks.reserve(static_cast<size_t>(num_blocks));
    for (int i = 0; i < num_blocks; ++i) {
        Rng rng = Rng::derive(seed, 0xb1, static_cast<uint64_t>(i));
        bdu.blocks.push_back(haar_special_orthogonal(block_dim, rng));
    }
    return bdu;
}

namespace {

// In-place two-qubit gate on adjacent targets (t, t+1) of every column of
// `state`. Qubit 0 is the most significant bit of the basis index.
void apply_two_qubit_gate(Matrix& state, const Matrix& gate, int n_qubits, int target) {
    const long dim = state.rows();
    const long hi = 1L << (n_qubits - 1 - target);
    const long lo = hi >> 1;
    for (long col = 0; col < state.cols(); ++col) {
        double* v = state.col(col).data();
        for (long base = 0; base < dim; ++base) {
            if (base & hi || base & lo) continue;
            const long i0 = base, i1 = base | lo, i2 = base | hi, i3 = base | hi | lo;
            const double a0 = v[i0], a1 = v[i1], a2 = v[i2], a3 = v[i3];
            v[i0] = gate(0, 0) * a0 + gate(0, 1) * a1 + gate(0, 2) * a2 + gate(0, 3) * a3;
            v[i1] = gate(1, 0) * a0 + gate(1, 1) * a1 + gate(1, 2) * a2 + gate(1, 3) * a3;
            v[i2] = gate(2, 0) * a0 + gate(2, 1) * a1 + gate(2, 2) * a2 + gate(2, 3) * a3;
            v[i3] = gate(3, 0) * a0 + gate(3, 1) * a1 + gate(3, 2) * a2 + gate(3, 3) * a3;
        }
    }
}

}  // namespace

Matrix brickwork_unitary(int n_qubits, int depth, uint64_t seed) {
    require(n_qubits >= 2, "brickwork_unitary: need at least 2 qubits");
    require(depth >= 0, "brickwork_unitary: negative depth");
    const long dim = 1L << n_qubits;
    Matrix u = Matrix::Identity(dim, dim);
    for (int layer = 1; layer <= depth; ++layer) {
        const int start = (layer % 2 == 1) ? 0 : 1;
        for (int t = start; t + 1 < n_qubits; t += 2) {
            Rng rng = Rng::derive(seed, static_cast<uint64_t>(layer), static_cast<uint64_t>(t));
            const Matrix gate = haar_special_orthogonal(4, rng);
            apply_two_qubit_gate(u, gate, n_qubits, t);
        }
    }
    return u;
}

BlockDiagonalUnitary stress_scale(const SkewBlockParams& params, double s) {
    require(s >= 0.0, "stress_scale: scale must be nonnegative");
    SkewBlockParams scaled = params;
    for (auto& v : scaled.values) v *= s;
    return assemble_bdu(scaled);
}

Matrix pad_to_pow2(const Matrix& u) {
    require(u.rows() == u.cols() && u.rows() >= 2, "pad_to_pow2: square matrix (m >= 2) expected");
    long target = 1;
    while (target < u.rows()) target <<= 1;
    if (target == u.rows()) return u;
    Matrix out = Matrix::Identity(target, target);
    out.topLeftCorner(u.rows(), u.cols()) = u;
    return out;
}

}  // namespace cua
