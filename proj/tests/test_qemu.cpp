// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "cua/entanglement.hpp"
#include "cua/qemu.hpp"

using namespace cua;

namespace {

AdapterTransform random_sign_bdu(int dim, int block_dim, double scale, Rng& rng) {
    AdapterTransform t;
    t.mode = AdapterMode::SignConstrained;
    t.dim = dim;
    t.block_dim = block_dim;
    t.params = SkewBlockParams::random(block_dim, dim / block_dim, scale, rng);
    t.refresh();
    return t;
}

}  // namespace

TEST_SUITE("qemu") {

TEST_CASE("amplitude_encode splits magnitude, norm and signs") {
    Vector x(4);
    x << 3, -4, 0, 0;
    const auto s = amplitude_encode(x);
    CHECK(s.norm == doctest::Approx(5.0));
    CHECK(s.amplitudes[0] == doctest::Approx(0.6));
    CHECK(s.amplitudes[1] == doctest::Approx(-0.8));
    CHECK(s.signs[0] == 1);
    CHECK(s.signs[1] == -1);
    CHECK(s.signs[2] == 0);
    CHECK(s.amplitudes.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));

    Vector basis(4);
    basis << 1, 0, 0, 0;
    const auto b = amplitude_encode(basis);
    CHECK(b.norm == 1.0);
    CHECK(!b.zero_slice);

    const auto z = amplitude_encode(Vector::Zero(4));
    CHECK(z.zero_slice);

    Vector bad(3);
    CHECK_THROWS(amplitude_encode(bad));
}

TEST_CASE("ideal probabilities square the evolved amplitudes") {
    Vector x(4);
    x << 3, -4, 0, 0;
    const auto s = amplitude_encode(x);
    const Vector p = ideal_probabilities(Matrix::Identity(4, 4), s);
    CHECK(p[0] == doctest::Approx(0.36));
    CHECK(p[1] == doctest::Approx(0.64));
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));

    for (uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const Matrix q = haar_special_orthogonal(8, rng);
        Vector v(8);
        for (long i = 0; i < 8; ++i) v[i] = rng.gaussian();
        const Vector probs = ideal_probabilities(q, amplitude_encode(v));
        CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("depolarizing channel mixes toward uniform") {
    Vector p(4);
    p << 1, 0, 0, 0;
    CHECK((apply_depolarizing(p, 0.0) - p).norm() == 0.0);
    const Vector full = apply_depolarizing(p, 1.0);
    for (long i = 0; i < 4; ++i) CHECK(full[i] == doctest::Approx(0.25));

    const Vector mixed = apply_depolarizing(p, 0.012);
    CHECK(mixed[0] == doctest::Approx(0.991));
    CHECK(mixed[1] == doctest::Approx(0.003));
    CHECK(mixed.sum() == doctest::Approx(1.0).epsilon(1e-12));

    const Vector uniform = Vector::Constant(4, 0.25);
    for (double lambda : {0.1, 0.5, 0.9})
        CHECK((apply_depolarizing(uniform, lambda) - uniform).norm() < 1e-15);
    CHECK_THROWS(apply_depolarizing(p, 1.5));
}

TEST_CASE("readout confusion is a tensor-product bit flip") {
    Vector p = Vector::Zero(4);
    p[0] = 1.0;  // |00>
    CHECK((apply_readout_confusion(p, 0.0, 2) - p).norm() == 0.0);
    const double ro = 6.8e-3;
    const Vector q = apply_readout_confusion(p, ro, 2);
    CHECK(q[0] == doctest::Approx((1 - ro) * (1 - ro)));
    CHECK(q[1] == doctest::Approx((1 - ro) * ro));
    CHECK(q[3] == doctest::Approx(ro * ro));
    CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));

    // n-qubit escape probability matches 1 - (1 - ro)^n.
    for (int n : {2, 3, 8}) {
        Vector basis = Vector::Zero(1L << n);
        basis[0] = 1.0;
        const Vector out = apply_readout_confusion(basis, ro, n);
        const double escape = 1.0 - out[0];
        CHECK(escape == doctest::Approx(1.0 - std::pow(1.0 - ro, n)).epsilon(1e-12));
    }
    const double e2 = 1.0 - std::pow(1.0 - ro, 2);
    const double e3 = 1.0 - std::pow(1.0 - ro, 3);
    const double e8 = 1.0 - std::pow(1.0 - ro, 8);
    CHECK(std::abs(e2 - 0.014) <= 1e-3);
    CHECK(std::abs(e3 - 0.020) <= 1e-3);
    CHECK(std::abs(e8 - 0.053) <= 1e-3);
}

TEST_CASE("shot sampling is deterministic and unbiased") {
    Vector p(4);
    p << 0.36, 0.64, 0, 0;
    Rng rng1 = Rng::derive(5, 1, 2);
    Rng rng2 = Rng::derive(5, 1, 2);
    const auto c1 = sample_shots(p, 8192, rng1);
    const auto c2 = sample_shots(p, 8192, rng2);
    CHECK(c1.counts == c2.counts);
    CHECK(c1.total == 8192);
    CHECK(c1.counts[2] == 0);
    CHECK(c1.counts[3] == 0);
    // Within 4 sigma of the binomial expectation.
    const double mean = 8192 * 0.36;
    const double sd = std::sqrt(8192 * 0.36 * 0.64);
    CHECK(std::abs(c1.counts[0] - mean) < 4 * sd);

    Vector indicator = Vector::Zero(4);
    indicator[2] = 1.0;
    Rng rng3(0);
    const auto c3 = sample_shots(indicator, 1000, rng3);
    CHECK(c3.counts[2] == 1000);
}

TEST_CASE("reconstruct inverts the encoding in the exact-frequency limit") {
    Vector x(4);
    x << 3, -4, 0, 0;
    const auto slice = amplitude_encode(x);
    ShotCounts counts;
    counts.total = 100;
    counts.counts = {36, 64, 0, 0};
    const Vector y = reconstruct(counts, slice);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(-4.0));
    CHECK(y[2] == 0.0);

    // Counts on a zero-sign index stay gated to zero.
    ShotCounts noisy;
    noisy.total = 100;
    noisy.counts = {30, 60, 10, 0};
    const Vector yn = reconstruct(noisy, slice);
    CHECK(yn[2] == 0.0);
    CHECK(yn[3] == 0.0);

    Vector e0(4);
    e0 << 1, 0, 0, 0;
    ShotCounts all0;
    all0.total = 64;
    all0.counts = {64, 0, 0, 0};
    CHECK((reconstruct(all0, amplitude_encode(e0)) - e0).norm() == 0.0);
}

TEST_CASE("density-matrix reference matches the probability-vector path") {
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(3));  // 2..4 qubits
        const long b = 1L << n;
        const Matrix q = haar_special_orthogonal(static_cast<int>(b), rng);
        Vector x(b);
        for (long i = 0; i < b; ++i) x[i] = rng.gaussian();
        const auto slice = amplitude_encode(x);
        const double lambda = rng.uniform();
        const double ro = 0.05 * rng.uniform();

        Vector fast = ideal_probabilities(q, slice);
        fast = apply_depolarizing(fast, lambda);
        fast = apply_readout_confusion(fast, ro, n);

        const Vector reference = dm_reference_probabilities(q, slice, lambda, ro);
        CHECK((fast - reference).norm() < 1e-12);
    }
}

TEST_CASE("noiseless exact-prob emulation equals the classical forward") {
    Rng rng(101);
    const NoiseModel quiet = noiseless_model();
    EmulationOptions opts;
    opts.path = EmulationPath::ExactProb;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 16;
        AdapterTransform t = random_sign_bdu(d, 4, 1.0, rng);
        Matrix w(8, d);
        for (long i = 0; i < w.size(); ++i) w.data()[i] = rng.gaussian();
        CuaLayer layer{t, w};
        Vector x(d);
        for (long i = 0; i < d; ++i) x[i] = rng.gaussian();
        const Vector emu = emulated_forward(layer, x, quiet, opts);
        const Vector cls = forward_sign_constrained(layer, x);
        CHECK((emu - cls).norm() <= 1e-10 * std::max(1.0, cls.norm()));
    }
}

TEST_CASE("zero input emulates to zero output") {
    Rng rng(7);
    AdapterTransform t = random_sign_bdu(8, 4, 1.0, rng);
    CuaLayer layer{t, Matrix::Identity(8, 8)};
    EmulationOptions opts;
    opts.path = EmulationPath::Sampled;
    const Vector out = emulated_forward(layer, Vector::Zero(8), NoiseModel{}, opts);
    CHECK(out.norm() == 0.0);
}

TEST_CASE("sampled emulation is deterministic per seed") {
    Rng rng(13);
    AdapterTransform t = random_sign_bdu(8, 4, 1.0, rng);
    CuaLayer layer{t, Matrix::Identity(8, 8)};
    Vector x(8);
    for (long i = 0; i < 8; ++i) x[i] = rng.gaussian();
    EmulationOptions opts;
    opts.path = EmulationPath::Sampled;
    opts.seed = 99;
    opts.token_index = 3;
    const Vector a = emulated_forward(layer, x, NoiseModel{}, opts);
    const Vector b = emulated_forward(layer, x, NoiseModel{}, opts);
    CHECK((a - b).norm() == 0.0);
    opts.seed = 100;
    const Vector c = emulated_forward(layer, x, NoiseModel{}, opts);
    CHECK((a - c).norm() > 0.0);
}

TEST_CASE("probability mass is conserved through every channel") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix q = haar_special_orthogonal(4, rng);
        Vector x(4);
        for (long i = 0; i < 4; ++i) x[i] = rng.gaussian();
        Vector p = ideal_probabilities(q, amplitude_encode(x));
        p = apply_depolarizing(p, rng.uniform());
        p = apply_readout_confusion(p, 0.1 * rng.uniform(), 2);
        CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(p.minCoeff() >= 0.0);
    }
}

TEST_CASE("noise model file round trip") {
    NoiseModel m;
    m.p_sx = 1e-4;
    m.p_cz = 2e-3;
    m.p_readout = 5e-3;
    m.n_shots = 4096;
    const auto path = std::filesystem::temp_directory_path() / "cua_noise_test.json";
    save_noise_model_file(path.string(), m);
    const NoiseModel loaded = load_noise_model_file(path.string());
    CHECK(loaded.p_sx == m.p_sx);
    CHECK(loaded.p_cz == m.p_cz);
    CHECK(loaded.p_readout == m.p_readout);
    CHECK(loaded.n_shots == m.n_shots);
    std::filesystem::remove(path);
    CHECK_THROWS(load_noise_model_file("/nonexistent/noise.json"));
}

TEST_CASE("shot traces list nonzero outcomes per slice") {
    ShotCounts counts;
    counts.total = 100;
    counts.counts = {64, 0, 36, 0};
    std::ostringstream os;
    append_shot_trace(os, 7, counts);
    CHECK(os.str() == "7,0,64\n7,2,36\n");
}

TEST_CASE("shot-noise RMSE decreases with shot count at the sqrt rate") {
    Rng rng(53);
    const std::vector<long> shot_grid{1024, 2048, 4096, 8192, 16384};
    std::vector<double> mse(shot_grid.size(), 0.0);
    const int trials = 1200;
    for (int trial = 0; trial < trials; ++trial) {
        const Matrix q = haar_special_orthogonal(4, rng);
        Vector x(4);
        for (long i = 0; i < 4; ++i) x[i] = rng.gaussian();
        const auto slice = amplitude_encode(x);
        const Vector p = ideal_probabilities(q, slice);
        const Vector exact = reconstruct_from_probabilities(p, slice);
        for (size_t g = 0; g < shot_grid.size(); ++g) {
            Rng srng = Rng::derive(999, static_cast<uint64_t>(trial), g);
            const auto counts = sample_shots(p, shot_grid[g], srng);
            const Vector approx = reconstruct(counts, slice);
            mse[g] += (approx - exact).squaredNorm();
        }
    }
    std::vector<double> rmse(shot_grid.size());
    for (size_t g = 0; g < shot_grid.size(); ++g) rmse[g] = std::sqrt(mse[g] / trials);
    for (size_t g = 1; g < rmse.size(); ++g) CHECK(rmse[g] <= rmse[g - 1]);
    const double ratio = rmse.front() / rmse.back();
    CHECK(ratio >= 2.7);
    CHECK(ratio <= 6.0);
}

}  // TEST_SUITE
