// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line and
// enforces its stated tolerances and runtime budget; the process exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "cua/adapter.hpp"
#include "cua/cayley.hpp"
#include "cua/circuit_plan.hpp"
#include "cua/corpus.hpp"
#include "cua/distill.hpp"
#include "cua/entanglement.hpp"
#include "cua/qemu.hpp"
#include "cua/toy_lm.hpp"

using namespace cua;

namespace {

struct Runner {
    int failures = 0;

    void run(int number, const std::string& name, double budget_seconds,
             const std::function<bool(std::string&)>& body) {
        std::string detail;
        bool ok = false;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ok = body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (budget_seconds > 0 && elapsed > budget_seconds) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + std::string("over runtime budget");
        }
        std::printf("%s criterion %2d: %-28s [%6.1f s]%s%s\n", ok ? "PASS" : "FAIL", number,
                    name.c_str(), elapsed, detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

bool within(double value, double target, double tol) {
    return std::abs(value - target) <= tol;
}

// --- shared slow pipeline (criteria 7, 8, 9) -------------------------------

struct SharedPipeline {
    Corpus corpus;
    ToyLm teacher;
    ToyLm compressed;
    double teacher_ppl = 0;
    double compressed_ppl = 0;

    SharedPipeline()
        : corpus(make_builtin_corpus()), teacher(ToyLm::build({}, 42)) {
        PretrainConfig pc;
        pc.steps = 1200;
        pc.batch_size = 8;
        pc.learning_rate = 3e-3;
        pc.seed = 1;
        pretrain_lm(teacher, corpus.train, pc);
        teacher_ppl = perplexity(teacher, corpus.heldout);
        compressed = compress_svd(teacher, 0.5);
        compressed_ppl = perplexity(compressed, corpus.heldout);
    }
};

TrainConfig standard_train(uint64_t seed, int steps) {
    TrainConfig tc;
    tc.learning_rate = 0.02;
    tc.warmup_steps = 30;
    tc.batch_size = 8;
    tc.max_steps = steps;
    tc.seed = seed;
    return tc;
}

int brute_force_max_matching(const CouplingMap& map) {
    int best = 0;
    std::vector<char> used(static_cast<size_t>(map.num_qubits), 0);
    std::function<void(size_t, int)> rec = [&](size_t idx, int count) {
        best = std::max(best, count);
        for (size_t e = idx; e < map.edges.size(); ++e) {
            const auto [u, v] = map.edges[e];
            if (used[static_cast<size_t>(u)] || used[static_cast<size_t>(v)]) continue;
            used[static_cast<size_t>(u)] = used[static_cast<size_t>(v)] = 1;
            rec(e + 1, count + 1);
            used[static_cast<size_t>(u)] = used[static_cast<size_t>(v)] = 0;
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

int main() {
    Runner runner;

    runner.run(1, "infidelity table", 1.0, [](std::string& detail) {
        const NoiseModel noise;
        struct Row {
            int n;
            double l1, l2, l, ro;
        };
        const Row rows[] = {
            {2, 0.005, 0.007, 0.012, 0.014}, {3, 0.045, 0.077, 0.119, 0.020},
            {4, 0.216, 0.385, 0.518, 0.027}, {5, 0.671, 0.907, 0.969, 0.034},
            {6, 0.990, 1.0, 1.0, 0.040},     {7, 1.0, 1.0, 1.0, 0.047},
            {8, 1.0, 1.0, 1.0, 0.053},
        };
        for (const auto& row : rows) {
            const auto rep = gate_infidelity(gate_budget_for_block(row.n), noise, row.n);
            if (!within(rep.lambda_1q, row.l1, 1e-3) || !within(rep.lambda_2q, row.l2, 1e-3) ||
                !within(rep.lambda_total, row.l, 1e-3) ||
                !within(rep.epsilon_readout, row.ro, 1e-3)) {
                detail = "row n=" + std::to_string(row.n) + " off by more than 0.001";
                return false;
            }
        }
        detail = "7 rows reproduced to +/-0.001";
        return true;
    });

    runner.run(2, "brickwork chi sequence", 120.0, [](std::string& detail) {
        const std::vector<long> expected{1, 4, 4, 16, 16, 16};
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            for (int depth = 1; depth <= 6; ++depth) {
                const Matrix u = brickwork_unitary(12, depth, seed);
                const auto spec = operator_schmidt(u, Bipartition{1024, 4});
                if (spec.rank != expected[static_cast<size_t>(depth - 1)]) {
                    detail = "seed " + std::to_string(seed) + " depth " +
                             std::to_string(depth) + ": rank " + std::to_string(spec.rank);
                    return false;
                }
            }
        }
        detail = "chi = {1,4,4,16,16,16} on 5 seeds";
        return true;
    });

    runner.run(3, "BDU rank structure", 0.0, [](std::string& detail) {
        const Matrix haar = bdu_to_dense(haar_so_bdu(4, 1024, 7));
        const auto natural = operator_schmidt(haar, Bipartition{1024, 4});
        if (natural.rank != 16) {
            detail = "haar natural-cut rank " + std::to_string(natural.rank);
            return false;
        }
        const auto equal = operator_schmidt(haar, Bipartition{64, 64});
        if (equal.rank > 64) {
            detail = "haar equal-cut rank " + std::to_string(equal.rank) + " exceeds 64";
            return false;
        }
        const auto ident =
            operator_schmidt(Matrix::Identity(4096, 4096), Bipartition{1024, 4});
        if (ident.rank != 1 || std::abs(purity_deficit(ident)) > 1e-12) {
            detail = "identity spectrum off";
            return false;
        }
        Rng rng(29);
        const auto params = SkewBlockParams::random(4, 1024, 0.5, rng);
        const auto s0 = operator_schmidt(bdu_to_dense(stress_scale(params, 0.0)),
                                         Bipartition{1024, 4});
        if (s0.rank != 1) {
            detail = "stress s=0 rank " + std::to_string(s0.rank);
            return false;
        }
        for (double s : {1.0, 4.0}) {
            const auto spec = operator_schmidt(bdu_to_dense(stress_scale(params, s)),
                                               Bipartition{1024, 4});
            if (spec.rank != 16) {
                detail = "stress s=" + std::to_string(s) + " rank " +
                         std::to_string(spec.rank);
                return false;
            }
        }
        detail = "haar 16/<=64, identity 1/deficit 0, stress 1->16";
        return true;
    });

    runner.run(4, "cayley correctness", 30.0, [](std::string& detail) {
        const int sizes[] = {2, 4, 8, 16, 64};
        for (int b : sizes) {
            for (int rep = 0; rep < 200; ++rep) {
                Rng rng = Rng::derive(101, static_cast<uint64_t>(b),
                                      static_cast<uint64_t>(rep));
                const auto p = SkewBlockParams::random(b, 1, 1.0, rng);
                const Matrix q = cayley_transform(skew_from_params(p, 0));
                const double ortho =
                    (q.transpose() * q - Matrix::Identity(b, b)).norm();
                if (ortho > 1e-12) {
                    detail = "orthogonality " + std::to_string(ortho) + " at b=" +
                             std::to_string(b);
                    return false;
                }
                if (std::abs(q.determinant() - 1.0) > 1e-12) {
                    detail = "determinant off at b=" + std::to_string(b);
                    return false;
                }
            }
        }
        // Gradient vs central finite differences on 100 cases.
        for (int b : {2, 4, 8, 16}) {
            for (int rep = 0; rep < 25; ++rep) {
                Rng rng = Rng::derive(202, static_cast<uint64_t>(b),
                                      static_cast<uint64_t>(rep));
                const auto p = SkewBlockParams::random(b, 1, 1.0, rng);
                Matrix upstream(b, b);
                for (long i = 0; i < upstream.size(); ++i) upstream.data()[i] = rng.gaussian();
                const std::vector<Matrix> ups{upstream};
                const auto analytic = cayley_gradient(p, ups);
                auto loss = [&](const SkewBlockParams& pp) {
                    return (upstream.array() *
                            cayley_transform(skew_from_params(pp, 0)).array())
                        .sum();
                };
                SkewBlockParams work = p;
                double err2 = 0, ref2 = 0;
                for (size_t i = 0; i < p.values.size(); ++i) {
                    const double step = 1e-6;
                    work.values[i] = p.values[i] + step;
                    const double hi = loss(work);
                    work.values[i] = p.values[i] - step;
                    const double lo = loss(work);
                    work.values[i] = p.values[i];
                    const double fd = (hi - lo) / (2 * step);
                    err2 += (fd - analytic[i]) * (fd - analytic[i]);
                    ref2 += fd * fd;
                }
                if (std::sqrt(err2) > 1e-6 * std::max(1.0, std::sqrt(ref2))) {
                    detail = "gradient mismatch at b=" + std::to_string(b);
                    return false;
                }
            }
        }
        detail = "1000 transforms + 100 gradient checks";
        return true;
    });

    runner.run(5, "quantum-path consistency", 0.0, [](std::string& detail) {
        const NoiseModel quiet = noiseless_model();
        EmulationOptions opts;
        opts.path = EmulationPath::ExactProb;
        for (int trial = 0; trial < 100; ++trial) {
            Rng rng = Rng::derive(303, static_cast<uint64_t>(trial));
            const int d = 16;
            AdapterTransform t;
            t.mode = AdapterMode::SignConstrained;
            t.dim = d;
            t.block_dim = 4;
            t.params = SkewBlockParams::random(4, 4, 1.0, rng);
            t.refresh();
            Matrix w(12, d);
            for (long i = 0; i < w.size(); ++i) w.data()[i] = rng.gaussian();
            const CuaLayer layer{t, w};
            Vector x(d);
            for (long i = 0; i < d; ++i) x[i] = rng.gaussian();
            const Vector emu = emulated_forward(layer, x, quiet, opts);
            const Vector cls = forward_sign_constrained(layer, x);
            if ((emu - cls).norm() > 1e-10 * std::max(1.0, cls.norm())) {
                detail = "emulated/classical mismatch at trial " + std::to_string(trial);
                return false;
            }
        }
        // Exact sign-diagonal absorption.
        Rng rng(404);
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 8;
            Matrix diag = Matrix::Zero(d, d);
            for (int i = 0; i < d; ++i) diag(i, i) = rng.next_u64() & 1 ? 1.0 : -1.0;
            const CuaLayer with_diag{
                AdapterTransform::fixed_operator(AdapterMode::SignConstrained, diag),
                Matrix::Identity(d, d)};
            const CuaLayer with_ident{
                AdapterTransform::identity(AdapterMode::SignConstrained, d, d),
                Matrix::Identity(d, d)};
            Vector x(d);
            for (int i = 0; i < d; ++i) x[i] = rng.uniform() < 0.2 ? 0.0 : rng.gaussian();
            if ((forward_sign_constrained(with_diag, x) -
                 forward_sign_constrained(with_ident, x))
                    .norm() != 0.0) {
                detail = "sign-diagonal absorption not exact";
                return false;
            }
        }
        detail = "100 noiseless matches + exact absorption";
        return true;
    });

    runner.run(6, "shot-noise scaling", 0.0, [](std::string& detail) {
        const std::vector<long> grid{1024, 2048, 4096, 8192, 16384};
        std::vector<double> mse(grid.size(), 0.0);
        const int trials = 1200;
        for (int trial = 0; trial < trials; ++trial) {
            Rng rng = Rng::derive(505, static_cast<uint64_t>(trial));
            const Matrix q = haar_special_orthogonal(4, rng);
            Vector x(4);
            for (int i = 0; i < 4; ++i) x[i] = rng.gaussian();
            const auto slice = amplitude_encode(x);
            const Vector p = ideal_probabilities(q, slice);
            const Vector exact = reconstruct_from_probabilities(p, slice);
            for (size_t g = 0; g < grid.size(); ++g) {
                Rng srng = Rng::derive(606, static_cast<uint64_t>(trial), g);
                const auto counts = sample_shots(p, grid[g], srng);
                mse[g] += (reconstruct(counts, slice) - exact).squaredNorm();
            }
        }
        std::vector<double> rmse;
        for (double m : mse) rmse.push_back(std::sqrt(m / trials));
        for (size_t g = 1; g < rmse.size(); ++g)
            if (rmse[g] > rmse[g - 1]) {
                detail = "sweep not monotone";
                return false;
            }
        const double ratio = rmse.front() / rmse.back();
        if (ratio < 2.7 || ratio > 6.0) {
            detail = "ratio " + std::to_string(ratio) + " outside [2.7, 6.0]";
            return false;
        }
        detail = "RMSE ratio " + std::to_string(ratio).substr(0, 5) + ", monotone sweep";
        return true;
    });

    // Shared teacher/compressed pipeline for the training criteria.
    SharedPipeline pipe;

    runner.run(7, "planted-rotation recovery", 600.0, [&](std::string& detail) {
        ToyLm student = pipe.teacher;
        const std::vector<AdapterSite> sites{{0, ProjKind::V}, {1, ProjKind::V}};
        Rng rng(99);
        for (const auto& site : sites) {
            const auto params = SkewBlockParams::random(4, student.cfg.width / 4, 0.8, rng);
            student.proj_weight(site) =
                student.proj_weight(site) * bdu_to_dense(assemble_bdu(params));
        }
        insert_adapters(student, sites, AdapterMode::Orthogonal, 4);
        const auto report =
            train_adapters(student, pipe.teacher, pipe.corpus, standard_train(5, 600));
        const double gap = report.final_heldout_ppl / pipe.teacher_ppl - 1.0;
        detail = "teacher " + std::to_string(pipe.teacher_ppl) + ", recovered " +
                 std::to_string(report.final_heldout_ppl);
        return gap <= 0.01;
    });

    runner.run(8, "ablation ordering", 0.0, [&](std::string& detail) {
        Rng prng = Rng::derive(42, 0x5e9);
        const auto windows =
            sample_windows(pipe.corpus.train, pipe.teacher.cfg.context_length, 8, prng);
        const auto scores = sensitivity_rank(pipe.compressed, windows, 4);
        const AdapterSite site = scores[0].site;

        for (auto kind : {AblationKind::Identity, AblationKind::SignedDiagonal}) {
            ToyLm m = pipe.compressed;
            insert_fixed_operator(m, site,
                                  make_ablation(kind, m.proj_input_dim(site.proj), 1));
            if (std::abs(perplexity(m, pipe.corpus.heldout) - pipe.compressed_ppl) > 1e-6) {
                detail = std::string(to_string(kind)) + " does not match the baseline";
                return false;
            }
        }
        for (auto kind : {AblationKind::RandomGaussian, AblationKind::RandomUnitary,
                          AblationKind::RandomPermutation}) {
            double mean = 0.0;
            for (uint64_t seed = 1; seed <= 3; ++seed) {
                ToyLm m = pipe.compressed;
                insert_fixed_operator(m, site,
                                      make_ablation(kind, m.proj_input_dim(site.proj), seed));
                mean += perplexity(m, pipe.corpus.heldout) / 3.0;
            }
            if (mean <= pipe.compressed_ppl) {
                detail = std::string(to_string(kind)) + " did not degrade the baseline";
                return false;
            }
        }
        ToyLm student = pipe.compressed;
        const std::vector<AdapterSite> sites{site};
        insert_adapters(student, sites, AdapterMode::SignConstrained, 4);
        const auto report =
            train_adapters(student, pipe.teacher, pipe.corpus, standard_train(11, 500));
        detail = "trained " + std::to_string(report.final_heldout_ppl) + " < baseline " +
                 std::to_string(pipe.compressed_ppl) + " < ablations";
        return report.final_heldout_ppl < pipe.compressed_ppl;
    });

    runner.run(9, "noise phase transition", 0.0, [&](std::string& detail) {
        ToyLm student = pipe.compressed;
        insert_adapters(student, all_sites(student.cfg), AdapterMode::SignConstrained, 4);
        train_adapters(student, pipe.teacher, pipe.corpus, standard_train(7, 500));
        const std::vector<double> grid{0.0, 0.012, 0.119, 0.3, 0.5, 0.8, 1.0};
        const auto points = noise_phase_sweep(student, pipe.corpus.heldout, grid);
        const double base = points[0].ppl;
        for (size_t i = 1; i < points.size(); ++i)
            if (points[i].ppl < points[i - 1].ppl) {
                detail = "sweep not monotone";
                return false;
            }
        const double small = points[1].ppl / base - 1.0;   // lambda = 0.012
        const double large = points[4].ppl / base - 1.0;   // lambda = 0.5
        detail = "+" + std::to_string(small * 100).substr(0, 4) + "% at 0.012, +" +
                 std::to_string(large * 100).substr(0, 5) + "% at 0.5";
        return small < 0.05 && large >= 1.0;
    });

    runner.run(10, "packing arithmetic", 0.0, [](std::string& detail) {
        const auto device = heavy_hex_map(5, 6);
        const auto lanes = greedy_max_matching(device, 64);
        std::set<int> used;
        for (const auto& [u, v] : lanes) {
            used.insert(u);
            used.insert(v);
        }
        if (lanes.size() != 64 || used.size() != 128) {
            detail = "expected 64 disjoint lanes on 128 qubits";
            return false;
        }
        if (packing_schedule(1024, 64).num_circuits != 16 ||
            packing_schedule(144, 72).num_circuits != 2) {
            detail = "packed circuit counts off";
            return false;
        }
        for (int trial = 0; trial < 100; ++trial) {
            Rng rng = Rng::derive(707, static_cast<uint64_t>(trial));
            CouplingMap map;
            map.num_qubits = 4 + static_cast<int>(rng.below(7));
            std::set<std::pair<int, int>> edges;
            for (int e = 0; e < 12; ++e) {
                const int u = static_cast<int>(rng.below(static_cast<uint64_t>(map.num_qubits)));
                const int v = static_cast<int>(rng.below(static_cast<uint64_t>(map.num_qubits)));
                if (u != v) edges.insert({std::min(u, v), std::max(u, v)});
            }
            map.edges.assign(edges.begin(), edges.end());
            const auto picked = greedy_max_matching(map, map.num_qubits);
            std::set<int> touched;
            for (const auto& [u, v] : picked) {
                if (touched.count(u) || touched.count(v)) {
                    detail = "matching not disjoint";
                    return false;
                }
                touched.insert(u);
                touched.insert(v);
            }
            if (2 * static_cast<int>(picked.size()) < brute_force_max_matching(map)) {
                detail = "greedy below half of optimal";
                return false;
            }
        }
        detail = "64 lanes/16 circuits, 144@72 -> 2, 100 graphs verified";
        return true;
    });

    runner.run(11, "entangling power calibration", 0.0, [](std::string& detail) {
        Matrix cnot = Matrix::Zero(4, 4);
        cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
        Matrix swap = Matrix::Zero(4, 4);
        swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
        const long samples = 150000;
        const double e_id = entangling_power(Matrix::Identity(4, 4), samples, 1);
        const double e_cnot = entangling_power(cnot, samples, 1);
        const double e_swap = entangling_power(swap, samples, 1);
        detail = "identity " + std::to_string(e_id).substr(0, 7) + ", swap " +
                 std::to_string(e_swap).substr(0, 7) + ", cnot " + std::to_string(e_cnot);
        return std::abs(e_id) <= 0.005 && std::abs(e_swap) <= 0.005 &&
               std::abs(e_cnot - 1.0) <= 1e-12;
    });

    if (runner.failures == 0) {
        std::printf("acceptance: all 11 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", runner.failures);
    return 1;
}
