// Copyright (C) 2026 cua-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cua/toy_lm.hpp"

#include <cmath>
#include <fstream>

#include "cua/serialize.hpp"

namespace cua {

namespace {
constexpr double kNormEps = 1e-6;

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// Row-wise RMS normalisation; returns normalised rows and per-row 1/r.
void rmsnorm_rows(const Matrix& x, Matrix& xn, Vector& inv_r) {
    xn.resize(x.rows(), x.cols());
    inv_r.resize(x.rows());
    const double inv_d = 1.0 / static_cast<double>(x.cols());
    for (long s = 0; s < x.rows(); ++s) {
        const double r = std::sqrt(x.row(s).squaredNorm() * inv_d + kNormEps);
        inv_r[s] = 1.0 / r;
        xn.row(s) = x.row(s) * inv_r[s];
    }
}

// Backward of out = (x / r) .* gain given d_out; accumulates the gain
// gradient and returns dL/dx.
Matrix rmsnorm_backward(const Matrix& xn, const Vector& inv_r, const Vector& gain,
                        const Matrix& d_out, Vector& d_gain) {
    Matrix dx(xn.rows(), xn.cols());
    const double inv_d = 1.0 / static_cast<double>(xn.cols());
    for (long s = 0; s < xn.rows(); ++s) {
        const auto xn_row = xn.row(s);
        Eigen::RowVectorXd d_xn = d_out.row(s).cwiseProduct(gain.transpose());
        d_gain += d_out.row(s).cwiseProduct(xn_row).transpose();
        const double dot = d_xn.dot(xn_row) * inv_d;
        dx.row(s) = (d_xn - xn_row * dot) * inv_r[s];
    }
    return dx;
}

}  // namespace

void ToyLmConfig::validate() const {
    require(num_layers >= 1, "ToyLmConfig: need at least one layer");
    require(width >= 4 && width % 4 == 0, "ToyLmConfig: width must be a positive multiple of 4");
    require(num_heads >= 1 && width % num_heads == 0,
            "ToyLmConfig: width must divide into heads");
    require(vocab_size >= 2, "ToyLmConfig: vocab must have at least two symbols");
    require(context_length >= 2, "ToyLmConfig: context too short");
    require(mlp_hidden >= 4 && mlp_hidden % 4 == 0,
            "ToyLmConfig: mlp_hidden must be a positive multiple of 4");
}

const char* to_string(ProjKind kind) {
    switch (kind) {
        case ProjKind::Q: return "q";
        case ProjKind::K: return "k";
        case ProjKind::V: return "v";
        case ProjKind::O: return "o";
        case ProjKind::Gate: return "gate";
        case ProjKind::Up: return "up";
        case ProjKind::Down: return "down";
    }
    return "?";
}

ProjKind proj_kind_from_string(const std::string& s) {
    for (int i = 0; i < kNumProjKinds; ++i)
        if (s == to_string(static_cast<ProjKind>(i))) return static_cast<ProjKind>(i);
    throw std::invalid_argument("unknown projection kind: " + s);
}

std::vector<AdapterSite> all_sites(const ToyLmConfig& cfg) {
    std::vector<AdapterSite> sites;
    for (int l = 0; l < cfg.num_layers; ++l)
        for (int p = 0; p < kNumProjKinds; ++p)
            sites.push_back({l, static_cast<ProjKind>(p)});
    return sites;
}

ToyLm ToyLm::build(const ToyLmConfig& cfg, uint64_t seed) {
    cfg.validate();
    ToyLm m;
    m.cfg = cfg;
    uint64_t stream = 0;
    auto fill = [&](Matrix& w, long rows, long cols, double scale) {
        Rng rng = Rng::derive(seed, 0x70b0, stream++);
        w.resize(rows, cols);
        for (long i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.gaussian();
    };
    fill(m.embed, cfg.vocab_size, cfg.width, 1.0);
    m.layers.resize(static_cast<size_t>(cfg.num_layers));
    const double ws = 1.0 / std::sqrt(static_cast<double>(cfg.width));
    const double hs = 1.0 / std::sqrt(static_cast<double>(cfg.mlp_hidden));
    for (auto& layer : m.layers) {
        layer.attn_gain = Vector::Ones(cfg.width);
        layer.mlp_gain = Vector::Ones(cfg.width);
        fill(layer.wq, cfg.width, cfg.width, ws);
        fill(layer.wk, cfg.width, cfg.width, ws);
        fill(layer.wv, cfg.width, cfg.width, ws);
        fill(layer.wo, cfg.width, cfg.width, ws);
        fill(layer.wgate, cfg.mlp_hidden, cfg.width, ws);
        fill(layer.wup, cfg.mlp_hidden, cfg.width, ws);
        fill(layer.wdown, cfg.width, cfg.mlp_hidden, hs);
    }
    m.final_gain = Vector::Ones(cfg.width);
    fill(m.head, cfg.vocab_size, cfg.width, ws);
    return m;
}

int ToyLm::proj_input_dim(ProjKind kind) const {
    return kind == ProjKind::Down ? cfg.mlp_hidden : cfg.width;
}

const std::optional<AdapterTransform>& ToyLm::adapter_at(const AdapterSite& site) const {
    return layers[static_cast<size_t>(site.layer)]
        .adapters[static_cast<size_t>(static_cast<int>(site.proj))];
}

std::optional<AdapterTransform>& ToyLm::adapter_at(const AdapterSite& site) {
    return layers[static_cast<size_t>(site.layer)]
        .adapters[static_cast<size_t>(static_cast<int>(site.proj))];
}

const Matrix& ToyLm::proj_weight(const AdapterSite& site) const {
    return const_cast<ToyLm*>(this)->proj_weight(site);
}

Matrix& ToyLm::proj_weight(const AdapterSite& site) {
    auto& l = layers[static_cast<size_t>(site.layer)];
    switch (site.proj) {
        case ProjKind::Q: return l.wq;
        case ProjKind::K: return l.wk;
        case ProjKind::V: return l.wv;
        case ProjKind::O: return l.wo;
        case ProjKind::Gate: return l.wgate;
        case ProjKind::Up: return l.wup;
        case ProjKind::Down: return l.wdown;
    }
    throw std::logic_error("proj_weight: unreachable");
}

namespace {

// Adapter pre-W map at one site, classical or emulated.
Matrix site_map(const ToyLm& model, const AdapterTransform& t, const Matrix& rows,
                int site_tag) {
    const auto& emu = model.emu;
    if (emu.enabled && t.mode == AdapterMode::SignConstrained && t.cayley_backend()) {
        EmulationOptions opts;
        opts.path = emu.path;
        opts.lambda_override = emu.lambda;
        opts.apply_readout = emu.apply_readout;
        opts.seed = emu.seed;
        opts.site_tag = static_cast<uint64_t>(site_tag);
        Matrix out(rows.rows(), rows.cols());
        for (long s = 0; s < rows.rows(); ++s) {
            opts.token_index = emu.stream_base + static_cast<uint64_t>(s);
            out.row(s) =
                emulated_sign_map(t, rows.row(s).transpose(), emu.noise, opts).transpose();
        }
        return out;
    }
    if (t.mode == AdapterMode::SignConstrained) return sign_corrected_map_rows(t, rows);
    return t.apply_rows(rows);
}

}  // namespace

Matrix ToyLm::forward(std::span<const int> tokens, Cache* cache) const {
    cfg.validate();
    require(!tokens.empty() && static_cast<int>(tokens.size()) <= cfg.context_length,
            "ToyLm::forward: window length out of range");
    require(!(cache && emu.enabled), "ToyLm::forward: emulated path is inference-only");
    const long s_len = static_cast<long>(tokens.size());
    const int hd = cfg.width / cfg.num_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Matrix x(s_len, cfg.width);
    for (long s = 0; s < s_len; ++s) {
        require(tokens[static_cast<size_t>(s)] >= 0 &&
                    tokens[static_cast<size_t>(s)] < cfg.vocab_size,
                "ToyLm::forward: token id out of range");
        x.row(s) = embed.row(tokens[static_cast<size_t>(s)]);
    }
    if (cache) {
        cache->x0 = x;
        cache->layers.assign(static_cast<size_t>(cfg.num_layers), {});
    }

    for (int li = 0; li < cfg.num_layers; ++li) {
        const auto& lw = layers[static_cast<size_t>(li)];
        Cache::LayerCache* lc = cache ? &cache->layers[static_cast<size_t>(li)] : nullptr;
        if (lc) lc->x_in = x;

        Matrix xn;
        Vector inv_r;
        rmsnorm_rows(x, xn, inv_r);
        Matrix a = xn.array().rowwise() * lw.attn_gain.transpose().array();
        if (lc) {
            lc->xn_attn = xn;
            lc->inv_r_attn = inv_r;
            lc->a = a;
        }

        // Returns the projection input after the (optional) adapter map; the
        // mapped matrix lands in `slot` so the cache keeps it for backward.
        auto site_in = [&](ProjKind kind, const Matrix& rows, Matrix& slot) -> const Matrix& {
            const auto& ad = lw.adapters[static_cast<size_t>(static_cast<int>(kind))];
            if (!ad) return rows;
            slot = site_map(*this, *ad, rows, AdapterSite{li, kind}.flat_index());
            return slot;
        };

        Matrix aq_store, ak_store, av_store;
        const Matrix& aq = site_in(ProjKind::Q, a, lc ? lc->aq : aq_store);
        const Matrix& ak = site_in(ProjKind::K, a, lc ? lc->ak : ak_store);
        const Matrix& av = site_in(ProjKind::V, a, lc ? lc->av : av_store);
        Matrix q = aq * lw.wq.transpose();
        Matrix k = ak * lw.wk.transpose();
        Matrix v = av * lw.wv.transpose();
        if (lc) {
            lc->q = q;
            lc->k = k;
            lc->v = v;
        }

        Matrix ctx(s_len, cfg.width);
        std::vector<Matrix> probs;
        if (lc) probs.reserve(static_cast<size_t>(cfg.num_heads));
        for (int h = 0; h < cfg.num_heads; ++h) {
            const auto qh = q.middleCols(h * hd, hd);
            const auto kh = k.middleCols(h * hd, hd);
            const auto vh = v.middleCols(h * hd, hd);
            Matrix p = Matrix::Zero(s_len, s_len);
            for (long s = 0; s < s_len; ++s) {
                double best = -1e300;
                for (long u = 0; u <= s; ++u) {
                    const double sc = qh.row(s).dot(kh.row(u)) * att_scale;
                    p(s, u) = sc;
                    best = std::max(best, sc);
                }
                double total = 0.0;
                for (long u = 0; u <= s; ++u) {
                    p(s, u) = std::exp(p(s, u) - best);
                    total += p(s, u);
                }
                for (long u = 0; u <= s; ++u) p(s, u) /= total;
            }
            ctx.middleCols(h * hd, hd).noalias() = p * vh;
            if (lc) probs.push_back(std::move(p));
        }
        if (lc) {
            lc->attn_probs = std::move(probs);
            lc->ctx = ctx;
        }

        Matrix ao_store;
        const Matrix& ao = site_in(ProjKind::O, ctx, lc ? lc->ao : ao_store);
        x.noalias() += ao * lw.wo.transpose();
        if (lc) lc->x_mid = x;

        Matrix xn2;
        Vector inv_r2;
        rmsnorm_rows(x, xn2, inv_r2);
        Matrix b = xn2.array().rowwise() * lw.mlp_gain.transpose().array();
        if (lc) {
            lc->xn_mlp = xn2;
            lc->inv_r_mlp = inv_r2;
            lc->b = b;
        }

        Matrix ag_store, au_store;
        const Matrix& ag = site_in(ProjKind::Gate, b, lc ? lc->ag : ag_store);
        const Matrix& au = site_in(ProjKind::Up, b, lc ? lc->au : au_store);
        Matrix gate_pre = ag * lw.wgate.transpose();
        Matrix up_pre = au * lw.wup.transpose();
        Matrix hc(s_len, cfg.mlp_hidden);
        for (long i = 0; i < hc.size(); ++i)
            hc.data()[i] = silu(gate_pre.data()[i]) * up_pre.data()[i];
        if (lc) {
            lc->gate_pre = gate_pre;
            lc->up_pre = up_pre;
            lc->hc = hc;
        }

        Matrix ad_store;
        const Matrix& ad = site_in(ProjKind::Down, hc, lc ? lc->ad : ad_store);
        x.noalias() += ad * lw.wdown.transpose();
    }

    Matrix xn_final;
    Vector inv_r_final;
    rmsnorm_rows(x, xn_final, inv_r_final);
    Matrix f = xn_final.array().rowwise() * final_gain.transpose().array();
    if (cache) {
        cache->xn_final = xn_final;
        cache->inv_r_final = inv_r_final;
        cache->f = f;
    }
    return f * head.transpose();
}

void ToyLm::Grads::init(const ToyLm& model) {
    embed = Matrix::Zero(model.cfg.vocab_size, model.cfg.width);
    layers.clear();
    layers.resize(static_cast<size_t>(model.cfg.num_layers));
    for (size_t li = 0; li < layers.size(); ++li) {
        auto& g = layers[li];
        const auto& lw = model.layers[li];
        g.attn_gain = Vector::Zero(model.cfg.width);
        g.mlp_gain = Vector::Zero(model.cfg.width);
        g.wq = Matrix::Zero(lw.wq.rows(), lw.wq.cols());
        g.wk = Matrix::Zero(lw.wk.rows(), lw.wk.cols());
        g.wv = Matrix::Zero(lw.wv.rows(), lw.wv.cols());
        g.wo = Matrix::Zero(lw.wo.rows(), lw.wo.cols());
        g.wgate = Matrix::Zero(lw.wgate.rows(), lw.wgate.cols());
        g.wup = Matrix::Zero(lw.wup.rows(), lw.wup.cols());
        g.wdown = Matrix::Zero(lw.wdown.rows(), lw.wdown.cols());
        for (int p = 0; p < kNumProjKinds; ++p)
            if (lw.adapters[static_cast<size_t>(p)])
                g.adapters[static_cast<size_t>(p)].init(*lw.adapters[static_cast<size_t>(p)]);
    }
    final_gain = Vector::Zero(model.cfg.width);
    head = Matrix::Zero(model.cfg.vocab_size, model.cfg.width);
}

void ToyLm::Grads::zero() {
    embed.setZero();
    for (auto& g : layers) {
        g.attn_gain.setZero();
        g.mlp_gain.setZero();
        g.wq.setZero();
        g.wk.setZero();
        g.wv.setZero();
        g.wo.setZero();
        g.wgate.setZero();
        g.wup.setZero();
        g.wdown.setZero();
        for (auto& a : g.adapters) a.zero();
    }
    final_gain.setZero();
    head.setZero();
}

void ToyLm::backward(std::span<const int> tokens, const Cache& cache, const Matrix& d_logits,
                     Grads& grads) const {
    const long s_len = static_cast<long>(tokens.size());
    const int hd = cfg.width / cfg.num_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    require(d_logits.rows() == s_len && d_logits.cols() == cfg.vocab_size,
            "ToyLm::backward: d_logits shape mismatch");

    grads.head.noalias() += d_logits.transpose() * cache.f;
    Matrix d_f = d_logits * head;
    Matrix dx = rmsnorm_backward(cache.xn_final, cache.inv_r_final, final_gain, d_f,
                                 grads.final_gain);

    for (int li = cfg.num_layers - 1; li >= 0; --li) {
        const auto& lw = layers[static_cast<size_t>(li)];
        const auto& lc = cache.layers[static_cast<size_t>(li)];
        auto& lg = grads.layers[static_cast<size_t>(li)];

        auto adapter_back = [&](ProjKind kind, const Matrix& input_rows, const Matrix& d_site)
            -> Matrix {
            const auto& ad = lw.adapters[static_cast<size_t>(static_cast<int>(kind))];
            if (!ad) return d_site;
            return adapter_backward_map_rows(
                *ad, input_rows, d_site,
                lg.adapters[static_cast<size_t>(static_cast<int>(kind))]);
        };

        // MLP half (x_out = x_mid + ad * wdown^T).
        const Matrix& ad_rows = lc.ad.size() ? lc.ad : lc.hc;
        Matrix d_ad = dx * lw.wdown;
        lg.wdown.noalias() += dx.transpose() * ad_rows;
        Matrix d_hc = adapter_back(ProjKind::Down, lc.hc, d_ad);

        Matrix d_gate_pre(s_len, cfg.mlp_hidden), d_up_pre(s_len, cfg.mlp_hidden);
        for (long i = 0; i < d_hc.size(); ++i) {
            const double gp = lc.gate_pre.data()[i];
            d_gate_pre.data()[i] = d_hc.data()[i] * lc.up_pre.data()[i] * silu_grad(gp);
            d_up_pre.data()[i] = d_hc.data()[i] * silu(gp);
        }

        const Matrix& ag_rows = lc.ag.size() ? lc.ag : lc.b;
        const Matrix& au_rows = lc.au.size() ? lc.au : lc.b;
        Matrix d_ag = d_gate_pre * lw.wgate;
        lg.wgate.noalias() += d_gate_pre.transpose() * ag_rows;
        Matrix d_au = d_up_pre * lw.wup;
        lg.wup.noalias() += d_up_pre.transpose() * au_rows;

        Matrix d_b = adapter_back(ProjKind::Gate, lc.b, d_ag);
        d_b += adapter_back(ProjKind::Up, lc.b, d_au);

        Matrix d_x_mid =
            dx + rmsnorm_backward(lc.xn_mlp, lc.inv_r_mlp, lw.mlp_gain, d_b, lg.mlp_gain);

        // Attention half (x_mid = x_in + ao * wo^T).
        const Matrix& ao_rows = lc.ao.size() ? lc.ao : lc.ctx;
        Matrix d_ao = d_x_mid * lw.wo;
        lg.wo.noalias() += d_x_mid.transpose() * ao_rows;
        Matrix d_ctx = adapter_back(ProjKind::O, lc.ctx, d_ao);

        Matrix d_q = Matrix::Zero(s_len, cfg.width);
        Matrix d_k = Matrix::Zero(s_len, cfg.width);
        Matrix d_v = Matrix::Zero(s_len, cfg.width);
        for (int h = 0; h < cfg.num_heads; ++h) {
            const auto& p = lc.attn_probs[static_cast<size_t>(h)];
            const auto vh = lc.v.middleCols(h * hd, hd);
            const auto qh = lc.q.middleCols(h * hd, hd);
            const auto kh = lc.k.middleCols(h * hd, hd);
            const Matrix d_ctx_h = d_ctx.middleCols(h * hd, hd);
            Matrix d_p = d_ctx_h * vh.transpose();
            d_v.middleCols(h * hd, hd).noalias() += p.transpose() * d_ctx_h;
            Matrix d_scores = Matrix::Zero(s_len, s_len);
            for (long s = 0; s < s_len; ++s) {
                double dot = 0.0;
                for (long u = 0; u <= s; ++u) dot += d_p(s, u) * p(s, u);
                for (long u = 0; u <= s; ++u) d_scores(s, u) = p(s, u) * (d_p(s, u) - dot);
            }
            d_q.middleCols(h * hd, hd).noalias() += d_scores * kh * att_scale;
            d_k.middleCols(h * hd, hd).noalias() += d_scores.transpose() * qh * att_scale;
        }

        const Matrix& aq_rows = lc.aq.size() ? lc.aq : lc.a;
        const Matrix& ak_rows = lc.ak.size() ? lc.ak : lc.a;
        const Matrix& av_rows = lc.av.size() ? lc.av : lc.a;
        Matrix d_aq = d_q * lw.wq;
        lg.wq.noalias() += d_q.transpose() * aq_rows;
        Matrix d_ak = d_k * lw.wk;
        lg.wk.noalias() += d_k.transpose() * ak_rows;
        Matrix d_av = d_v * lw.wv;
        lg.wv.noalias() += d_v.transpose() * av_rows;

        Matrix d_a = adapter_back(ProjKind::Q, lc.a, d_aq);
        d_a += adapter_back(ProjKind::K, lc.a, d_ak);
        d_a += adapter_back(ProjKind::V, lc.a, d_av);

        dx = d_x_mid +
             rmsnorm_backward(lc.xn_attn, lc.inv_r_attn, lw.attn_gain, d_a, lg.attn_gain);
    }

    for (long s = 0; s < s_len; ++s)
        grads.embed.row(tokens[static_cast<size_t>(s)]) += dx.row(s);
}

std::vector<Matrix*> ToyLm::backbone_matrices() {
    std::vector<Matrix*> out{&embed};
    for (auto& l : layers) {
        out.push_back(&l.wq);
        out.push_back(&l.wk);
        out.push_back(&l.wv);
        out.push_back(&l.wo);
        out.push_back(&l.wgate);
        out.push_back(&l.wup);
        out.push_back(&l.wdown);
    }
    out.push_back(&head);
    return out;
}

std::vector<Vector*> ToyLm::backbone_vectors() {
    std::vector<Vector*> out;
    for (auto& l : layers) {
        out.push_back(&l.attn_gain);
        out.push_back(&l.mlp_gain);
    }
    out.push_back(&final_gain);
    return out;
}

uint64_t ToyLm::backbone_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto* self = const_cast<ToyLm*>(this);
    for (const Matrix* m : self->backbone_matrices()) h = fnv1a(*m, h);
    for (const Vector* v : self->backbone_vectors()) h = fnv1a(*v, h);
    return h;
}

long ToyLm::backbone_param_count() const {
    long n = 0;
    auto* self = const_cast<ToyLm*>(this);
    for (const Matrix* m : self->backbone_matrices()) n += m->size();
    for (const Vector* v : self->backbone_vectors()) n += v->size();
    return n;
}

long ToyLm::adapter_param_count() const {
    long n = 0;
    for (const auto& l : layers)
        for (const auto& a : l.adapters)
            if (a) n += a->trainable_param_count();
    return n;
}

void save_backbone_file(const std::string& path, const ToyLm& model) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "save_backbone_file: cannot open " + path);
    os.write("TLM1", 4);
    write_u32(os, static_cast<uint32_t>(model.cfg.num_layers));
    write_u32(os, static_cast<uint32_t>(model.cfg.width));
    write_u32(os, static_cast<uint32_t>(model.cfg.num_heads));
    write_u32(os, static_cast<uint32_t>(model.cfg.vocab_size));
    write_u32(os, static_cast<uint32_t>(model.cfg.context_length));
    write_u32(os, static_cast<uint32_t>(model.cfg.mlp_hidden));
    auto* self = const_cast<ToyLm*>(&model);
    for (const Matrix* m : self->backbone_matrices()) write_matrix(os, *m);
    for (const Vector* v : self->backbone_vectors()) {
        write_u64(os, static_cast<uint64_t>(v->size()));
        for (long i = 0; i < v->size(); ++i) write_f64(os, (*v)[i]);
    }
}

ToyLm load_backbone_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw std::runtime_error("load_backbone_file: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "TLM1")
        throw std::runtime_error("load_backbone_file: bad magic");
    ToyLmConfig cfg;
    cfg.num_layers = static_cast<int>(read_u32(is));
    cfg.width = static_cast<int>(read_u32(is));
    cfg.num_heads = static_cast<int>(read_u32(is));
    cfg.vocab_size = static_cast<int>(read_u32(is));
    cfg.context_length = static_cast<int>(read_u32(is));
    cfg.mlp_hidden = static_cast<int>(read_u32(is));
    ToyLm m = ToyLm::build(cfg, 0);
    for (Matrix* mat : m.backbone_matrices()) *mat = read_matrix(is);
    for (Vector* v : m.backbone_vectors()) {
        const auto n = static_cast<long>(read_u64(is));
        v->resize(n);
        for (long i = 0; i < n; ++i) (*v)[i] = read_f64(is);
    }
    return m;
}

}  // namespace cua
