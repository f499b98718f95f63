#pragma once

// Transformer encoder with per-token classification heads (one shared affine
// map per auxiliary objective) and a [CLS] head for 3-way NLI. Forward
// records every activation needed for the explicit reverse pass; gradients
// can be verified against central finite differences.
//
// Architecture: learned token/position/segment embeddings with layer norm,
// then post-layer-norm blocks of multi-head scaled dot-product attention and
// a GELU feed-forward, residual connections around both.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/tensor.hpp"
#include "lipt/types.hpp"

namespace lipt {

struct ModelConfig {
    int layers = 2;
    int heads = 4;
    int hidden = 64;
    int ff_mult = 4;
    int vocab_size = 0;
    int max_len = 64;
    double dropout = 0.1;
    std::map<Objective, int> head_dims; // token objectives only
    uint64_t seed = 1;

    int ff_dim() const { return hidden * ff_mult; }
    int head_dim() const { return hidden / heads; }

    void validate() const {
        if (layers < 1) throw ConfigError("model config: layers must be >= 1");
        if (heads < 1) throw ConfigError("model config: heads must be >= 1");
        if (hidden < 1) throw ConfigError("model config: hidden must be >= 1");
        if (hidden % heads != 0)
            throw ConfigError("model config: hidden must be divisible by heads");
        if (ff_mult < 1) throw ConfigError("model config: ff_mult must be >= 1");
        if (vocab_size < 5) throw ConfigError("model config: vocab_size must be >= 5");
        if (max_len < 8) throw ConfigError("model config: max_len must be >= 8");
        if (dropout < 0.0 || dropout >= 1.0)
            throw ConfigError("model config: dropout must be in [0, 1)");
        for (const auto& [obj, dim] : head_dims) {
            if (obj == Objective::Nli)
                throw ConfigError("model config: head_dims must not include NLI");
            if (dim < 2)
                throw ConfigError(concat("model config: head_dims[", to_string(obj),
                                         "] must be >= 2"));
        }
    }

    // The configuration reported for the full-size reference model. Kept as
    // documentation; not runnable at desk scale.
    static ModelConfig paper_scale() {
        ModelConfig c;
        c.layers = 12;
        c.heads = 12;
        c.hidden = 768;
        c.ff_mult = 4;
        c.max_len = 512;
        return c;
    }
};

constexpr int kNumSegments = 2;

struct Param {
    std::string name;
    Tensor w;
    Tensor g;

    void init_shape(std::string n, std::vector<size_t> shape) {
        name = std::move(n);
        w = Tensor(shape);
        g = Tensor(std::move(shape));
    }
};

struct HeadParams {
    Param w; // (hidden, classes)
    Param b; // (classes)
};

struct LayerParams {
    Param wq, bq, wk, bk, wv, bv, wo, bo;
    Param ln1_g, ln1_b;
    Param w1, b1; // (hidden, ff), (ff)
    Param w2, b2; // (ff, hidden), (hidden)
    Param ln2_g, ln2_b;
};

struct Model {
    ModelConfig cfg;
    Param tok_emb;  // (vocab, hidden)
    Param pos_emb;  // (max_len, hidden)
    Param seg_emb;  // (segments, hidden)
    Param emb_ln_g, emb_ln_b;
    std::vector<LayerParams> layers;
    std::map<Objective, HeadParams> heads;
    HeadParams nli_head;

    std::vector<Param*> parameters() {
        std::vector<Param*> out = encoder_parameters();
        for (auto& [obj, head] : heads) {
            out.push_back(&head.w);
            out.push_back(&head.b);
        }
        out.push_back(&nli_head.w);
        out.push_back(&nli_head.b);
        return out;
    }

    std::vector<Param*> encoder_parameters() {
        std::vector<Param*> out = {&tok_emb, &pos_emb, &seg_emb, &emb_ln_g, &emb_ln_b};
        for (auto& l : layers) {
            for (Param* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                             &l.ln1_g, &l.ln1_b, &l.w1, &l.b1, &l.w2, &l.b2,
                             &l.ln2_g, &l.ln2_b})
                out.push_back(p);
        }
        return out;
    }

    // Parameters trained together with the encoder for a given objective.
    std::vector<Param*> parameters_for(Objective obj) {
        std::vector<Param*> out = encoder_parameters();
        if (obj == Objective::Nli) {
            out.push_back(&nli_head.w);
            out.push_back(&nli_head.b);
        } else {
            auto& head = heads.at(obj);
            out.push_back(&head.w);
            out.push_back(&head.b);
        }
        return out;
    }

    size_t param_count() {
        size_t n = 0;
        for (Param* p : parameters()) n += p->w.numel();
        return n;
    }

    void zero_grad() {
        for (Param* p : parameters()) p->g.fill(0.0);
    }
};

// Weights from N(0, 0.02^2) in a fixed order, biases zero, layer-norm gain
// one; fully determined by cfg.seed.
inline Model init_model(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    const auto H = static_cast<size_t>(cfg.hidden);
    const auto F = static_cast<size_t>(cfg.ff_dim());

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    auto randomize = [&](Param& p) {
        for (double& x : p.w.v) x = dist(rng);
    };
    auto ones = [](Param& p) { p.w.fill(1.0); };

    m.tok_emb.init_shape("tok_emb", {static_cast<size_t>(cfg.vocab_size), H});
    randomize(m.tok_emb);
    m.pos_emb.init_shape("pos_emb", {static_cast<size_t>(cfg.max_len), H});
    randomize(m.pos_emb);
    m.seg_emb.init_shape("seg_emb", {kNumSegments, H});
    randomize(m.seg_emb);
    m.emb_ln_g.init_shape("emb_ln_g", {H});
    ones(m.emb_ln_g);
    m.emb_ln_b.init_shape("emb_ln_b", {H});

    m.layers.resize(static_cast<size_t>(cfg.layers));
    for (size_t i = 0; i < m.layers.size(); ++i) {
        auto& l = m.layers[i];
        auto name = [i](const char* base) { return concat("layer", i, ".", base); };
        l.wq.init_shape(name("wq"), {H, H});
        randomize(l.wq);
        l.bq.init_shape(name("bq"), {H});
        l.wk.init_shape(name("wk"), {H, H});
        randomize(l.wk);
        l.bk.init_shape(name("bk"), {H});
        l.wv.init_shape(name("wv"), {H, H});
        randomize(l.wv);
        l.bv.init_shape(name("bv"), {H});
        l.wo.init_shape(name("wo"), {H, H});
        randomize(l.wo);
        l.bo.init_shape(name("bo"), {H});
        l.ln1_g.init_shape(name("ln1_g"), {H});
        ones(l.ln1_g);
        l.ln1_b.init_shape(name("ln1_b"), {H});
        l.w1.init_shape(name("w1"), {H, F});
        randomize(l.w1);
        l.b1.init_shape(name("b1"), {F});
        l.w2.init_shape(name("w2"), {F, H});
        randomize(l.w2);
        l.b2.init_shape(name("b2"), {H});
        l.ln2_g.init_shape(name("ln2_g"), {H});
        ones(l.ln2_g);
        l.ln2_b.init_shape(name("ln2_b"), {H});
    }

    for (const auto& [obj, dim] : cfg.head_dims) {
        HeadParams head;
        head.w.init_shape(concat("head_", to_string(obj), ".w"),
                          {H, static_cast<size_t>(dim)});
        randomize(head.w);
        head.b.init_shape(concat("head_", to_string(obj), ".b"),
                          {static_cast<size_t>(dim)});
        m.heads.emplace(obj, std::move(head));
    }
    m.nli_head.w.init_shape("head_NLI.w", {H, static_cast<size_t>(kNumNliClasses)});
    randomize(m.nli_head.w);
    m.nli_head.b.init_shape("head_NLI.b", {static_cast<size_t>(kNumNliClasses)});

    return m;
}

// Rectangular batch of encoded pairs, PAD-padded; attention mask is true
// exactly on non-PAD positions.
struct Batch {
    size_t batch = 0;
    size_t len = 0;
    std::vector<int32_t> ids;       // B*L
    std::vector<int32_t> segments;  // B*L
    std::vector<uint8_t> attn_mask; // B*L
    std::vector<uint8_t> loss_mask; // B*L
    std::map<Objective, std::vector<int32_t>> labels; // B*L, kIgnoreLabel padded
    std::vector<int32_t> nli_gold;  // B
};

struct LayerTrace {
    Tensor x_in;
    Tensor q, k, v;
    Tensor probs; // (B, A, L, L)
    Tensor ctx;
    Tensor attn_proj;
    std::vector<uint8_t> attn_drop;
    Tensor res1, ln1_mean, ln1_rstd, ln1_out;
    Tensor ff_pre, ff_act, ff_proj;
    std::vector<uint8_t> ff_drop;
    Tensor res2, ln2_mean, ln2_rstd, ln2_out;
};

struct ForwardTrace {
    bool recorded = false;
    bool train_mode = false;
    size_t B = 0, L = 0;
    Batch batch;
    Tensor emb_sum, emb_mean, emb_rstd, emb_ln_out;
    std::vector<uint8_t> emb_drop;
    std::vector<LayerTrace> layers;
    Tensor hidden; // (B*L, H)
};

namespace detail {

inline void apply_dropout(Tensor& x, double p, std::mt19937_64& rng,
                          std::vector<uint8_t>& mask) {
    mask.assign(x.numel(), 1);
    if (p <= 0.0) return;
    std::bernoulli_distribution keep(1.0 - p);
    const double scale = 1.0 / (1.0 - p);
    for (size_t i = 0; i < x.numel(); ++i) {
        if (keep(rng)) {
            x.v[i] *= scale;
        } else {
            x.v[i] = 0.0;
            mask[i] = 0;
        }
    }
}

inline void dropout_backward(Tensor& dx, double p, const std::vector<uint8_t>& mask) {
    if (p <= 0.0 || mask.empty()) return;
    const double scale = 1.0 / (1.0 - p);
    for (size_t i = 0; i < dx.numel(); ++i) dx.v[i] = mask[i] ? dx.v[i] * scale : 0.0;
}

// Large negative stand-in for -inf; keeps the softmax NaN-free when a row
// mixes masked and unmasked keys.
constexpr double kMaskedScore = -1e30;

} // namespace detail

// Runs the encoder over a batch. Dropout is active only in train mode (rng
// required then). Returns hidden states for every position in trace.hidden.
inline const Tensor& forward(const Model& m, const Batch& b, bool train_mode,
                             ForwardTrace& t, std::mt19937_64* rng = nullptr) {
    const auto& cfg = m.cfg;
    const size_t B = b.batch, L = b.len;
    const size_t H = static_cast<size_t>(cfg.hidden);
    const size_t A = static_cast<size_t>(cfg.heads);
    const size_t Dh = static_cast<size_t>(cfg.head_dim());
    const size_t F = static_cast<size_t>(cfg.ff_dim());
    const size_t R = B * L; // rows

    if (L > static_cast<size_t>(cfg.max_len))
        throw Error(concat("forward: sequence length ", L, " exceeds max_len ", cfg.max_len));
    if (b.ids.size() != R || b.segments.size() != R || b.attn_mask.size() != R)
        throw Error("forward: batch field sizes disagree");
    for (int32_t id : b.ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw Error(concat("forward: token id ", id, " out of range [0, ",
                               cfg.vocab_size, ")"));
    for (int32_t s : b.segments)
        if (s < 0 || s >= kNumSegments)
            throw Error(concat("forward: segment id ", s, " out of range"));
    const bool use_dropout = train_mode && cfg.dropout > 0.0;
    if (use_dropout && !rng)
        throw Error("forward: train mode with dropout requires an RNG");

    t = ForwardTrace{};
    t.train_mode = train_mode;
    t.B = B;
    t.L = L;
    t.batch = b;

    t.emb_sum = Tensor({R, H});
    for (size_t r = 0; r < R; ++r) {
        const double* tok = m.tok_emb.w.data() + static_cast<size_t>(b.ids[r]) * H;
        const double* pos = m.pos_emb.w.data() + (r % L) * H;
        const double* seg = m.seg_emb.w.data() + static_cast<size_t>(b.segments[r]) * H;
        double* out = t.emb_sum.data() + r * H;
        for (size_t c = 0; c < H; ++c) out[c] = tok[c] + pos[c] + seg[c];
    }
    t.emb_mean = Tensor({R});
    t.emb_rstd = Tensor({R});
    t.emb_ln_out = Tensor({R, H});
    layer_norm_forward(t.emb_sum.data(), m.emb_ln_g.w.data(), m.emb_ln_b.w.data(),
                       t.emb_ln_out.data(), t.emb_mean.data(), t.emb_rstd.data(), R, H);

    Tensor x = t.emb_ln_out;
    if (use_dropout) detail::apply_dropout(x, cfg.dropout, *rng, t.emb_drop);

    const double scale = 1.0 / std::sqrt(static_cast<double>(Dh));
    t.layers.resize(m.layers.size());
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const auto& lp = m.layers[li];
        auto& lt = t.layers[li];
        lt.x_in = x;

        lt.q = Tensor({R, H});
        gemm(x.data(), lp.wq.w.data(), lt.q.data(), R, H, H, false);
        add_bias(lt.q.data(), lp.bq.w.data(), R, H);
        lt.k = Tensor({R, H});
        gemm(x.data(), lp.wk.w.data(), lt.k.data(), R, H, H, false);
        add_bias(lt.k.data(), lp.bk.w.data(), R, H);
        lt.v = Tensor({R, H});
        gemm(x.data(), lp.wv.w.data(), lt.v.data(), R, H, H, false);
        add_bias(lt.v.data(), lp.bv.w.data(), R, H);

        lt.probs = Tensor({B, A, L, L});
        lt.ctx = Tensor({R, H});
        std::vector<double> scores(L);
        for (size_t bi = 0; bi < B; ++bi) {
            const uint8_t* mask = b.attn_mask.data() + bi * L;
            for (size_t a = 0; a < A; ++a) {
                const size_t col = a * Dh;
                for (size_t i = 0; i < L; ++i) {
                    const double* qi = lt.q.data() + (bi * L + i) * H + col;
                    double max_score = detail::kMaskedScore;
                    for (size_t j = 0; j < L; ++j) {
                        if (!mask[j]) {
                            scores[j] = detail::kMaskedScore;
                            continue;
                        }
                        const double* kj = lt.k.data() + (bi * L + j) * H + col;
                        double s = 0.0;
                        for (size_t d = 0; d < Dh; ++d) s += qi[d] * kj[d];
                        s *= scale;
                        scores[j] = s;
                        if (s > max_score) max_score = s;
                    }
                    double denom = 0.0;
                    for (size_t j = 0; j < L; ++j) {
                        scores[j] = mask[j] ? std::exp(scores[j] - max_score) : 0.0;
                        denom += scores[j];
                    }
                    double* prow = lt.probs.data() + ((bi * A + a) * L + i) * L;
                    double* ci = lt.ctx.data() + (bi * L + i) * H + col;
                    for (size_t d = 0; d < Dh; ++d) ci[d] = 0.0;
                    for (size_t j = 0; j < L; ++j) {
                        const double p = scores[j] / denom;
                        prow[j] = p;
                        if (p != 0.0) {
                            const double* vj = lt.v.data() + (bi * L + j) * H + col;
                            for (size_t d = 0; d < Dh; ++d) ci[d] += p * vj[d];
                        }
                    }
                }
            }
        }

        lt.attn_proj = Tensor({R, H});
        gemm(lt.ctx.data(), lp.wo.w.data(), lt.attn_proj.data(), R, H, H, false);
        add_bias(lt.attn_proj.data(), lp.bo.w.data(), R, H);

        Tensor attn_dropped = lt.attn_proj;
        if (use_dropout) detail::apply_dropout(attn_dropped, cfg.dropout, *rng, lt.attn_drop);

        lt.res1 = Tensor({R, H});
        for (size_t i = 0; i < R * H; ++i) lt.res1.v[i] = lt.x_in.v[i] + attn_dropped.v[i];
        lt.ln1_mean = Tensor({R});
        lt.ln1_rstd = Tensor({R});
        lt.ln1_out = Tensor({R, H});
        layer_norm_forward(lt.res1.data(), lp.ln1_g.w.data(), lp.ln1_b.w.data(),
                           lt.ln1_out.data(), lt.ln1_mean.data(), lt.ln1_rstd.data(), R, H);

        lt.ff_pre = Tensor({R, F});
        gemm(lt.ln1_out.data(), lp.w1.w.data(), lt.ff_pre.data(), R, H, F, false);
        add_bias(lt.ff_pre.data(), lp.b1.w.data(), R, F);
        lt.ff_act = Tensor({R, F});
        gelu_forward(lt.ff_pre.data(), lt.ff_act.data(), R * F);
        lt.ff_proj = Tensor({R, H});
        gemm(lt.ff_act.data(), lp.w2.w.data(), lt.ff_proj.data(), R, F, H, false);
        add_bias(lt.ff_proj.data(), lp.b2.w.data(), R, H);

        Tensor ff_dropped = lt.ff_proj;
        if (use_dropout) detail::apply_dropout(ff_dropped, cfg.dropout, *rng, lt.ff_drop);

        lt.res2 = Tensor({R, H});
        for (size_t i = 0; i < R * H; ++i) lt.res2.v[i] = lt.ln1_out.v[i] + ff_dropped.v[i];
        lt.ln2_mean = Tensor({R});
        lt.ln2_rstd = Tensor({R});
        lt.ln2_out = Tensor({R, H});
        layer_norm_forward(lt.res2.data(), lp.ln2_g.w.data(), lp.ln2_b.w.data(),
                           lt.ln2_out.data(), lt.ln2_mean.data(), lt.ln2_rstd.data(), R, H);

        x = lt.ln2_out;
    }

    t.hidden = x;
    t.recorded = true;
    return t.hidden;
}

// Per-token logits from one shared affine head: (B*L, classes).
inline Tensor token_logits(const Model& m, const Tensor& hidden, Objective obj) {
    auto it = m.heads.find(obj);
    if (it == m.heads.end())
        throw Error(concat("token_logits: no head registered for objective ",
                           to_string(obj)));
    const size_t R = hidden.dim(0);
    const size_t H = hidden.dim(1);
    const size_t C = it->second.w.w.dim(1);
    Tensor logits({R, C});
    gemm(hidden.data(), it->second.w.w.data(), logits.data(), R, H, C, false);
    add_bias(logits.data(), it->second.b.w.data(), R, C);
    return logits;
}

// NLI logits read only the [CLS] position (index 0 of every sequence).
inline Tensor nli_logits(const Model& m, const Tensor& hidden, size_t batch, size_t len) {
    const size_t H = hidden.dim(1);
    Tensor cls({batch, H});
    for (size_t bi = 0; bi < batch; ++bi)
        for (size_t c = 0; c < H; ++c) cls.v[bi * H + c] = hidden.v[bi * len * H + c];
    Tensor logits({batch, static_cast<size_t>(kNumNliClasses)});
    gemm(cls.data(), m.nli_head.w.w.data(), logits.data(), batch, H,
         static_cast<size_t>(kNumNliClasses), false);
    add_bias(logits.data(), m.nli_head.b.w.data(), batch, static_cast<size_t>(kNumNliClasses));
    return logits;
}

enum class LossKind { BceOnehot, SoftmaxCe };

inline LossKind loss_kind_from_string(std::string_view s) {
    if (s == "bce_onehot") return LossKind::BceOnehot;
    if (s == "softmax_ce") return LossKind::SoftmaxCe;
    throw ConfigError(concat("unknown loss kind: '", std::string(s), "'"));
}

struct LossResult {
    double value = 0.0;
    Tensor dlogits;
    size_t counted = 0;
};

// Mean loss over positions where mask (if given) is true and the label is
// not the ignore label. bce_onehot sums one-vs-all binary cross entropy over
// classes against the one-hot target; softmax_ce is negative log-softmax of
// the gold class. dlogits is zero at excluded positions.
inline LossResult masked_loss(const Tensor& logits, const std::vector<int32_t>& labels,
                              const std::vector<uint8_t>* mask, LossKind kind) {
    const size_t P = logits.dim(0);
    const size_t C = logits.dim(1);
    if (labels.size() != P) throw Error("masked_loss: labels/logits size mismatch");
    if (mask && mask->size() != P) throw Error("masked_loss: mask/logits size mismatch");

    LossResult res;
    res.dlogits = Tensor({P, C});
    std::vector<size_t> active;
    for (size_t p = 0; p < P; ++p) {
        if (mask && !(*mask)[p]) continue;
        if (labels[p] == kIgnoreLabel) continue;
        if (labels[p] < 0 || static_cast<size_t>(labels[p]) >= C)
            throw Error(concat("masked_loss: label ", labels[p], " out of range [0, ", C, ")"));
        active.push_back(p);
    }
    if (active.empty()) throw Error("masked_loss: all positions are masked");
    res.counted = active.size();
    const double inv_n = 1.0 / static_cast<double>(active.size());

    double total = 0.0;
    for (size_t p : active) {
        const double* z = logits.data() + p * C;
        double* dz = res.dlogits.data() + p * C;
        const auto gold = static_cast<size_t>(labels[p]);
        if (kind == LossKind::BceOnehot) {
            for (size_t c = 0; c < C; ++c) {
                const double y = c == gold ? 1.0 : 0.0;
                // Stable BCE-with-logits: max(z,0) - z*y + log(1 + exp(-|z|)).
                total += std::max(z[c], 0.0) - z[c] * y + std::log1p(std::exp(-std::abs(z[c])));
                const double sig = 1.0 / (1.0 + std::exp(-z[c]));
                dz[c] = (sig - y) * inv_n;
            }
        } else {
            double max_z = z[0];
            for (size_t c = 1; c < C; ++c) max_z = std::max(max_z, z[c]);
            double denom = 0.0;
            for (size_t c = 0; c < C; ++c) denom += std::exp(z[c] - max_z);
            const double log_denom = std::log(denom) + max_z;
            total += log_denom - z[gold];
            for (size_t c = 0; c < C; ++c) {
                const double soft = std::exp(z[c] - log_denom);
                dz[c] = (soft - (c == gold ? 1.0 : 0.0)) * inv_n;
            }
        }
    }
    res.value = total * inv_n;
    return res;
}

// Accumulates head gradients and the contribution to dhidden for a token
// objective head.
inline void token_head_backward(Model& m, const ForwardTrace& t, Objective obj,
                                const Tensor& dlogits, Tensor& dhidden) {
    auto& head = m.heads.at(obj);
    const size_t R = t.hidden.dim(0);
    const size_t H = t.hidden.dim(1);
    const size_t C = head.w.w.dim(1);
    gemm_tn(t.hidden.data(), dlogits.data(), head.w.g.data(), R, H, C, true);
    bias_grad(dlogits.data(), head.b.g.data(), R, C);
    gemm_nt(dlogits.data(), head.w.w.data(), dhidden.data(), R, C, H, true);
}

inline void nli_head_backward(Model& m, const ForwardTrace& t, const Tensor& dlogits,
                              Tensor& dhidden) {
    const size_t B = t.B, L = t.L;
    const size_t H = t.hidden.dim(1);
    const size_t C = static_cast<size_t>(kNumNliClasses);
    Tensor cls({B, H});
    for (size_t bi = 0; bi < B; ++bi)
        for (size_t c = 0; c < H; ++c) cls.v[bi * H + c] = t.hidden.v[bi * L * H + c];
    gemm_tn(cls.data(), dlogits.data(), m.nli_head.w.g.data(), B, H, C, true);
    bias_grad(dlogits.data(), m.nli_head.b.g.data(), B, C);
    Tensor dcls({B, H});
    gemm_nt(dlogits.data(), m.nli_head.w.w.data(), dcls.data(), B, C, H, false);
    for (size_t bi = 0; bi < B; ++bi)
        for (size_t c = 0; c < H; ++c) dhidden.v[bi * L * H + c] += dcls.v[bi * H + c];
}

// Reverse pass through the encoder given d(loss)/d(hidden). Accumulates into
// parameter gradients; requires a recorded forward trace.
inline void encoder_backward(Model& m, const ForwardTrace& t, const Tensor& dhidden) {
    if (!t.recorded) throw Error("backward called without a recorded forward pass");
    const auto& cfg = m.cfg;
    const size_t B = t.B, L = t.L;
    const size_t H = static_cast<size_t>(cfg.hidden);
    const size_t A = static_cast<size_t>(cfg.heads);
    const size_t Dh = static_cast<size_t>(cfg.head_dim());
    const size_t F = static_cast<size_t>(cfg.ff_dim());
    const size_t R = B * L;
    const double scale = 1.0 / std::sqrt(static_cast<double>(Dh));
    const bool used_dropout = t.train_mode && cfg.dropout > 0.0;

    Tensor dx = dhidden;
    for (size_t li = m.layers.size(); li-- > 0;) {
        auto& lp = m.layers[li];
        const auto& lt = t.layers[li];

        // ln2
        Tensor dres2({R, H});
        layer_norm_backward(dx.data(), lt.res2.data(), lp.ln2_g.w.data(),
                            lt.ln2_mean.data(), lt.ln2_rstd.data(), dres2.data(),
                            lp.ln2_g.g.data(), lp.ln2_b.g.data(), R, H);

        // feed-forward branch
        Tensor dff_proj = dres2;
        if (used_dropout) detail::dropout_backward(dff_proj, cfg.dropout, lt.ff_drop);
        gemm_tn(lt.ff_act.data(), dff_proj.data(), lp.w2.g.data(), R, F, H, true);
        bias_grad(dff_proj.data(), lp.b2.g.data(), R, H);
        Tensor dff_act({R, F});
        gemm_nt(dff_proj.data(), lp.w2.w.data(), dff_act.data(), R, H, F, false);
        Tensor dff_pre({R, F});
        gelu_backward(lt.ff_pre.data(), dff_act.data(), dff_pre.data(), R * F);
        gemm_tn(lt.ln1_out.data(), dff_pre.data(), lp.w1.g.data(), R, H, F, true);
        bias_grad(dff_pre.data(), lp.b1.g.data(), R, F);
        Tensor dln1_out({R, H});
        gemm_nt(dff_pre.data(), lp.w1.w.data(), dln1_out.data(), R, F, H, false);
        for (size_t i = 0; i < R * H; ++i) dln1_out.v[i] += dres2.v[i]; // residual

        // ln1
        Tensor dres1({R, H});
        layer_norm_backward(dln1_out.data(), lt.res1.data(), lp.ln1_g.w.data(),
                            lt.ln1_mean.data(), lt.ln1_rstd.data(), dres1.data(),
                            lp.ln1_g.g.data(), lp.ln1_b.g.data(), R, H);

        // attention branch
        Tensor dattn_proj = dres1;
        if (used_dropout) detail::dropout_backward(dattn_proj, cfg.dropout, lt.attn_drop);
        gemm_tn(lt.ctx.data(), dattn_proj.data(), lp.wo.g.data(), R, H, H, true);
        bias_grad(dattn_proj.data(), lp.bo.g.data(), R, H);
        Tensor dctx({R, H});
        gemm_nt(dattn_proj.data(), lp.wo.w.data(), dctx.data(), R, H, H, false);

        Tensor dq({R, H}), dk({R, H}), dv({R, H});
        std::vector<double> dp(L), ds(L);
        for (size_t bi = 0; bi < B; ++bi) {
            for (size_t a = 0; a < A; ++a) {
                const size_t col = a * Dh;
                for (size_t i = 0; i < L; ++i) {
                    const double* prow = lt.probs.data() + ((bi * A + a) * L + i) * L;
                    const double* dci = dctx.data() + (bi * L + i) * H + col;
                    // dL/dp and dv
                    double dot = 0.0;
                    for (size_t j = 0; j < L; ++j) {
                        if (prow[j] == 0.0) {
                            dp[j] = 0.0;
                            continue;
                        }
                        const double* vj = lt.v.data() + (bi * L + j) * H + col;
                        double acc = 0.0;
                        for (size_t d = 0; d < Dh; ++d) acc += dci[d] * vj[d];
                        dp[j] = acc;
                        dot += acc * prow[j];
                        double* dvj = dv.data() + (bi * L + j) * H + col;
                        for (size_t d = 0; d < Dh; ++d) dvj[d] += prow[j] * dci[d];
                    }
                    // softmax backward, then scores -> q, k
                    const double* qi = lt.q.data() + (bi * L + i) * H + col;
                    double* dqi = dq.data() + (bi * L + i) * H + col;
                    for (size_t j = 0; j < L; ++j) {
                        const double dsj = prow[j] * (dp[j] - dot);
                        if (dsj == 0.0) continue;
                        const double g = dsj * scale;
                        const double* kj = lt.k.data() + (bi * L + j) * H + col;
                        double* dkj = dk.data() + (bi * L + j) * H + col;
                        for (size_t d = 0; d < Dh; ++d) {
                            dqi[d] += g * kj[d];
                            dkj[d] += g * qi[d];
                        }
                    }
                }
            }
        }

        gemm_tn(lt.x_in.data(), dq.data(), lp.wq.g.data(), R, H, H, true);
        bias_grad(dq.data(), lp.bq.g.data(), R, H);
        gemm_tn(lt.x_in.data(), dk.data(), lp.wk.g.data(), R, H, H, true);
        bias_grad(dk.data(), lp.bk.g.data(), R, H);
        gemm_tn(lt.x_in.data(), dv.data(), lp.wv.g.data(), R, H, H, true);
        bias_grad(dv.data(), lp.bv.g.data(), R, H);

        Tensor dx_in = dres1; // residual
        gemm_nt(dq.data(), lp.wq.w.data(), dx_in.data(), R, H, H, true);
        gemm_nt(dk.data(), lp.wk.w.data(), dx_in.data(), R, H, H, true);
        gemm_nt(dv.data(), lp.wv.w.data(), dx_in.data(), R, H, H, true);
        dx = std::move(dx_in);
    }

    if (used_dropout) detail::dropout_backward(dx, cfg.dropout, t.emb_drop);
    Tensor demb_sum({R, H});
    layer_norm_backward(dx.data(), t.emb_sum.data(), m.emb_ln_g.w.data(),
                        t.emb_mean.data(), t.emb_rstd.data(), demb_sum.data(),
                        m.emb_ln_g.g.data(), m.emb_ln_b.g.data(), R, H);
    for (size_t r = 0; r < R; ++r) {
        const double* d = demb_sum.data() + r * H;
        double* dtok = m.tok_emb.g.data() + static_cast<size_t>(t.batch.ids[r]) * H;
        double* dpos = m.pos_emb.g.data() + (r % L) * H;
        double* dseg = m.seg_emb.g.data() + static_cast<size_t>(t.batch.segments[r]) * H;
        for (size_t c = 0; c < H; ++c) {
            dtok[c] += d[c];
            dpos[c] += d[c];
            dseg[c] += d[c];
        }
    }
}

// Loss over every registered objective plus NLI, used by training steps and
// the gradient checker. Requires labels for each requested objective.
struct BatchLoss {
    double total = 0.0;
    std::map<Objective, double> per_objective;
};

// Computes the summed loss over the given objectives and, when grad is true,
// accumulates all parameter gradients (heads + encoder).
inline BatchLoss batch_loss(Model& m, const Batch& b, const std::set<Objective>& objectives,
                            LossKind kind, bool grad, ForwardTrace& t,
                            bool train_mode = false, std::mt19937_64* rng = nullptr) {
    forward(m, b, train_mode, t, rng);
    const size_t R = t.B * t.L;
    const size_t H = static_cast<size_t>(m.cfg.hidden);
    Tensor dhidden({R, H});
    BatchLoss out;
    for (Objective obj : objectives) {
        if (obj == Objective::Nli) {
            Tensor logits = nli_logits(m, t.hidden, t.B, t.L);
            LossResult lr = masked_loss(logits, b.nli_gold, nullptr, kind);
            out.total += lr.value;
            out.per_objective[obj] = lr.value;
            if (grad) nli_head_backward(m, t, lr.dlogits, dhidden);
        } else {
            auto it = b.labels.find(obj);
            if (it == b.labels.end())
                throw Error(concat("batch_loss: batch has no labels for objective ",
                                   to_string(obj)));
            Tensor logits = token_logits(m, t.hidden, obj);
            LossResult lr = masked_loss(logits, it->second, &b.loss_mask, kind);
            out.total += lr.value;
            out.per_objective[obj] = lr.value;
            if (grad) token_head_backward(m, t, obj, lr.dlogits, dhidden);
        }
    }
    if (grad) encoder_backward(m, t, dhidden);
    return out;
}

struct GradCheckEntry {
    std::string tensor;
    double max_rel_err = 0.0;
    double max_abs_analytic = 0.0;
    size_t elements = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> tensors;
    double max_rel_err = 0.0;

    bool passed(double tol) const { return max_rel_err < tol; }
};

// Central-difference verification of every parameter gradient against the
// analytic reverse pass. Dropout is disabled; the loss covers every
// registered token head plus NLI so all tensors receive signal.
inline GradCheckReport grad_check(Model& m, const Batch& b, double eps, double tol,
                                  LossKind kind = LossKind::BceOnehot) {
    std::set<Objective> objectives;
    for (const auto& [obj, dim] : m.cfg.head_dims) objectives.insert(obj);
    objectives.insert(Objective::Nli);

    ForwardTrace t;
    m.zero_grad();
    batch_loss(m, b, objectives, kind, /*grad=*/true, t, /*train_mode=*/false);

    auto loss_value = [&]() {
        ForwardTrace local;
        return batch_loss(m, b, objectives, kind, /*grad=*/false, local).total;
    };

    GradCheckReport report;
    for (Param* p : m.parameters()) {
        GradCheckEntry entry;
        entry.tensor = p->name;
        entry.elements = p->w.numel();
        for (size_t i = 0; i < p->w.numel(); ++i) {
            const double saved = p->w.v[i];
            p->w.v[i] = saved + eps;
            const double up = loss_value();
            p->w.v[i] = saved - eps;
            const double down = loss_value();
            p->w.v[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = p->g.v[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(analytic));
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.tensors.push_back(std::move(entry));
    }
    (void)tol;
    return report;
}

} // namespace lipt
