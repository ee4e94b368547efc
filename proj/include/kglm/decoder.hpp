#pragma once
// Frozen toy causal decoder with trainable LoRA deltas on every layer's W_q
// and W_v. The base weights never move; each targeted matrix is applied as
// W + (alpha/r)·B·A with B zero-initialized, so an untouched LoRA leaves the
// logits bitwise identical to the bare decoder. Backward computes gradients
// with respect to the input rows and the LoRA factors only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "kglm/error.hpp"
#include "kglm/rng.hpp"
#include "kglm/tensor.hpp"

namespace kglm {

inline constexpr std::uint32_t kUnkToken = 0;
inline constexpr std::uint32_t kEosToken = 1;

struct DecoderLayer {
    Tensor wq, wk, wv, wo;  // H × H
    Tensor ff1;             // H × 4H
    Tensor ff2;             // 4H × H
};

struct DecoderParams {
    std::vector<std::string> vocab;  // id -> token; [0]="<unk>", [1]="<eos>"
    std::unordered_map<std::string, std::uint32_t> vocab_index;
    Tensor embedding;  // V_t × H
    std::vector<DecoderLayer> layers;
    Tensor lm_head;  // H × V_t
    std::size_t h = 64;
    std::uint64_t seed = 0;

    std::size_t vocab_size() const { return vocab.size(); }
    std::uint32_t token_id(const std::string& token) const {
        auto it = vocab_index.find(token);
        return it == vocab_index.end() ? kUnkToken : it->second;
    }
};

// Vocab = [<unk>, <eos>] + sorted unique corpus tokens. Deterministic
// Gaussian init in a fixed draw order (embedding, per layer wq..ff2, lm
// head). Projections use unit-gain scale 1/sqrt(fan_in) so frozen paths
// neither damp nor amplify the trainable signals routed through them; the
// LM head is kept small so initial logits are near-uniform (initial loss
// ≈ ln V_t) while the trained amplitude stays unbounded.
inline DecoderParams init_decoder(std::uint64_t seed, std::size_t h, std::size_t layer_count,
                                  const std::vector<std::string>& corpus_tokens) {
    if (h < 1 || layer_count < 1) throw Error("decoder needs h >= 1 and at least one layer");
    DecoderParams p;
    p.h = h;
    p.seed = seed;
    p.vocab = {"<unk>", "<eos>"};
    std::vector<std::string> rest = corpus_tokens;
    std::sort(rest.begin(), rest.end());
    rest.erase(std::unique(rest.begin(), rest.end()), rest.end());
    for (const auto& tok : rest)
        if (tok != "<unk>" && tok != "<eos>") p.vocab.push_back(tok);
    for (std::uint32_t i = 0; i < p.vocab.size(); ++i) p.vocab_index[p.vocab[i]] = i;

    double unit = 1.0 / std::sqrt(static_cast<double>(h));
    Rng rng(derive_seed(seed, 0x646563));  // decoder stream
    p.embedding = randn(p.vocab.size(), h, rng, unit);
    for (std::size_t l = 0; l < layer_count; ++l) {
        DecoderLayer layer;
        layer.wq = randn(h, h, rng, unit);
        layer.wk = randn(h, h, rng, unit);
        layer.wv = randn(h, h, rng, unit);
        layer.wo = randn(h, h, rng, unit);
        layer.ff1 = randn(h, 4 * h, rng, unit);
        layer.ff2 = randn(4 * h, h, rng, 0.5 * unit);
        p.layers.push_back(std::move(layer));
    }
    p.lm_head = randn(h, p.vocab.size(), rng, 0.04);
    return p;
}

inline std::vector<std::uint32_t> to_token_ids(const std::vector<std::string>& tokens,
                                               const DecoderParams& p) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(p.token_id(tok));
    return ids;
}

inline Tensor embed_tokens(const std::vector<std::uint32_t>& ids, const DecoderParams& p) {
    Tensor out(ids.size(), p.h);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= p.vocab_size()) throw Error("embed_tokens: id out of range");
        for (std::size_t j = 0; j < p.h; ++j) out.at(i, j) = p.embedding.at(ids[i], j);
    }
    return out;
}

inline Tensor embed_text(const std::vector<std::string>& tokens, const DecoderParams& p) {
    return embed_tokens(to_token_ids(tokens, p), p);
}

// ---- LoRA ----

struct LoraTarget {
    Tensor a;  // r × H
    Tensor b;  // H × r
};

struct LoraDelta {
    std::vector<LoraTarget> targets;  // [2l] = layer l W_q, [2l+1] = layer l W_v
    std::size_t rank = 16;
    double alpha = 16.0;

    double scale() const { return alpha / static_cast<double>(rank); }
    std::size_t trainable_params() const {
        std::size_t n = 0;
        for (const auto& t : targets) n += t.a.size() + t.b.size();
        return n;
    }
};

struct LoraGrads {
    std::vector<LoraTarget> targets;  // same layout, .a/.b hold gradients
};

inline LoraDelta init_lora(std::uint64_t seed, std::size_t h, std::size_t layer_count, std::size_t rank,
                           double alpha = 16.0) {
    if (rank < 1) throw Error("lora rank must be >= 1");
    LoraDelta d;
    d.rank = rank;
    d.alpha = alpha;
    Rng rng(derive_seed(seed, 0x6c6f7261));  // lora stream
    for (std::size_t l = 0; l < 2 * layer_count; ++l) {
        LoraTarget t;
        t.a = randn(rank, h, rng, 0.02);
        t.b = Tensor(h, rank);
        d.targets.push_back(std::move(t));
    }
    return d;
}

inline LoraGrads zero_lora_grads(const LoraDelta& d) {
    LoraGrads g;
    for (const auto& t : d.targets) g.targets.push_back(LoraTarget{zeros_like(t.a), zeros_like(t.b)});
    return g;
}

// ---- forward ----

struct DecoderLayerCache {
    LayerNormCache ln1;      // xhat = attention-branch input h
    Tensor q, k, v;          // T × H
    Tensor probs;            // T × T, causal
    Tensor ctx;              // probs·v, T × H
    Tensor u_q, u_v;         // T × r LoRA intermediates (empty without LoRA)
    LayerNormCache ln2;      // xhat = ffn-branch input h2
    Tensor ff_pre;           // h2·ff1, T × 4H
};

struct DecoderForward {
    Tensor logits;  // T × V_t
    std::vector<DecoderLayerCache> layers;
};

// x = h·W + s·(h·B)·A, returning the LoRA intermediate u = h·B through `u`.
// When u is identically zero (fresh B) the addition is skipped outright so
// the result stays bit-identical to the plain projection.
inline Tensor lora_matmul(const Tensor& h, const Tensor& w, const LoraTarget* t, double s, Tensor& u) {
    Tensor out = matmul(h, w);
    if (t != nullptr) {
        u = matmul(h, t->b);
        bool live = false;
        for (double v : u.data)
            if (v != 0.0) { live = true; break; }
        if (live) accumulate(out, scale(matmul(u, t->a), s));
    }
    return out;
}

// Causal self-attention over the full fused sequence; every position may
// attend to itself and anything earlier (KG rows included). Pre-norm blocks,
// exact-erf GELU feed-forward; the LM head reads the raw residual stream.
inline DecoderForward decode_forward(const Tensor& input, const DecoderParams& p,
                                     const LoraDelta* lora = nullptr) {
    if (input.rows == 0) throw Error("decode_forward: empty input");
    if (input.cols != p.h) throw ShapeError("decode_forward: input width must equal H");
    if (lora != nullptr && lora->targets.size() != 2 * p.layers.size())
        throw ShapeError("decode_forward: lora target count mismatch");

    const std::size_t n = input.rows;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(p.h));
    const double neg_inf = -std::numeric_limits<double>::infinity();

    DecoderForward fw;
    Tensor x = input;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const DecoderLayer& layer = p.layers[l];
        const LoraTarget* tq = lora ? &lora->targets[2 * l] : nullptr;
        const LoraTarget* tv = lora ? &lora->targets[2 * l + 1] : nullptr;
        double s = lora ? lora->scale() : 0.0;

        DecoderLayerCache c;
        c.ln1 = layer_norm(x);
        const Tensor& h = c.ln1.xhat;
        c.q = lora_matmul(h, layer.wq, tq, s, c.u_q);
        c.k = matmul(h, layer.wk);
        c.v = lora_matmul(h, layer.wv, tv, s, c.u_v);

        Tensor scores(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (j > i) {
                    scores.at(i, j) = neg_inf;
                    continue;
                }
                double dot = 0.0;
                for (std::size_t cidx = 0; cidx < p.h; ++cidx) dot += c.q.at(i, cidx) * c.k.at(j, cidx);
                scores.at(i, j) = dot * inv_sqrt;
            }
        c.probs = softmax_rows(scores);
        c.ctx = matmul(c.probs, c.v);
        x = add(x, matmul(c.ctx, layer.wo));

        c.ln2 = layer_norm(x);
        c.ff_pre = matmul(c.ln2.xhat, layer.ff1);
        x = add(x, matmul(gelu(c.ff_pre), layer.ff2));
        fw.layers.push_back(std::move(c));
    }
    fw.logits = matmul(x, p.lm_head);
    return fw;
}

// ---- backward ----

struct DecoderBackward {
    Tensor d_input;   // T × H
    LoraGrads lora;   // empty targets when forward ran without LoRA
};

inline DecoderBackward decode_backward(const Tensor& d_logits, const DecoderForward& fw,
                                       const DecoderParams& p, const LoraDelta* lora = nullptr) {
    DecoderBackward bw;
    if (lora != nullptr) bw.lora = zero_lora_grads(*lora);

    Tensor dx = matmul_grad_a(d_logits, p.lm_head);

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(p.h));
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const DecoderLayer& layer = p.layers[li];
        const DecoderLayerCache& c = fw.layers[li];
        double s = lora ? lora->scale() : 0.0;

        // ffn block: x_out = x_in + gelu(ff_pre)·ff2, ff_pre = ln2(x_in)·ff1
        Tensor d_gelu_out = matmul_grad_a(dx, layer.ff2);
        Tensor d_ff_pre = gelu_backward(d_gelu_out, c.ff_pre);
        Tensor d_h2 = matmul_grad_a(d_ff_pre, layer.ff1);
        accumulate(dx, layer_norm_backward(d_h2, c.ln2));

        // attention block: x_out = x_in + (probs·v)·wo
        Tensor d_ctx = matmul_grad_a(dx, layer.wo);
        Tensor d_probs = matmul_grad_a(d_ctx, c.v);
        Tensor d_v = matmul_grad_b(c.probs, d_ctx);
        Tensor d_scores = softmax_rows_backward(d_probs, c.probs);
        Tensor d_q = scale(matmul(d_scores, c.k), inv_sqrt);
        Tensor d_k = scale(matmul(transpose(d_scores), c.q), inv_sqrt);

        const Tensor& h = c.ln1.xhat;
        Tensor d_h = add(matmul_grad_a(d_k, layer.wk), matmul_grad_a(d_q, layer.wq));
        accumulate(d_h, matmul_grad_a(d_v, layer.wv));
        if (lora != nullptr) {
            const LoraTarget& tq = lora->targets[2 * li];
            const LoraTarget& tv = lora->targets[2 * li + 1];
            // q += s·u_q·a with u_q = h·b
            bw.lora.targets[2 * li].a = scale(matmul_grad_b(c.u_q, d_q), s);
            Tensor d_uq = scale(matmul_grad_a(d_q, tq.a), s);
            bw.lora.targets[2 * li].b = matmul_grad_b(h, d_uq);
            accumulate(d_h, matmul_grad_a(d_uq, tq.b));

            bw.lora.targets[2 * li + 1].a = scale(matmul_grad_b(c.u_v, d_v), s);
            Tensor d_uv = scale(matmul_grad_a(d_v, tv.a), s);
            bw.lora.targets[2 * li + 1].b = matmul_grad_b(h, d_uv);
            accumulate(d_h, matmul_grad_a(d_uv, tv.b));
        }
        accumulate(dx, layer_norm_backward(d_h, c.ln1));
    }
    bw.d_input = std::move(dx);
    return bw;
}

// ---- generation ----

// Greedy continuation from the fused context. Re-runs the full forward per
// step (no KV cache; desk scale). Stops at <eos> or after max_new_tokens.
// Returns generated token ids, <eos> excluded.
inline std::vector<std::uint32_t> generate(const Tensor& fused, const DecoderParams& p,
                                           const LoraDelta* lora, std::size_t max_new_tokens) {
    if (max_new_tokens < 1) throw Error("generate: max_new_tokens must be >= 1");
    if (fused.rows == 0) throw Error("generate: empty context");

    Tensor x = fused;
    std::vector<std::uint32_t> out;
    for (std::size_t step = 0; step < max_new_tokens; ++step) {
        DecoderForward fw = decode_forward(x, p, lora);
        std::size_t last = fw.logits.rows - 1;
        std::uint32_t best = 0;
        double best_val = fw.logits.at(last, 0);
        for (std::uint32_t v = 1; v < fw.logits.cols; ++v)
            if (fw.logits.at(last, v) > best_val) {
                best_val = fw.logits.at(last, v);
                best = v;
            }
        if (best == kEosToken) break;
        out.push_back(best);
        Tensor row(1, p.h);
        for (std::size_t j = 0; j < p.h; ++j) row.at(0, j) = p.embedding.at(best, j);
        x = vstack({x, row});
    }
    return out;
}

inline std::string detokenize(const std::vector<std::uint32_t>& ids, const DecoderParams& p) {
    std::string out;
    for (std::uint32_t id : ids) {
        if (!out.empty()) out.push_back(' ');
        out += id < p.vocab_size() ? p.vocab[id] : "<unk>";
    }
    return out;
}

}  // namespace kglm
