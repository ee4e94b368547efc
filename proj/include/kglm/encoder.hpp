#pragma once
// Frozen structure-aware transformer encoder over serialized Levi nodes.
// Attention adds a learned-shape (but frozen) bias bucketed by the relative
// position matrix, so structure reaches every layer. Randomly initialized,
// never trained; forward only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kglm/error.hpp"
#include "kglm/kg.hpp"
#include "kglm/levi.hpp"
#include "kglm/rng.hpp"
#include "kglm/tensor.hpp"

namespace kglm {

struct EncoderLayer {
    Tensor wq, wk, wv, wo;  // d_g × d_g
    Tensor ff1;             // d_g × 4d_g
    Tensor ff2;             // 4d_g × d_g
};

struct EncoderParams {
    std::map<std::string, std::uint32_t> vocab;  // label -> token id; "<unk>" = 0
    Tensor embedding;                            // V × d_g
    std::vector<EncoderLayer> layers;
    Tensor bias;  // 1 × (2k+3), buckets -(k+1) .. +(k+1)
    int k = 8;
    std::size_t d_g = 64;
    std::uint64_t seed = 0;

    std::uint32_t token_id(const std::string& label) const {
        auto it = vocab.find(label);
        return it == vocab.end() ? 0u : it->second;
    }
};

// Sorted unique labels (entities then relations collated together) for vocab
// construction.
inline std::vector<std::string> kg_vocab_labels(const KnowledgeGraph& g) {
    std::vector<std::string> labels;
    for (EntityId e = 0; e < g.entity_count(); ++e) labels.push_back(g.entity(e).label);
    for (TripleIndex t = 0; t < g.triple_count(); ++t) labels.push_back(g.triple(t).relation);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

// Deterministic Gaussian init (mean 0, std 0.02) in a fixed draw order:
// embedding, then per layer wq..ff2, then the bias table.
inline EncoderParams init_encoder(std::uint64_t seed, std::size_t d_g, std::size_t layer_count, int k,
                                  const std::vector<std::string>& labels) {
    if (d_g < 1 || layer_count < 1) throw Error("encoder needs d_g >= 1 and at least one layer");
    if (k < 1) throw Error("position window must be >= 1");

    EncoderParams p;
    p.k = k;
    p.d_g = d_g;
    p.seed = seed;
    p.vocab["<unk>"] = 0;
    std::uint32_t next = 1;
    for (const auto& label : labels)
        if (p.vocab.emplace(label, next).second) ++next;

    Rng rng(derive_seed(seed, 0x656e63));  // encoder stream
    p.embedding = randn(p.vocab.size(), d_g, rng, 0.02);
    for (std::size_t l = 0; l < layer_count; ++l) {
        EncoderLayer layer;
        layer.wq = randn(d_g, d_g, rng, 0.02);
        layer.wk = randn(d_g, d_g, rng, 0.02);
        layer.wv = randn(d_g, d_g, rng, 0.02);
        layer.wo = randn(d_g, d_g, rng, 0.02);
        layer.ff1 = randn(d_g, 4 * d_g, rng, 0.02);
        layer.ff2 = randn(4 * d_g, d_g, rng, 0.02);
        p.layers.push_back(std::move(layer));
    }
    p.bias = randn(1, static_cast<std::size_t>(2 * k + 3), rng, 0.02);
    return p;
}

// Pre-norm self-attention stack; score(i,j) = q_i·k_j/√d_g + bias[P[i][j]+k+1].
// Output row i corresponds to Levi node i.
inline Tensor encode(const std::vector<std::string>& labels, const PositionMatrix& pos,
                     const EncoderParams& p) {
    if (labels.size() != pos.n)
        throw ShapeError("encode: " + std::to_string(labels.size()) + " labels vs P dimension " +
                         std::to_string(pos.n));
    const std::size_t n = labels.size();
    if (n == 0) return Tensor(0, p.d_g);

    Tensor x(n, p.d_g);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t id = p.token_id(labels[i]);
        for (std::size_t j = 0; j < p.d_g; ++j) x.at(i, j) = p.embedding.at(id, j);
    }

    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(p.d_g));
    for (const EncoderLayer& layer : p.layers) {
        Tensor h = layer_norm(x).xhat;
        Tensor q = matmul(h, layer.wq);
        Tensor k_ = matmul(h, layer.wk);
        Tensor v = matmul(h, layer.wv);
        Tensor scores(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0.0;
                for (std::size_t c = 0; c < p.d_g; ++c) dot += q.at(i, c) * k_.at(j, c);
                int bucket = pos.at(i, j) + p.k + 1;
                scores.at(i, j) = dot * inv_sqrt + p.bias.at(0, static_cast<std::size_t>(bucket));
            }
        Tensor attn = softmax_rows(scores);
        x = add(x, matmul(matmul(attn, v), layer.wo));

        Tensor h2 = layer_norm(x).xhat;
        x = add(x, matmul(gelu(matmul(h2, layer.ff1)), layer.ff2));
    }
    return layer_norm(x).xhat;
}

}  // namespace kglm
