#pragma once
// Trainable adapter between the graph encoder and the decoder: a row-wise
// affine map to the decoder width (alignment), then single-head
// cross-attention where KG rows are queries and prompt-token embeddings are
// keys/values, with a residual connection so a zero output projection is the
// identity.

#include <cmath>
#include <cstdint>
#include <vector>

#include "kglm/error.hpp"
#include "kglm/rng.hpp"
#include "kglm/tensor.hpp"

namespace kglm {

struct AdapterParams {
    Tensor w_align;  // d_g × H
    Tensor b_align;  // 1 × H
    Tensor wq, wk, wv, wo;  // H × H

    std::size_t d_g() const { return w_align.rows; }
    std::size_t h() const { return w_align.cols; }
};

struct AdapterGrads {
    Tensor w_align, b_align, wq, wk, wv, wo;
};

inline AdapterParams init_adapter(std::uint64_t seed, std::size_t d_g, std::size_t h) {
    if (d_g < 1 || h < 1) throw Error("adapter needs d_g >= 1 and h >= 1");
    Rng rng(derive_seed(seed, 0x616470));  // adapter stream
    AdapterParams p;
    p.w_align = randn(d_g, h, rng, 0.02);
    p.b_align = Tensor(1, h);
    p.wq = randn(h, h, rng, 0.02);
    p.wk = randn(h, h, rng, 0.02);
    p.wv = randn(h, h, rng, 0.02);
    p.wo = randn(h, h, rng, 0.02);
    return p;
}

inline AdapterGrads zero_adapter_grads(const AdapterParams& p) {
    return AdapterGrads{zeros_like(p.w_align), zeros_like(p.b_align), zeros_like(p.wq),
                        zeros_like(p.wk), zeros_like(p.wv), zeros_like(p.wo)};
}

inline Tensor align(const Tensor& kg_origin, const AdapterParams& p) {
    if (kg_origin.rows == 0) return Tensor(0, p.h());
    if (kg_origin.cols != p.d_g())
        throw ShapeError("align: input width " + std::to_string(kg_origin.cols) + " vs d_g " +
                         std::to_string(p.d_g()));
    return add_rowvec(matmul(kg_origin, p.w_align), p.b_align);
}

struct AdapterCache {
    Tensor kg_origin;  // n_kg × d_g
    Tensor kg0;        // aligned, n_kg × H
    Tensor q_e;        // n_q × H
    Tensor q, k, v;    // q: n_kg × H; k,v: n_q × H
    Tensor probs;      // n_kg × n_q
    Tensor ctx;        // n_kg × H
    Tensor out;        // n_kg × H
};

// out = kg0 + softmax(kg0·Wq · (q_e·Wk)ᵀ / √H) · (q_e·Wv) · Wo
inline AdapterCache cross_attend(const Tensor& kg0, const Tensor& q_e, const AdapterParams& p) {
    if (q_e.rows == 0) throw Error("empty query context");
    AdapterCache c;
    c.kg0 = kg0;
    c.q_e = q_e;
    if (kg0.rows == 0) {
        c.out = Tensor(0, p.h());
        return c;
    }
    if (kg0.cols != p.h() || q_e.cols != p.h()) throw ShapeError("cross_attend: width must equal H");
    c.q = matmul(kg0, p.wq);
    c.k = matmul(q_e, p.wk);
    c.v = matmul(q_e, p.wv);
    Tensor scores = scale(matmul(c.q, transpose(c.k)), 1.0 / std::sqrt(static_cast<double>(p.h())));
    c.probs = softmax_rows(scores);
    c.ctx = matmul(c.probs, c.v);
    c.out = add(kg0, matmul(c.ctx, p.wo));
    return c;
}

inline AdapterCache adapter_forward(const Tensor& kg_origin, const Tensor& q_e, const AdapterParams& p) {
    AdapterCache c = cross_attend(align(kg_origin, p), q_e, p);
    c.kg_origin = kg_origin;
    return c;
}

// Backward of adapter_forward for d(out). Returns parameter gradients;
// upstream gradients stop here (the encoder below and the embedding beside
// are frozen).
inline AdapterGrads adapter_backward(const Tensor& d_out, const AdapterCache& c, const AdapterParams& p) {
    AdapterGrads g = zero_adapter_grads(p);
    if (c.out.rows == 0) return g;
    require_same_shape(d_out, c.out, "adapter_backward");
    if (c.kg_origin.rows != c.kg0.rows)
        throw Error("adapter_backward needs a cache from adapter_forward");

    // branch: out = kg0 + ctx·Wo
    g.wo = matmul_grad_b(c.ctx, d_out);
    Tensor d_ctx = matmul_grad_a(d_out, p.wo);

    // ctx = probs·v
    Tensor d_probs = matmul_grad_a(d_ctx, c.v);
    Tensor d_v = matmul_grad_b(c.probs, d_ctx);

    Tensor d_scores = softmax_rows_backward(d_probs, c.probs);
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(p.h()));
    Tensor d_q = scale(matmul(d_scores, c.k), inv_sqrt);
    Tensor d_k = scale(matmul(transpose(d_scores), c.q), inv_sqrt);

    g.wq = matmul_grad_b(c.kg0, d_q);
    g.wk = matmul_grad_b(c.q_e, d_k);
    g.wv = matmul_grad_b(c.q_e, d_v);

    Tensor d_kg0 = add(d_out, matmul_grad_a(d_q, p.wq));

    // kg0 = kg_origin·W_align + b
    g.w_align = matmul_grad_b(c.kg_origin, d_kg0);
    g.b_align = colsum(d_kg0);
    return g;
}

}  // namespace kglm
