#pragma once
// Named finite-difference checks over synthetic fixtures: one per backward
// primitive plus the composed adapter+LoRA training loss. Shared by the CLI
// `gradcheck` subcommand and the test suite.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kglm/adapter.hpp"
#include "kglm/decoder.hpp"
#include "kglm/gradcheck.hpp"
#include "kglm/rng.hpp"
#include "kglm/tensor.hpp"
#include "kglm/trainer.hpp"

namespace kglm {

struct GradCheckCase {
    std::string name;
    double max_rel_err;
};

namespace detail {

inline std::vector<double> flatten(const std::vector<const Tensor*>& ts) {
    std::vector<double> flat;
    for (const Tensor* t : ts) flat.insert(flat.end(), t->data.begin(), t->data.end());
    return flat;
}

inline void unflatten(const std::vector<double>& flat, const std::vector<Tensor*>& ts) {
    std::size_t pos = 0;
    for (Tensor* t : ts) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                  flat.begin() + static_cast<std::ptrdiff_t>(pos + t->size()), t->data.begin());
        pos += t->size();
    }
}

}  // namespace detail

// Probes every listed check with `probes` sampled coordinates (full sweep
// when the parameter count is smaller).
inline std::vector<GradCheckCase> builtin_gradchecks(std::uint64_t seed, std::size_t probes = 10,
                                                     double eps = 1e-3) {
    std::vector<GradCheckCase> out;
    Rng rng(derive_seed(seed, 0x67636b));
    auto rnd = [&](std::size_t r, std::size_t c) { return randn(r, c, rng, 1.0); };

    // sum(op(...) ∘ R) makes each op a scalar function with a known backward.
    {
        Tensor a = rnd(3, 4), b = rnd(4, 5), r = rnd(3, 5);
        auto f = [&](const std::vector<double>& p) {
            Tensor a2 = a, b2 = b;
            detail::unflatten(p, {&a2, &b2});
            Tensor c = matmul(a2, b2);
            double s = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) s += c.data[i] * r.data[i];
            return s;
        };
        Tensor da = matmul_grad_a(r, b), db = matmul_grad_b(a, r);
        auto flat = detail::flatten({&a, &b});
        auto grad = detail::flatten({&da, &db});
        Rng probe_rng(derive_seed(seed, 1));
        out.push_back({"matmul", grad_check_sampled(f, flat, grad, probes, probe_rng, eps)});
    }
    {
        Tensor x = rnd(3, 5), r = rnd(3, 5);
        auto f = [&](const std::vector<double>& p) {
            Tensor x2 = x;
            detail::unflatten(p, {&x2});
            Tensor y = softmax_rows(x2);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * r.data[i];
            return s;
        };
        Tensor y = softmax_rows(x);
        Tensor dx = softmax_rows_backward(r, y);
        auto flat = detail::flatten({&x});
        auto grad = detail::flatten({&dx});
        Rng probe_rng(derive_seed(seed, 2));
        out.push_back({"softmax_rows", grad_check_sampled(f, flat, grad, probes, probe_rng, eps)});
    }
    {
        Tensor x = rnd(3, 6), r = rnd(3, 6);
        auto f = [&](const std::vector<double>& p) {
            Tensor x2 = x;
            detail::unflatten(p, {&x2});
            Tensor y = layer_norm(x2).xhat;
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * r.data[i];
            return s;
        };
        LayerNormCache cache = layer_norm(x);
        Tensor dx = layer_norm_backward(r, cache);
        auto flat = detail::flatten({&x});
        auto grad = detail::flatten({&dx});
        Rng probe_rng(derive_seed(seed, 3));
        out.push_back({"layer_norm", grad_check_sampled(f, flat, grad, probes, probe_rng, eps)});
    }
    {
        Tensor x = rnd(3, 5), r = rnd(3, 5);
        auto f = [&](const std::vector<double>& p) {
            Tensor x2 = x;
            detail::unflatten(p, {&x2});
            Tensor y = gelu(x2);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * r.data[i];
            return s;
        };
        Tensor dx = gelu_backward(r, x);
        auto flat = detail::flatten({&x});
        auto grad = detail::flatten({&dx});
        Rng probe_rng(derive_seed(seed, 4));
        out.push_back({"gelu", grad_check_sampled(f, flat, grad, probes, probe_rng, eps)});
    }
    {
        Tensor x = rnd(3, 4), v = rnd(1, 4), r = rnd(3, 4);
        auto f = [&](const std::vector<double>& p) {
            Tensor x2 = x, v2 = v;
            detail::unflatten(p, {&x2, &v2});
            Tensor y = add_rowvec(x2, v2);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * r.data[i];
            return s;
        };
        Tensor dv = colsum(r);
        auto flat = detail::flatten({&x, &v});
        auto grad = detail::flatten({&r, &dv});
        Rng probe_rng(derive_seed(seed, 5));
        out.push_back({"add_rowvec", grad_check_sampled(f, flat, grad, probes, probe_rng, eps)});
    }
    {
        Tensor logits = rnd(4, 5);
        std::vector<std::int64_t> targets{0, 3, -1, 2};
        auto f = [&](const std::vector<double>& p) {
            Tensor l2 = logits;
            detail::unflatten(p, {&l2});
            return cross_entropy(l2, targets).loss;
        };
        CrossEntropyResult ce = cross_entropy(logits, targets);
        auto flat = detail::flatten({&logits});
        auto grad = detail::flatten({&ce.dlogits});
        Rng probe_rng(derive_seed(seed, 6));
        out.push_back({"cross_entropy", grad_check_sampled(f, flat, grad, probes, probe_rng, eps)});
    }

    // Composed training loss: adapter params + LoRA factors through the full
    // fused forward (decoder input gradients exercised via the KG rows).
    {
        std::vector<std::string> toks{"what", "is", "x", "y", "z"};
        DecoderParams dec = init_decoder(seed, 8, 2, toks);
        AdapterParams adapter = init_adapter(seed, 6, 8);
        LoraDelta lora = init_lora(seed, 8, 2, 2);
        for (auto& t : lora.targets)
            t.b = randn(t.b.rows, t.b.cols, rng, 0.3);  // move B off zero so its gradient is generic

        TrainExample ex;
        ex.kg_origin = rnd(3, 6);
        ex.prompt_ids = to_token_ids({"what", "is", "x"}, dec);
        ex.answer_ids = to_token_ids({"y", "z"}, dec);

        std::vector<Tensor*> slots{&adapter.w_align, &adapter.b_align, &adapter.wq,
                                   &adapter.wk,      &adapter.wv,      &adapter.wo};
        for (auto& t : lora.targets) {
            slots.push_back(&t.a);
            slots.push_back(&t.b);
        }
        std::vector<const Tensor*> cslots(slots.begin(), slots.end());

        auto f = [&](const std::vector<double>& p) {
            detail::unflatten(p, slots);
            return example_loss_backward(ex, dec, adapter, lora).loss;
        };
        auto flat = detail::flatten(cslots);
        ExampleGrads g = example_loss_backward(ex, dec, adapter, lora);
        std::vector<const Tensor*> gslots{&g.adapter.w_align, &g.adapter.b_align, &g.adapter.wq,
                                          &g.adapter.wk,      &g.adapter.wv,      &g.adapter.wo};
        for (auto& t : g.lora.targets) {
            gslots.push_back(&t.a);
            gslots.push_back(&t.b);
        }
        auto grad = detail::flatten(gslots);
        Rng probe_rng(derive_seed(seed, 7));
        double err = grad_check_sampled(f, flat, grad, std::max<std::size_t>(probes, 20), probe_rng, eps);
        detail::unflatten(flat, slots);  // restore (f mutates in place)
        out.push_back({"adapter_lora_loss", err});
    }
    return out;
}

inline nlohmann::json run_builtin_gradchecks(std::uint64_t seed, std::size_t probes = 10,
                                             double eps = 1e-3, double threshold = 1e-4) {
    nlohmann::json checks = nlohmann::json::array();
    bool all_pass = true;
    for (const auto& c : builtin_gradchecks(seed, probes, eps)) {
        bool pass = c.max_rel_err < threshold;
        all_pass = all_pass && pass;
        checks.push_back({{"name", c.name}, {"max_rel_err", c.max_rel_err}, {"pass", pass}});
    }
    return {{"seed", seed}, {"probes", probes}, {"eps", eps}, {"threshold", threshold},
            {"checks", checks}, {"pass", all_pass}};
}

}  // namespace kglm
