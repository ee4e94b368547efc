#pragma once
// Fusion and the training loop. KG rows (already encoded and adapter-aligned)
// are concatenated before the text rows; the autoregressive loss is taken on
// answer positions only, and gradients reach the adapter and LoRA factors
// while the encoder and decoder stay untouched.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kglm/adapter.hpp"
#include "kglm/decoder.hpp"
#include "kglm/error.hpp"
#include "kglm/optim.hpp"
#include "kglm/tensor.hpp"

namespace kglm {

struct FusedSequence {
    Tensor rows;                        // (n_kg + n_text) × H
    std::size_t boundary = 0;           // n_kg
    std::vector<std::int64_t> targets;  // per position; -1 = no loss
};

inline FusedSequence fuse(const Tensor& kg_e, const Tensor& q_e) {
    if (kg_e.rows > 0 && q_e.rows > 0 && kg_e.cols != q_e.cols)
        throw ShapeError("fuse: width mismatch");
    FusedSequence f;
    f.rows = vstack({kg_e, q_e});
    f.boundary = kg_e.rows;
    f.targets.assign(f.rows.rows, -1);
    return f;
}

// One precomputed training pair: the frozen encoder's output for the
// retrieved subgraph plus tokenized prompt and answer.
struct TrainExample {
    Tensor kg_origin;  // n_kg × d_g (possibly 0 rows)
    std::vector<std::uint32_t> prompt_ids;
    std::vector<std::uint32_t> answer_ids;
};

// Teacher forcing: rows = [kg_e; prompt; answer]; position boundary+n_p-1+i
// predicts answer[i], the final position predicts <eos>.
inline FusedSequence build_fused(const TrainExample& ex, const Tensor& kg_e, const DecoderParams& dec) {
    if (ex.prompt_ids.empty()) throw Error("train example has an empty prompt");
    Tensor q_e = embed_tokens(ex.prompt_ids, dec);
    Tensor a_e = embed_tokens(ex.answer_ids, dec);
    FusedSequence f = fuse(kg_e, q_e);
    f.rows = vstack({f.rows, a_e});
    f.targets.assign(f.rows.rows, -1);
    std::size_t first = f.boundary + ex.prompt_ids.size() - 1;
    for (std::size_t i = 0; i <= ex.answer_ids.size(); ++i)
        f.targets[first + i] =
            i < ex.answer_ids.size() ? static_cast<std::int64_t>(ex.answer_ids[i]) : kEosToken;
    return f;
}

struct ExampleGrads {
    double loss = 0.0;
    AdapterGrads adapter;
    LoraGrads lora;
};

// Forward + backward for one example. The only gradient sinks are the
// adapter parameters and the LoRA factors.
inline ExampleGrads example_loss_backward(const TrainExample& ex, const DecoderParams& dec,
                                          const AdapterParams& adapter, const LoraDelta& lora) {
    Tensor q_e = embed_tokens(ex.prompt_ids, dec);
    AdapterCache ac = adapter_forward(ex.kg_origin, q_e, adapter);
    FusedSequence f = build_fused(ex, ac.out, dec);

    DecoderForward fw = decode_forward(f.rows, dec, &lora);
    CrossEntropyResult ce = cross_entropy(fw.logits, f.targets);
    DecoderBackward bw = decode_backward(ce.dlogits, fw, dec, &lora);

    ExampleGrads g;
    g.loss = ce.loss;
    g.adapter = adapter_backward(take_rows(bw.d_input, 0, f.boundary), ac, adapter);
    g.lora = std::move(bw.lora);
    return g;
}

// Optimizer slots, one AdamWState per trainable tensor.
struct TrainerState {
    std::vector<AdamWState> adapter_states;  // w_align, b_align, wq, wk, wv, wo
    std::vector<AdamWState> lora_states;     // a, b per target
    std::size_t step = 0;

    static TrainerState make(const LoraDelta& lora) {
        TrainerState s;
        s.adapter_states.resize(6);
        s.lora_states.resize(2 * lora.targets.size());
        return s;
    }
};

struct TrainSettings {
    double lr = 1e-4;
    std::size_t warmup_steps = 100;
    std::size_t batch_size = 4;
    double weight_decay = 0.01;
    std::size_t max_steps = 2000;
    double target_loss = 0.0;  // 0 disables early stop
};

inline void apply_grads(AdapterParams& adapter, LoraDelta& lora, const AdapterGrads& ag,
                        const LoraGrads& lg, TrainerState& state, const AdamWConfig& cfg) {
    adamw_step(adapter.w_align, ag.w_align, state.adapter_states[0], cfg);
    adamw_step(adapter.b_align, ag.b_align, state.adapter_states[1], cfg);
    adamw_step(adapter.wq, ag.wq, state.adapter_states[2], cfg);
    adamw_step(adapter.wk, ag.wk, state.adapter_states[3], cfg);
    adamw_step(adapter.wv, ag.wv, state.adapter_states[4], cfg);
    adamw_step(adapter.wo, ag.wo, state.adapter_states[5], cfg);
    for (std::size_t t = 0; t < lora.targets.size(); ++t) {
        adamw_step(lora.targets[t].a, lg.targets[t].a, state.lora_states[2 * t], cfg);
        adamw_step(lora.targets[t].b, lg.targets[t].b, state.lora_states[2 * t + 1], cfg);
    }
}

// One optimizer step over a batch. Returns the pre-update mean loss.
inline double train_step(const std::vector<TrainExample>& batch, const DecoderParams& dec,
                         AdapterParams& adapter, LoraDelta& lora, TrainerState& state,
                         const TrainSettings& settings) {
    if (batch.empty()) throw Error("train_step: empty batch");
    ++state.step;

    double loss = 0.0;
    AdapterGrads ag = zero_adapter_grads(adapter);
    LoraGrads lg = zero_lora_grads(lora);
    for (const TrainExample& ex : batch) {
        ExampleGrads g = example_loss_backward(ex, dec, adapter, lora);
        loss += g.loss;
        accumulate(ag.w_align, g.adapter.w_align);
        accumulate(ag.b_align, g.adapter.b_align);
        accumulate(ag.wq, g.adapter.wq);
        accumulate(ag.wk, g.adapter.wk);
        accumulate(ag.wv, g.adapter.wv);
        accumulate(ag.wo, g.adapter.wo);
        for (std::size_t t = 0; t < lora.targets.size(); ++t) {
            accumulate(lg.targets[t].a, g.lora.targets[t].a);
            accumulate(lg.targets[t].b, g.lora.targets[t].b);
        }
    }
    double inv = 1.0 / static_cast<double>(batch.size());
    loss *= inv;
    if (!std::isfinite(loss))
        throw Error("train_step: non-finite loss at step " + std::to_string(state.step));
    auto shrink = [&](Tensor& t) { for (double& v : t.data) v *= inv; };
    shrink(ag.w_align); shrink(ag.b_align); shrink(ag.wq); shrink(ag.wk); shrink(ag.wv); shrink(ag.wo);
    for (auto& t : lg.targets) { shrink(t.a); shrink(t.b); }

    AdamWConfig cfg;
    cfg.lr = settings.lr * warmup_factor(state.step, settings.warmup_steps);
    cfg.weight_decay = settings.weight_decay;
    apply_grads(adapter, lora, ag, lg, state, cfg);
    return loss;
}

struct TrainLogEntry {
    std::size_t step;
    double lr;
    double loss;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
    double final_loss = 0.0;
    std::size_t steps_run = 0;
    bool reached_target = false;
};

// Fixed-order batch cycling over the example list; early stop when the batch
// loss drops below target_loss (if set).
inline TrainResult run_training(const std::vector<TrainExample>& examples, const DecoderParams& dec,
                                AdapterParams& adapter, LoraDelta& lora, const TrainSettings& settings) {
    if (examples.empty()) throw Error("run_training: no examples");
    TrainerState state = TrainerState::make(lora);
    TrainResult res;
    std::size_t cursor = 0;
    for (std::size_t step = 1; step <= settings.max_steps; ++step) {
        std::vector<TrainExample> batch;
        for (std::size_t j = 0; j < settings.batch_size; ++j) {
            batch.push_back(examples[cursor]);
            cursor = (cursor + 1) % examples.size();
        }
        double loss = train_step(batch, dec, adapter, lora, state, settings);
        res.log.push_back({step, settings.lr * warmup_factor(step, settings.warmup_steps), loss});
        res.final_loss = loss;
        res.steps_run = step;
        if (settings.target_loss > 0.0 && loss < settings.target_loss) {
            res.reached_target = true;
            break;
        }
    }
    return res;
}

}  // namespace kglm
