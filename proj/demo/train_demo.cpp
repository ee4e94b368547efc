// Minimal fine-tuning loop: two QA pairs over a five-triple graph. The
// decoder and structure encoder stay frozen; only the adapter and the LoRA
// deltas move. Prints the loss trajectory and the greedy generations.

#include <iostream>

#include <kglm/kglm.hpp>

int main() {
    using namespace kglm;

    KnowledgeGraph g;
    auto add = [&](const char* h, const char* r, const char* t) {
        g.add_triple(g.add_entity(h), r, g.add_entity(t), 1.0);
    };
    add("bird", "CapableOf", "fly");
    add("fish", "CapableOf", "swim");
    add("bird", "IsA", "animal");
    add("fish", "IsA", "animal");
    add("animal", "CapableOf", "move");

    PipelineConfig cfg;
    cfg.d_g = 32;
    cfg.h_size = 64;
    cfg.max_triples = 8;
    cfg.target_loss = 0.05;
    cfg.max_steps = 1500;
    cfg.batch_size = 2;

    std::vector<QaExample> qa = {
        {"1", "what can a bird do", {}, "fly"},
        {"2", "what can a fish do", {}, "swim"},
    };

    DocFreq df = build_doc_freq({qa[0].question, qa[1].question});
    EncoderParams enc = init_encoder(cfg.seed, cfg.d_g, cfg.encoder_layers, cfg.window,
                                     kg_vocab_labels(g));

    std::vector<std::string> corpus;
    for (const auto& ex : qa) {
        auto toks = render_prompt(ex);
        corpus.insert(corpus.end(), toks.begin(), toks.end());
        auto ans = tokenize(ex.answer).tokens;
        corpus.insert(corpus.end(), ans.begin(), ans.end());
    }
    DecoderParams dec = init_decoder(cfg.seed, cfg.h_size, cfg.decoder_layers, corpus);
    AdapterParams adapter = init_adapter(cfg.seed, cfg.d_g, cfg.h_size);
    LoraDelta lora = init_lora(cfg.seed, cfg.h_size, cfg.decoder_layers, cfg.rank, cfg.alpha);

    TraversalStrategy strategy = parse_strategy(cfg.strategy);
    std::vector<TrainExample> examples;
    for (std::size_t i = 0; i < qa.size(); ++i) {
        TrainExample te;
        te.kg_origin = encode_for_question(g, df, enc, cfg, strategy, qa[i].question,
                                           train_example_seed(cfg.seed, i))
                           .kg_origin;
        te.prompt_ids = to_token_ids(render_prompt(qa[i]), dec);
        te.answer_ids = to_token_ids(tokenize(qa[i].answer).tokens, dec);
        examples.push_back(std::move(te));
    }

    TrainSettings settings = train_settings(cfg);
    TrainResult res = run_training(examples, dec, adapter, lora, settings);
    std::cout << "step 1 loss " << res.log.front().loss << '\n';
    std::cout << "step " << res.steps_run << " loss " << res.final_loss
              << (res.reached_target ? " (hit target)" : "") << '\n';

    for (std::size_t i = 0; i < qa.size(); ++i) {
        Tensor q_e = embed_tokens(examples[i].prompt_ids, dec);
        AdapterCache ac = adapter_forward(examples[i].kg_origin, q_e, adapter);
        FusedSequence f = fuse(ac.out, q_e);
        auto ids = generate(f.rows, dec, &lora, cfg.max_new_tokens);
        std::cout << qa[i].question << " -> " << detokenize(ids, dec) << '\n';
    }
    return 0;
}
