#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>

#include <kglm/kglm.hpp>

using namespace kglm;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

Tensor eye(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

// chain h -r-> t as a Levi graph plus its position matrix
struct ChainFixture {
    LeviGraph levi;
    PositionMatrix pos;
    std::vector<std::string> labels;
    SubGraph sg;
};

ChainFixture chain_fixture(int k) {
    KnowledgeGraph g;
    EntityId h = g.add_entity("h");
    EntityId t = g.add_entity("t");
    g.add_triple(h, "r", t, 1.0);
    ChainFixture f;
    f.sg.graph = g;
    f.sg.seeds = {h};
    f.sg.hops = 1;
    TraversalSequence seq = serialize(f.sg, TraversalStrategy::Dfs, 1);
    f.levi = to_levi(f.sg, seq);
    f.pos = position_matrix(f.levi, k);
    f.labels = serialize_levi(f.levi);
    return f;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("encoder init and determinism") {
    std::vector<std::string> labels = {"a", "b", "r"};
    EncoderParams p1 = init_encoder(42, 16, 2, 4, labels);
    EncoderParams p2 = init_encoder(42, 16, 2, 4, labels);
    EncoderParams p3 = init_encoder(43, 16, 2, 4, labels);

    CHECK(p1.embedding.data == p2.embedding.data);
    CHECK(p1.bias.data == p2.bias.data);
    CHECK(p1.embedding.data != p3.embedding.data);
    CHECK(p1.bias.cols == 2 * 4 + 3);
    CHECK(p1.vocab.at("<unk>") == 0);
    CHECK(p1.vocab.size() == 4);

    ChainFixture f = chain_fixture(4);
    EncoderParams enc = init_encoder(7, 16, 2, 4, {"h", "r", "t"});
    Tensor out1 = encode(f.labels, f.pos, enc);
    Tensor out2 = encode(f.labels, f.pos, enc);
    CHECK(out1.rows == 3);
    CHECK(out1.cols == 16);
    CHECK(out1.data == out2.data);
    CHECK(all_finite(out1));

    // unknown labels fall back to the <unk> row instead of failing
    Tensor foreign = encode({"zzz", "yyy", "r"}, f.pos, enc);
    CHECK(all_finite(foreign));

    CHECK(encode({}, PositionMatrix{}, enc).rows == 0);
    CHECK_THROWS_AS(encode({"h"}, f.pos, enc), ShapeError);
}

TEST_CASE("encoder structure sensitivity") {
    ChainFixture f = chain_fixture(4);
    EncoderParams enc = init_encoder(11, 16, 2, 4, {"h", "r", "t"});
    Tensor base = encode(f.labels, f.pos, enc);

    PositionMatrix moved = f.pos;
    moved.at(0, 2) = 4;
    moved.at(2, 0) = -4;
    Tensor shifted = encode(f.labels, moved, enc);
    CHECK(max_abs_diff(base, shifted) > 1e-9);
}

TEST_CASE("encoder permutation equivariance") {
    ChainFixture f = chain_fixture(4);
    EncoderParams enc = init_encoder(13, 16, 2, 4, {"h", "r", "t"});
    Tensor base = encode(f.labels, f.pos, enc);

    std::vector<std::size_t> perm = {2, 0, 1};
    std::vector<std::string> plabels(3);
    PositionMatrix ppos;
    ppos.n = 3;
    ppos.k = f.pos.k;
    ppos.data.assign(9, 0);
    for (std::size_t i = 0; i < 3; ++i) {
        plabels[i] = f.labels[perm[i]];
        for (std::size_t j = 0; j < 3; ++j) ppos.at(i, j) = f.pos.at(perm[i], perm[j]);
    }
    Tensor permuted = encode(plabels, ppos, enc);

    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 16; ++j)
            CHECK_THAT(permuted.at(i, j), WithinAbs(base.at(perm[i], j), 1e-9));
}

TEST_CASE("adapter special cases") {
    const std::size_t h = 6;
    Rng rng(3);
    Tensor kg0 = randn(3, h, rng, 1.0);
    Tensor q_e = randn(4, h, rng, 1.0);

    AdapterParams p = init_adapter(5, 4, h);

    // zero output projection leaves the KG rows untouched
    AdapterParams p_zero = p;
    p_zero.wo = Tensor(h, h);
    AdapterCache c0 = cross_attend(kg0, q_e, p_zero);
    CHECK(max_abs_diff(c0.out, kg0) == 0.0);

    // single query row with identity value/output: every row gains that row
    AdapterParams p_id = p;
    p_id.wv = eye(h);
    p_id.wo = eye(h);
    Tensor one_row = take_rows(q_e, 0, 1);
    AdapterCache c1 = cross_attend(kg0, one_row, p_id);
    for (std::size_t i = 0; i < kg0.rows; ++i)
        for (std::size_t j = 0; j < h; ++j)
            CHECK_THAT(c1.out.at(i, j), WithinAbs(kg0.at(i, j) + one_row.at(0, j), 1e-12));

    // zero queries give uniform attention: every row gains the mean value row
    AdapterParams p_uniform = p_id;
    p_uniform.wq = Tensor(h, h);
    AdapterCache cu = cross_attend(kg0, q_e, p_uniform);
    for (std::size_t j = 0; j < h; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < q_e.rows; ++i) mean += q_e.at(i, j) / q_e.rows;
        for (std::size_t i = 0; i < kg0.rows; ++i)
            CHECK_THAT(cu.out.at(i, j), WithinAbs(kg0.at(i, j) + mean, 1e-12));
    }

    CHECK_THROWS_WITH(cross_attend(kg0, Tensor(0, h), p), "empty query context");

    AdapterCache ce = cross_attend(Tensor(0, h), q_e, p);
    CHECK(ce.out.rows == 0);

    // a cache that never went through adapter_forward is rejected by backward
    CHECK_THROWS_AS(adapter_backward(zeros_like(c1.out), c1, p_id), Error);
}

TEST_CASE("adapter backward matches finite differences") {
    const std::size_t d_g = 4, h = 6;
    Rng rng(17);
    Tensor kg_origin = randn(3, d_g, rng, 1.0);
    Tensor q_e = randn(2, h, rng, 1.0);
    Tensor r = randn(3, h, rng, 1.0);
    AdapterParams p = init_adapter(9, d_g, h);
    // nontrivial magnitudes so the attention is not in a flat region
    p.wq = randn(h, h, rng, 0.4);
    p.wk = randn(h, h, rng, 0.4);
    p.wv = randn(h, h, rng, 0.4);
    p.wo = randn(h, h, rng, 0.4);
    p.w_align = randn(d_g, h, rng, 0.4);

    AdapterCache cache = adapter_forward(kg_origin, q_e, p);
    AdapterGrads g = adapter_backward(r, cache, p);

    auto check_param = [&](Tensor AdapterParams::* field, const Tensor& analytic) {
        const Tensor& current = p.*field;
        auto f = [&](const std::vector<double>& flat) {
            AdapterParams q = p;
            (q.*field).data = flat;
            Tensor out = adapter_forward(kg_origin, q_e, q).out;
            double s = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) s += out.data[i] * r.data[i];
            return s;
        };
        CHECK(grad_check(f, current.data, analytic.data) < 1e-6);
    };

    check_param(&AdapterParams::w_align, g.w_align);
    check_param(&AdapterParams::b_align, g.b_align);
    check_param(&AdapterParams::wq, g.wq);
    check_param(&AdapterParams::wk, g.wk);
    check_param(&AdapterParams::wv, g.wv);
    check_param(&AdapterParams::wo, g.wo);
}

TEST_CASE("decoder vocab and embedding") {
    DecoderParams dec = init_decoder(42, 16, 1, {"b", "a", "b", "zeta"});
    REQUIRE(dec.vocab.size() == 5);
    CHECK(dec.vocab[0] == "<unk>");
    CHECK(dec.vocab[1] == "<eos>");
    CHECK(dec.vocab[2] == "a");
    CHECK(dec.vocab[3] == "b");
    CHECK(dec.token_id("a") == 2);
    CHECK(dec.token_id("never_seen") == kUnkToken);

    auto ids = to_token_ids({"a", "nope", "zeta"}, dec);
    CHECK(ids == std::vector<std::uint32_t>{2, 0, 4});
    CHECK(detokenize({2, 3}, dec) == "a b");

    Tensor e = embed_tokens(ids, dec);
    CHECK(e.rows == 3);
    CHECK(e.cols == 16);
    for (std::size_t j = 0; j < 16; ++j) CHECK(e.at(0, j) == dec.embedding.at(2, j));
}

TEST_CASE("decoder causality") {
    DecoderParams dec = init_decoder(7, 16, 2, {"a", "b", "c"});
    Rng rng(31);
    Tensor x = randn(5, 16, rng, 0.5);
    DecoderForward fw = decode_forward(x, dec);

    Tensor x2 = x;
    for (std::size_t j = 0; j < 16; ++j) x2.at(4, j) += 1.0;
    DecoderForward fw2 = decode_forward(x2, dec);

    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t v = 0; v < fw.logits.cols; ++v)
            CHECK(fw.logits.at(i, v) == fw2.logits.at(i, v));
    // and the changed position does feel it
    CHECK(max_abs_diff(fw.logits, fw2.logits) > 0.0);

    CHECK_THROWS_AS(decode_forward(Tensor(0, 16), dec), Error);
    CHECK_THROWS_AS(decode_forward(Tensor(2, 8), dec), ShapeError);
}

TEST_CASE("lora zero init is bitwise invisible") {
    DecoderParams dec = init_decoder(21, 16, 2, {"x", "y", "z"});
    LoraDelta lora = init_lora(21, 16, 2, 8);
    CHECK(lora.targets.size() == 4);
    CHECK(lora.trainable_params() == 4 * 2 * 8 * 16);
    for (const auto& t : lora.targets)
        for (double v : t.b.data) CHECK(v == 0.0);

    Rng rng(5);
    Tensor x = randn(6, 16, rng, 0.5);
    DecoderForward plain = decode_forward(x, dec);
    DecoderForward with = decode_forward(x, dec, &lora);
    REQUIRE(plain.logits.size() == with.logits.size());
    CHECK(std::memcmp(plain.logits.data.data(), with.logits.data.data(),
                      plain.logits.size() * sizeof(double)) == 0);

    // nonzero B changes the logits
    LoraDelta live = lora;
    live.targets[1].b.at(0, 0) = 0.5;
    DecoderForward changed = decode_forward(x, dec, &live);
    CHECK(max_abs_diff(plain.logits, changed.logits) > 0.0);

    LoraDelta wrong = init_lora(21, 16, 1, 8);
    CHECK_THROWS_AS(decode_forward(x, dec, &wrong), ShapeError);
}

TEST_CASE("lora matmul arithmetic") {
    Tensor h{{1.0, 2.0}};
    Tensor w = eye(2);
    LoraTarget t;
    t.b = Tensor{{1.0, 0.0}, {0.0, 1.0}};  // H × r with r = 2
    t.a = Tensor{{0.5, 0.0}, {0.0, 0.25}};  // r × H
    Tensor u;
    Tensor y = lora_matmul(h, w, &t, 2.0, u);  // y = h + 2·(h·B)·A
    CHECK_THAT(y.at(0, 0), WithinAbs(1.0 + 2.0 * 1.0 * 0.5, 1e-12));
    CHECK_THAT(y.at(0, 1), WithinAbs(2.0 + 2.0 * 2.0 * 0.25, 1e-12));
    CHECK(u.at(0, 0) == 1.0);
    CHECK(u.at(0, 1) == 2.0);
}

TEST_CASE("fuse and build_fused") {
    Tensor kg(2, 8, 0.5);
    Tensor q(3, 8, 0.25);
    FusedSequence f = fuse(kg, q);
    CHECK(f.rows.rows == 5);
    CHECK(f.boundary == 2);
    for (auto t : f.targets) CHECK(t == -1);
    CHECK_THROWS_AS(fuse(Tensor(2, 8), Tensor(2, 4)), ShapeError);

    DecoderParams dec = init_decoder(3, 8, 1, {"q1", "q2", "q3", "a1", "a2"});
    TrainExample ex;
    ex.kg_origin = Tensor(0, 8);
    ex.prompt_ids = to_token_ids({"q1", "q2", "q3"}, dec);
    ex.answer_ids = to_token_ids({"a1", "a2"}, dec);

    FusedSequence built = build_fused(ex, kg, dec);
    REQUIRE(built.rows.rows == 7);
    CHECK(built.boundary == 2);
    std::vector<std::int64_t> expect = {-1, -1, -1, -1,
                                        static_cast<std::int64_t>(ex.answer_ids[0]),
                                        static_cast<std::int64_t>(ex.answer_ids[1]),
                                        kEosToken};
    CHECK(built.targets == expect);

    TrainExample empty_prompt;
    empty_prompt.kg_origin = Tensor(0, 8);
    CHECK_THROWS_AS(build_fused(empty_prompt, kg, dec), Error);

    // empty answer: the last prompt position still predicts <eos>
    TrainExample no_answer = ex;
    no_answer.answer_ids.clear();
    FusedSequence na = build_fused(no_answer, kg, dec);
    REQUIRE(na.rows.rows == 5);
    CHECK(na.targets[4] == kEosToken);
}

TEST_CASE("initial loss is near uniform") {
    std::vector<std::string> corpus;
    for (const char* w :
         {"question", "what", "can", "a", "bird", "do", "answer", "fly", "swim", "bark",
          "water", "honey", "milk", "cutting", "hot", "ice", "made", "of", "bee",
          "produce", "cow", "dog", "fish", "live", "knife", "used", "for", "how",
          "does", "fire", "feel", "where", "is"})
        corpus.push_back(w);
    DecoderParams dec = init_decoder(42, 64, 2, corpus);
    AdapterParams adapter = init_adapter(42, 16, 64);
    LoraDelta lora = init_lora(42, 64, 2, 16);

    Rng rng(9);
    TrainExample ex;
    ex.kg_origin = randn(5, 16, rng, 1.0);
    ex.prompt_ids = to_token_ids({"question", "what", "can", "a", "bird", "do", "answer"}, dec);
    ex.answer_ids = to_token_ids({"fly"}, dec);

    ExampleGrads g = example_loss_backward(ex, dec, adapter, lora);
    double uniform = std::log(static_cast<double>(dec.vocab_size()));
    CHECK(g.loss > uniform * 0.9);
    CHECK(g.loss < uniform * 1.1);
}

TEST_CASE("train_step moves loss and freezes the base") {
    std::vector<std::string> corpus = {"what", "can", "a", "bird", "fish", "do",
                                       "fly", "swim", "question", "answer"};
    DecoderParams dec = init_decoder(11, 32, 1, corpus);
    AdapterParams adapter = init_adapter(11, 8, 32);
    LoraDelta lora = init_lora(11, 32, 1, 8);

    Rng rng(23);
    std::vector<TrainExample> examples(2);
    examples[0].kg_origin = randn(3, 8, rng, 1.0);
    examples[0].prompt_ids = to_token_ids({"what", "can", "a", "bird", "do", "answer"}, dec);
    examples[0].answer_ids = to_token_ids({"fly"}, dec);
    examples[1].kg_origin = randn(3, 8, rng, 1.0);
    examples[1].prompt_ids = to_token_ids({"what", "can", "a", "fish", "do", "answer"}, dec);
    examples[1].answer_ids = to_token_ids({"swim"}, dec);

    Tensor dec_emb = dec.embedding;
    Tensor dec_head = dec.lm_head;
    Tensor dec_wq = dec.layers[0].wq;

    TrainSettings s;
    s.lr = 3e-3;
    s.warmup_steps = 5;
    s.batch_size = 2;
    s.max_steps = 80;
    TrainResult res = run_training(examples, dec, adapter, lora, s);

    CHECK(res.log.size() == res.steps_run);
    CHECK_THAT(res.log.front().lr, WithinAbs(3e-3 / 5.0, 1e-15));
    CHECK(res.final_loss < res.log.front().loss * 0.8);

    // frozen tensors are bitwise untouched by training
    CHECK(dec.embedding.data == dec_emb.data);
    CHECK(dec.lm_head.data == dec_head.data);
    CHECK(dec.layers[0].wq.data == dec_wq.data);

    // early stop fires immediately with an unmissable target
    AdapterParams a2 = init_adapter(11, 8, 32);
    LoraDelta l2 = init_lora(11, 32, 1, 8);
    TrainSettings s2 = s;
    s2.target_loss = 100.0;
    TrainResult r2 = run_training(examples, dec, a2, l2, s2);
    CHECK(r2.steps_run == 1);
    CHECK(r2.reached_target);

    CHECK_THROWS_AS(run_training({}, dec, adapter, lora, s), Error);
}

TEST_CASE("component checkpoints roundtrip") {
    fs::path dir = fs::temp_directory_path() / "kglm_model_ckpt";
    fs::remove_all(dir);

    EncoderParams enc = init_encoder(42, 8, 1, 4, {"a", "b"});
    save_encoder(dir, enc);
    EncoderParams enc2 = load_encoder(dir);
    CHECK(enc2.embedding.data == enc.embedding.data);
    CHECK(enc2.bias.data == enc.bias.data);
    CHECK(enc2.k == enc.k);
    CHECK(enc2.vocab == enc.vocab);

    DecoderParams dec = init_decoder(42, 8, 1, {"tok"});
    save_decoder(dir, dec);
    DecoderParams dec2 = load_decoder(dir);
    CHECK(dec2.vocab == dec.vocab);
    CHECK(dec2.lm_head.data == dec.lm_head.data);
    CHECK(dec2.layers.size() == 1);

    AdapterParams ad = init_adapter(42, 8, 8);
    save_adapter(dir, ad);
    AdapterParams ad2 = load_adapter(dir);
    CHECK(ad2.w_align.data == ad.w_align.data);
    CHECK(ad2.wo.data == ad.wo.data);

    LoraDelta lo = init_lora(42, 8, 1, 4, 16.0);
    lo.targets[0].b.at(0, 0) = 0.125;
    save_lora(dir, lo);
    LoraDelta lo2 = load_lora(dir);
    CHECK(lo2.rank == 4);
    CHECK(lo2.alpha == 16.0);
    CHECK(lo2.targets.size() == 2);
    CHECK(lo2.targets[0].b.data == lo.targets[0].b.data);

    fs::remove_all(dir);
}
