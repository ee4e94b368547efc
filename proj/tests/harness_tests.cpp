#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <kglm/kglm.hpp>

using namespace kglm;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

std::string data_path(const std::string& name) {
    return std::string(KGLM_DATA_DIR) + "/" + name;
}

fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

std::size_t parse_error_line(const std::function<void()>& op) {
    try {
        op();
    } catch (const ParseError& e) {
        return e.line();
    }
    FAIL("expected ParseError");
    return 0;
}

}  // namespace

TEST_CASE("load_jsonl") {
    auto qa = load_jsonl(data_path("overfit_qa.jsonl"), Schema::OpenQa);
    REQUIRE(qa.size() == 8);
    CHECK(qa[0].id == "q1");
    CHECK(qa[0].question == "what can a bird do");
    CHECK(qa[0].answer == "fly");
    CHECK(qa[0].choices.empty());

    auto mc = load_jsonl(data_path("toy_mc.jsonl"), Schema::MultipleChoice);
    REQUIRE(mc.size() == 4);
    CHECK(mc[0].choices.size() == 3);
    CHECK(mc[0].choices[1].label == "B");
    CHECK(mc[0].answer == "A");

    auto intid = write_temp("kglm_ids.jsonl",
                            "{\"id\": 7, \"question\": \"q\", \"answer\": \"a\"}\n\n"
                            "{\"id\": \"x\", \"question\": \"q2\", \"answer\": \"b\"}\n");
    auto loaded = load_jsonl(intid.string(), Schema::OpenQa);
    REQUIRE(loaded.size() == 2);  // blank line skipped
    CHECK(loaded[0].id == "7");
    fs::remove(intid);

    auto noq = write_temp("kglm_noq.jsonl",
                          "{\"id\": \"a\", \"question\": \"ok\", \"answer\": \"x\"}\n"
                          "{\"id\": \"b\", \"answer\": \"x\"}\n");
    CHECK(parse_error_line([&] { load_jsonl(noq.string(), Schema::OpenQa); }) == 2);
    fs::remove(noq);

    auto badmc = write_temp(
        "kglm_badmc.jsonl",
        "{\"id\": \"a\", \"question\": \"q\", \"choices\": [{\"label\": \"A\", \"text\": \"t\"}],"
        " \"answer\": \"B\"}\n");
    CHECK(parse_error_line([&] { load_jsonl(badmc.string(), Schema::MultipleChoice); }) == 1);
    fs::remove(badmc);

    auto nochoice = write_temp("kglm_nochoice.jsonl",
                               "{\"id\": \"a\", \"question\": \"q\", \"answer\": \"A\"}\n");
    CHECK_THROWS_AS(load_jsonl(nochoice.string(), Schema::MultipleChoice), ParseError);
    fs::remove(nochoice);

    auto notobj = write_temp("kglm_notobj.jsonl", "[1, 2]\n");
    CHECK_THROWS_AS(load_jsonl(notobj.string(), Schema::OpenQa), ParseError);
    fs::remove(notobj);

    CHECK_THROWS_AS(load_jsonl("/nonexistent/x.jsonl", Schema::OpenQa), Error);
}

TEST_CASE("render_prompt") {
    QaExample open;
    open.question = "what can a bird do";
    CHECK(render_prompt_text(open) == "question: what can a bird do answer:");

    QaExample mc = open;
    mc.choices = {{"A", "fly"}, {"B", "swim"}};
    CHECK(render_prompt_text(mc) ==
          "question: what can a bird do choices: (A) fly (B) swim answer:");

    auto tokens = render_prompt(mc);
    // the tokenizer strips the parentheses and the trailing colon
    CHECK(tokens == std::vector<std::string>{"question", "what", "can", "a", "bird", "do",
                                             "choices", "a", "fly", "b", "swim", "answer"});
}

TEST_CASE("exact match") {
    CHECK(exact_match_acc({"a", "b"}, {"a", "c"}) == 0.5);
    CHECK(exact_match_acc({"  spaced  "}, {"spaced"}) == 1.0);
    CHECK(exact_match_acc({"Case"}, {"case"}) == 0.0);  // trim only, no case folding
    CHECK(exact_match_acc({}, {}) == 0.0);
    CHECK_THROWS_AS(exact_match_acc({"a"}, {}), Error);
}

TEST_CASE("rouge") {
    RougeScore r = rouge_n("the cat", "the cat sat", 1);
    CHECK_THAT(r.precision, WithinAbs(1.0, 1e-12));
    CHECK_THAT(r.recall, WithinAbs(2.0 / 3.0, 1e-12));
    CHECK_THAT(r.f1, WithinAbs(0.8, 1e-12));

    // clipping: repeated candidate tokens only count up to the reference count
    RougeScore clipped = rouge_n("a a a", "a b", 1);
    CHECK_THAT(clipped.precision, WithinAbs(1.0 / 3.0, 1e-12));
    CHECK_THAT(clipped.recall, WithinAbs(0.5, 1e-12));

    RougeScore bigram = rouge_n("the cat sat", "the cat ran", 2);
    CHECK_THAT(bigram.precision, WithinAbs(0.5, 1e-12));

    RougeScore zero = rouge_n("", "anything", 1);
    CHECK(zero.f1 == 0.0);
    CHECK(rouge_n("x", "", 1).f1 == 0.0);
}

TEST_CASE("bleu") {
    CHECK(bleu("the cat sat on the mat", {"the cat sat on the mat"}) == 1.0);

    CHECK_THAT(bleu("the the the", {"the cat"}, 1), WithinAbs(1.0 / 3.0, 1e-12));

    // any zero clipped precision zeroes the whole score
    CHECK(bleu("a c", {"a b"}, 2) == 0.0);

    // brevity penalty for short candidates
    CHECK_THAT(bleu("the cat", {"the cat sat on"}), WithinAbs(std::exp(1.0 - 4.0 / 2.0), 1e-12));

    // closest reference length, ties to the shorter one
    CHECK_THAT(bleu("a b", {"a", "a b c"}), WithinAbs(1.0, 1e-12));

    CHECK(bleu("", {"ref"}) == 0.0);
    CHECK(bleu("cand", {}) == 0.0);
}

TEST_CASE("config parsing") {
    PipelineConfig def;
    CHECK(def.h_size == 64);
    CHECK(def.rank == 16);
    CHECK(def.lr == 1e-4);
    CHECK(def.warmup_steps == 100);
    CHECK(def.batch_size == 4);

    nlohmann::json j = {{"seed", 9}, {"rank", 8}, {"kg_path", "graph.tsv"}};
    PipelineConfig cfg = config_from_json(j, "/some/base");
    CHECK(cfg.seed == 9);
    CHECK(cfg.rank == 8);
    CHECK(cfg.h_size == 64);  // untouched fields keep defaults
    CHECK(cfg.kg_path == "/some/base/graph.tsv");

    nlohmann::json abs = {{"kg_path", "/abs/graph.tsv"}};
    CHECK(config_from_json(abs, "/some/base").kg_path == "/abs/graph.tsv");

    nlohmann::json unknown = {{"learning_rate", 0.1}};
    CHECK_THROWS_AS(config_from_json(unknown, "."), Error);

    PipelineConfig loaded = load_config(std::string(KGLM_DATA_DIR) + "/overfit.json");
    CHECK(loaded.rank == 16);
    CHECK(loaded.target_loss == 0.03);
    CHECK(loaded.kg_path == data_path("toy_kg.tsv"));
    CHECK(loaded.train_path == data_path("overfit_qa.jsonl"));
}

TEST_CASE("run_eval plumbing") {
    PipelineConfig cfg;
    cfg.d_g = 16;
    cfg.h_size = 32;
    cfg.max_triples = 8;
    cfg.max_new_tokens = 2;
    cfg.kg_path = data_path("toy_kg.tsv");
    cfg.eval_path = data_path("overfit_qa.jsonl");
    Pipeline pl = build_pipeline(cfg);

    CHECK(pl.train_set.empty());
    CHECK(pl.eval_set.size() == 8);
    CHECK(pl.df.n_docs == 8);  // eval questions back the idf corpus when no train split

    // oracle generator: echoing the gold answer scores perfectly
    EvalReport oracle = run_eval(pl, pl.eval_set, [](const QaExample& ex) { return ex.answer; });
    CHECK(oracle.defined);
    CHECK(oracle.acc == 1.0);
    CHECK(oracle.bleu_score == 1.0);
    CHECK(oracle.rouge1 == 1.0);
    CHECK(oracle.rouge2 == 0.0);  // single-token answers have no bigrams
    CHECK_THAT(oracle.avg_sim, WithinAbs(2.0 / 3.0, 1e-12));
    CHECK(oracle.per_example.size() == 8);

    // a wrong generator scores zero accuracy
    EvalReport wrong = run_eval(pl, pl.eval_set, [](const QaExample&) { return "nonsense"; });
    CHECK(wrong.acc == 0.0);

    // the real model path produces a well-formed report at init
    EvalReport model = run_eval(pl, pl.eval_set);
    CHECK(model.defined);
    CHECK(model.per_example.size() == 8);
    for (const auto& r : model.per_example) CHECK_FALSE(r.gold.empty());

    EvalReport empty = run_eval(pl, {});
    CHECK_FALSE(empty.defined);
    nlohmann::json ej = report_to_json(empty);
    CHECK(ej["aggregates"]["defined"] == false);

    nlohmann::json oj = report_to_json(oracle);
    CHECK(oj["aggregates"]["acc"] == 1.0);
    CHECK(oj["per_example"].size() == 8);
    CHECK(oj["strategy"] == "dfs");
    CHECK(oj["rank"] == 16);
    CHECK(oj["trainable_params"] == oracle.trainable_params);
    CHECK(oj.contains("config"));

    // multiple-choice normalizes the gold label through the tokenizer
    PipelineConfig mcfg = cfg;
    mcfg.eval_path = data_path("toy_mc.jsonl");
    mcfg.schema = "multiple_choice";
    Pipeline mpl = build_pipeline(mcfg);
    EvalReport mrep = run_eval(mpl, mpl.eval_set, [](const QaExample& ex) {
        return std::string(1, static_cast<char>(std::tolower(ex.answer[0])));
    });
    CHECK(mrep.acc == 1.0);
}

TEST_CASE("pipeline save and load") {
    PipelineConfig cfg;
    cfg.d_g = 8;
    cfg.h_size = 16;
    cfg.max_triples = 4;
    cfg.kg_path = data_path("toy_kg.tsv");
    cfg.eval_path = data_path("overfit_qa.jsonl");
    Pipeline pl = build_pipeline(cfg);

    fs::path dir = fs::temp_directory_path() / "kglm_pipeline_ckpt";
    fs::remove_all(dir);
    save_pipeline(pl, dir.string());

    Pipeline fresh = build_pipeline(cfg);
    fresh.adapter.w_align.data[0] += 1.0;  // arbitrary drift, then restore from disk
    load_pipeline_params(fresh, dir.string());
    CHECK(fresh.adapter.w_align.data == pl.adapter.w_align.data);
    CHECK(fresh.decoder.lm_head.data == pl.decoder.lm_head.data);

    CHECK_THROWS_AS(save_pipeline(pl, ""), Error);
    fs::remove_all(dir);
}
