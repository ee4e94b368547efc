// Command-line front end. Every subcommand emits a single JSON document to
// stdout, or to a file via --out.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kglm/kglm.hpp"

namespace {

void emit(const nlohmann::json& doc, const std::string& out_path) {
    std::string text = doc.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw kglm::Error("cannot write output file: " + out_path);
    out << text;
}

struct KgArgs {
    std::string path;
    std::string format = "tsv";
    std::string language = "en";

    void attach(CLI::App* cmd, bool required = true) {
        auto* opt = cmd->add_option("--kg", path, "knowledge graph file");
        if (required) opt->required();
        cmd->add_option("--format", format, "kg file format: tsv or conceptnet");
        cmd->add_option("--language", language, "conceptnet language filter");
    }

    kglm::KnowledgeGraph load() const {
        if (format == "tsv") return kglm::ingest_simple_tsv(path);
        if (format == "conceptnet") return kglm::ingest_conceptnet_dump(path, language);
        throw kglm::Error("unknown --format '" + format + "' (expected tsv or conceptnet)");
    }
};

struct QueryArgs {
    std::string query;
    std::size_t hops = 2;
    std::size_t max_triples = 64;
    std::size_t max_topics = 8;
    std::string strategy = "dfs";
    std::uint64_t seed = 42;
    std::size_t walk_steps = 64;

    void attach(CLI::App* cmd) {
        cmd->add_option("--query", query, "natural-language query")->required();
        cmd->add_option("--hops", hops, "neighborhood hop budget");
        cmd->add_option("--max-triples", max_triples, "subgraph triple budget");
        cmd->add_option("--max-topics", max_topics, "topic budget");
        cmd->add_option("--strategy", strategy, "traversal: dfs, bfs, or random_walk");
        cmd->add_option("--seed", seed, "rng seed");
        cmd->add_option("--walk-steps", walk_steps, "random walk step budget");
    }
};

struct Retrieved {
    kglm::Query query;
    kglm::TopicSet topics;
    kglm::SubGraph sg;
    kglm::TraversalSequence seq;
};

Retrieved retrieve(const kglm::KnowledgeGraph& kg, const QueryArgs& qa) {
    Retrieved r;
    r.query = kglm::filter_stopwords(kglm::tokenize(qa.query));
    r.topics = kglm::get_topics(r.query, kg, kglm::DocFreq{}, qa.max_topics);
    r.sg = kglm::get_kg(r.topics, kg, qa.hops, qa.max_triples);
    r.seq = kglm::serialize(r.sg, kglm::parse_strategy(qa.strategy), qa.seed, qa.walk_steps);
    return r;
}

nlohmann::json topics_json(const kglm::TopicSet& topics, const kglm::KnowledgeGraph& kg) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [id, score] : topics.topics)
        out.push_back({{"label", kg.entity(id).label}, {"score", score}});
    return out;
}

nlohmann::json subgraph_json(const kglm::SubGraph& sg) {
    nlohmann::json entities = nlohmann::json::array();
    for (kglm::EntityId e = 0; e < sg.graph.entity_count(); ++e)
        entities.push_back(sg.graph.entity(e).label);
    nlohmann::json triples = nlohmann::json::array();
    for (kglm::TripleIndex t = 0; t < sg.graph.triple_count(); ++t) {
        const auto& tr = sg.graph.triple(t);
        triples.push_back({{"head", sg.graph.entity(tr.head).label},
                           {"relation", tr.relation},
                           {"tail", sg.graph.entity(tr.tail).label},
                           {"weight", tr.weight}});
    }
    nlohmann::json seeds = nlohmann::json::array();
    for (kglm::EntityId s : sg.seeds) seeds.push_back(sg.graph.entity(s).label);
    return {{"entities", entities}, {"triples", triples}, {"seeds", seeds}, {"hops", sg.hops}};
}

nlohmann::json sequence_json(const kglm::TraversalSequence& seq) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : seq.items) {
        nlohmann::json j{{"kind", item.kind == kglm::ItemKind::Entity ? "entity" : "relation"},
                         {"label", item.label},
                         {"origin", item.origin}};
        if (item.kind == kglm::ItemKind::Relation) j["forward"] = item.forward;
        items.push_back(std::move(j));
    }
    return {{"strategy", kglm::to_string(seq.strategy)},
            {"seed", seq.seed},
            {"text", seq.text()},
            {"items", items}};
}

nlohmann::json reports_json(const std::vector<std::pair<std::string, kglm::EvalReport>>& reports) {
    nlohmann::json out;
    for (const auto& [key, rep] : reports) out[key] = kglm::report_to_json(rep);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph augmented toy language model pipeline"};
    app.require_subcommand(1);

    std::string out_path;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "load a kg file and report store statistics");
    KgArgs ingest_kg;
    ingest_kg.attach(ingest);

    // retrieve
    auto* retrieve_cmd = app.add_subcommand("retrieve", "ground a query and extract a subgraph");
    KgArgs retrieve_kg;
    QueryArgs retrieve_q;
    retrieve_kg.attach(retrieve_cmd);
    retrieve_q.attach(retrieve_cmd);

    // serialize
    auto* serialize_cmd = app.add_subcommand("serialize", "linearize the retrieved subgraph");
    KgArgs serialize_kg;
    QueryArgs serialize_q;
    serialize_kg.attach(serialize_cmd);
    serialize_q.attach(serialize_cmd);

    // encode
    auto* encode_cmd = app.add_subcommand("encode", "structural encoding of the retrieved subgraph");
    KgArgs encode_kg;
    QueryArgs encode_q;
    encode_kg.attach(encode_cmd);
    encode_q.attach(encode_cmd);
    std::size_t enc_d_g = 64, enc_layers = 2;
    int enc_window = 8;
    encode_cmd->add_option("--d-g", enc_d_g, "encoder width");
    encode_cmd->add_option("--encoder-layers", enc_layers, "encoder layer count");
    encode_cmd->add_option("--window", enc_window, "position clamp window k");

    // train / eval
    auto* train_cmd = app.add_subcommand("train", "train adapter + LoRA per a config file");
    std::string train_config;
    train_cmd->add_option("--config", train_config, "pipeline config JSON")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained checkpoint");
    std::string eval_config, eval_checkpoint;
    eval_cmd->add_option("--config", eval_config, "pipeline config JSON")->required();
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint directory (default: config's)");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference checks on synthetic fixtures");
    std::uint64_t grad_seed = 7;
    std::size_t grad_probes = 10;
    double grad_eps = 1e-3;
    grad_cmd->add_option("--seed", grad_seed, "rng seed");
    grad_cmd->add_option("--probes", grad_probes, "probe coordinates per check");
    grad_cmd->add_option("--eps", grad_eps, "finite-difference step");

    // ablations
    auto* abl_trav = app.add_subcommand("ablate-traversal", "train+eval per traversal strategy");
    std::string abl_trav_config;
    abl_trav->add_option("--config", abl_trav_config, "pipeline config JSON")->required();

    auto* abl_rank = app.add_subcommand("ablate-rank", "train+eval per LoRA rank (8, 16, 32)");
    std::string abl_rank_config;
    abl_rank->add_option("--config", abl_rank_config, "pipeline config JSON")->required();

    for (CLI::App* cmd : {ingest, retrieve_cmd, serialize_cmd, encode_cmd, train_cmd, eval_cmd,
                          grad_cmd, abl_trav, abl_rank})
        cmd->add_option("--out", out_path, "write JSON output to this file instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            kglm::KnowledgeGraph kg = ingest_kg.load();
            emit({{"path", ingest_kg.path},
                  {"format", ingest_kg.format},
                  {"entities", kg.entity_count()},
                  {"triples", kg.triple_count()}},
                 out_path);
        } else if (retrieve_cmd->parsed()) {
            kglm::KnowledgeGraph kg = retrieve_kg.load();
            Retrieved r = retrieve(kg, retrieve_q);
            emit({{"query", retrieve_q.query},
                  {"tokens", r.query.tokens},
                  {"topics", topics_json(r.topics, kg)},
                  {"subgraph", subgraph_json(r.sg)},
                  {"sequence", sequence_json(r.seq)}},
                 out_path);
        } else if (serialize_cmd->parsed()) {
            kglm::KnowledgeGraph kg = serialize_kg.load();
            Retrieved r = retrieve(kg, serialize_q);
            emit(sequence_json(r.seq), out_path);
        } else if (encode_cmd->parsed()) {
            kglm::KnowledgeGraph kg = encode_kg.load();
            Retrieved r = retrieve(kg, encode_q);
            kglm::LeviGraph levi = kglm::to_levi(r.sg, r.seq);
            kglm::PositionMatrix pos = kglm::position_matrix(levi, enc_window);
            kglm::EncoderParams enc = kglm::init_encoder(encode_q.seed, enc_d_g, enc_layers,
                                                         enc_window, kglm::kg_vocab_labels(kg));
            std::vector<std::string> labels = kglm::serialize_levi(levi);
            kglm::Tensor emb = kglm::encode(labels, pos, enc);
            nlohmann::json pmat = nlohmann::json::array();
            for (std::size_t i = 0; i < pos.n; ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (std::size_t j = 0; j < pos.n; ++j) row.push_back(pos.at(i, j));
                pmat.push_back(std::move(row));
            }
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t i = 0; i < emb.rows; ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (std::size_t j = 0; j < emb.cols; ++j) row.push_back(emb.at(i, j));
                rows.push_back(std::move(row));
            }
            emit({{"labels", labels},
                  {"position_matrix", pmat},
                  {"embedding", rows},
                  {"d_g", enc_d_g},
                  {"window", enc_window}},
                 out_path);
        } else if (train_cmd->parsed()) {
            kglm::PipelineConfig cfg = kglm::load_config(train_config);
            kglm::Pipeline pl = kglm::build_pipeline(cfg);
            if (pl.train_set.empty()) throw kglm::Error("config has no train_path or the file is empty");
            auto examples = kglm::make_train_examples(pl);
            kglm::TrainResult res =
                kglm::run_training(examples, pl.decoder, pl.adapter, pl.lora, kglm::train_settings(cfg));
            if (!cfg.checkpoint_dir.empty()) {
                kglm::save_pipeline(pl, cfg.checkpoint_dir);
                std::ofstream log(std::filesystem::path(cfg.checkpoint_dir) / "train_log.jsonl",
                                  std::ios::trunc);
                for (const auto& e : res.log)
                    log << nlohmann::json{{"step", e.step}, {"lr", e.lr}, {"loss", e.loss}}.dump()
                        << "\n";
            }
            nlohmann::json log = nlohmann::json::array();
            for (const auto& e : res.log)
                log.push_back({{"step", e.step}, {"lr", e.lr}, {"loss", e.loss}});
            emit({{"steps", res.steps_run},
                  {"final_loss", res.final_loss},
                  {"reached_target", res.reached_target},
                  {"checkpoint_dir", cfg.checkpoint_dir},
                  {"log", log}},
                 out_path);
        } else if (eval_cmd->parsed()) {
            kglm::PipelineConfig cfg = kglm::load_config(eval_config);
            if (!eval_checkpoint.empty()) cfg.checkpoint_dir = eval_checkpoint;
            if (cfg.checkpoint_dir.empty()) throw kglm::Error("missing checkpoint directory");
            kglm::Pipeline pl = kglm::build_pipeline(cfg);
            kglm::load_pipeline_params(pl, cfg.checkpoint_dir);
            const auto& ds = pl.eval_set.empty() ? pl.train_set : pl.eval_set;
            emit(kglm::report_to_json(kglm::run_eval(pl, ds)), out_path);
        } else if (grad_cmd->parsed()) {
            emit(kglm::run_builtin_gradchecks(grad_seed, grad_probes, grad_eps), out_path);
        } else if (abl_trav->parsed()) {
            emit(reports_json(kglm::ablate_traversal(kglm::load_config(abl_trav_config))), out_path);
        } else if (abl_rank->parsed()) {
            nlohmann::json out;
            for (const auto& [r, rep] : kglm::ablate_rank(kglm::load_config(abl_rank_config)))
                out[std::to_string(r)] = kglm::report_to_json(rep);
            emit(out, out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
