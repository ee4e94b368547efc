#pragma once
// Pipeline configuration: one JSON document covering model sizes, retrieval
// settings, training hyperparameters, and file paths. Relative paths are
// resolved against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "kglm/error.hpp"

namespace kglm {

struct PipelineConfig {
    std::uint64_t seed = 42;

    std::size_t h_size = 64;
    std::size_t d_g = 64;
    std::size_t encoder_layers = 2;
    std::size_t decoder_layers = 2;
    int window = 8;  // position clamp k

    std::size_t hops = 2;
    std::size_t max_triples = 64;
    std::size_t max_topics = 8;
    std::string strategy = "dfs";
    std::size_t walk_steps = 64;

    std::size_t rank = 16;
    double alpha = 16.0;
    double lr = 1e-4;
    std::size_t warmup_steps = 100;
    std::size_t batch_size = 4;
    double weight_decay = 0.01;
    std::size_t max_steps = 2000;
    double target_loss = 0.0;  // 0 = run all max_steps
    std::size_t max_new_tokens = 8;

    std::string kg_path;
    std::string kg_format = "tsv";  // tsv | conceptnet
    std::string kg_language = "en";
    std::string train_path;
    std::string eval_path;
    std::string schema = "open_qa";
    std::string checkpoint_dir;
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    return nlohmann::json{{"seed", c.seed},
                          {"h_size", c.h_size},
                          {"d_g", c.d_g},
                          {"encoder_layers", c.encoder_layers},
                          {"decoder_layers", c.decoder_layers},
                          {"window", c.window},
                          {"hops", c.hops},
                          {"max_triples", c.max_triples},
                          {"max_topics", c.max_topics},
                          {"strategy", c.strategy},
                          {"walk_steps", c.walk_steps},
                          {"rank", c.rank},
                          {"alpha", c.alpha},
                          {"lr", c.lr},
                          {"warmup_steps", c.warmup_steps},
                          {"batch_size", c.batch_size},
                          {"weight_decay", c.weight_decay},
                          {"max_steps", c.max_steps},
                          {"target_loss", c.target_loss},
                          {"max_new_tokens", c.max_new_tokens},
                          {"kg_path", c.kg_path},
                          {"kg_format", c.kg_format},
                          {"kg_language", c.kg_language},
                          {"train_path", c.train_path},
                          {"eval_path", c.eval_path},
                          {"schema", c.schema},
                          {"checkpoint_dir", c.checkpoint_dir}};
}

inline PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    static const std::set<std::string> known = {
        "seed",         "h_size",     "d_g",          "encoder_layers", "decoder_layers",
        "window",       "hops",       "max_triples",  "max_topics",     "strategy",
        "walk_steps",   "rank",       "alpha",        "lr",             "warmup_steps",
        "batch_size",   "weight_decay", "max_steps",  "target_loss",    "max_new_tokens",
        "kg_path",      "kg_format",  "kg_language",  "train_path",     "eval_path",
        "schema",       "checkpoint_dir"};
    if (!j.is_object()) throw Error("config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw Error("unknown config key '" + key + "'");

    PipelineConfig c;
    c.seed = j.value("seed", c.seed);
    c.h_size = j.value("h_size", c.h_size);
    c.d_g = j.value("d_g", c.d_g);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.window = j.value("window", c.window);
    c.hops = j.value("hops", c.hops);
    c.max_triples = j.value("max_triples", c.max_triples);
    c.max_topics = j.value("max_topics", c.max_topics);
    c.strategy = j.value("strategy", c.strategy);
    c.walk_steps = j.value("walk_steps", c.walk_steps);
    c.rank = j.value("rank", c.rank);
    c.alpha = j.value("alpha", c.alpha);
    c.lr = j.value("lr", c.lr);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.target_loss = j.value("target_loss", c.target_loss);
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    c.kg_path = j.value("kg_path", c.kg_path);
    c.kg_format = j.value("kg_format", c.kg_format);
    c.kg_language = j.value("kg_language", c.kg_language);
    c.train_path = j.value("train_path", c.train_path);
    c.eval_path = j.value("eval_path", c.eval_path);
    c.schema = j.value("schema", c.schema);
    c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);

    auto resolve = [&](std::string& p) {
        if (p.empty()) return;
        std::filesystem::path fp(p);
        if (fp.is_relative()) p = (base_dir / fp).lexically_normal().string();
    };
    resolve(c.kg_path);
    resolve(c.train_path);
    resolve(c.eval_path);
    resolve(c.checkpoint_dir);
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("config is not valid JSON: " + path);
    return config_from_json(j, std::filesystem::path(path).parent_path());
}

}  // namespace kglm
