#pragma once
// Checkpoint format: per component (encoder, decoder, adapter, lora) a JSON
// manifest `<name>.manifest.json` listing tensor shapes and byte offsets,
// plus a raw blob `<name>.bin` of little-endian float64 values in manifest
// order. Byte-stable for a fixed component, which makes frozen-parameter
// contracts checkable by file comparison.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kglm/adapter.hpp"
#include "kglm/decoder.hpp"
#include "kglm/encoder.hpp"
#include "kglm/error.hpp"
#include "kglm/tensor.hpp"

namespace kglm {

namespace detail {

inline void write_f64_le(std::ofstream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

inline double read_f64_le(std::ifstream& in) {
    char bytes[8];
    in.read(bytes, 8);
    if (!in) throw Error("checkpoint blob truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace detail

using NamedTensors = std::vector<std::pair<std::string, const Tensor*>>;

inline void save_component(const std::filesystem::path& dir, const std::string& name,
                           const NamedTensors& tensors, const nlohmann::json& meta) {
    std::filesystem::create_directories(dir);
    std::ofstream blob(dir / (name + ".bin"), std::ios::binary | std::ios::trunc);
    if (!blob) throw Error("cannot write checkpoint blob for " + name);

    nlohmann::json manifest;
    manifest["component"] = name;
    manifest["dtype"] = "float64_le";
    manifest["meta"] = meta;
    manifest["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [tname, t] : tensors) {
        manifest["tensors"].push_back(
            {{"name", tname}, {"rows", t->rows}, {"cols", t->cols}, {"offset", offset}});
        for (double v : t->data) detail::write_f64_le(blob, v);
        offset += static_cast<std::uint64_t>(t->size()) * 8;
    }
    blob.close();

    std::ofstream mf(dir / (name + ".manifest.json"), std::ios::trunc);
    if (!mf) throw Error("cannot write checkpoint manifest for " + name);
    mf << manifest.dump(2) << "\n";
}

struct LoadedComponent {
    std::vector<std::pair<std::string, Tensor>> tensors;
    nlohmann::json meta;

    const Tensor& get(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw Error("checkpoint tensor missing: " + name);
    }
};

inline LoadedComponent load_component(const std::filesystem::path& dir, const std::string& name) {
    std::ifstream mf(dir / (name + ".manifest.json"));
    if (!mf) throw Error("checkpoint manifest missing: " + (dir / (name + ".manifest.json")).string());
    nlohmann::json manifest = nlohmann::json::parse(mf, nullptr, false);
    if (manifest.is_discarded()) throw Error("checkpoint manifest unreadable: " + name);

    std::ifstream blob(dir / (name + ".bin"), std::ios::binary);
    if (!blob) throw Error("checkpoint blob missing: " + (dir / (name + ".bin")).string());

    LoadedComponent out;
    out.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& entry : manifest.at("tensors")) {
        Tensor t(entry.at("rows").get<std::size_t>(), entry.at("cols").get<std::size_t>());
        blob.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
        for (double& v : t.data) v = detail::read_f64_le(blob);
        out.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return out;
}

inline bool files_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::istreambuf_iterator<char> ia(fa), ib(fb), end;
    while (ia != end && ib != end)
        if (*ia++ != *ib++) return false;
    return ia == end && ib == end;
}

// ---- per-model serialization ----

inline void save_encoder(const std::filesystem::path& dir, const EncoderParams& p) {
    NamedTensors ts{{"embedding", &p.embedding}};
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        std::string base = "layers." + std::to_string(l) + ".";
        ts.emplace_back(base + "wq", &p.layers[l].wq);
        ts.emplace_back(base + "wk", &p.layers[l].wk);
        ts.emplace_back(base + "wv", &p.layers[l].wv);
        ts.emplace_back(base + "wo", &p.layers[l].wo);
        ts.emplace_back(base + "ff1", &p.layers[l].ff1);
        ts.emplace_back(base + "ff2", &p.layers[l].ff2);
    }
    ts.emplace_back("bias", &p.bias);
    std::vector<std::string> vocab(p.vocab.size());
    for (const auto& [label, id] : p.vocab) vocab[id] = label;
    nlohmann::json meta{{"d_g", p.d_g}, {"k", p.k}, {"seed", p.seed},
                        {"layers", p.layers.size()}, {"vocab", vocab}};
    save_component(dir, "encoder", ts, meta);
}

inline EncoderParams load_encoder(const std::filesystem::path& dir) {
    LoadedComponent c = load_component(dir, "encoder");
    EncoderParams p;
    p.d_g = c.meta.at("d_g").get<std::size_t>();
    p.k = c.meta.at("k").get<int>();
    p.seed = c.meta.at("seed").get<std::uint64_t>();
    auto vocab = c.meta.at("vocab").get<std::vector<std::string>>();
    for (std::uint32_t i = 0; i < vocab.size(); ++i) p.vocab[vocab[i]] = i;
    p.embedding = c.get("embedding");
    std::size_t layers = c.meta.at("layers").get<std::size_t>();
    for (std::size_t l = 0; l < layers; ++l) {
        std::string base = "layers." + std::to_string(l) + ".";
        p.layers.push_back(EncoderLayer{c.get(base + "wq"), c.get(base + "wk"), c.get(base + "wv"),
                                        c.get(base + "wo"), c.get(base + "ff1"), c.get(base + "ff2")});
    }
    p.bias = c.get("bias");
    return p;
}

inline void save_decoder(const std::filesystem::path& dir, const DecoderParams& p) {
    NamedTensors ts{{"embedding", &p.embedding}};
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        std::string base = "layers." + std::to_string(l) + ".";
        ts.emplace_back(base + "wq", &p.layers[l].wq);
        ts.emplace_back(base + "wk", &p.layers[l].wk);
        ts.emplace_back(base + "wv", &p.layers[l].wv);
        ts.emplace_back(base + "wo", &p.layers[l].wo);
        ts.emplace_back(base + "ff1", &p.layers[l].ff1);
        ts.emplace_back(base + "ff2", &p.layers[l].ff2);
    }
    ts.emplace_back("lm_head", &p.lm_head);
    nlohmann::json meta{{"h", p.h}, {"seed", p.seed}, {"layers", p.layers.size()}, {"vocab", p.vocab}};
    save_component(dir, "decoder", ts, meta);
}

inline DecoderParams load_decoder(const std::filesystem::path& dir) {
    LoadedComponent c = load_component(dir, "decoder");
    DecoderParams p;
    p.h = c.meta.at("h").get<std::size_t>();
    p.seed = c.meta.at("seed").get<std::uint64_t>();
    p.vocab = c.meta.at("vocab").get<std::vector<std::string>>();
    for (std::uint32_t i = 0; i < p.vocab.size(); ++i) p.vocab_index[p.vocab[i]] = i;
    p.embedding = c.get("embedding");
    std::size_t layers = c.meta.at("layers").get<std::size_t>();
    for (std::size_t l = 0; l < layers; ++l) {
        std::string base = "layers." + std::to_string(l) + ".";
        p.layers.push_back(DecoderLayer{c.get(base + "wq"), c.get(base + "wk"), c.get(base + "wv"),
                                        c.get(base + "wo"), c.get(base + "ff1"), c.get(base + "ff2")});
    }
    p.lm_head = c.get("lm_head");
    return p;
}

inline void save_adapter(const std::filesystem::path& dir, const AdapterParams& p) {
    NamedTensors ts{{"w_align", &p.w_align}, {"b_align", &p.b_align}, {"wq", &p.wq},
                    {"wk", &p.wk},           {"wv", &p.wv},           {"wo", &p.wo}};
    nlohmann::json meta{{"d_g", p.d_g()}, {"h", p.h()}};
    save_component(dir, "adapter", ts, meta);
}

inline AdapterParams load_adapter(const std::filesystem::path& dir) {
    LoadedComponent c = load_component(dir, "adapter");
    AdapterParams p;
    p.w_align = c.get("w_align");
    p.b_align = c.get("b_align");
    p.wq = c.get("wq");
    p.wk = c.get("wk");
    p.wv = c.get("wv");
    p.wo = c.get("wo");
    return p;
}

inline void save_lora(const std::filesystem::path& dir, const LoraDelta& d) {
    NamedTensors ts;
    for (std::size_t t = 0; t < d.targets.size(); ++t) {
        std::string base = "targets." + std::to_string(t) + ".";
        ts.emplace_back(base + "a", &d.targets[t].a);
        ts.emplace_back(base + "b", &d.targets[t].b);
    }
    nlohmann::json meta{{"rank", d.rank}, {"alpha", d.alpha}, {"targets", d.targets.size()}};
    save_component(dir, "lora", ts, meta);
}

inline LoraDelta load_lora(const std::filesystem::path& dir) {
    LoadedComponent c = load_component(dir, "lora");
    LoraDelta d;
    d.rank = c.meta.at("rank").get<std::size_t>();
    d.alpha = c.meta.at("alpha").get<double>();
    std::size_t targets = c.meta.at("targets").get<std::size_t>();
    for (std::size_t t = 0; t < targets; ++t) {
        std::string base = "targets." + std::to_string(t) + ".";
        d.targets.push_back(LoraTarget{c.get(base + "a"), c.get(base + "b")});
    }
    return d;
}

}  // namespace kglm
