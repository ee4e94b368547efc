#pragma once
// Triple store for (head, relation, tail, weight) facts.
//
// Graphs are built once (single writer) and immutable afterwards; all query
// paths are const. Entity labels are normalized (lowercase, whitespace runs
// collapsed to single underscores) and unique per graph; ids are dense from 0.
// Duplicate (head, relation, tail) triples keep the maximum weight.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kglm/error.hpp"

namespace kglm {

using EntityId = std::uint32_t;
using TripleIndex = std::uint32_t;

struct Entity {
    EntityId id = 0;
    std::string label;                       // normalized
    std::vector<std::string> surface_forms;  // originals, first-seen order
};

struct Triple {
    EntityId head = 0;
    std::string relation;
    EntityId tail = 0;
    double weight = 1.0;
};

namespace detail {
inline bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace detail

// Lowercases ASCII letters, trims outer whitespace, and collapses internal
// whitespace runs to a single '_'. Existing underscores pass through, so
// ConceptNet URI segments and multi-word surface text land on the same label.
inline std::string normalize_label(std::string_view raw) {
    std::size_t begin = 0, end = raw.size();
    while (begin < end && detail::is_ascii_space(static_cast<unsigned char>(raw[begin]))) ++begin;
    while (end > begin && detail::is_ascii_space(static_cast<unsigned char>(raw[end - 1]))) --end;

    std::string out;
    out.reserve(end - begin);
    bool pending_gap = false;
    for (std::size_t i = begin; i < end; ++i) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        if (detail::is_ascii_space(c)) {
            pending_gap = true;
            continue;
        }
        if (pending_gap) {
            out.push_back('_');
            pending_gap = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// Relations keep their case (they are never matched against query text);
// whitespace runs still collapse to underscores.
inline std::string normalize_relation(std::string_view raw) {
    std::size_t begin = 0, end = raw.size();
    while (begin < end && detail::is_ascii_space(static_cast<unsigned char>(raw[begin]))) ++begin;
    while (end > begin && detail::is_ascii_space(static_cast<unsigned char>(raw[end - 1]))) --end;

    std::string out;
    out.reserve(end - begin);
    bool pending_gap = false;
    for (std::size_t i = begin; i < end; ++i) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        if (detail::is_ascii_space(c)) {
            pending_gap = true;
            continue;
        }
        if (pending_gap) {
            out.push_back('_');
            pending_gap = false;
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

class KnowledgeGraph {
public:
    // Returns the id for the entity whose normalized label matches `surface`,
    // creating it on first mention. The original surface form is recorded.
    EntityId add_entity(std::string_view surface) {
        std::string label = normalize_label(surface);
        auto it = label_index_.find(label);
        if (it != label_index_.end()) {
            Entity& e = entities_[it->second];
            if (std::find(e.surface_forms.begin(), e.surface_forms.end(), surface) ==
                e.surface_forms.end()) {
                e.surface_forms.emplace_back(surface);
            }
            return it->second;
        }
        EntityId id = static_cast<EntityId>(entities_.size());
        entities_.push_back(Entity{id, label, {std::string(surface)}});
        label_index_.emplace(std::move(label), id);
        out_index_.emplace_back();
        in_index_.emplace_back();
        return id;
    }

    // Adds (head, relation, tail); duplicates keep the maximum weight.
    void add_triple(EntityId head, std::string_view relation, EntityId tail, double weight = 1.0) {
        if (head >= entities_.size() || tail >= entities_.size())
            throw Error("triple references unknown entity id");
        std::string rel = normalize_relation(relation);
        std::string key = triple_key(head, rel, tail);
        auto it = triple_index_.find(key);
        if (it != triple_index_.end()) {
            Triple& t = triples_[it->second];
            t.weight = std::max(t.weight, weight);
            return;
        }
        TripleIndex idx = static_cast<TripleIndex>(triples_.size());
        triples_.push_back(Triple{head, std::move(rel), tail, weight});
        triple_index_.emplace(std::move(key), idx);
        out_index_[head].push_back(idx);
        in_index_[tail].push_back(idx);
    }

    std::optional<EntityId> find(std::string_view label) const {
        auto it = label_index_.find(normalize_label(label));
        if (it == label_index_.end()) return std::nullopt;
        return it->second;
    }

    const Entity& entity(EntityId id) const { return entities_.at(id); }
    const std::vector<Entity>& entities() const { return entities_; }
    const std::vector<Triple>& triples() const { return triples_; }
    const Triple& triple(TripleIndex i) const { return triples_.at(i); }

    const std::vector<TripleIndex>& out_edges(EntityId id) const { return out_index_.at(id); }
    const std::vector<TripleIndex>& in_edges(EntityId id) const { return in_index_.at(id); }

    // Out- followed by in-edges; the undirected incidence list used by
    // traversal and neighborhood expansion.
    std::vector<TripleIndex> incident(EntityId id) const {
        std::vector<TripleIndex> r = out_index_.at(id);
        const auto& in = in_index_.at(id);
        r.insert(r.end(), in.begin(), in.end());
        return r;
    }

    std::size_t entity_count() const { return entities_.size(); }
    std::size_t triple_count() const { return triples_.size(); }
    bool empty() const { return entities_.empty(); }

    // Other endpoint of `t` as seen from `from`; self-loops return `from`.
    EntityId other_end(TripleIndex t, EntityId from) const {
        const Triple& tr = triples_.at(t);
        return tr.head == from ? tr.tail : tr.head;
    }

private:
    static std::string triple_key(EntityId h, const std::string& rel, EntityId t) {
        std::string k = std::to_string(h);
        k.push_back('\x1f');
        k += rel;
        k.push_back('\x1f');
        k += std::to_string(t);
        return k;
    }

    std::vector<Entity> entities_;
    std::vector<Triple> triples_;
    std::vector<std::vector<TripleIndex>> out_index_;
    std::vector<std::vector<TripleIndex>> in_index_;
    std::unordered_map<std::string, EntityId> label_index_;
    std::unordered_map<std::string, TripleIndex> triple_index_;
};

inline std::optional<EntityId> lookup_entity(const KnowledgeGraph& g, std::string_view label) {
    return g.find(label);
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline double parse_weight(std::string_view field, std::size_t line_no) {
    double w = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, w);
    if (ec != std::errc() || ptr != last)
        throw ParseError("unparseable weight '" + std::string(field) + "'", line_no);
    if (w < 0.0) throw ParseError("negative weight", line_no);
    return w;
}

}  // namespace detail

// Reads `head<TAB>relation<TAB>tail[<TAB>weight]` lines. `#`-prefixed and
// blank lines are skipped. An empty file yields an empty graph.
inline KnowledgeGraph ingest_simple_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open KG file: " + path);

    KnowledgeGraph g;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3 && fields.size() != 4)
            throw ParseError("expected 3 or 4 tab-separated fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        for (int i = 0; i < 3; ++i)
            if (normalize_label(fields[i]).empty())
                throw ParseError("empty field", line_no);
        double weight = fields.size() == 4 ? detail::parse_weight(fields[3], line_no) : 1.0;
        EntityId h = g.add_entity(fields[0]);
        EntityId t = g.add_entity(fields[2]);
        g.add_triple(h, fields[1], t, weight);
    }
    return g;
}

namespace detail {

// "/c/en/ice_cream/n" -> "ice_cream" when lang == "en"; empty when the URI
// is not a concept in that language.
inline std::string concept_term(std::string_view uri, std::string_view lang) {
    std::string prefix = "/c/" + std::string(lang) + "/";
    if (uri.substr(0, prefix.size()) != prefix) return {};
    std::string_view rest = uri.substr(prefix.size());
    std::size_t slash = rest.find('/');
    if (slash != std::string_view::npos) rest = rest.substr(0, slash);
    return std::string(rest);
}

inline std::string relation_term(std::string_view uri) {
    std::size_t slash = uri.rfind('/');
    return std::string(slash == std::string_view::npos ? uri : uri.substr(slash + 1));
}

}  // namespace detail

// Reads the standard 5-column ConceptNet assertion dump (assertion URI,
// relation URI, start URI, end URI, JSON metadata), keeping rows whose start
// and end are both `/c/<lang>/...` concepts. Metadata that fails to parse is
// tolerated; the row keeps weight 1.0.
inline KnowledgeGraph ingest_conceptnet_dump(const std::string& path, const std::string& language) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open ConceptNet dump: " + path);

    KnowledgeGraph g;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() < 5)
            throw ParseError("expected 5 tab-separated columns, got " +
                                 std::to_string(fields.size()),
                             line_no);

        std::string start = detail::concept_term(fields[2], language);
        std::string end = detail::concept_term(fields[3], language);
        if (start.empty() || end.empty()) continue;

        // Metadata may itself contain tabs; everything past column 4 is one field.
        std::string meta(fields[4]);
        for (std::size_t i = 5; i < fields.size(); ++i) {
            meta.push_back('\t');
            meta += fields[i];
        }
        double weight = 1.0;
        nlohmann::json parsed = nlohmann::json::parse(meta, nullptr, /*allow_exceptions=*/false);
        if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("weight") &&
            parsed["weight"].is_number()) {
            weight = parsed["weight"].get<double>();
        }

        EntityId h = g.add_entity(start);
        EntityId t = g.add_entity(end);
        g.add_triple(h, detail::relation_term(fields[1]), t, weight);
    }
    return g;
}

}  // namespace kglm
