#pragma once
// Optional online client for a ConceptNet-style REST endpoint. Fetches edge
// records for one entity; never touches a local graph, the caller merges.

#include <cctype>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "kglm/error.hpp"
#include "kglm/kg.hpp"

namespace kglm {

struct RemoteEdge {
    std::string start;
    std::string rel;
    std::string end;
    double weight = 1.0;
};

namespace detail {

struct EndpointParts {
    std::string base;    // scheme://host[:port]
    std::string prefix;  // path prefix, possibly empty, no trailing slash
};

inline EndpointParts split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw RemoteError("endpoint url missing scheme: " + url);
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http") throw RemoteError("unsupported endpoint scheme '" + scheme + "' (only http)");
    auto path_start = url.find('/', scheme_end + 3);
    EndpointParts parts;
    if (path_start == std::string::npos) {
        parts.base = url;
    } else {
        parts.base = url.substr(0, path_start);
        parts.prefix = url.substr(path_start);
        while (!parts.prefix.empty() && parts.prefix.back() == '/') parts.prefix.pop_back();
    }
    return parts;
}

inline std::string url_encode(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

}  // namespace detail

// GET <endpoint>/c/<language>/<term>?limit=N and parse the "edges" array.
// Any transport failure, non-2xx status, or payload that does not match the
// expected shape raises RemoteError; there is no partial result.
inline std::vector<RemoteEdge> fetch_remote_edges(const std::string& entity_label,
                                                  const std::string& endpoint_url,
                                                  std::size_t limit,
                                                  const std::string& language = "en") {
    if (limit == 0) throw RemoteError("limit must be positive");
    auto parts = detail::split_endpoint(endpoint_url);

    std::string term = detail::url_encode(normalize_label(entity_label));
    std::string path = parts.prefix + "/c/" + language + "/" + term + "?limit=" + std::to_string(limit);

    httplib::Client client(parts.base);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(10, 0);
    auto res = client.Get(path);
    if (!res) throw RemoteError("request to " + parts.base + path + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw RemoteError("endpoint returned status " + std::to_string(res->status));

    nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("edges") || !body["edges"].is_array())
        throw RemoteError("malformed payload: expected object with an 'edges' array");

    std::vector<RemoteEdge> out;
    for (const auto& edge : body["edges"]) {
        auto label_of = [&](const char* field) -> std::string {
            if (!edge.contains(field) || !edge[field].is_object() || !edge[field].contains("label") ||
                !edge[field]["label"].is_string())
                throw RemoteError(std::string("malformed payload: edge missing '") + field + "' label");
            return edge[field]["label"].get<std::string>();
        };
        RemoteEdge rec;
        rec.start = label_of("start");
        rec.rel = label_of("rel");
        rec.end = label_of("end");
        if (edge.contains("weight") && edge["weight"].is_number())
            rec.weight = edge["weight"].get<double>();
        out.push_back(std::move(rec));
        if (out.size() == limit) break;
    }
    return out;
}

}  // namespace kglm
