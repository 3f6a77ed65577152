#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "medgraph/common.hpp"
#include "medgraph/taghier.hpp"
#include "medgraph/tokens.hpp"

namespace medgraph {

inline constexpr int kConfigSchemaVersion = 1;

struct ProviderConfig {
    std::string chat = "stub";       // stub | remote
    std::string embedding = "stub";  // stub | remote
    std::string chat_model;
    std::string embedding_model;
    std::string endpoint;
    std::string api_key_env = "MEDGRAPH_API_KEY";
    std::size_t dimension = 64;
    std::uint64_t seed = 1;
};

struct PathsConfig {
    std::string corpus;
    std::string tier2_corpus;
    std::string tier3_concepts;
    std::string tier3_relations;
    std::string vocab;
    std::string snapshot;
    std::string stub_script;
    std::string chunk_manifest;
};

struct PipelineConfig {
    ProviderConfig provider;
    TokenScheme token_scheme = TokenScheme::Bytes4;
    std::size_t token_budget = 4096;
    std::size_t window = 5;            // w
    double link_threshold = 0.5;       // delta_r
    std::size_t max_links = 1;
    double cluster_floor = 0.5;        // delta_t floor
    std::size_t max_layers = 12;
    std::size_t top_entities = 60;     // N_u
    std::size_t neighbor_hops = 16;    // k_u
    std::size_t refine_depth = 4;
    TagSchema schema = TagSchema::defaults();
    PathsConfig paths;
    std::string field_sep = "|";

    void validate() const {
        if (window == 0) throw ConfigError("chunker.window must be positive");
        if (token_budget == 0) throw ConfigError("tokens.budget must be positive");
        if (!(link_threshold > 0.0 && link_threshold <= 1.0))
            throw ConfigError("linking.threshold must be in (0, 1]");
        if (max_links == 0) throw ConfigError("linking.max_links must be positive");
        if (!(cluster_floor >= 0.0 && cluster_floor <= 1.0))
            throw ConfigError("clustering.floor must be in [0, 1]");
        if (max_layers == 0 || max_layers > 12)
            throw ConfigError("clustering.max_layers must be in 1..12");
        if (top_entities == 0) throw ConfigError("retrieval.top_entities must be positive");
        if (refine_depth > 12) throw ConfigError("retrieval.refine_depth must be at most 12");
        if (provider.dimension == 0) throw ConfigError("provider.dimension must be positive");
        if (field_sep.empty()) throw ConfigError("field_sep must be non-empty");
        schema.validate();
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key))
            throw ConfigError("unknown config key '" + key + "' in " + where);
    }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j) {
    PipelineConfig cfg;
    detail::reject_unknown_keys(j,
                                {"schema_version", "provider", "tokens", "chunker", "linking",
                                 "clustering", "retrieval", "tags", "paths", "field_sep"},
                                "top level");
    if (!j.contains("schema_version"))
        throw ConfigError("config is missing schema_version");
    if (j.at("schema_version").get<int>() != kConfigSchemaVersion)
        throw ConfigError("unsupported config schema_version");

    if (j.contains("provider")) {
        const auto& p = j.at("provider");
        detail::reject_unknown_keys(p,
                                    {"chat", "embedding", "chat_model", "embedding_model",
                                     "endpoint", "api_key_env", "dimension", "seed"},
                                    "provider");
        detail::read_if(p, "chat", cfg.provider.chat);
        detail::read_if(p, "embedding", cfg.provider.embedding);
        detail::read_if(p, "chat_model", cfg.provider.chat_model);
        detail::read_if(p, "embedding_model", cfg.provider.embedding_model);
        detail::read_if(p, "endpoint", cfg.provider.endpoint);
        detail::read_if(p, "api_key_env", cfg.provider.api_key_env);
        detail::read_if(p, "dimension", cfg.provider.dimension);
        detail::read_if(p, "seed", cfg.provider.seed);
    }
    if (j.contains("tokens")) {
        const auto& t = j.at("tokens");
        detail::reject_unknown_keys(t, {"scheme", "budget"}, "tokens");
        if (t.contains("scheme"))
            cfg.token_scheme = token_scheme_from_string(t.at("scheme").get<std::string>());
        detail::read_if(t, "budget", cfg.token_budget);
    }
    if (j.contains("chunker")) {
        const auto& c = j.at("chunker");
        detail::reject_unknown_keys(c, {"window"}, "chunker");
        detail::read_if(c, "window", cfg.window);
    }
    if (j.contains("linking")) {
        const auto& l = j.at("linking");
        detail::reject_unknown_keys(l, {"threshold", "max_links"}, "linking");
        detail::read_if(l, "threshold", cfg.link_threshold);
        detail::read_if(l, "max_links", cfg.max_links);
    }
    if (j.contains("clustering")) {
        const auto& c = j.at("clustering");
        detail::reject_unknown_keys(c, {"floor", "max_layers"}, "clustering");
        detail::read_if(c, "floor", cfg.cluster_floor);
        detail::read_if(c, "max_layers", cfg.max_layers);
    }
    if (j.contains("retrieval")) {
        const auto& r = j.at("retrieval");
        detail::reject_unknown_keys(r, {"top_entities", "neighbor_hops", "refine_depth"},
                                    "retrieval");
        detail::read_if(r, "top_entities", cfg.top_entities);
        detail::read_if(r, "neighbor_hops", cfg.neighbor_hops);
        detail::read_if(r, "refine_depth", cfg.refine_depth);
    }
    if (j.contains("tags")) {
        cfg.schema.categories.clear();
        for (const auto& t : j.at("tags")) {
            detail::reject_unknown_keys(t, {"name", "description"}, "tags[]");
            cfg.schema.categories.push_back(
                {t.at("name").get<std::string>(),
                 t.contains("description") ? t.at("description").get<std::string>() : ""});
        }
    }
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        detail::reject_unknown_keys(p,
                                    {"corpus", "tier2_corpus", "tier3_concepts", "tier3_relations",
                                     "vocab", "snapshot", "stub_script", "chunk_manifest"},
                                    "paths");
        detail::read_if(p, "corpus", cfg.paths.corpus);
        detail::read_if(p, "tier2_corpus", cfg.paths.tier2_corpus);
        detail::read_if(p, "tier3_concepts", cfg.paths.tier3_concepts);
        detail::read_if(p, "tier3_relations", cfg.paths.tier3_relations);
        detail::read_if(p, "vocab", cfg.paths.vocab);
        detail::read_if(p, "snapshot", cfg.paths.snapshot);
        detail::read_if(p, "stub_script", cfg.paths.stub_script);
        detail::read_if(p, "chunk_manifest", cfg.paths.chunk_manifest);
    }
    detail::read_if(j, "field_sep", cfg.field_sep);
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return parse_config(j);
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["provider"] = {{"chat", cfg.provider.chat},
                     {"embedding", cfg.provider.embedding},
                     {"chat_model", cfg.provider.chat_model},
                     {"embedding_model", cfg.provider.embedding_model},
                     {"endpoint", cfg.provider.endpoint},
                     {"api_key_env", cfg.provider.api_key_env},
                     {"dimension", cfg.provider.dimension},
                     {"seed", cfg.provider.seed}};
    j["tokens"] = {{"scheme", to_string(cfg.token_scheme)}, {"budget", cfg.token_budget}};
    j["chunker"] = {{"window", cfg.window}};
    j["linking"] = {{"threshold", cfg.link_threshold}, {"max_links", cfg.max_links}};
    j["clustering"] = {{"floor", cfg.cluster_floor}, {"max_layers", cfg.max_layers}};
    j["retrieval"] = {{"top_entities", cfg.top_entities},
                      {"neighbor_hops", cfg.neighbor_hops},
                      {"refine_depth", cfg.refine_depth}};
    nlohmann::json tags = nlohmann::json::array();
    for (const auto& c : cfg.schema.categories)
        tags.push_back({{"name", c.name}, {"description", c.description}});
    j["tags"] = tags;
    j["paths"] = {{"corpus", cfg.paths.corpus},
                  {"tier2_corpus", cfg.paths.tier2_corpus},
                  {"tier3_concepts", cfg.paths.tier3_concepts},
                  {"tier3_relations", cfg.paths.tier3_relations},
                  {"vocab", cfg.paths.vocab},
                  {"snapshot", cfg.paths.snapshot},
                  {"stub_script", cfg.paths.stub_script},
                  {"chunk_manifest", cfg.paths.chunk_manifest}};
    j["field_sep"] = cfg.field_sep;
    return j;
}

}  // namespace medgraph
