#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medgraph/chat.hpp"
#include "medgraph/chunker.hpp"
#include "medgraph/common.hpp"
#include "medgraph/embedding.hpp"
#include "medgraph/graph_store.hpp"

namespace medgraph {

struct ExtractedEntity {
    std::string name;
    std::string type;
    std::string context;
};

struct ExtractionResult {
    std::string chunk_id;
    std::vector<std::string> entity_ids;  // store ids, extraction order
};

struct LinkPolicy {
    double threshold = 0.5;       // delta_r
    std::size_t max_links = 1;    // best matches kept per source entity

    void validate() const {
        if (!(threshold > 0.0 && threshold <= 1.0))
            throw ConfigError("link threshold must be in (0, 1]");
        if (max_links == 0) throw ConfigError("max links per source must be positive");
    }
};

struct TripleView {
    std::string entity_id;
    std::vector<std::string> reference_ids;   // tier 2
    std::vector<std::string> definition_ids;  // tier 3
};

namespace detail {

inline std::vector<ExtractedEntity> parse_entity_records(const std::string& raw,
                                                         const std::string& sep) {
    std::vector<ExtractedEntity> out;
    for (const auto& line : split_lines(raw)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        std::size_t a = t.find(sep);
        std::size_t b = a == std::string::npos ? std::string::npos : t.find(sep, a + sep.size());
        if (a == std::string::npos || b == std::string::npos)
            throw ParseError("entity extraction output is not 'name" + sep + "type" + sep +
                             "context' records; raw output:\n" + raw);
        out.push_back({trim(t.substr(0, a)), trim(t.substr(a + sep.size(), b - a - sep.size())),
                       trim(t.substr(b + sep.size()))});
    }
    return out;
}

struct RelationRecord {
    std::string source_name;
    std::string description;
    std::string target_name;
};

inline std::vector<RelationRecord> parse_relation_records(const std::string& raw,
                                                          const std::string& sep) {
    std::vector<RelationRecord> out;
    for (const auto& line : split_lines(raw)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        std::size_t a = t.find(sep);
        std::size_t b = a == std::string::npos ? std::string::npos : t.find(sep, a + sep.size());
        if (a == std::string::npos || b == std::string::npos)
            throw ParseError("relation output is not 'source" + sep + "description" + sep +
                             "target' records; raw output:\n" + raw);
        out.push_back({trim(t.substr(0, a)), trim(t.substr(a + sep.size(), b - a - sep.size())),
                       trim(t.substr(b + sep.size()))});
    }
    return out;
}

}  // namespace detail

// Step 2: extract entities from one chunk and upsert them at the given tier.
inline ExtractionResult extract_entities(GraphStore& store, const std::string& chunk_id,
                                         const std::string& text, Tier tier,
                                         ChatProvider& provider, EmbeddingProvider& embedder,
                                         const std::string& sep = "|") {
    std::string raw = provider.chat(PromptKind::Ent, {{"CONTENT", text}, {"SEP", sep}});
    ExtractionResult result;
    result.chunk_id = chunk_id;
    for (const auto& rec : detail::parse_entity_records(raw, sep)) {
        Entity e;
        e.name = rec.name;
        e.type = rec.type;
        e.context = rec.context;
        e.tier = tier;
        e.chunk_id = chunk_id;
        e.embedding = embedder.embed(e.content());
        result.entity_ids.push_back(store.upsert_entity(std::move(e)));
    }
    return result;
}

struct LinkReport {
    std::vector<std::string> relation_ids;
    bool empty_target_tier = false;
};

// Step 3: cross-tier linking. For each source-tier entity keep the top
// `max_links` target-tier entities with cosine >= threshold (ties by
// ascending id) and store them with the stated kind and cosine.
inline LinkReport link_tier(GraphStore& store, Tier source_tier, Tier target_tier,
                            RelationKind kind, const LinkPolicy& policy) {
    policy.validate();
    if (kind != RelationKind::ReferenceOf && kind != RelationKind::DefinitionOf)
        throw StoreError("link_tier only builds cross-tier kinds");
    LinkReport report;
    auto targets = store.entities_in_tier(target_tier);
    if (targets.empty()) {
        report.empty_target_tier = true;
        return report;
    }
    for (const auto& sid : store.entities_in_tier(source_tier)) {
        const Entity& src = store.entity(sid);
        auto top = store.knn(src.embedding, policy.max_links, target_tier);
        for (const auto& [tid, score] : top) {
            if (score < policy.threshold) continue;
            Relation r;
            r.source = sid;
            r.target = tid;
            r.kind = kind;
            r.similarity = score;
            report.relation_ids.push_back(store.add_relation(std::move(r)));
        }
    }
    return report;
}

// Tri^{<=k}: entities within hop allowance k + (tier - 1) of the center,
// over the undirected view of all relation kinds. Includes the center.
inline std::set<std::string> triple_neighbors(const GraphStore& store, const std::string& center,
                                              std::size_t k) {
    auto dist = store.bfs_distances(center);
    std::set<std::string> out;
    for (const auto& [id, d] : dist) {
        std::size_t allowance = k + static_cast<std::size_t>(tier_index(store.entity(id).tier) - 1);
        if (d <= allowance) out.insert(id);
    }
    return out;
}

struct RelationGenReport {
    std::string meta_graph_id;  // empty when no meta record was created
    std::vector<std::string> relation_ids;
    std::vector<std::string> rejected;  // records naming unknown entities
};

// Entity content concatenated with the contents of its reference targets,
// the per-entity text shown to the relation prompt.
inline std::string entity_with_references(const GraphStore& store, const std::string& id) {
    const Entity& e = store.entity(id);
    std::string out = e.content();
    auto refs = store.relations_from(id, RelationKind::ReferenceOf);
    std::sort(refs.begin(), refs.end(),
              [](const Relation* a, const Relation* b) { return a->target < b->target; });
    for (const Relation* r : refs) {
        out += " ; ";
        out += store.entity(r->target).content();
    }
    return out;
}

// Step 4: generate intra-chunk relationships for the given extracted entities.
// All ordered pairs are offered when the chunk holds at most `dense_limit`
// entities; above that, only pairs whose embeddings reach `pair_threshold`.
inline RelationGenReport generate_relations(GraphStore& store, const ExtractionResult& extraction,
                                            ChatProvider& provider, bool create_meta_graph,
                                            const std::string& sep = "|",
                                            std::size_t dense_limit = 12,
                                            double pair_threshold = 0.3) {
    RelationGenReport report;
    const auto& ids = extraction.entity_ids;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (i == j) continue;
            if (ids.size() > dense_limit) {
                double c = cosine(store.entity(ids[i]).embedding, store.entity(ids[j]).embedding);
                if (c < pair_threshold) continue;
            }
            pairs.emplace_back(ids[i], ids[j]);
        }
    }

    std::set<std::string> relation_ids;
    if (!pairs.empty()) {
        std::string block;
        for (const auto& [a, b] : pairs) {
            block += "PAIR: " + store.entity(a).name + " :: " + entity_with_references(store, a) +
                     " => " + store.entity(b).name + " :: " + entity_with_references(store, b) +
                     "\n";
        }
        std::string raw = provider.chat(PromptKind::Rel, {{"ENTITIES", block}, {"SEP", sep}});

        std::map<std::string, std::string> by_name;
        for (const auto& id : ids) by_name[store.entity(id).name] = id;

        for (const auto& rec : detail::parse_relation_records(raw, sep)) {
            auto s = by_name.find(rec.source_name);
            auto t = by_name.find(rec.target_name);
            if (s == by_name.end() || t == by_name.end()) {
                report.rejected.push_back(rec.source_name + sep + rec.description + sep +
                                          rec.target_name);
                continue;
            }
            Relation r;
            r.source = s->second;
            r.target = t->second;
            r.kind = RelationKind::Generated;
            r.description = rec.description;
            std::string rid = store.add_relation(std::move(r));
            relation_ids.insert(rid);
            report.relation_ids.push_back(rid);
        }
    }

    if (create_meta_graph) {
        MetaMedGraph g;
        g.chunk_id = extraction.chunk_id;
        g.id = MetaMedGraph::make_id(extraction.chunk_id);
        g.entity_ids = ids;
        g.relation_ids = relation_ids;
        report.meta_graph_id = g.id;
        store.add_meta_graph(std::move(g));
    }
    return report;
}

inline TripleView triple_view(const GraphStore& store, const std::string& entity_id) {
    TripleView view;
    view.entity_id = entity_id;
    auto refs = store.relations_from(entity_id, RelationKind::ReferenceOf);
    std::sort(refs.begin(), refs.end(),
              [](const Relation* a, const Relation* b) { return a->target < b->target; });
    for (const Relation* ref : refs) {
        view.reference_ids.push_back(ref->target);
        auto defs = store.relations_from(ref->target, RelationKind::DefinitionOf);
        std::sort(defs.begin(), defs.end(),
                  [](const Relation* a, const Relation* b) { return a->target < b->target; });
        for (const Relation* def : defs) view.definition_ids.push_back(def->target);
    }
    return view;
}

}  // namespace medgraph
