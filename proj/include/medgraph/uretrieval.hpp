#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "medgraph/chat.hpp"
#include "medgraph/common.hpp"
#include "medgraph/constructor.hpp"
#include "medgraph/embedding.hpp"
#include "medgraph/graph_store.hpp"
#include "medgraph/taghier.hpp"

namespace medgraph {

struct RetrievalConfig {
    std::size_t top_entities = 60;   // N_u
    std::size_t neighbor_hops = 16;  // k_u
    std::size_t refine_depth = 4;

    void validate() const {
        if (top_entities == 0) throw ConfigError("top_entities must be positive");
    }
};

struct CitationChain {
    std::string entity_id;
    std::vector<std::string> reference_ids;
    std::vector<std::string> definition_ids;
};

struct RefinementStep {
    std::string node_id;
    std::string summary;
    std::string response;
};

inline constexpr int kTraceSchemaVersion = 1;

struct RetrievalTrace {
    std::string question;
    TagSummary query_tags;
    std::vector<std::string> path;  // tag node id per layer, root first
    std::string target_graph_id;
    std::vector<ScoredId> top_entities;       // E_r with cosines
    std::vector<std::string> expanded_ids;    // E_r^{k_u}, sorted
    std::vector<std::string> subgraph_edges;  // relation ids of G_r, sorted
    std::string serialized_graph;
    std::vector<std::string> dropped_ids;     // E_r members removed to fit budget
    std::string initial_response;
    std::vector<RefinementStep> refinement;
    std::string final_response;
    std::vector<CitationChain> citations;
    bool degraded = false;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = kTraceSchemaVersion;
        j["question"] = question;
        j["query_tags"] = query_tags.tags;
        j["path"] = path;
        j["target_graph"] = target_graph_id;
        nlohmann::json er = nlohmann::json::array();
        for (const auto& s : top_entities) er.push_back({{"id", s.id}, {"cosine", s.score}});
        j["top_entities"] = er;
        j["expanded"] = expanded_ids;
        j["subgraph_edges"] = subgraph_edges;
        j["serialized_graph"] = serialized_graph;
        j["dropped"] = dropped_ids;
        j["initial_response"] = initial_response;
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& s : refinement)
            steps.push_back({{"node", s.node_id}, {"summary", s.summary}, {"response", s.response}});
        j["refinement"] = steps;
        j["final_response"] = final_response;
        nlohmann::json cites = nlohmann::json::array();
        for (const auto& c : citations)
            cites.push_back({{"entity", c.entity_id},
                             {"references", c.reference_ids},
                             {"definitions", c.definition_ids}});
        j["citations"] = cites;
        j["degraded"] = degraded;
        return j;
    }

    std::string trace_id() const { return to_hex(fnv1a64(to_json().dump())); }
};

// T_Q: a schema-conformant tag summary of the user query.
inline TagSummary query_tags(const std::string& question, const TagSchema& schema,
                             ChatProvider& provider, EmbeddingProvider& embedder,
                             std::vector<std::string>* dropped = nullptr,
                             const std::string& sep = "|") {
    std::string raw = provider.chat(
        PromptKind::QueryTag,
        {{"QUERY", question}, {"CATEGORIES", schema.rendered()}, {"SEP", sep}});
    auto tags = detail::parse_tag_records(raw, schema, sep, dropped);
    TagSummary summary = detail::embed_tags(std::move(tags), embedder);
    if (summary.empty())
        throw ParseError("query tag generation produced no schema categories; raw output:\n" + raw);
    return summary;
}

// Top-down descent: pick the most similar root, then at each layer the most
// similar child of the current node (a node carried forward into the next
// layer is its own continuation). Ties resolve by ascending node id.
inline std::vector<std::string> descend(const TagSummary& query, const Hierarchy& h) {
    if (h.layers.empty()) throw StoreError("descend: hierarchy is empty");
    if (query.empty()) throw StoreError("descend: query tag summary is empty");

    auto argmax = [&](const std::vector<std::string>& candidates) {
        std::vector<std::string> sorted = candidates;
        std::sort(sorted.begin(), sorted.end());
        std::string best;
        double best_sim = -1.0;
        for (const auto& id : sorted) {
            double s = pair_similarity(query, h.node(id).summary);
            if (s > best_sim) {
                best_sim = s;
                best = id;
            }
        }
        return best;
    };

    std::vector<std::string> path;
    std::string current = argmax(h.layers[0]);
    path.push_back(current);
    for (std::size_t layer = 1; layer < h.layers.size(); ++layer) {
        const auto& below = h.layers[layer];
        bool carried = std::find(below.begin(), below.end(), current) != below.end();
        if (carried) {
            path.push_back(current);
            continue;
        }
        const TagNode& n = h.node(current);
        if (n.is_leaf()) break;
        current = argmax(n.children);
        path.push_back(current);
    }
    return path;
}

struct Subgraph {
    std::vector<ScoredId> top_entities;     // E_r, descending cosine then id
    std::set<std::string> expanded;         // E_r^{k_u}
    std::vector<std::string> edge_ids;      // relations with both endpoints inside
};

// E_r = top-N_u entities of the target graph by cosine to the query
// embedding; E_r^{k_u} adds each one's triple neighborhood; G_r is the
// induced subgraph over the stored relations.
inline Subgraph assemble_subgraph(const GraphStore& store, const MetaMedGraph& target,
                                  const Vector& query_embedding, const RetrievalConfig& cfg) {
    cfg.validate();
    if (target.entity_ids.empty())
        throw StoreError("assemble_subgraph: target meta graph is empty");

    std::vector<ScoredId> scored;
    for (const auto& id : target.entity_ids)
        scored.push_back({id, cosine(query_embedding, store.entity(id).embedding)});
    std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (scored.size() > cfg.top_entities) scored.resize(cfg.top_entities);

    Subgraph g;
    g.top_entities = scored;
    for (const auto& [id, score] : scored) {
        auto nbrs = triple_neighbors(store, id, cfg.neighbor_hops);
        g.expanded.insert(nbrs.begin(), nbrs.end());
    }
    for (const auto& [rid, r] : store.relations()) {
        if (g.expanded.count(r.source) && g.expanded.count(r.target)) g.edge_ids.push_back(rid);
    }
    return g;
}

// One clause per edge (ascending source id then target id), isolated
// entities appended as bare names.
inline std::string serialize_subgraph(const GraphStore& store, const std::set<std::string>& members,
                                      const std::vector<std::string>& edge_ids) {
    std::vector<const Relation*> edges;
    for (const auto& rid : edge_ids) edges.push_back(&store.relation(rid));
    std::sort(edges.begin(), edges.end(), [](const Relation* a, const Relation* b) {
        if (a->source != b->source) return a->source < b->source;
        if (a->target != b->target) return a->target < b->target;
        return a->id < b->id;
    });
    std::set<std::string> covered;
    std::string out;
    for (const Relation* r : edges) {
        if (!out.empty()) out += ", ";
        out += store.entity(r->source).name + " + " + relation_label(r->kind, r->description) +
               " + " + store.entity(r->target).name;
        covered.insert(r->source);
        covered.insert(r->target);
    }
    for (const auto& id : members) {
        if (covered.count(id)) continue;
        if (!out.empty()) out += ", ";
        out += store.entity(id).name;
    }
    return out;
}

struct AnswerResult {
    std::string response;
    std::string serialized_graph;
    std::set<std::string> kept_members;
    std::vector<std::string> kept_edges;
    std::vector<std::string> dropped_ids;  // E_r ids removed to fit the budget
};

// Answers over G_r. If the rendered prompt exceeds the token budget, the
// lowest-cosine E_r entities (with the neighborhood nodes only they
// contributed) are dropped until it fits.
inline AnswerResult answer(const GraphStore& store, const std::string& question,
                           const Subgraph& subgraph, const RetrievalConfig& cfg,
                           ChatProvider& provider) {
    std::size_t kept = subgraph.top_entities.size();
    if (kept == 0) throw StoreError("answer: empty retrieval subgraph");

    AnswerResult result;
    for (;;) {
        if (kept == 0)
            throw BudgetExceededError("answer prompt cannot fit the budget even with one entity");
        std::set<std::string> members;
        for (std::size_t i = 0; i < kept; ++i) {
            const auto& id = subgraph.top_entities[i].id;
            auto nbrs = triple_neighbors(store, id, cfg.neighbor_hops);
            members.insert(nbrs.begin(), nbrs.end());
        }
        std::vector<std::string> edges;
        for (const auto& rid : subgraph.edge_ids) {
            const Relation& r = store.relation(rid);
            if (members.count(r.source) && members.count(r.target)) edges.push_back(rid);
        }
        std::string serialized = serialize_subgraph(store, members, edges);
        try {
            result.response =
                provider.chat(PromptKind::Answer, {{"QUESTION", question}, {"GRAPH", serialized}});
            result.serialized_graph = std::move(serialized);
            result.kept_members = std::move(members);
            result.kept_edges = std::move(edges);
            return result;
        } catch (const BudgetExceededError&) {
            --kept;
            result.dropped_ids.push_back(subgraph.top_entities[kept].id);
        }
    }
}

// Bottom-up refinement along the distinct ancestors of the descent path.
inline void refine(RetrievalTrace& trace, const Hierarchy& h, const RetrievalConfig& cfg,
                   ChatProvider& provider) {
    trace.final_response = trace.initial_response;
    if (cfg.refine_depth == 0 || trace.path.size() < 2) return;

    // Distinct ancestor chain, nearest first (carried-forward nodes repeat
    // in the recorded path and count once).
    std::vector<std::string> ancestors;
    for (std::size_t i = trace.path.size() - 1; i-- > 0;) {
        if (ancestors.empty() ? trace.path[i] != trace.path.back()
                              : trace.path[i] != ancestors.back())
            ancestors.push_back(trace.path[i]);
    }
    if (ancestors.size() > cfg.refine_depth) ancestors.resize(cfg.refine_depth);

    std::string response = trace.initial_response;
    for (const auto& node_id : ancestors) {
        std::string summary = h.node(node_id).summary.rendered();
        try {
            std::string next = provider.chat(PromptKind::Refine, {{"QUESTION", trace.question},
                                                                  {"RESPONSE", response},
                                                                  {"SUMMARY", summary}});
            trace.refinement.push_back({node_id, summary, next});
            response = std::move(next);
        } catch (const ProviderError&) {
            trace.degraded = true;
            break;
        }
    }
    trace.final_response = response;
}

inline std::vector<CitationChain> collect_citations(const GraphStore& store,
                                                    const std::set<std::string>& members) {
    std::vector<CitationChain> out;
    for (const auto& id : members) {
        if (store.entity(id).tier != Tier::User) continue;
        TripleView v = triple_view(store, id);
        if (v.reference_ids.empty() && v.definition_ids.empty()) continue;
        out.push_back({id, v.reference_ids, v.definition_ids});
    }
    return out;
}

// Full retrieval loop: tags, descent, assembly, answer, refinement, citations.
inline RetrievalTrace run_query(const GraphStore& store, const Hierarchy& h,
                                const TagSchema& schema, const std::string& question,
                                ChatProvider& chat, EmbeddingProvider& embedder,
                                const RetrievalConfig& cfg) {
    RetrievalTrace trace;
    trace.question = question;
    trace.query_tags = query_tags(question, schema, chat, embedder);
    trace.path = descend(trace.query_tags, h);

    const TagNode& leaf = h.node(trace.path.back());
    if (leaf.leaf_graph_id.empty())
        throw StoreError("descent did not reach a leaf meta graph");
    trace.target_graph_id = leaf.leaf_graph_id;
    const MetaMedGraph& target = store.meta_graph(trace.target_graph_id);

    Vector q = embedder.embed(question);
    Subgraph sub = assemble_subgraph(store, target, q, cfg);
    trace.top_entities = sub.top_entities;

    AnswerResult ans = answer(store, question, sub, cfg, chat);
    trace.expanded_ids.assign(ans.kept_members.begin(), ans.kept_members.end());
    trace.subgraph_edges = ans.kept_edges;
    std::sort(trace.subgraph_edges.begin(), trace.subgraph_edges.end());
    trace.serialized_graph = ans.serialized_graph;
    trace.dropped_ids = ans.dropped_ids;
    trace.initial_response = ans.response;
    trace.citations = collect_citations(store, ans.kept_members);

    refine(trace, h, cfg, chat);
    return trace;
}

}  // namespace medgraph
