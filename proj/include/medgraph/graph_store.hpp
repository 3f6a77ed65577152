#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "medgraph/common.hpp"
#include "medgraph/embedding.hpp"

namespace medgraph {

enum class Tier : int { User = 1, Literature = 2, Vocab = 3 };

inline int tier_index(Tier t) { return static_cast<int>(t); }

inline Tier tier_from_int(int i) {
    if (i < 1 || i > 3) throw StoreError("invalid tier: " + std::to_string(i));
    return static_cast<Tier>(i);
}

enum class RelationKind { ReferenceOf, DefinitionOf, Generated, Vocab };

inline std::string to_string(RelationKind k) {
    switch (k) {
        case RelationKind::ReferenceOf: return "reference_of";
        case RelationKind::DefinitionOf: return "definition_of";
        case RelationKind::Generated: return "generated";
        case RelationKind::Vocab: return "vocab";
    }
    return "?";
}

inline RelationKind relation_kind_from_string(const std::string& s) {
    if (s == "reference_of") return RelationKind::ReferenceOf;
    if (s == "definition_of") return RelationKind::DefinitionOf;
    if (s == "generated") return RelationKind::Generated;
    if (s == "vocab") return RelationKind::Vocab;
    throw StoreError("unknown relation kind: " + s);
}

inline std::string relation_label(RelationKind k, const std::string& description) {
    switch (k) {
        case RelationKind::ReferenceOf: return "the reference of";
        case RelationKind::DefinitionOf: return "the definition of";
        default: return description;
    }
}

struct Entity {
    std::string id;
    std::string name;
    std::string type;
    std::string context;
    Tier tier = Tier::User;
    std::string chunk_id;  // empty for tier 3
    Vector embedding;

    // C_e, the text embedded for every entity.
    std::string content() const { return content_of(name, type, context); }

    static std::string content_of(const std::string& na, const std::string& ty,
                                  const std::string& cx) {
        return "name: " + na + "; type: " + ty + "; context: " + cx;
    }

    static std::string make_id(Tier tier, const std::string& chunk_id, const std::string& na,
                               const std::string& ty) {
        std::uint64_t h = fnv1a64(std::to_string(tier_index(tier)));
        h = fnv1a64("\x1f", h);
        h = fnv1a64(chunk_id, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(na, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(ty, h);
        return "e" + to_hex(h);
    }
};

struct Relation {
    std::string id;
    std::string source;
    std::string target;
    RelationKind kind = RelationKind::Generated;
    std::string description;              // GENERATED / VOCAB only
    std::optional<double> similarity;     // cross-tier kinds only

    static std::string make_id(RelationKind kind, const std::string& source,
                               const std::string& target, const std::string& description) {
        std::uint64_t h = fnv1a64(to_string(kind));
        h = fnv1a64("\x1f", h);
        h = fnv1a64(source, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(target, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(description, h);
        return "r" + to_hex(h);
    }
};

struct MetaMedGraph {
    std::string id;
    std::string chunk_id;
    std::vector<std::string> entity_ids;   // insertion order
    std::set<std::string> relation_ids;

    static std::string make_id(const std::string& chunk_id) {
        return "g" + to_hex(fnv1a64(chunk_id));
    }
};

struct ChunkRecord {
    std::string id;
    std::string document_id;
    std::size_t first_paragraph = 0;
    std::size_t last_paragraph = 0;  // inclusive
    std::size_t token_count = 0;
    std::string text;
};

struct ScoredId {
    std::string id;
    double score;
};

// Exact top-k cosine search over unit vectors. Linear scan by construction;
// the testkit keeps its own independent scan for cross-checking.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dimension) : dimension_(dimension) {}

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return entries_.size(); }

    void upsert(const std::string& id, const Vector& v) {
        if (v.size() != dimension_) throw StoreError("vector index: dimension mismatch");
        entries_[id] = v;
    }

    std::vector<ScoredId> top_k(const Vector& query, std::size_t k,
                                const std::function<bool(const std::string&)>& filter = {}) const {
        if (query.size() != dimension_) throw StoreError("vector index: query dimension mismatch");
        std::vector<ScoredId> scored;
        scored.reserve(entries_.size());
        for (const auto& [id, v] : entries_) {
            if (filter && !filter(id)) continue;
            scored.push_back({id, dot(query, v)});
        }
        std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        if (scored.size() > k) scored.resize(k);
        return scored;
    }

private:
    std::size_t dimension_;
    std::map<std::string, Vector> entries_;
};

// Semantic-type vocabulary, one type per line.
class TypeVocabulary {
public:
    TypeVocabulary() = default;
    explicit TypeVocabulary(std::vector<std::string> types) {
        for (auto& t : types) types_.insert(std::move(t));
    }

    static TypeVocabulary from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw StoreError("cannot open type vocabulary: " + path);
        std::vector<std::string> types;
        std::string line;
        while (std::getline(in, line)) {
            std::string t = trim(line);
            if (!t.empty() && t[0] != '#') types.push_back(t);
        }
        return TypeVocabulary(std::move(types));
    }

    bool contains(const std::string& type) const { return types_.count(type) > 0; }
    bool empty() const { return types_.empty(); }
    const std::set<std::string>& types() const { return types_; }

private:
    std::set<std::string> types_;
};

inline constexpr int kSnapshotSchemaVersion = 1;

class GraphStore {
public:
    GraphStore(std::size_t dimension, TypeVocabulary vocab)
        : index_(dimension), vocab_(std::move(vocab)) {}

    std::size_t dimension() const { return index_.dimension(); }
    const TypeVocabulary& vocabulary() const { return vocab_; }

    // ---- entities ----

    std::string upsert_entity(Entity e) {
        validate_entity(e);
        if (e.id.empty()) e.id = Entity::make_id(e.tier, e.chunk_id, e.name, e.type);
        auto it = entities_.find(e.id);
        if (it != entities_.end()) {
            const Entity& old = it->second;
            if (old.name != e.name || old.type != e.type || old.context != e.context ||
                old.tier != e.tier || old.chunk_id != e.chunk_id)
                throw StoreError("duplicate entity id with conflicting content: " + e.id);
            return e.id;
        }
        index_.upsert(e.id, e.embedding);
        adjacency_[e.id];
        std::string id = e.id;
        entities_.emplace(id, std::move(e));
        return id;
    }

    const Entity& entity(const std::string& id) const {
        auto it = entities_.find(id);
        if (it == entities_.end()) throw StoreError("unknown entity id: " + id);
        return it->second;
    }

    bool has_entity(const std::string& id) const { return entities_.count(id) > 0; }
    const std::map<std::string, Entity>& entities() const { return entities_; }

    std::vector<std::string> entities_in_tier(Tier t) const {
        std::vector<std::string> out;
        for (const auto& [id, e] : entities_)
            if (e.tier == t) out.push_back(id);
        return out;
    }

    // ---- relations ----

    std::string add_relation(Relation r) {
        validate_relation(r);
        if (r.id.empty()) r.id = Relation::make_id(r.kind, r.source, r.target, r.description);
        auto it = relations_.find(r.id);
        if (it != relations_.end()) return r.id;
        adjacency_[r.source].insert(r.target);
        adjacency_[r.target].insert(r.source);
        std::string id = r.id;
        relations_.emplace(id, std::move(r));
        return id;
    }

    const Relation& relation(const std::string& id) const {
        auto it = relations_.find(id);
        if (it == relations_.end()) throw StoreError("unknown relation id: " + id);
        return it->second;
    }

    const std::map<std::string, Relation>& relations() const { return relations_; }

    std::vector<const Relation*> relations_from(const std::string& source, RelationKind kind) const {
        std::vector<const Relation*> out;
        for (const auto& [id, r] : relations_)
            if (r.source == source && r.kind == kind) out.push_back(&r);
        return out;
    }

    // ---- meta graphs ----

    void add_meta_graph(MetaMedGraph g) {
        for (const auto& eid : g.entity_ids) {
            const Entity& e = entity(eid);
            if (e.tier != Tier::User || e.chunk_id != g.chunk_id)
                throw StoreError("meta graph member must be tier-1 and share the chunk: " + eid);
        }
        for (const auto& rid : g.relation_ids) relation(rid);
        meta_graphs_[g.id] = std::move(g);
    }

    const MetaMedGraph& meta_graph(const std::string& id) const {
        auto it = meta_graphs_.find(id);
        if (it == meta_graphs_.end()) throw StoreError("unknown meta graph id: " + id);
        return it->second;
    }

    const std::map<std::string, MetaMedGraph>& meta_graphs() const { return meta_graphs_; }

    // ---- chunks ----

    void add_chunk(ChunkRecord c) { chunks_[c.id] = std::move(c); }
    const std::map<std::string, ChunkRecord>& chunks() const { return chunks_; }
    const ChunkRecord& chunk(const std::string& id) const {
        auto it = chunks_.find(id);
        if (it == chunks_.end()) throw StoreError("unknown chunk id: " + id);
        return it->second;
    }

    // ---- queries ----

    std::vector<ScoredId> knn(const Vector& query, std::size_t k,
                              std::optional<Tier> tier = std::nullopt) const {
        if (!tier) return index_.top_k(query, k);
        return index_.top_k(query, k, [this, t = *tier](const std::string& id) {
            return entities_.at(id).tier == t;
        });
    }

    static constexpr std::size_t kUnreachable = static_cast<std::size_t>(-1);

    // BFS over the undirected view of all relation kinds.
    std::unordered_map<std::string, std::size_t> bfs_distances(const std::string& from) const {
        entity(from);
        std::unordered_map<std::string, std::size_t> dist;
        std::deque<std::string> queue;
        dist[from] = 0;
        queue.push_back(from);
        while (!queue.empty()) {
            std::string cur = queue.front();
            queue.pop_front();
            auto it = adjacency_.find(cur);
            if (it == adjacency_.end()) continue;
            for (const auto& next : it->second) {
                if (dist.count(next)) continue;
                dist[next] = dist[cur] + 1;
                queue.push_back(next);
            }
        }
        return dist;
    }

    std::size_t hop_distance(const std::string& a, const std::string& b) const {
        entity(b);
        auto dist = bfs_distances(a);
        auto it = dist.find(b);
        return it == dist.end() ? kUnreachable : it->second;
    }

    // ---- snapshot ----

    std::string serialize() const {
        std::vector<std::string> lines;
        for (const auto& [id, e] : entities_) {
            nlohmann::json j;
            j["record"] = "entity";
            j["id"] = id;
            j["na"] = e.name;
            j["ty"] = e.type;
            j["cx"] = e.context;
            j["tier"] = tier_index(e.tier);
            j["chunk_id"] = e.chunk_id;
            j["embedding"] = e.embedding;
            lines.push_back(j.dump());
        }
        for (const auto& [id, r] : relations_) {
            nlohmann::json j;
            j["record"] = "relation";
            j["id"] = id;
            j["source"] = r.source;
            j["target"] = r.target;
            j["kind"] = to_string(r.kind);
            j["description"] = r.description;
            if (r.similarity) j["similarity"] = *r.similarity;
            lines.push_back(j.dump());
        }
        for (const auto& [id, g] : meta_graphs_) {
            nlohmann::json j;
            j["record"] = "metagraph";
            j["id"] = id;
            j["chunk_id"] = g.chunk_id;
            j["entities"] = g.entity_ids;
            j["relations"] = std::vector<std::string>(g.relation_ids.begin(), g.relation_ids.end());
            lines.push_back(j.dump());
        }
        for (const auto& [id, c] : chunks_) {
            nlohmann::json j;
            j["record"] = "chunk";
            j["id"] = id;
            j["document_id"] = c.document_id;
            j["first_paragraph"] = c.first_paragraph;
            j["last_paragraph"] = c.last_paragraph;
            j["token_count"] = c.token_count;
            j["text"] = c.text;
            lines.push_back(j.dump());
        }
        for (const auto& line : extra_records_) lines.push_back(line);
        return assemble_snapshot(lines, index_.dimension());
    }

    // Extra record lines (tag hierarchy, merge rounds) owned by higher layers.
    void set_extra_records(std::vector<std::string> lines) { extra_records_ = std::move(lines); }
    const std::vector<std::string>& extra_records() const { return extra_records_; }

    // Order-independent content hash over canonically sorted record lines.
    std::string content_hash() const {
        std::vector<std::string> lines = all_record_lines();
        std::sort(lines.begin(), lines.end());
        std::uint64_t h = kFnvBasis;
        for (const auto& l : lines) {
            h = fnv1a64(l, h);
            h = fnv1a64("\n", h);
        }
        return to_hex(h);
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw SnapshotError("cannot write snapshot: " + path);
        out << serialize();
        if (!out) throw SnapshotError("snapshot write failed: " + path);
    }

    static GraphStore load(const std::string& path, TypeVocabulary vocab = {}) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw SnapshotError("cannot open snapshot: " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        return deserialize(buf.str(), std::move(vocab));
    }

    static GraphStore deserialize(const std::string& text, TypeVocabulary vocab = {}) {
        auto lines = split_lines(text);
        if (lines.size() < 2) throw SnapshotError("snapshot truncated");
        nlohmann::json header = nlohmann::json::parse(lines.front(), nullptr, false);
        if (header.is_discarded() || !header.contains("schema"))
            throw SnapshotError("snapshot header missing");
        if (header["schema"].get<int>() != kSnapshotSchemaVersion)
            throw SnapshotError("snapshot schema version mismatch");
        std::size_t dim = header["dimension"].get<std::size_t>();

        nlohmann::json trailer = nlohmann::json::parse(lines.back(), nullptr, false);
        if (trailer.is_discarded() || !trailer.contains("hash"))
            throw SnapshotError("snapshot trailer missing");

        GraphStore store(dim, std::move(vocab));
        std::vector<std::string> record_lines(lines.begin() + 1, lines.end() - 1);
        // Meta graphs reference entities and relations, so they are applied in
        // a second pass after every other record is in place.
        std::vector<nlohmann::json> deferred_graphs;
        for (const auto& line : record_lines) {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw SnapshotError("snapshot record is not valid JSON");
            std::string record = j.at("record").get<std::string>();
            if (record == "entity") {
                Entity e;
                e.id = j.at("id").get<std::string>();
                e.name = j.at("na").get<std::string>();
                e.type = j.at("ty").get<std::string>();
                e.context = j.at("cx").get<std::string>();
                e.tier = tier_from_int(j.at("tier").get<int>());
                e.chunk_id = j.at("chunk_id").get<std::string>();
                e.embedding = j.at("embedding").get<Vector>();
                store.upsert_entity(std::move(e));
            } else if (record == "relation") {
                Relation r;
                r.id = j.at("id").get<std::string>();
                r.source = j.at("source").get<std::string>();
                r.target = j.at("target").get<std::string>();
                r.kind = relation_kind_from_string(j.at("kind").get<std::string>());
                r.description = j.at("description").get<std::string>();
                if (j.contains("similarity")) r.similarity = j["similarity"].get<double>();
                store.add_relation(std::move(r));
            } else if (record == "metagraph") {
                deferred_graphs.push_back(std::move(j));
            } else if (record == "chunk") {
                ChunkRecord c;
                c.id = j.at("id").get<std::string>();
                c.document_id = j.at("document_id").get<std::string>();
                c.first_paragraph = j.at("first_paragraph").get<std::size_t>();
                c.last_paragraph = j.at("last_paragraph").get<std::size_t>();
                c.token_count = j.at("token_count").get<std::size_t>();
                c.text = j.at("text").get<std::string>();
                store.add_chunk(std::move(c));
            } else {
                store.extra_records_.push_back(line);
            }
        }
        for (const auto& j : deferred_graphs) {
            MetaMedGraph g;
            g.id = j.at("id").get<std::string>();
            g.chunk_id = j.at("chunk_id").get<std::string>();
            g.entity_ids = j.at("entities").get<std::vector<std::string>>();
            for (const auto& rid : j.at("relations")) g.relation_ids.insert(rid.get<std::string>());
            store.add_meta_graph(std::move(g));
        }
        std::string expected = trailer["hash"].get<std::string>();
        std::string actual = store.content_hash();
        if (expected != actual)
            throw SnapshotError("snapshot content hash mismatch: expected " + expected +
                                ", computed " + actual);
        return store;
    }

private:
    std::vector<std::string> all_record_lines() const {
        auto text = serialize_records_only();
        return text;
    }

    std::vector<std::string> serialize_records_only() const {
        std::string full = serialize();
        auto lines = split_lines(full);
        return std::vector<std::string>(lines.begin() + 1, lines.end() - 1);
    }

    static std::string assemble_snapshot(const std::vector<std::string>& lines, std::size_t dim) {
        nlohmann::json header;
        header["schema"] = kSnapshotSchemaVersion;
        header["dimension"] = dim;
        std::string out = header.dump();
        out += '\n';
        std::vector<std::string> sorted = lines;
        std::sort(sorted.begin(), sorted.end());
        std::uint64_t h = kFnvBasis;
        for (const auto& l : sorted) {
            h = fnv1a64(l, h);
            h = fnv1a64("\n", h);
            out += l;
            out += '\n';
        }
        nlohmann::json trailer;
        trailer["hash"] = to_hex(h);
        out += trailer.dump();
        out += '\n';
        return out;
    }

    void validate_entity(const Entity& e) const {
        if (e.name.empty()) throw StoreError("entity name must be non-empty");
        if (!vocab_.empty() && !vocab_.contains(e.type))
            throw StoreError("unknown semantic type: '" + e.type + "'");
        if (e.tier == Tier::Vocab && !e.chunk_id.empty())
            throw StoreError("tier-3 entities have no chunk_id");
        if (e.tier != Tier::Vocab && e.chunk_id.empty())
            throw StoreError("tier-1/2 entities require a chunk_id");
        if (e.embedding.size() != index_.dimension())
            throw StoreError("entity embedding dimension mismatch");
    }

    void validate_relation(const Relation& r) const {
        Tier st = entity(r.source).tier;
        Tier tt = entity(r.target).tier;
        switch (r.kind) {
            case RelationKind::ReferenceOf:
                if (st != Tier::User || tt != Tier::Literature)
                    throw StoreError("reference_of edges go tier1 -> tier2");
                if (!r.similarity) throw StoreError("cross-tier edges carry a similarity");
                break;
            case RelationKind::DefinitionOf:
                if (st != Tier::Literature || tt != Tier::Vocab)
                    throw StoreError("definition_of edges go tier2 -> tier3");
                if (!r.similarity) throw StoreError("cross-tier edges carry a similarity");
                break;
            case RelationKind::Generated: {
                if (st != tt || st == Tier::Vocab)
                    throw StoreError("generated edges connect two same-tier extracted entities");
                const auto& s = entity(r.source);
                const auto& t = entity(r.target);
                if (s.chunk_id != t.chunk_id)
                    throw StoreError("generated edges stay within one chunk");
                break;
            }
            case RelationKind::Vocab:
                if (st != Tier::Vocab || tt != Tier::Vocab)
                    throw StoreError("vocab edges connect two tier-3 entities");
                break;
        }
    }

    VectorIndex index_;
    TypeVocabulary vocab_;
    std::map<std::string, Entity> entities_;
    std::map<std::string, Relation> relations_;
    std::map<std::string, MetaMedGraph> meta_graphs_;
    std::map<std::string, ChunkRecord> chunks_;
    std::map<std::string, std::set<std::string>> adjacency_;
    std::vector<std::string> extra_records_;
};

}  // namespace medgraph
