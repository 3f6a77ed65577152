#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "medgraph/chat.hpp"
#include "medgraph/chunker.hpp"
#include "medgraph/config.hpp"
#include "medgraph/constructor.hpp"
#include "medgraph/embedding.hpp"
#include "medgraph/graph_store.hpp"
#include "medgraph/taghier.hpp"
#include "medgraph/tokens.hpp"
#include "medgraph/uretrieval.hpp"

namespace medgraph {

struct JobReport {
    std::map<std::string, double> stage_seconds;
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> warnings;
    std::string snapshot_hash;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["stage_seconds"] = stage_seconds;
        j["counts"] = counts;
        j["warnings"] = warnings;
        j["snapshot_hash"] = snapshot_hash;
        return j;
    }
};

namespace detail {

class StageTimer {
public:
    StageTimer(JobReport& report, std::string stage)
        : report_(report), stage_(std::move(stage)),
          start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        auto elapsed = std::chrono::steady_clock::now() - start_;
        report_.stage_seconds[stage_] =
            std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();
    }

private:
    JobReport& report_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::vector<std::string> tsv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t t = line.find('\t', pos);
        if (t == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, t - pos));
        pos = t + 1;
    }
    return out;
}

}  // namespace detail

// Corpus loader. A .jsonl file holds one {"id": ..., "text": ...} document
// per line; a directory is read as sorted *.txt files; anything else is one
// plain-text document named by its filename.
inline std::vector<Document> load_corpus(const std::string& path, const TokenCounter& counter) {
    namespace fs = std::filesystem;
    std::vector<Document> docs;
    if (path.empty()) return docs;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".txt") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            docs.push_back(make_document(f.stem().string(), detail::read_file(f.string()), counter));
        return docs;
    }
    if (fs::path(path).extension() == ".jsonl") {
        for (const auto& line : split_lines(detail::read_file(path))) {
            if (trim(line).empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id") || !j.contains("text"))
                throw ParseError("corpus jsonl line must carry id and text: " + line);
            docs.push_back(make_document(j["id"].get<std::string>(), j["text"].get<std::string>(),
                                         counter));
        }
        return docs;
    }
    docs.push_back(
        make_document(fs::path(path).stem().string(), detail::read_file(path), counter));
    return docs;
}

inline constexpr const char* kVocabConceptType = "Concept";

// Loads the controlled-vocabulary tier from a TSV of (concept id, name,
// definition) and an optional TSV of (source concept id, relation label,
// target concept id).
inline std::size_t load_tier3(GraphStore& store, EmbeddingProvider& embedder,
                              const std::string& concepts_path, const std::string& relations_path,
                              JobReport& report) {
    if (concepts_path.empty()) return 0;
    std::map<std::string, std::string> concept_to_entity;
    std::size_t loaded = 0;
    for (const auto& line : split_lines(detail::read_file(concepts_path))) {
        if (trim(line).empty() || line[0] == '#') continue;
        auto fields = detail::tsv_fields(line);
        if (fields.size() != 3)
            throw ParseError("tier-3 concept TSV expects (id, name, definition): " + line);
        Entity e;
        e.name = trim(fields[1]);
        e.type = kVocabConceptType;
        e.context = trim(fields[2]);
        e.tier = Tier::Vocab;
        e.embedding = embedder.embed(e.content());
        concept_to_entity[trim(fields[0])] = store.upsert_entity(std::move(e));
        ++loaded;
    }
    if (!relations_path.empty()) {
        for (const auto& line : split_lines(detail::read_file(relations_path))) {
            if (trim(line).empty() || line[0] == '#') continue;
            auto fields = detail::tsv_fields(line);
            if (fields.size() != 3)
                throw ParseError("tier-3 relation TSV expects (source, label, target): " + line);
            auto s = concept_to_entity.find(trim(fields[0]));
            auto t = concept_to_entity.find(trim(fields[2]));
            if (s == concept_to_entity.end() || t == concept_to_entity.end()) {
                report.warnings.push_back("tier-3 relation names unknown concept: " + line);
                continue;
            }
            Relation r;
            r.source = s->second;
            r.target = t->second;
            r.kind = RelationKind::Vocab;
            r.description = trim(fields[1]);
            store.add_relation(std::move(r));
        }
    }
    return loaded;
}

struct TierBuildResult {
    std::vector<ExtractionResult> extractions;  // one per chunk, in order
};

// Shared chunk -> extract pipeline for tiers 1 and 2.
inline TierBuildResult build_tier_entities(GraphStore& store, const std::vector<Document>& docs,
                                           Tier tier, ChatProvider& chat,
                                           EmbeddingProvider& embedder,
                                           const TokenCounter& counter, std::size_t window,
                                           const std::string& sep, JobReport& report) {
    TierBuildResult result;
    for (const auto& doc : docs) {
        ChunkingResult chunking = chunk_document(doc, chat, counter, window);
        if (chunking.truncated_judge_context)
            report.warnings.push_back("judge context truncated for document " + doc.id);
        for (const auto& c : chunking.chunks) {
            std::string text = chunk_text(doc, c);
            store.add_chunk({c.id, doc.id, c.first_paragraph, c.last_paragraph, c.token_count, text});
            result.extractions.push_back(
                extract_entities(store, c.id, text, tier, chat, embedder, sep));
        }
    }
    return result;
}

inline void write_chunk_manifest(const GraphStore& store, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write chunk manifest: " + path);
    for (const auto& [id, c] : store.chunks()) {
        nlohmann::json j;
        j["document_id"] = c.document_id;
        j["chunk_id"] = id;
        j["first_paragraph"] = c.first_paragraph;
        j["last_paragraph"] = c.last_paragraph;
        j["token_count"] = c.token_count;
        out << j.dump() << "\n";
    }
}

inline void count_store(const GraphStore& store, JobReport& report) {
    report.counts["chunks"] = store.chunks().size();
    for (int t = 1; t <= 3; ++t)
        report.counts["entities_tier" + std::to_string(t)] =
            store.entities_in_tier(tier_from_int(t)).size();
    std::map<std::string, std::size_t> by_kind;
    for (const auto& [id, r] : store.relations()) ++by_kind[to_string(r.kind)];
    for (const auto& [kind, n] : by_kind) report.counts["edges_" + kind] = n;
    report.counts["meta_graphs"] = store.meta_graphs().size();
}

// Steps 1-4: chunk, extract, triple-link, and relate all three tiers, then
// persist the snapshot.
inline JobReport cmd_ingest(const PipelineConfig& cfg, ChatProvider& chat,
                            EmbeddingProvider& embedder) {
    cfg.validate();
    if (cfg.paths.snapshot.empty()) throw ConfigError("paths.snapshot is required for ingest");
    JobReport report;
    TokenCounter counter(cfg.token_scheme, cfg.token_budget);
    TypeVocabulary vocab;
    if (!cfg.paths.vocab.empty()) vocab = TypeVocabulary::from_file(cfg.paths.vocab);
    GraphStore store(embedder.dimension(), std::move(vocab));

    {
        detail::StageTimer t(report, "tier3_load");
        load_tier3(store, embedder, cfg.paths.tier3_concepts, cfg.paths.tier3_relations, report);
    }
    {
        detail::StageTimer t(report, "tier2_build");
        auto docs = load_corpus(cfg.paths.tier2_corpus, counter);
        auto built = build_tier_entities(store, docs, Tier::Literature, chat, embedder, counter,
                                         cfg.window, cfg.field_sep, report);
        LinkPolicy policy{cfg.link_threshold, cfg.max_links};
        auto link = link_tier(store, Tier::Literature, Tier::Vocab, RelationKind::DefinitionOf,
                              policy);
        if (link.empty_target_tier)
            report.warnings.push_back("tier-3 is empty; no definition links created");
        for (const auto& ex : built.extractions) {
            auto gen = generate_relations(store, ex, chat, /*create_meta_graph=*/false,
                                          cfg.field_sep);
            for (const auto& rej : gen.rejected)
                report.warnings.push_back("tier-2 relation names unknown entity: " + rej);
        }
    }
    {
        detail::StageTimer t(report, "tier1_build");
        auto docs = load_corpus(cfg.paths.corpus, counter);
        auto built = build_tier_entities(store, docs, Tier::User, chat, embedder, counter,
                                         cfg.window, cfg.field_sep, report);
        LinkPolicy policy{cfg.link_threshold, cfg.max_links};
        auto link = link_tier(store, Tier::User, Tier::Literature, RelationKind::ReferenceOf,
                              policy);
        if (link.empty_target_tier)
            report.warnings.push_back("tier-2 is empty; no reference links created");
        for (const auto& ex : built.extractions) {
            auto gen = generate_relations(store, ex, chat, /*create_meta_graph=*/true,
                                          cfg.field_sep);
            for (const auto& rej : gen.rejected)
                report.warnings.push_back("relation output names unknown entity: " + rej);
        }
    }
    {
        detail::StageTimer t(report, "persist");
        write_chunk_manifest(store, cfg.paths.chunk_manifest);
        store.save(cfg.paths.snapshot);
    }
    count_store(store, report);
    report.snapshot_hash = store.content_hash();
    return report;
}

// Step 5 over a persisted snapshot.
inline JobReport cmd_build_hierarchy(const PipelineConfig& cfg, ChatProvider& chat,
                                     EmbeddingProvider& embedder) {
    cfg.validate();
    JobReport report;
    GraphStore store = GraphStore::load(cfg.paths.snapshot);
    if (store.meta_graphs().empty())
        throw StoreError("snapshot has no meta graphs; run ingest first");

    std::vector<std::pair<std::string, TagSummary>> leaves;
    {
        detail::StageTimer t(report, "summarize");
        for (const auto& [id, g] : store.meta_graphs()) {
            auto sum = summarize_graph(store, g, cfg.schema, chat, embedder, cfg.field_sep);
            for (const auto& cat : sum.dropped_categories)
                report.warnings.push_back("dropped off-schema category '" + cat + "' for " + id);
            leaves.emplace_back(id, std::move(sum.summary));
        }
    }
    Hierarchy h;
    {
        detail::StageTimer t(report, "cluster");
        h = build_hierarchy(leaves, cfg.schema, chat, embedder, cfg.cluster_floor, cfg.max_layers,
                            cfg.field_sep);
    }
    {
        detail::StageTimer t(report, "persist");
        store.set_extra_records(hierarchy_records(h));
        store.save(cfg.paths.snapshot);
    }
    count_store(store, report);
    report.counts["layers"] = h.layer_count();
    report.counts["tag_nodes"] = h.nodes.size();
    report.snapshot_hash = store.content_hash();
    return report;
}

struct LoadedSnapshot {
    GraphStore store;
    Hierarchy hierarchy;
};

inline LoadedSnapshot load_snapshot_with_hierarchy(const PipelineConfig& cfg) {
    GraphStore store = GraphStore::load(cfg.paths.snapshot);
    auto h = hierarchy_from_records(store.extra_records());
    if (!h) throw StoreError("snapshot has no tag hierarchy; run build-hierarchy first");
    return {std::move(store), std::move(*h)};
}

inline RetrievalTrace cmd_query(const PipelineConfig& cfg, ChatProvider& chat,
                                EmbeddingProvider& embedder, const std::string& question) {
    cfg.validate();
    auto snap = load_snapshot_with_hierarchy(cfg);
    RetrievalConfig rc{cfg.top_entities, cfg.neighbor_hops, cfg.refine_depth};
    return run_query(snap.store, snap.hierarchy, cfg.schema, question, chat, embedder, rc);
}

}  // namespace medgraph
