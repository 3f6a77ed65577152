#pragma once

// Seeded synthetic fixtures: a small user corpus, a literature tier, a
// vocabulary tier, and a stub script that drives every pipeline stage
// deterministically. The manifest freezes counts and hashes from a
// generation-time pipeline run so later runs can be compared bit-exactly.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "medgraph/config.hpp"
#include "medgraph/pipeline.hpp"

namespace medgraph::testkit {

struct FixturePaths {
    std::string dir;
    std::string config;
    std::string manifest;
};

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write fixture file: " + path);
    out << content;
}

inline std::string lorem_words(std::mt19937_64& rng, std::size_t n) {
    static const char* words[] = {"cardiac",  "renal",    "hepatic",  "dosage",  "therapy",
                                  "chronic",  "acute",    "syndrome", "lesion",  "biopsy",
                                  "antigen",  "plasma",   "vascular", "neural",  "gastric",
                                  "febrile",  "sepsis",   "embolism", "stenosis", "fibrosis"};
    std::uniform_int_distribution<std::size_t> pick(0, std::size(words) - 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!out.empty()) out += ' ';
        out += words[pick(rng)];
    }
    return out;
}

}  // namespace detail

// A shared context sentence per (doc, paragraph) keyed pair; tier-1, tier-2
// and tier-3 records reuse it so cross-tier cosines clear the 0.5 threshold.
inline std::string fixture_context(std::size_t doc, std::size_t para) {
    std::string base = "shared clinical context for case " + std::to_string(doc) + " part " +
                       std::to_string(para) + " describing presentation treatment and outcome";
    return base + " " + base;
}

inline FixturePaths generate_fixture(const std::string& dir, std::uint64_t seed,
                                     std::size_t n_docs = 2, std::size_t paragraphs_per_doc = 6) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::mt19937_64 rng(seed);

    auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

    // Semantic-type vocabulary.
    detail::write_file(path("vocab.txt"), "TypeA\nTypeB\nConcept\n");

    // Tier-3 concepts: one per (doc, first paragraph of each topic block).
    std::string concepts, concept_rels;
    std::vector<std::string> concept_ids;
    for (std::size_t i = 0; i < n_docs; ++i) {
        for (std::size_t j = 0; j < paragraphs_per_doc; ++j) {
            std::string cid = "C" + std::to_string(i) + "_" + std::to_string(j);
            concepts += cid + "\tAlpha" + std::to_string(i) + "_" + std::to_string(j) + "\t" +
                        fixture_context(i, j) + "\n";
            concept_ids.push_back(cid);
        }
    }
    for (std::size_t i = 1; i < concept_ids.size(); ++i)
        concept_rels += concept_ids[i - 1] + "\tbroader than\t" + concept_ids[i] + "\n";
    detail::write_file(path("tier3_concepts.tsv"), concepts);
    detail::write_file(path("tier3_relations.tsv"), concept_rels);

    // User corpus: paragraphs carry a unique marker; one planted topic shift.
    std::string corpus;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::string text;
        for (std::size_t j = 0; j < paragraphs_per_doc; ++j) {
            std::string marker = "D" + std::to_string(i) + "P" + std::to_string(j) + "M";
            std::string shift = (j == paragraphs_per_doc / 2) ? " TOPICSHIFT" : "";
            text += marker + shift + " " + detail::lorem_words(rng, 14) + "\n\n";
        }
        nlohmann::json j;
        j["id"] = "doc" + std::to_string(i);
        j["text"] = text;
        corpus += j.dump() + "\n";
    }
    detail::write_file(path("corpus.jsonl"), corpus);

    // Literature corpus: one reference document per user document.
    std::string tier2;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::string text;
        for (std::size_t j = 0; j < paragraphs_per_doc; ++j)
            text += "R" + std::to_string(i) + "P" + std::to_string(j) + "M " +
                    detail::lorem_words(rng, 10) + "\n\n";
        nlohmann::json j;
        j["id"] = "ref" + std::to_string(i);
        j["text"] = text;
        tier2 += j.dump() + "\n";
    }
    detail::write_file(path("tier2.jsonl"), tier2);

    // Stub script. First matching entry per kind wins, so per-paragraph
    // entries precede the catch-alls.
    StubScript script;
    script.fallback = FallbackPolicy::Fixed;
    script.fixed_response = "True";
    script.entries.push_back({PromptKind::Sem, "has:TOPICSHIFT", "False", false});
    script.entries.push_back({PromptKind::Sem, "*", "True", false});
    for (std::size_t i = 0; i < n_docs; ++i) {
        for (std::size_t j = 0; j < paragraphs_per_doc; ++j) {
            std::string tag = std::to_string(i) + "_" + std::to_string(j);
            std::string ctx = fixture_context(i, j);
            script.entries.push_back({PromptKind::Ent,
                                      "has:D" + std::to_string(i) + "P" + std::to_string(j) + "M",
                                      "Alpha" + tag + "|TypeA|" + ctx + "\nBeta" + tag +
                                          "|TypeB|distinct " + ctx,
                                      false});
            // Literature entities mirror the user entities so reference links
            // form at cosine ~1.
            script.entries.push_back({PromptKind::Ent,
                                      "has:R" + std::to_string(i) + "P" + std::to_string(j) + "M",
                                      "Alpha" + tag + "|TypeA|" + ctx, false});
            std::string rel = "Alpha" + tag + "|relates to|Beta" + tag;
            if (i == 0 && j == 0) rel += "\nGhost|haunts|Alpha" + tag;
            script.entries.push_back({PromptKind::Rel, "has:Alpha" + tag, rel, false});
            // Chunks of the same document share one planted tag theme.
            script.entries.push_back({PromptKind::Tag, "has:Alpha" + tag,
                                      "Symptoms|theme " + std::to_string(i) +
                                          " symptom cluster pattern\nMedication|theme " +
                                          std::to_string(i) + " medication plan",
                                      false});
        }
    }
    script.entries.push_back({PromptKind::Rel, "*", "", false});
    script.entries.push_back({PromptKind::Tag, "*", "Symptoms|unlabeled", false});
    script.entries.push_back(
        {PromptKind::Mtag, "*", "Symptoms|merged symptom overview\nMedication|merged plan", false});
    script.entries.push_back(
        {PromptKind::QueryTag, "*", "Symptoms|theme 0 symptom cluster pattern", false});
    script.entries.push_back(
        {PromptKind::Answer, "*", "The graph links the case entities to their references.", false});
    script.entries.push_back({PromptKind::Refine, "*",
                              "Refined response consistent with the ancestor summaries.", false});
    detail::write_file(path("stub_script.tsv"), script.serialize());

    // Config.
    PipelineConfig cfg;
    cfg.provider.seed = seed;
    cfg.token_budget = 2048;
    cfg.paths.corpus = path("corpus.jsonl");
    cfg.paths.tier2_corpus = path("tier2.jsonl");
    cfg.paths.tier3_concepts = path("tier3_concepts.tsv");
    cfg.paths.tier3_relations = path("tier3_relations.tsv");
    cfg.paths.vocab = path("vocab.txt");
    cfg.paths.snapshot = path("snapshot.mg");
    cfg.paths.stub_script = path("stub_script.tsv");
    cfg.paths.chunk_manifest = path("chunk_manifest.jsonl");
    detail::write_file(path("config.json"), config_to_json(cfg).dump(2) + "\n");

    FixturePaths out{dir, path("config.json"), path("manifest.json")};

    // Manifest: counts and hashes frozen from a generation-time run.
    auto counter = std::make_shared<TokenCounter>(cfg.token_scheme, cfg.token_budget);
    StubEmbedder embedder(cfg.provider.dimension, cfg.provider.seed);
    {
        ScriptedChatProvider chat(script, default_prompt_templates(), counter);
        JobReport ingest = cmd_ingest(cfg, chat, embedder);
        JobReport build = cmd_build_hierarchy(cfg, chat, embedder);
        std::string question = "What medication pattern fits the theme 0 case?";
        RetrievalTrace trace = cmd_query(cfg, chat, embedder, question);

        nlohmann::json manifest;
        manifest["provenance"] = "frozen from a generation-time pipeline run over this fixture";
        manifest["seed"] = seed;
        manifest["counts"] = ingest.to_json()["counts"];
        manifest["ingest_snapshot_hash"] = ingest.snapshot_hash;
        manifest["final_snapshot_hash"] = build.snapshot_hash;
        manifest["layers"] = build.counts.at("layers");
        manifest["query"] = question;
        manifest["trace_id"] = trace.trace_id();
        manifest["final_response"] = trace.final_response;
        detail::write_file(out.manifest, manifest.dump(2) + "\n");
    }
    return out;
}

}  // namespace medgraph::testkit
