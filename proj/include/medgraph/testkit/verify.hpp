#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "medgraph/config.hpp"
#include "medgraph/pipeline.hpp"
#include "medgraph/testkit/oracles.hpp"

namespace medgraph::testkit {

namespace detail {

inline OracleReport make_report(const std::string& check, const std::string& engine,
                                const std::string& oracle, double tol, bool pass) {
    return {check, engine, oracle, tol, pass};
}

inline std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += ",";
        out += id;
    }
    return out;
}

}  // namespace detail

// Defaults that mirror the published hyperparameters.
inline std::vector<OracleReport> verify_defaults() {
    PipelineConfig d;
    std::vector<OracleReport> out;
    auto check = [&](const std::string& name, double got, double want) {
        out.push_back(detail::make_report("default:" + name, std::to_string(got),
                                          std::to_string(want), 0.0, got == want));
    };
    check("window", static_cast<double>(d.window), 5);
    check("link_threshold", d.link_threshold, 0.5);
    check("cluster_floor", d.cluster_floor, 0.5);
    check("top_entities", static_cast<double>(d.top_entities), 60);
    check("neighbor_hops", static_cast<double>(d.neighbor_hops), 16);
    check("refine_depth", static_cast<double>(d.refine_depth), 4);
    check("max_layers", static_cast<double>(d.max_layers), 12);
    return out;
}

inline std::vector<OracleVector> store_vectors(const GraphStore& store) {
    std::vector<OracleVector> out;
    for (const auto& [id, e] : store.entities())
        out.push_back({id, e.embedding, tier_index(e.tier)});
    return out;
}

inline OracleGraph oracle_graph_of(const GraphStore& store) {
    std::vector<std::pair<std::string, int>> nodes;
    for (const auto& [id, e] : store.entities()) nodes.emplace_back(id, tier_index(e.tier));
    std::vector<OracleEdge> edges;
    for (const auto& [id, r] : store.relations()) edges.push_back({r.source, r.target});
    return OracleGraph(nodes, edges);
}

inline std::vector<OracleReport> verify_store(const GraphStore& store, const PipelineConfig& cfg,
                                              std::uint64_t seed = 7,
                                              std::size_t knn_queries = 100) {
    std::vector<OracleReport> out;
    auto vectors = store_vectors(store);

    // knn vs linear-scan oracle on random unit queries.
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        bool all_equal = true;
        std::string mismatch;
        for (std::size_t q = 0; q < knn_queries && all_equal; ++q) {
            Vector query(store.dimension());
            for (auto& x : query) x = gauss(rng);
            query = unit_normalize(std::move(query));
            auto engine = store.knn(query, 10);
            auto oracle = oracle_knn(vectors, query, 10);
            std::vector<std::string> engine_ids;
            for (const auto& s : engine) engine_ids.push_back(s.id);
            if (engine_ids != oracle) {
                all_equal = false;
                mismatch = "query " + std::to_string(q);
            }
        }
        out.push_back(detail::make_report("knn-oracle-equivalence",
                                          all_equal ? "match" : mismatch, "match", 0.0, all_equal));
    }

    // Edge-tier discipline and threshold soundness by full scan.
    {
        bool discipline = true;
        bool threshold_ok = true;
        for (const auto& [id, r] : store.relations()) {
            Tier st = store.entity(r.source).tier;
            Tier tt = store.entity(r.target).tier;
            switch (r.kind) {
                case RelationKind::ReferenceOf:
                    discipline &= st == Tier::User && tt == Tier::Literature;
                    break;
                case RelationKind::DefinitionOf:
                    discipline &= st == Tier::Literature && tt == Tier::Vocab;
                    break;
                case RelationKind::Generated:
                    discipline &= st == tt && st != Tier::Vocab &&
                                  store.entity(r.source).chunk_id ==
                                      store.entity(r.target).chunk_id;
                    break;
                case RelationKind::Vocab:
                    discipline &= st == Tier::Vocab && tt == Tier::Vocab;
                    break;
            }
            if (r.similarity) {
                double c = oracle_cosine(store.entity(r.source).embedding,
                                         store.entity(r.target).embedding);
                if (c < cfg.link_threshold - 1e-9 || std::abs(c - *r.similarity) > 1e-9)
                    threshold_ok = false;
            }
        }
        out.push_back(detail::make_report("edge-tier-discipline", discipline ? "ok" : "violated",
                                          "ok", 0.0, discipline));
        out.push_back(detail::make_report("link-threshold-soundness",
                                          threshold_ok ? "ok" : "violated", "ok", 1e-9,
                                          threshold_ok));
    }

    // Triple neighborhoods vs the all-pairs oracle on a bounded sample.
    {
        auto og = oracle_graph_of(store);
        bool all_equal = true;
        std::size_t centers = 0;
        for (const auto& [id, e] : store.entities()) {
            if (++centers > 25) break;
            for (std::size_t k = 0; k <= 3 && all_equal; ++k) {
                if (triple_neighbors(store, id, k) != og.triple_neighbors(id, k))
                    all_equal = false;
            }
            if (!all_equal) break;
        }
        out.push_back(detail::make_report("triple-neighbor-equivalence",
                                          all_equal ? "match" : "mismatch", "match", 0.0,
                                          all_equal));
    }
    return out;
}

inline std::vector<OracleReport> verify_hierarchy(const Hierarchy& h, const PipelineConfig& cfg) {
    std::vector<OracleReport> out;
    bool layer_bound = h.layer_count() <= cfg.max_layers;
    out.push_back(detail::make_report("layer-bound", std::to_string(h.layer_count()),
                                      "<= " + std::to_string(cfg.max_layers), 0.0, layer_bound));

    bool complete_linkage = true;
    bool floor_ok = true;
    for (const auto& round : h.rounds) {
        if (round.threshold < cfg.cluster_floor - 1e-12) floor_ok = false;
        std::map<std::pair<std::string, std::string>, double> sims;
        for (const auto& p : round.pair_similarities) sims[{p.a, p.b}] = p.sim;
        for (const auto& merge : round.merges) {
            for (std::size_t i = 0; i < merge.size(); ++i) {
                for (std::size_t j = i + 1; j < merge.size(); ++j) {
                    auto key = merge[i] < merge[j] ? std::make_pair(merge[i], merge[j])
                                                  : std::make_pair(merge[j], merge[i]);
                    if (sims.at(key) < round.threshold - 1e-9) complete_linkage = false;
                }
            }
        }
    }
    out.push_back(detail::make_report("complete-linkage-recheck",
                                      complete_linkage ? "ok" : "violated", "ok", 1e-9,
                                      complete_linkage));
    out.push_back(detail::make_report("round-threshold-floor", floor_ok ? "ok" : "violated", "ok",
                                      0.0, floor_ok));
    return out;
}

// Full verification of a persisted snapshot against the config.
inline std::vector<OracleReport> run_verification(const PipelineConfig& cfg) {
    std::vector<OracleReport> out = verify_defaults();
    GraphStore store = GraphStore::load(cfg.paths.snapshot);
    auto store_reports = verify_store(store, cfg);
    out.insert(out.end(), store_reports.begin(), store_reports.end());
    if (auto h = hierarchy_from_records(store.extra_records())) {
        auto hr = verify_hierarchy(*h, cfg);
        out.insert(out.end(), hr.begin(), hr.end());
    }
    return out;
}

}  // namespace medgraph::testkit
