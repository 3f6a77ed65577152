#pragma once

// Read-only HTTP query service over a built snapshot. The snapshot and
// hierarchy are loaded once and shared across requests; providers carry
// their own locking.

#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "medgraph/config.hpp"
#include "medgraph/pipeline.hpp"
#include "medgraph/providers_factory.hpp"

namespace medgraph {

inline nlohmann::json query_response_json(const RetrievalTrace& trace) {
    nlohmann::json j;
    j["response"] = trace.final_response;
    nlohmann::json cites = nlohmann::json::array();
    for (const auto& c : trace.citations)
        cites.push_back({{"entity", c.entity_id},
                         {"references", c.reference_ids},
                         {"definitions", c.definition_ids}});
    j["citations"] = cites;
    j["trace_id"] = trace.trace_id();
    return j;
}

class QueryService {
public:
    explicit QueryService(PipelineConfig cfg)
        : cfg_(std::move(cfg)),
          snapshot_(load_snapshot_with_hierarchy(cfg_)),
          snapshot_hash_(snapshot_.store.content_hash()),
          providers_(make_providers(cfg_)),
          rc_{cfg_.top_entities, cfg_.neighbor_hops, cfg_.refine_depth} {
        server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json j;
            j["status"] = "ok";
            j["snapshot_hash"] = snapshot_hash_;
            j["layers"] = snapshot_.hierarchy.layer_count();
            res.set_content(j.dump(), "application/json");
        });
        server_.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("question") ||
                !body["question"].is_string()) {
                res.status = 400;
                res.set_content(R"({"error":"body must be {\"question\": \"...\"}"})",
                                "application/json");
                return;
            }
            try {
                RetrievalTrace trace = run_query(snapshot_.store, snapshot_.hierarchy,
                                                 cfg_.schema, body["question"].get<std::string>(),
                                                 *providers_.chat, *providers_.embedder, rc_);
                res.set_content(query_response_json(trace).dump(), "application/json");
            } catch (const ProviderError& e) {
                res.status = 502;
                res.set_content(
                    nlohmann::json{{"error", e.what()}, {"stage", "provider"}}.dump(),
                    "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(nlohmann::json{{"error", e.what()}, {"stage", "query"}}.dump(),
                                "application/json");
            }
        });
    }

    const std::string& snapshot_hash() const { return snapshot_hash_; }
    const LoadedSnapshot& snapshot() const { return snapshot_; }
    httplib::Server& server() { return server_; }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

private:
    PipelineConfig cfg_;
    LoadedSnapshot snapshot_;
    std::string snapshot_hash_;
    Providers providers_;
    RetrievalConfig rc_;
    httplib::Server server_;
};

}  // namespace medgraph
