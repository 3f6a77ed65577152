#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "medgraph/config.hpp"
#include "medgraph/pipeline.hpp"
#include "medgraph/providers_factory.hpp"
#include "medgraph/service.hpp"
#include "medgraph/testkit/fixtures.hpp"
#include "medgraph/testkit/verify.hpp"

namespace {

using namespace medgraph;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const ProviderError*>(&e)) return 3;
    if (dynamic_cast<const ParseError*>(&e)) return 5;
    if (dynamic_cast<const StoreError*>(&e)) return 4;
    return 1;
}

struct CommonOpts {
    std::string config_path;
    // CLI overrides for the most commonly tuned config values.
    std::optional<std::size_t> top_entities;
    std::optional<std::size_t> neighbor_hops;
    std::optional<std::size_t> refine_depth;
    std::optional<std::string> snapshot;
};

PipelineConfig resolve_config(const CommonOpts& opts) {
    PipelineConfig cfg = load_config(opts.config_path);
    if (opts.top_entities) cfg.top_entities = *opts.top_entities;
    if (opts.neighbor_hops) cfg.neighbor_hops = *opts.neighbor_hops;
    if (opts.refine_depth) cfg.refine_depth = *opts.refine_depth;
    if (opts.snapshot) cfg.paths.snapshot = *opts.snapshot;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "Pipeline config file (JSON)")->required();
    cmd->add_option("--top-entities", opts.top_entities, "Override retrieval.top_entities");
    cmd->add_option("--neighbor-hops", opts.neighbor_hops, "Override retrieval.neighbor_hops");
    cmd->add_option("--refine-depth", opts.refine_depth, "Override retrieval.refine_depth");
    cmd->add_option("--snapshot", opts.snapshot, "Override paths.snapshot");
}

int run_serve(const PipelineConfig& cfg, const std::string& host, int port) {
    QueryService service(cfg);
    std::cout << "serving on " << host << ":" << port << " (snapshot " << service.snapshot_hash()
              << ")\n";
    return service.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Triple-tier knowledge graph engine with tag-hierarchy retrieval"};
    app.require_subcommand(1);

    CommonOpts ingest_opts, build_opts, query_opts, serve_opts, verify_opts;
    std::string question, trace_path;
    bool explain_rounds = false;
    int explain_round = -1;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    std::string fixtures_dir = "fixtures";
    std::uint64_t fixtures_seed = 1;
    std::size_t fixtures_docs = 2;

    auto* ingest = app.add_subcommand("ingest", "Chunk, extract, and link the corpus tiers");
    add_common(ingest, ingest_opts);

    auto* build = app.add_subcommand("build-hierarchy", "Summarize graphs and build the tag hierarchy");
    add_common(build, build_opts);
    build->add_flag("--explain-rounds", explain_rounds, "Dump every merge round");
    build->add_option("--explain-round", explain_round, "Dump one merge round's similarity matrix");

    auto* query = app.add_subcommand("query", "Answer a question over the built snapshot");
    add_common(query, query_opts);
    query->add_option("question", question, "Question text")->required();
    query->add_option("--emit-trace", trace_path, "Write the full retrieval trace to this file");

    auto* serve = app.add_subcommand("serve", "Read-only query service over a snapshot");
    add_common(serve, serve_opts);
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--port", serve_port, "Bind port");

    auto* fixtures = app.add_subcommand("fixtures-gen", "Generate a seeded synthetic fixture set");
    fixtures->add_option("-o,--out", fixtures_dir, "Output directory")->required();
    fixtures->add_option("--seed", fixtures_seed, "Generator seed");
    fixtures->add_option("--docs", fixtures_docs, "User documents to generate");

    auto* verify = app.add_subcommand("verify", "Run the oracle suite against a snapshot");
    add_common(verify, verify_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            PipelineConfig cfg = resolve_config(ingest_opts);
            Providers p = make_providers(cfg);
            JobReport report = cmd_ingest(cfg, *p.chat, *p.embedder);
            std::cout << report.to_json().dump(2) << "\n";
        } else if (*build) {
            PipelineConfig cfg = resolve_config(build_opts);
            Providers p = make_providers(cfg);
            JobReport report = cmd_build_hierarchy(cfg, *p.chat, *p.embedder);
            std::cout << report.to_json().dump(2) << "\n";
            if (explain_rounds || explain_round >= 0) {
                auto snap = load_snapshot_with_hierarchy(cfg);
                for (const auto& round : snap.hierarchy.rounds) {
                    if (!explain_rounds && static_cast<int>(round.round) != explain_round) continue;
                    std::cout << "round " << round.round << " threshold " << round.threshold << "\n";
                    for (const auto& p2 : round.pair_similarities)
                        std::cout << "  " << p2.a << " ~ " << p2.b << " = " << p2.sim << "\n";
                    for (const auto& m : round.merges) {
                        std::cout << "  merge:";
                        for (const auto& id : m) std::cout << " " << id;
                        std::cout << "\n";
                    }
                }
            }
        } else if (*query) {
            PipelineConfig cfg = resolve_config(query_opts);
            Providers p = make_providers(cfg);
            RetrievalTrace trace = cmd_query(cfg, *p.chat, *p.embedder, question);
            if (!trace_path.empty()) {
                std::ofstream out(trace_path, std::ios::trunc);
                if (!out) throw Error("cannot write trace file: " + trace_path);
                out << trace.to_json().dump(2) << "\n";
            }
            std::cout << query_response_json(trace).dump(2) << "\n";
        } else if (*serve) {
            PipelineConfig cfg = resolve_config(serve_opts);
            return run_serve(cfg, serve_host, serve_port);
        } else if (*fixtures) {
            auto paths = medgraph::testkit::generate_fixture(fixtures_dir, fixtures_seed,
                                                             fixtures_docs);
            std::cout << nlohmann::json{{"config", paths.config}, {"manifest", paths.manifest}}
                             .dump(2)
                      << "\n";
        } else if (*verify) {
            PipelineConfig cfg = resolve_config(verify_opts);
            auto reports = medgraph::testkit::run_verification(cfg);
            bool all = true;
            for (const auto& r : reports) {
                std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.check << "  engine="
                          << r.engine_value << " oracle=" << r.oracle_value << "\n";
                all &= r.pass;
            }
            return all ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
