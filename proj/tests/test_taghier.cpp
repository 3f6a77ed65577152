#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "medgraph/taghier.hpp"
#include "medgraph/testkit/oracles.hpp"
#include "test_helpers.hpp"

using namespace medgraph;
using testhelpers::counter;
using testhelpers::make_entity;

namespace {

Vector axis(std::size_t dim, std::size_t i, double scale = 1.0) {
    Vector v(dim, 0.0);
    v[i] = scale;
    return v;
}

TagSummary summary_of(std::vector<std::pair<std::string, Vector>> cats) {
    TagSummary s;
    for (auto& [name, v] : cats) {
        s.tags[name] = name + " text";
        s.embeddings[name] = unit_normalize(std::move(v));
    }
    return s;
}

TagSummary text_summary(const std::string& cat, const std::string& text, Vector v) {
    TagSummary s;
    s.tags[cat] = text;
    s.embeddings[cat] = unit_normalize(std::move(v));
    return s;
}

}  // namespace

TEST_CASE("graph summarization") {
    StubEmbedder emb(32, 11);
    GraphStore store(32, {});
    TagSchema schema = TagSchema::defaults();

    std::string e1 = store.upsert_entity(make_entity(emb, "fever", Tier::User, "c1"));
    std::string e2 = store.upsert_entity(make_entity(emb, "aspirin", Tier::User, "c1"));
    MetaMedGraph g;
    g.chunk_id = "c1";
    g.id = MetaMedGraph::make_id("c1");
    g.entity_ids = {e1, e2};
    store.add_meta_graph(g);

    SECTION("partial category fill plus off-schema drop") {
        auto p = testhelpers::constant_provider(
            "Symptoms|fever and chills\nMedication|aspirin 100mg\nBogus|nope");
        auto rep = summarize_graph(store, g, schema, p, emb);
        CHECK(rep.summary.tags.size() == 2);
        CHECK(rep.summary.tags.at("Symptoms") == "fever and chills");
        CHECK(rep.summary.embeddings.at("Symptoms") == emb.embed("fever and chills"));
        REQUIRE(rep.dropped_categories.size() == 1);
        CHECK(rep.dropped_categories[0] == "Bogus");
        // The prompt carried every member's content.
        auto records = p.audit().records();
        const auto& slots = records.back().slots;
        CHECK(slots.at("CONTENT").find("fever") != std::string::npos);
        CHECK(slots.at("CONTENT").find("aspirin") != std::string::npos);
        CHECK(slots.at("CATEGORIES") == schema.rendered());
    }

    SECTION("an empty graph is summarized without a provider call") {
        StubScript strict;
        strict.fallback = FallbackPolicy::Error;
        ScriptedChatProvider p(strict, default_prompt_templates(), counter());
        MetaMedGraph empty;
        empty.chunk_id = "cx";
        empty.id = MetaMedGraph::make_id("cx");
        auto rep = summarize_graph(store, empty, schema, p, emb);
        CHECK(rep.summary.empty());
        CHECK(p.audit().size() == 0);
    }

    SECTION("unparseable tag output is an error carrying the raw response") {
        auto p = testhelpers::constant_provider("this has no separator");
        CHECK_THROWS_WITH(summarize_graph(store, g, schema, p, emb),
                          Catch::Matchers::ContainsSubstring("this has no separator"));
    }

    SECTION("empty category text is skipped, not embedded") {
        auto p = testhelpers::constant_provider("Symptoms|\nMedication|aspirin");
        auto rep = summarize_graph(store, g, schema, p, emb);
        CHECK(rep.summary.tags.size() == 1);
        CHECK(rep.summary.tags.count("Medication") == 1);
    }
}

TEST_CASE("pair similarity") {
    SECTION("identical summaries score 1") {
        TagSummary a = summary_of({{"Symptoms", axis(8, 0)}, {"Medication", axis(8, 1)}});
        // Mean over cross pairs: cos(e0,e0)=1, cos(e0,e1)=0, cos(e1,e0)=0,
        // cos(e1,e1)=1 -> 0.5, so 'identical' means identical single-category.
        TagSummary one = summary_of({{"Symptoms", axis(8, 0)}});
        CHECK(pair_similarity(one, one) == Catch::Approx(1.0).margin(1e-12));
        CHECK(pair_similarity(a, a) == Catch::Approx(0.5).margin(1e-12));
    }

    SECTION("orthogonal single-tag summaries score 0") {
        TagSummary a = summary_of({{"Symptoms", axis(8, 0)}});
        TagSummary b = summary_of({{"Symptoms", axis(8, 1)}});
        CHECK(pair_similarity(a, b) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("a negative mean clamps to zero") {
        TagSummary a = summary_of({{"Symptoms", axis(8, 0)}});
        TagSummary b = summary_of({{"Symptoms", axis(8, 0, -1.0)}});
        CHECK(pair_similarity(a, b) == 0.0);
    }

    SECTION("hand-computed cross-pair mean") {
        TagSummary a = summary_of({{"A", axis(8, 0)}, {"B", axis(8, 1)}});
        Vector mixed(8, 0.0);
        mixed[0] = mixed[1] = 1.0;  // normalizes to (1/sqrt2, 1/sqrt2, 0, ...)
        TagSummary b = summary_of({{"C", mixed}, {"D", axis(8, 2)}});
        // cos pairs: (e0,mixed)=1/sqrt2, (e0,e2)=0, (e1,mixed)=1/sqrt2, (e1,e2)=0
        double expected = (2.0 / std::sqrt(2.0)) / 4.0;
        CHECK(pair_similarity(a, b) == Catch::Approx(expected).margin(1e-12));
    }

    SECTION("exactly symmetric regardless of operand order") {
        TagSummary a = summary_of({{"A", axis(8, 0)}, {"B", Vector{0.3, 0.1, 0.7, 0, 0, 0, 0.2, 0}}});
        TagSummary b = summary_of({{"Z", Vector{0.11, 0.9, 0, 0.44, 0, 0.2, 0, 0.1}}});
        CHECK(pair_similarity(a, b) == pair_similarity(b, a));  // bitwise
    }

    SECTION("an empty side scores 0") {
        TagSummary a = summary_of({{"A", axis(8, 0)}});
        CHECK(pair_similarity(a, TagSummary{}) == 0.0);
        CHECK(pair_similarity(TagSummary{}, a) == 0.0);
    }
}

TEST_CASE("nearest-rank percentile") {
    std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    CHECK(detail::nearest_rank_percentile(v, 80.0) == Catch::Approx(0.8).margin(1e-12));
    CHECK(detail::nearest_rank_percentile({0.42}, 80.0) == Catch::Approx(0.42).margin(1e-12));
    CHECK(detail::nearest_rank_percentile({0.3, 0.9}, 80.0) == Catch::Approx(0.9).margin(1e-12));
    CHECK_THROWS_AS(detail::nearest_rank_percentile({}, 80.0), Error);
}

TEST_CASE("hierarchy construction") {
    StubEmbedder emb(32, 13);
    TagSchema schema = TagSchema::defaults();
    auto merger = FunctionChatProvider(
        [](PromptKind, const SlotMap&) { return "Symptoms|merged symptoms"; },
        default_prompt_templates(), counter());

    SECTION("a single leaf is its own root") {
        auto h = build_hierarchy({{"g1", text_summary("Symptoms", "s", axis(8, 0))}},
                                 schema, merger, emb);
        CHECK(h.layer_count() == 1);
        REQUIRE(h.layers[0].size() == 1);
        const TagNode& root = h.node(h.layers[0][0]);
        CHECK(root.is_leaf());
        CHECK(root.leaf_graph_id == "g1");
        CHECK(h.rounds.empty());
    }

    SECTION("two identical leaves merge into a synthesized root") {
        auto h = build_hierarchy({{"g1", text_summary("Symptoms", "same", axis(8, 0))},
                                  {"g2", text_summary("Symptoms", "same", axis(8, 0))}},
                                 schema, merger, emb);
        REQUIRE(h.layer_count() == 2);
        REQUIRE(h.layers[0].size() == 1);
        CHECK(h.layers[1].size() == 2);
        const TagNode& root = h.node(h.layers[0][0]);
        CHECK_FALSE(root.is_leaf());
        CHECK(root.children.size() == 2);
        CHECK(root.id == TagNode::merged_id(root.children));
        CHECK(root.summary.tags.at("Symptoms") == "merged symptoms");
        CHECK(root.summary.embeddings.at("Symptoms") == emb.embed("merged symptoms"));
        REQUIRE(h.rounds.size() == 1);
        CHECK(h.rounds[0].threshold == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(h.rounds[0].merges.size() == 1);
    }

    SECTION("dissimilar leaves never merge below the floor") {
        auto h = build_hierarchy({{"g1", text_summary("Symptoms", "a", axis(8, 0))},
                                  {"g2", text_summary("Symptoms", "b", axis(8, 1))}},
                                 schema, merger, emb, 0.5);
        CHECK(h.layer_count() == 1);
        CHECK(h.layers[0].size() == 2);
        CHECK(h.rounds.empty());
    }

    SECTION("two planted clusters take two rounds to a root") {
        Vector tilted(8, 0.0);
        tilted[0] = 0.6;
        tilted[1] = 0.8;  // cos with e0 = 0.6
        std::vector<std::pair<std::string, TagSummary>> leaves{
            {"gA", text_summary("Symptoms", "cluster one", axis(8, 0))},
            {"gB", text_summary("Symptoms", "cluster one", axis(8, 0))},
            {"gC", text_summary("Symptoms", "cluster two", tilted)},
            {"gD", text_summary("Symptoms", "cluster two", tilted)}};

        auto h = build_hierarchy(leaves, schema, merger, emb, 0.5, 12);
        // Round 0: sims {1, 1, 0.6 x4}; 80th percentile = 1.0, so only the
        // intra-cluster pairs merge. Round 1: both merged nodes share one
        // scripted summary, similarity 1, single root.
        REQUIRE(h.layer_count() == 3);
        CHECK(h.layers[0].size() == 1);
        CHECK(h.layers[1].size() == 2);
        CHECK(h.layers[2].size() == 4);
        REQUIRE(h.rounds.size() == 2);
        CHECK(h.rounds[0].threshold == Catch::Approx(1.0).margin(1e-9));
        CHECK(h.rounds[0].merges.size() == 2);
        CHECK(h.rounds[1].merges.size() == 1);

        SECTION("the layer cap stops clustering early") {
            auto capped = build_hierarchy(leaves, schema, merger, emb, 0.5, 2);
            CHECK(capped.layer_count() == 2);
            CHECK(capped.layers[0].size() == 2);  // stopped before the root round
        }
    }

    SECTION("eight leaves match the independent merge-round oracle") {
        std::vector<std::pair<std::string, TagSummary>> leaves;
        for (int i = 0; i < 8; ++i) {
            std::string base = i < 4 ? "respiratory infection cough airway inflammation lungs"
                                     : "cardiac rhythm arrhythmia heart electrical conduction";
            std::string text = base + " variant token " + std::to_string(i % 4);
            leaves.emplace_back("g" + std::to_string(i),
                                text_summary("Symptoms", text, emb.embed(text)));
        }
        auto h = build_hierarchy(leaves, schema, merger, emb, 0.5, 12);

        std::map<std::pair<std::string, std::string>, double> sims;
        std::map<std::string, TagSummary> by_id;
        for (const auto& [gid, s] : leaves) by_id[TagNode::leaf_id(gid)] = s;
        for (auto a = by_id.begin(); a != by_id.end(); ++a)
            for (auto b = std::next(a); b != by_id.end(); ++b)
                sims[{a->first, b->first}] = pair_similarity(a->second, b->second);
        auto oracle = medgraph::testkit::oracle_merge_round(sims, 0.5);

        if (oracle.merges.empty()) {
            CHECK(h.rounds.empty());
        } else {
            REQUIRE_FALSE(h.rounds.empty());
            CHECK(h.rounds[0].threshold == Catch::Approx(oracle.threshold).margin(1e-9));
            auto merges = h.rounds[0].merges;
            for (auto& m : merges) std::sort(m.begin(), m.end());
            std::sort(merges.begin(), merges.end());
            CHECK(merges == oracle.merges);
        }
    }

    SECTION("argument validation") {
        CHECK_THROWS_AS(build_hierarchy({}, schema, merger, emb), StoreError);
        CHECK_THROWS_AS(
            build_hierarchy({{"g", text_summary("Symptoms", "s", axis(8, 0))}}, schema, merger,
                            emb, 0.5, 0),
            ConfigError);
    }
}

TEST_CASE("hierarchy snapshot records") {
    StubEmbedder emb(32, 14);
    TagSchema schema = TagSchema::defaults();
    auto merger = FunctionChatProvider(
        [](PromptKind, const SlotMap&) { return "Symptoms|merged"; },
        default_prompt_templates(), counter());
    auto h = build_hierarchy({{"g1", text_summary("Symptoms", "same", axis(8, 0))},
                              {"g2", text_summary("Symptoms", "same", axis(8, 0))}},
                             schema, merger, emb);

    auto lines = hierarchy_records(h);
    auto restored = hierarchy_from_records(lines);
    REQUIRE(restored.has_value());
    CHECK(restored->layers == h.layers);
    CHECK(restored->nodes.size() == h.nodes.size());
    REQUIRE(restored->rounds.size() == 1);
    CHECK(restored->rounds[0].threshold == h.rounds[0].threshold);
    CHECK(restored->rounds[0].pair_similarities.size() == h.rounds[0].pair_similarities.size());
    const std::string root_id = h.layers[0][0];
    CHECK(restored->node(root_id).summary.embeddings.at("Symptoms") ==
          h.node(root_id).summary.embeddings.at("Symptoms"));
    CHECK(restored->node(root_id).children == h.node(root_id).children);

    SECTION("records without a layer line are not a hierarchy") {
        CHECK_FALSE(hierarchy_from_records({lines[0]}).has_value());
    }

    SECTION("layer access bounds") {
        CHECK_THROWS_AS(h.layer_tags(99), StoreError);
        CHECK(h.layer_tags(0).size() == 1);
        CHECK_THROWS_AS(h.node("missing"), StoreError);
    }
}
