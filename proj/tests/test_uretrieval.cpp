#include <catch2/catch_amalgamated.hpp>

#include "medgraph/testkit/oracles.hpp"
#include "medgraph/uretrieval.hpp"
#include "test_helpers.hpp"

using namespace medgraph;
using testhelpers::counter;
using testhelpers::make_entity;

namespace {

Vector axis(std::size_t dim, std::size_t i) {
    Vector v(dim, 0.0);
    v[i] = 1.0;
    return v;
}

TagSummary tag1(const std::string& cat, const std::string& text, Vector v) {
    TagSummary s;
    s.tags[cat] = text;
    s.embeddings[cat] = unit_normalize(std::move(v));
    return s;
}

TagNode leaf_node(const std::string& graph_id, TagSummary s) {
    TagNode n;
    n.id = TagNode::leaf_id(graph_id);
    n.summary = std::move(s);
    n.leaf_graph_id = graph_id;
    return n;
}

}  // namespace

TEST_CASE("query tag generation") {
    StubEmbedder emb(32, 21);
    TagSchema schema = TagSchema::defaults();

    SECTION("schema categories are kept, others dropped") {
        auto p = testhelpers::constant_provider("Symptoms|headache\nNope|x\nMedication|ibuprofen");
        std::vector<std::string> dropped;
        TagSummary t = query_tags("my question", schema, p, emb, &dropped);
        CHECK(t.tags.size() == 2);
        CHECK(t.embeddings.at("Symptoms") == emb.embed("headache"));
        REQUIRE(dropped.size() == 1);
        CHECK(dropped[0] == "Nope");
        CHECK(p.audit().records().back().slots.at("QUERY") == "my question");
    }

    SECTION("a response with no schema categories is an error") {
        auto p = testhelpers::constant_provider("Nope|x\nAlso|y");
        CHECK_THROWS_AS(query_tags("q", schema, p, emb), ParseError);
    }
}

TEST_CASE("top-down descent") {
    SECTION("a single leaf is the whole path") {
        Hierarchy h;
        TagNode n = leaf_node("g1", tag1("S", "t", axis(8, 0)));
        h.layers = {{n.id}};
        h.nodes[n.id] = n;
        auto path = descend(tag1("S", "q", axis(8, 0)), h);
        REQUIRE(path.size() == 1);
        CHECK(path[0] == n.id);
    }

    SECTION("descent picks the most similar child at each layer") {
        Hierarchy h;
        TagNode a = leaf_node("gA", tag1("S", "a", axis(8, 0)));
        TagNode b = leaf_node("gB", tag1("S", "b", axis(8, 1)));
        TagNode root;
        root.id = TagNode::merged_id({a.id, b.id});
        root.summary = tag1("S", "r", axis(8, 2));
        root.children = {a.id, b.id};
        h.nodes = {{a.id, a}, {b.id, b}, {root.id, root}};
        h.layers = {{root.id}, {a.id, b.id}};

        auto path_a = descend(tag1("S", "q", axis(8, 0)), h);
        REQUIRE(path_a.size() == 2);
        CHECK(path_a[1] == a.id);
        auto path_b = descend(tag1("S", "q", axis(8, 1)), h);
        CHECK(path_b[1] == b.id);
    }

    SECTION("a node carried into the next layer continues as itself") {
        Hierarchy h;
        TagNode a = leaf_node("gA", tag1("S", "a", axis(8, 0)));
        TagNode b = leaf_node("gB", tag1("S", "b", axis(8, 1)));
        TagNode c = leaf_node("gC", tag1("S", "c", axis(8, 2)));
        TagNode m;
        m.id = TagNode::merged_id({a.id, b.id});
        m.summary = tag1("S", "m", axis(8, 3));
        m.children = {a.id, b.id};
        h.nodes = {{a.id, a}, {b.id, b}, {c.id, c}, {m.id, m}};
        // Top layer holds the merged node and the carried-forward leaf c.
        h.layers = {{c.id, m.id}, {a.id, b.id, c.id}};

        auto path = descend(tag1("S", "q", axis(8, 2)), h);
        REQUIRE(path.size() == 2);
        CHECK(path[0] == c.id);
        CHECK(path[1] == c.id);  // self-continuation, leaf reached

        auto path_m = descend(tag1("S", "q", axis(8, 3)), h);
        REQUIRE(path_m.size() == 2);
        CHECK(path_m[0] == m.id);
        CHECK(path_m[1] == a.id);  // tie between orthogonal children -> ascending id
        CHECK(path_m[1] == std::min(a.id, b.id));
    }

    SECTION("eight leaves match an explicit argmax oracle") {
        StubEmbedder emb(16, 22);
        Hierarchy h;
        std::vector<std::string> leaf_ids;
        TagNode root;
        for (int i = 0; i < 8; ++i) {
            std::string text = "leaf text " + std::to_string(i * 37);
            TagNode n = leaf_node("g" + std::to_string(i), tag1("S", text, emb.embed(text)));
            leaf_ids.push_back(n.id);
            root.children.push_back(n.id);
            h.nodes[n.id] = std::move(n);
        }
        root.id = TagNode::merged_id(root.children);
        root.summary = tag1("S", "root", emb.embed("root"));
        h.nodes[root.id] = root;
        std::sort(leaf_ids.begin(), leaf_ids.end());
        h.layers = {{root.id}, leaf_ids};

        for (int q = 0; q < 10; ++q) {
            TagSummary query = tag1("S", "q", emb.embed("query " + std::to_string(q)));
            std::string best;
            double best_sim = -1.0;
            for (const auto& id : leaf_ids) {
                double s = pair_similarity(query, h.node(id).summary);
                if (s > best_sim) {
                    best_sim = s;
                    best = id;
                }
            }
            auto path = descend(query, h);
            REQUIRE(path.size() == 2);
            CHECK(path[1] == best);
        }
    }

    SECTION("degenerate inputs are errors") {
        Hierarchy empty;
        CHECK_THROWS_AS(descend(tag1("S", "q", axis(8, 0)), empty), StoreError);
        Hierarchy h;
        TagNode n = leaf_node("g1", tag1("S", "t", axis(8, 0)));
        h.layers = {{n.id}};
        h.nodes[n.id] = n;
        CHECK_THROWS_AS(descend(TagSummary{}, h), StoreError);
    }
}

TEST_CASE("subgraph assembly") {
    SECTION("saturation keeps every member when N_u is large") {
        GraphStore store(8, {});
        MetaMedGraph g;
        g.chunk_id = "c1";
        g.id = MetaMedGraph::make_id("c1");
        for (int i = 0; i < 3; ++i) {
            Entity e;
            e.name = "m" + std::to_string(i);
            e.type = "TypeA";
            e.context = "x";
            e.tier = Tier::User;
            e.chunk_id = "c1";
            e.embedding = axis(8, i);
            g.entity_ids.push_back(store.upsert_entity(std::move(e)));
        }
        store.add_meta_graph(g);
        auto sub = assemble_subgraph(store, g, axis(8, 0), {60, 16, 4});
        CHECK(sub.top_entities.size() == 3);
        CHECK(sub.top_entities[0].id == g.entity_ids[0]);
        CHECK(sub.top_entities[0].score == Catch::Approx(1.0).margin(1e-12));
        CHECK(sub.expanded.size() == 3);
    }

    SECTION("k_u = 0 still pulls in cross-tier attachments") {
        StubEmbedder emb(16, 23);
        GraphStore store(16, {});
        std::string a = store.upsert_entity(make_entity(emb, "a", Tier::User, "c1"));
        std::string b = store.upsert_entity(make_entity(emb, "b", Tier::User, "c1"));
        std::string l = store.upsert_entity(make_entity(emb, "l", Tier::Literature, "c2"));
        std::string v = store.upsert_entity(make_entity(emb, "v", Tier::Vocab, ""));
        store.add_relation({"", a, l, RelationKind::ReferenceOf, "", 0.9});
        store.add_relation({"", l, v, RelationKind::DefinitionOf, "", 0.9});
        store.add_relation({"", a, b, RelationKind::Generated, "g", {}});
        MetaMedGraph g;
        g.chunk_id = "c1";
        g.id = MetaMedGraph::make_id("c1");
        g.entity_ids = {a};
        store.add_meta_graph(g);

        auto sub = assemble_subgraph(store, g, store.entity(a).embedding, {60, 0, 4});
        CHECK(sub.expanded == std::set<std::string>{a, l, v});  // b is tier-1 at hop 1
        // Both cross-tier edges are induced; the generated edge to b is not.
        CHECK(sub.edge_ids.size() == 2);
    }

    SECTION("a 30-entity store matches the composed knn + neighborhood oracle") {
        StubEmbedder emb(24, 24);
        GraphStore store(24, {});
        MetaMedGraph g;
        g.chunk_id = "c1";
        g.id = MetaMedGraph::make_id("c1");

        std::vector<medgraph::testkit::OracleVector> member_vecs;
        std::vector<std::pair<std::string, int>> nodes;
        std::vector<medgraph::testkit::OracleEdge> edges;
        std::vector<std::string> t1, t2, t3;
        for (int i = 0; i < 12; ++i) {
            std::string id = store.upsert_entity(
                make_entity(emb, "u" + std::to_string(i), Tier::User, "c1"));
            g.entity_ids.push_back(id);
            member_vecs.push_back({id, store.entity(id).embedding, 1});
            nodes.emplace_back(id, 1);
            t1.push_back(id);
        }
        for (int i = 0; i < 10; ++i) {
            std::string id = store.upsert_entity(
                make_entity(emb, "l" + std::to_string(i), Tier::Literature, "c2"));
            nodes.emplace_back(id, 2);
            t2.push_back(id);
        }
        for (int i = 0; i < 8; ++i) {
            std::string id = store.upsert_entity(
                make_entity(emb, "v" + std::to_string(i), Tier::Vocab, ""));
            nodes.emplace_back(id, 3);
            t3.push_back(id);
        }
        auto connect = [&](const std::string& a, const std::string& b, RelationKind k) {
            Relation r;
            r.source = a;
            r.target = b;
            r.kind = k;
            if (k == RelationKind::ReferenceOf || k == RelationKind::DefinitionOf)
                r.similarity = 0.7;
            else
                r.description = "d";
            store.add_relation(std::move(r));
            edges.push_back({a, b});
        };
        for (int i = 0; i + 1 < 12; i += 3) connect(t1[i], t1[i + 1], RelationKind::Generated);
        for (int i = 0; i < 10; ++i) connect(t1[i], t2[i], RelationKind::ReferenceOf);
        for (int i = 0; i < 8; ++i) connect(t2[i], t3[i], RelationKind::DefinitionOf);
        store.add_meta_graph(g);

        RetrievalConfig cfg{5, 1, 4};
        Vector q = emb.embed("the retrieval query");
        auto sub = assemble_subgraph(store, g, q, cfg);

        auto expected_top = medgraph::testkit::oracle_knn(member_vecs, q, 5);
        REQUIRE(sub.top_entities.size() == expected_top.size());
        for (std::size_t i = 0; i < expected_top.size(); ++i)
            CHECK(sub.top_entities[i].id == expected_top[i]);

        medgraph::testkit::OracleGraph og(nodes, edges);
        std::set<std::string> expected_expanded;
        for (const auto& id : expected_top) {
            auto n = og.triple_neighbors(id, 1);
            expected_expanded.insert(n.begin(), n.end());
        }
        CHECK(sub.expanded == expected_expanded);

        std::vector<std::string> expected_edges;
        for (const auto& [rid, r] : store.relations())
            if (expected_expanded.count(r.source) && expected_expanded.count(r.target))
                expected_edges.push_back(rid);
        CHECK(sub.edge_ids == expected_edges);
    }

    SECTION("degenerate inputs") {
        GraphStore store(8, {});
        MetaMedGraph g;
        g.chunk_id = "c1";
        g.id = MetaMedGraph::make_id("c1");
        CHECK_THROWS_AS(assemble_subgraph(store, g, axis(8, 0), {60, 16, 4}), StoreError);
        Entity e;
        e.name = "m";
        e.type = "TypeA";
        e.context = "x";
        e.tier = Tier::User;
        e.chunk_id = "c1";
        e.embedding = axis(8, 0);
        g.entity_ids.push_back(store.upsert_entity(std::move(e)));
        store.add_meta_graph(g);
        CHECK_THROWS_AS(assemble_subgraph(store, g, axis(8, 0), {0, 16, 4}), ConfigError);
    }
}

TEST_CASE("subgraph serialization") {
    StubEmbedder emb(16, 25);
    GraphStore store(16, {});
    std::string a = store.upsert_entity(make_entity(emb, "Aspirin", Tier::User, "c1"));
    std::string l = store.upsert_entity(make_entity(emb, "AspirinLit", Tier::Literature, "c2"));
    std::string b = store.upsert_entity(make_entity(emb, "Fever", Tier::User, "c1"));
    std::string rid1 = store.add_relation({"", a, l, RelationKind::ReferenceOf, "", 0.9});
    std::string rid2 = store.add_relation({"", a, b, RelationKind::Generated, "treats", {}});

    std::set<std::string> members{a, l, b};
    std::vector<std::string> edges{rid1, rid2};
    std::string s = serialize_subgraph(store, members, edges);
    // Clauses sort by source then target id; all members are covered by edges.
    std::string c1 = "Aspirin + the reference of + AspirinLit";
    std::string c2 = "Aspirin + treats + Fever";
    std::string expected = l < b ? c1 + ", " + c2 : c2 + ", " + c1;
    CHECK(s == expected);

    SECTION("isolated members are appended as bare names") {
        std::string lone = store.upsert_entity(make_entity(emb, "Lonely", Tier::User, "c1"));
        std::string out = serialize_subgraph(store, {a, l, b, lone}, edges);
        CHECK(out == expected + ", Lonely");
    }

    SECTION("an empty edge set lists members only") {
        CHECK(serialize_subgraph(store, {a}, {}) == "Aspirin");
    }
}

TEST_CASE("answer generation") {
    GraphStore store(8, {});
    MetaMedGraph g;
    g.chunk_id = "c1";
    g.id = MetaMedGraph::make_id("c1");
    // Five members with strictly decreasing cosine against axis-0 queries.
    for (int i = 0; i < 5; ++i) {
        Entity e;
        e.name = std::string(30, static_cast<char>('a' + i));
        e.type = "TypeA";
        e.context = "x";
        e.tier = Tier::User;
        e.chunk_id = "c1";
        Vector v = axis(8, 0);
        v[1] = 0.25 * i;
        e.embedding = unit_normalize(std::move(v));
        g.entity_ids.push_back(store.upsert_entity(std::move(e)));
    }
    store.add_meta_graph(g);
    auto sub = assemble_subgraph(store, g, axis(8, 0), {60, 16, 4});
    REQUIRE(sub.top_entities.size() == 5);
    for (int i = 1; i < 5; ++i)
        CHECK(sub.top_entities[i - 1].score > sub.top_entities[i].score);

    SECTION("the prompt carries the serialized graph and the echo returns it") {
        auto p = FunctionChatProvider(
            [](PromptKind, const SlotMap& s) { return "ANSWER[" + s.at("GRAPH") + "]"; },
            default_prompt_templates(), counter());
        auto r = answer(store, "what?", sub, {60, 16, 4}, p);
        CHECK(r.dropped_ids.empty());
        CHECK(r.kept_members.size() == 5);
        CHECK(r.response == "ANSWER[" + r.serialized_graph + "]");
        CHECK(r.serialized_graph.find(std::string(30, 'a')) != std::string::npos);
    }

    SECTION("over-budget prompts drop the lowest-cosine entities from the end") {
        // Pick a budget that admits exactly the top 3 members.
        RetrievalConfig cfg{60, 16, 4};
        std::set<std::string> top3{sub.top_entities[0].id, sub.top_entities[1].id,
                                   sub.top_entities[2].id};
        std::string graph3 = serialize_subgraph(store, top3, {});
        std::string rendered3 = render_template(
            default_prompt_templates().at(PromptKind::Answer),
            {{"QUESTION", "what?"}, {"GRAPH", graph3}});
        TokenCounter probe(TokenScheme::Bytes4, 1);
        auto p = FunctionChatProvider(
            [](PromptKind, const SlotMap&) { return "fits"; }, default_prompt_templates(),
            counter(probe.count(rendered3), TokenScheme::Bytes4));

        auto r = answer(store, "what?", sub, cfg, p);
        CHECK(r.response == "fits");
        CHECK(r.kept_members == top3);
        REQUIRE(r.dropped_ids.size() == 2);
        // Recomputed drop order: reverse suffix of the cosine ranking.
        CHECK(r.dropped_ids[0] == sub.top_entities[4].id);
        CHECK(r.dropped_ids[1] == sub.top_entities[3].id);
    }

    SECTION("a budget too small for even one entity is a hard error") {
        auto p = FunctionChatProvider([](PromptKind, const SlotMap&) { return "x"; },
                                      default_prompt_templates(),
                                      counter(5, TokenScheme::Bytes4));
        CHECK_THROWS_AS(answer(store, "what?", sub, {60, 16, 4}, p), BudgetExceededError);
    }

    SECTION("an empty subgraph is rejected") {
        Subgraph empty;
        auto p = testhelpers::constant_provider("x");
        CHECK_THROWS_AS(answer(store, "q", empty, {60, 16, 4}, p), StoreError);
    }
}

TEST_CASE("bottom-up refinement") {
    Hierarchy h;
    TagNode leaf = leaf_node("g1", tag1("S", "leaf", axis(8, 0)));
    TagNode mid;
    mid.id = TagNode::merged_id({leaf.id, "tx"});
    mid.summary = tag1("S", "mid level", axis(8, 1));
    mid.children = {leaf.id};
    TagNode root;
    root.id = TagNode::merged_id({mid.id, "ty"});
    root.summary = tag1("S", "root level", axis(8, 2));
    root.children = {mid.id};
    h.nodes = {{leaf.id, leaf}, {mid.id, mid}, {root.id, root}};
    h.layers = {{root.id}, {mid.id}, {leaf.id}};

    auto base_trace = [&] {
        RetrievalTrace t;
        t.question = "q";
        t.path = {root.id, mid.id, leaf.id};
        t.initial_response = "r0";
        return t;
    };

    SECTION("refinement visits distinct ancestors nearest-first") {
        std::vector<std::string> summaries;
        auto p = FunctionChatProvider(
            [&](PromptKind, const SlotMap& s) {
                summaries.push_back(s.at("SUMMARY"));
                return s.at("RESPONSE") + "+";
            },
            default_prompt_templates(), counter());
        RetrievalTrace t = base_trace();
        refine(t, h, {60, 16, 4}, p);
        REQUIRE(t.refinement.size() == 2);
        CHECK(t.refinement[0].node_id == mid.id);
        CHECK(t.refinement[1].node_id == root.id);
        CHECK(summaries[0] == mid.summary.rendered());
        CHECK(summaries[1] == root.summary.rendered());
        CHECK(t.final_response == "r0++");
        CHECK_FALSE(t.degraded);
    }

    SECTION("carried-forward duplicates in the path count once") {
        auto p = FunctionChatProvider(
            [](PromptKind, const SlotMap& s) { return s.at("RESPONSE") + "+"; },
            default_prompt_templates(), counter());
        RetrievalTrace t = base_trace();
        t.path = {root.id, mid.id, mid.id, leaf.id};
        refine(t, h, {60, 16, 4}, p);
        REQUIRE(t.refinement.size() == 2);
        CHECK(t.refinement[0].node_id == mid.id);
        CHECK(t.refinement[1].node_id == root.id);
    }

    SECTION("refine depth zero leaves the response untouched") {
        auto p = testhelpers::constant_provider("never");
        RetrievalTrace t = base_trace();
        refine(t, h, {60, 16, 0}, p);
        CHECK(t.refinement.empty());
        CHECK(t.final_response == "r0");
        CHECK(p.audit().size() == 0);
    }

    SECTION("refine depth clamps the ancestor chain") {
        auto p = FunctionChatProvider(
            [](PromptKind, const SlotMap& s) { return s.at("RESPONSE") + "+"; },
            default_prompt_templates(), counter());
        RetrievalTrace t = base_trace();
        refine(t, h, {60, 16, 1}, p);
        REQUIRE(t.refinement.size() == 1);
        CHECK(t.refinement[0].node_id == mid.id);
        CHECK(t.final_response == "r0+");
    }

    SECTION("a provider failure degrades gracefully") {
        int calls = 0;
        auto p = FunctionChatProvider(
            [&](PromptKind, const SlotMap& s) -> std::string {
                if (++calls == 2) throw ProviderError("refine backend down");
                return s.at("RESPONSE") + "+";
            },
            default_prompt_templates(), counter());
        RetrievalTrace t = base_trace();
        refine(t, h, {60, 16, 4}, p);
        CHECK(t.degraded);
        CHECK(t.refinement.size() == 1);
        CHECK(t.final_response == "r0+");  // last successful step wins
    }

    SECTION("a single-node path has no ancestors") {
        auto p = testhelpers::constant_provider("never");
        RetrievalTrace t = base_trace();
        t.path = {leaf.id};
        refine(t, h, {60, 16, 4}, p);
        CHECK(t.final_response == "r0");
        CHECK(p.audit().size() == 0);
    }
}

TEST_CASE("full retrieval run") {
    StubEmbedder emb(32, 26);
    GraphStore store(32, {});
    TagSchema schema = TagSchema::defaults();

    // Graph g1: tier-1 Alpha/Beta with a full citation chain; g2: a decoy.
    std::string a = store.upsert_entity(make_entity(emb, "Alpha", Tier::User, "c1"));
    std::string b = store.upsert_entity(make_entity(emb, "Beta", Tier::User, "c1"));
    std::string l = store.upsert_entity(make_entity(emb, "AlphaLit", Tier::Literature, "c9"));
    std::string v = store.upsert_entity(make_entity(emb, "AlphaVocab", Tier::Vocab, ""));
    store.add_relation({"", a, l, RelationKind::ReferenceOf, "", 0.8});
    store.add_relation({"", l, v, RelationKind::DefinitionOf, "", 0.8});
    store.add_relation({"", a, b, RelationKind::Generated, "relates to", {}});
    MetaMedGraph g1;
    g1.chunk_id = "c1";
    g1.id = MetaMedGraph::make_id("c1");
    g1.entity_ids = {a, b};
    store.add_meta_graph(g1);

    std::string c = store.upsert_entity(make_entity(emb, "Gamma", Tier::User, "c2"));
    MetaMedGraph g2;
    g2.chunk_id = "c2";
    g2.id = MetaMedGraph::make_id("c2");
    g2.entity_ids = {c};
    store.add_meta_graph(g2);

    Hierarchy h;
    TagNode n1 = leaf_node(g1.id, tag1("Symptoms", "topic one", emb.embed("topic one")));
    TagNode n2 = leaf_node(g2.id, tag1("Symptoms", "entirely different subject matter",
                                       emb.embed("entirely different subject matter")));
    TagNode root;
    root.id = TagNode::merged_id({n1.id, n2.id});
    root.summary = tag1("Symptoms", "root summary", emb.embed("root summary"));
    root.children = {n1.id, n2.id};
    h.nodes = {{n1.id, n1}, {n2.id, n2}, {root.id, root}};
    std::vector<std::string> bottom{n1.id, n2.id};
    std::sort(bottom.begin(), bottom.end());
    h.layers = {{root.id}, bottom};

    StubScript script;
    script.fallback = FallbackPolicy::Error;
    script.entries.push_back({PromptKind::QueryTag, "*", "Symptoms|topic one", false});
    script.entries.push_back({PromptKind::Answer, "*", "the initial answer", false});
    script.entries.push_back({PromptKind::Refine, "*", "the refined answer", false});

    RetrievalConfig cfg{60, 16, 4};

    auto run_once = [&] {
        ScriptedChatProvider chat(script, default_prompt_templates(), counter());
        return run_query(store, h, schema, "tell me about topic one", chat, emb, cfg);
    };

    RetrievalTrace t = run_once();
    CHECK(t.path == std::vector<std::string>{root.id, n1.id});
    CHECK(t.target_graph_id == g1.id);
    CHECK(t.top_entities.size() == 2);
    CHECK(std::set<std::string>(t.expanded_ids.begin(), t.expanded_ids.end()) ==
          std::set<std::string>{a, b, l, v});
    CHECK(t.serialized_graph.find("the reference of") != std::string::npos);
    CHECK(t.serialized_graph.find("the definition of") != std::string::npos);
    CHECK(t.initial_response == "the initial answer");
    REQUIRE(t.refinement.size() == 1);
    CHECK(t.refinement[0].node_id == root.id);
    CHECK(t.final_response == "the refined answer");
    REQUIRE(t.citations.size() == 1);
    CHECK(t.citations[0].entity_id == a);
    CHECK(t.citations[0].reference_ids == std::vector<std::string>{l});
    CHECK(t.citations[0].definition_ids == std::vector<std::string>{v});
    CHECK_FALSE(t.degraded);

    SECTION("the trace replays byte-identically") {
        RetrievalTrace again = run_once();
        CHECK(again.to_json().dump() == t.to_json().dump());
        CHECK(again.trace_id() == t.trace_id());
    }

    SECTION("the trace JSON carries the schema version and core fields") {
        auto j = t.to_json();
        CHECK(j.at("version").get<int>() == kTraceSchemaVersion);
        CHECK(j.at("question").get<std::string>() == "tell me about topic one");
        CHECK(j.at("top_entities").size() == 2);
        CHECK(j.at("citations").size() == 1);
    }
}
