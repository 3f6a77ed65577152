#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "medgraph/chat.hpp"
#include "medgraph/common.hpp"
#include "medgraph/embedding.hpp"
#include "medgraph/graph_store.hpp"

namespace medgraph {

struct TagCategory {
    std::string name;
    std::string description;
};

struct TagSchema {
    std::vector<TagCategory> categories;

    static TagSchema defaults() {
        return {{{"Symptoms", "Signs and symptoms present in the content"},
                 {"Patient History", "Relevant history, demographics, prior conditions"},
                 {"Body Functions", "Physiological functions and systems involved"},
                 {"Medication", "Drugs, dosages, and treatments mentioned"}}};
    }

    bool contains(const std::string& name) const {
        for (const auto& c : categories)
            if (c.name == name) return true;
        return false;
    }

    std::string rendered() const {
        std::string out;
        for (const auto& c : categories) {
            if (!out.empty()) out += "; ";
            out += c.name + ": " + c.description;
        }
        return out;
    }

    void validate() const {
        std::set<std::string> seen;
        for (const auto& c : categories) {
            if (c.name.empty()) throw ConfigError("tag category name must be non-empty");
            if (!seen.insert(c.name).second)
                throw ConfigError("duplicate tag category: " + c.name);
        }
    }
};

struct TagSummary {
    std::map<std::string, std::string> tags;      // category -> text
    std::map<std::string, Vector> embeddings;     // category -> embedding of the text

    bool empty() const { return tags.empty(); }

    std::string rendered() const {
        std::string out;
        for (const auto& [cat, text] : tags) {
            if (!out.empty()) out += "\n";
            out += cat + ": " + text;
        }
        return out;
    }
};

struct TagNode {
    std::string id;
    TagSummary summary;
    std::vector<std::string> children;  // tag node ids; empty for leaves
    std::string leaf_graph_id;          // set iff leaf

    bool is_leaf() const { return children.empty(); }

    static std::string leaf_id(const std::string& graph_id) {
        return "t" + to_hex(fnv1a64("leaf\x1f" + graph_id));
    }

    static std::string merged_id(const std::vector<std::string>& child_ids) {
        std::vector<std::string> sorted = child_ids;
        std::sort(sorted.begin(), sorted.end());
        std::uint64_t h = fnv1a64("merge");
        for (const auto& c : sorted) {
            h = fnv1a64("\x1f", h);
            h = fnv1a64(c, h);
        }
        return "t" + to_hex(h);
    }
};

struct PairSim {
    std::string a;  // a < b
    std::string b;
    double sim;
};

struct MergeRound {
    std::size_t round = 0;
    std::vector<PairSim> pair_similarities;
    double threshold = 0.0;  // delta_t for the round
    std::vector<std::vector<std::string>> merges;  // member node ids per committed merge
};

struct Hierarchy {
    std::map<std::string, TagNode> nodes;
    std::vector<std::vector<std::string>> layers;  // [0] = root layer, last = leaves
    std::vector<MergeRound> rounds;

    const TagNode& node(const std::string& id) const {
        auto it = nodes.find(id);
        if (it == nodes.end()) throw StoreError("unknown tag node: " + id);
        return it->second;
    }

    std::size_t layer_count() const { return layers.size(); }

    std::vector<std::pair<std::string, const TagSummary*>> layer_tags(std::size_t layer) const {
        if (layer >= layers.size()) throw StoreError("layer index out of range");
        std::vector<std::pair<std::string, const TagSummary*>> out;
        for (const auto& id : layers[layer]) out.emplace_back(id, &node(id).summary);
        return out;
    }
};

// Mean cosine over all cross pairs of tag embeddings, clamped to [0, 1].
// The operand pair is canonically ordered first so the result is exactly
// symmetric. An empty side yields 0.
inline double pair_similarity(const TagSummary& a, const TagSummary& b) {
    if (a.empty() || b.empty()) return 0.0;
    const TagSummary* x = &a;
    const TagSummary* y = &b;
    if (b.rendered() < a.rendered()) std::swap(x, y);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [ca, va] : x->embeddings) {
        for (const auto& [cb, vb] : y->embeddings) {
            sum += cosine(va, vb);
            ++n;
        }
    }
    if (n == 0) return 0.0;
    double mean = sum / static_cast<double>(n);
    return std::clamp(mean, 0.0, 1.0);
}

namespace detail {

inline std::map<std::string, std::string> parse_tag_records(const std::string& raw,
                                                            const TagSchema& schema,
                                                            const std::string& sep,
                                                            std::vector<std::string>* dropped) {
    std::map<std::string, std::string> tags;
    for (const auto& line : split_lines(raw)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        std::size_t p = t.find(sep);
        if (p == std::string::npos)
            throw ParseError("tag output is not 'category" + sep + "text' records; raw output:\n" +
                             raw);
        std::string cat = trim(t.substr(0, p));
        std::string text = trim(t.substr(p + sep.size()));
        if (!schema.contains(cat)) {
            if (dropped) dropped->push_back(cat);
            continue;
        }
        tags[cat] = text;
    }
    return tags;
}

inline TagSummary embed_tags(std::map<std::string, std::string> tags, EmbeddingProvider& embedder) {
    TagSummary s;
    for (auto& [cat, text] : tags) {
        if (text.empty()) continue;
        s.embeddings[cat] = embedder.embed(text);
        s.tags[cat] = std::move(text);
    }
    return s;
}

// Nearest-rank percentile on ascending values.
inline double nearest_rank_percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw Error("percentile of empty set");
    std::sort(values.begin(), values.end());
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(values.size())));
    if (rank == 0) rank = 1;
    return values[rank - 1];
}

}  // namespace detail

struct SummarizeReport {
    TagSummary summary;
    std::vector<std::string> dropped_categories;
};

// Summarizes one Meta-MedGraph into the schema's categories. Empty graphs
// produce an empty summary without a provider call.
inline SummarizeReport summarize_graph(const GraphStore& store, const MetaMedGraph& g,
                                       const TagSchema& schema, ChatProvider& provider,
                                       EmbeddingProvider& embedder, const std::string& sep = "|") {
    SummarizeReport report;
    if (g.entity_ids.empty()) return report;
    std::string content;
    for (const auto& id : g.entity_ids) {
        if (!content.empty()) content += "\n";
        content += store.entity(id).content();
    }
    std::string raw = provider.chat(
        PromptKind::Tag,
        {{"CONTENT", content}, {"CATEGORIES", schema.rendered()}, {"SEP", sep}});
    auto tags = detail::parse_tag_records(raw, schema, sep, &report.dropped_categories);
    report.summary = detail::embed_tags(std::move(tags), embedder);
    return report;
}

inline TagSummary merge_summaries(const TagSummary& first, const TagSummary& second,
                                  const TagSchema& schema, ChatProvider& provider,
                                  EmbeddingProvider& embedder, const std::string& sep = "|") {
    std::string raw = provider.chat(PromptKind::Mtag, {{"FIRST", first.rendered()},
                                                       {"SECOND", second.rendered()},
                                                       {"SEP", sep}});
    auto tags = detail::parse_tag_records(raw, schema, sep, nullptr);
    return detail::embed_tags(std::move(tags), embedder);
}

// Agglomerative clustering with a per-round dynamic threshold:
// delta_t = max(nearest-rank 80th percentile of the round's pair
// similarities, floor). Pairs are scanned by descending similarity and a
// union is accepted only if every pairwise similarity inside the proposed
// group clears delta_t (complete linkage). Stops when a round commits no
// merge, one group remains, or the layer cap is hit.
inline Hierarchy build_hierarchy(const std::vector<std::pair<std::string, TagSummary>>& leaves,
                                 const TagSchema& schema, ChatProvider& provider,
                                 EmbeddingProvider& embedder, double floor = 0.5,
                                 std::size_t max_layers = 12, const std::string& sep = "|") {
    if (leaves.empty()) throw StoreError("build_hierarchy requires at least one leaf");
    if (max_layers == 0) throw ConfigError("max layers must be positive");

    Hierarchy h;
    std::vector<std::string> current;
    for (const auto& [graph_id, summary] : leaves) {
        TagNode n;
        n.id = TagNode::leaf_id(graph_id);
        n.summary = summary;
        n.leaf_graph_id = graph_id;
        current.push_back(n.id);
        h.nodes[n.id] = std::move(n);
    }
    std::sort(current.begin(), current.end());
    std::vector<std::vector<std::string>> layers_bottom_up{current};

    std::size_t round_index = 0;
    while (current.size() > 1 && layers_bottom_up.size() < max_layers) {
        // All pair similarities among the current groups.
        MergeRound round;
        round.round = round_index;
        std::vector<double> sims;
        for (std::size_t i = 0; i < current.size(); ++i) {
            for (std::size_t j = i + 1; j < current.size(); ++j) {
                double s = pair_similarity(h.node(current[i]).summary, h.node(current[j]).summary);
                round.pair_similarities.push_back({current[i], current[j], s});
                sims.push_back(s);
            }
        }
        round.threshold = std::max(detail::nearest_rank_percentile(sims, 80.0), floor);

        // Greedy union by descending similarity with complete-linkage checks.
        std::vector<const PairSim*> order;
        for (const auto& p : round.pair_similarities) order.push_back(&p);
        std::sort(order.begin(), order.end(), [](const PairSim* a, const PairSim* b) {
            if (a->sim != b->sim) return a->sim > b->sim;
            if (a->a != b->a) return a->a < b->a;
            return a->b < b->b;
        });

        std::map<std::string, std::size_t> group_of;
        std::vector<std::set<std::string>> groups;
        for (const auto& id : current) {
            group_of[id] = groups.size();
            groups.push_back({id});
        }
        std::map<std::pair<std::string, std::string>, double> sim_of;
        for (const auto& p : round.pair_similarities) sim_of[{p.a, p.b}] = p.sim;
        auto sim_between = [&](const std::string& a, const std::string& b) {
            return a < b ? sim_of.at({a, b}) : sim_of.at({b, a});
        };

        for (const PairSim* p : order) {
            if (p->sim < round.threshold) break;
            std::size_t ga = group_of[p->a];
            std::size_t gb = group_of[p->b];
            if (ga == gb) continue;
            bool ok = true;
            for (const auto& x : groups[ga]) {
                for (const auto& y : groups[gb]) {
                    if (sim_between(x, y) < round.threshold) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) break;
            }
            if (!ok) continue;
            for (const auto& y : groups[gb]) {
                groups[ga].insert(y);
                group_of[y] = ga;
            }
            groups[gb].clear();
        }

        // Synthesize merged summaries; nothing is committed until every
        // provider call of the round has succeeded.
        std::vector<TagNode> new_nodes;
        std::vector<std::string> next;
        bool merged_any = false;
        for (const auto& g : groups) {
            if (g.empty()) continue;
            if (g.size() == 1) {
                next.push_back(*g.begin());
                continue;
            }
            merged_any = true;
            std::vector<std::string> members(g.begin(), g.end());
            round.merges.push_back(members);
            TagSummary acc = h.node(members[0]).summary;
            for (std::size_t i = 1; i < members.size(); ++i)
                acc = merge_summaries(acc, h.node(members[i]).summary, schema, provider, embedder,
                                      sep);
            TagNode n;
            n.id = TagNode::merged_id(members);
            n.summary = std::move(acc);
            n.children = members;
            next.push_back(n.id);
            new_nodes.push_back(std::move(n));
        }
        if (!merged_any) break;

        for (auto& n : new_nodes) h.nodes[n.id] = std::move(n);
        std::sort(next.begin(), next.end());
        layers_bottom_up.push_back(next);
        h.rounds.push_back(std::move(round));
        current = layers_bottom_up.back();
        ++round_index;
    }

    h.layers.assign(layers_bottom_up.rbegin(), layers_bottom_up.rend());
    return h;
}

// ---- snapshot records ----

inline std::vector<std::string> hierarchy_records(const Hierarchy& h) {
    std::vector<std::string> lines;
    for (const auto& [id, n] : h.nodes) {
        nlohmann::json j;
        j["record"] = "tagnode";
        j["id"] = id;
        j["tags"] = n.summary.tags;
        nlohmann::json emb = nlohmann::json::object();
        for (const auto& [cat, v] : n.summary.embeddings) emb[cat] = v;
        j["embeddings"] = emb;
        j["children"] = n.children;
        j["leaf_graph"] = n.leaf_graph_id;
        lines.push_back(j.dump());
    }
    {
        nlohmann::json j;
        j["record"] = "taglayers";
        j["layers"] = h.layers;
        lines.push_back(j.dump());
    }
    for (const auto& r : h.rounds) {
        nlohmann::json j;
        j["record"] = "mergeround";
        j["round"] = r.round;
        j["threshold"] = r.threshold;
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& p : r.pair_similarities) pairs.push_back({p.a, p.b, p.sim});
        j["pairs"] = pairs;
        j["merges"] = r.merges;
        lines.push_back(j.dump());
    }
    return lines;
}

inline std::optional<Hierarchy> hierarchy_from_records(const std::vector<std::string>& lines) {
    Hierarchy h;
    bool saw_layers = false;
    for (const auto& line : lines) {
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("record")) continue;
        std::string record = j["record"].get<std::string>();
        if (record == "tagnode") {
            TagNode n;
            n.id = j.at("id").get<std::string>();
            n.summary.tags = j.at("tags").get<std::map<std::string, std::string>>();
            for (const auto& [cat, v] : j.at("embeddings").items())
                n.summary.embeddings[cat] = v.get<Vector>();
            n.children = j.at("children").get<std::vector<std::string>>();
            n.leaf_graph_id = j.at("leaf_graph").get<std::string>();
            h.nodes[n.id] = std::move(n);
        } else if (record == "taglayers") {
            h.layers = j.at("layers").get<std::vector<std::vector<std::string>>>();
            saw_layers = true;
        } else if (record == "mergeround") {
            MergeRound r;
            r.round = j.at("round").get<std::size_t>();
            r.threshold = j.at("threshold").get<double>();
            for (const auto& p : j.at("pairs"))
                r.pair_similarities.push_back(
                    {p[0].get<std::string>(), p[1].get<std::string>(), p[2].get<double>()});
            r.merges = j.at("merges").get<std::vector<std::vector<std::string>>>();
            h.rounds.push_back(std::move(r));
        }
    }
    if (!saw_layers) return std::nullopt;
    return h;
}

}  // namespace medgraph
