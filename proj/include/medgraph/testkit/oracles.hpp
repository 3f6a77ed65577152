#pragma once

// Independent brute-force references for the engine's similarity,
// neighborhood, and clustering results. Everything here is deliberately
// self-contained: no engine search, traversal, or clustering code is reused.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace medgraph::testkit {

struct OracleReport {
    std::string check;
    std::string engine_value;
    std::string oracle_value;
    double tolerance = 0.0;
    bool pass = false;
};

struct OracleVector {
    std::string id;
    std::vector<double> values;
    int tier = 1;
};

inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double denom = std::sqrt(na) * std::sqrt(nb);
    return denom == 0.0 ? 0.0 : num / denom;
}

// Full linear scan, descending cosine, ascending-id tie break.
inline std::vector<std::string> oracle_knn(const std::vector<OracleVector>& store,
                                           const std::vector<double>& query, std::size_t k) {
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& e : store) scored.emplace_back(oracle_cosine(query, e.values), e.id);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
    return out;
}

struct OracleEdge {
    std::string a;
    std::string b;
};

// All-pairs shortest paths (Floyd-Warshall) over the undirected edge list,
// then the per-tier allowance filter dist <= k + (tier - 1).
class OracleGraph {
public:
    OracleGraph(const std::vector<std::pair<std::string, int>>& nodes,
                const std::vector<OracleEdge>& edges) {
        for (const auto& [id, tier] : nodes) {
            index_[id] = ids_.size();
            ids_.push_back(id);
            tiers_.push_back(tier);
        }
        std::size_t n = ids_.size();
        dist_.assign(n, std::vector<std::size_t>(n, kInf));
        for (std::size_t i = 0; i < n; ++i) dist_[i][i] = 0;
        for (const auto& e : edges) {
            std::size_t u = index_.at(e.a);
            std::size_t v = index_.at(e.b);
            dist_[u][v] = std::min<std::size_t>(dist_[u][v], 1);
            dist_[v][u] = std::min<std::size_t>(dist_[v][u], 1);
        }
        for (std::size_t m = 0; m < n; ++m)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (dist_[i][m] == kInf || dist_[m][j] == kInf) continue;
                    dist_[i][j] = std::min(dist_[i][j], dist_[i][m] + dist_[m][j]);
                }
    }

    static constexpr std::size_t kInf = static_cast<std::size_t>(-1);

    std::size_t distance(const std::string& a, const std::string& b) const {
        return dist_[index_.at(a)][index_.at(b)];
    }

    std::set<std::string> triple_neighbors(const std::string& center, std::size_t k) const {
        std::size_t c = index_.at(center);
        std::set<std::string> out;
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            if (dist_[c][i] == kInf) continue;
            std::size_t allowance = k + static_cast<std::size_t>(tiers_[i] - 1);
            if (dist_[c][i] <= allowance) out.insert(ids_[i]);
        }
        return out;
    }

private:
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> ids_;
    std::vector<int> tiers_;
    std::vector<std::vector<std::size_t>> dist_;
};

// Brute-force cross-tier linking: every source/target cosine, filter by
// threshold, keep the `max_links` best per source (ascending id on ties).
struct OracleLink {
    std::string source;
    std::string target;
    double cosine;
};

inline std::vector<OracleLink> oracle_link_tier(const std::vector<OracleVector>& sources,
                                                const std::vector<OracleVector>& targets,
                                                double threshold, std::size_t max_links) {
    std::vector<OracleLink> out;
    for (const auto& s : sources) {
        std::vector<OracleLink> candidates;
        for (const auto& t : targets) {
            double c = oracle_cosine(s.values, t.values);
            if (c >= threshold) candidates.push_back({s.id, t.id, c});
        }
        std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
            if (a.cosine != b.cosine) return a.cosine > b.cosine;
            return a.target < b.target;
        });
        if (candidates.size() > max_links) candidates.resize(max_links);
        for (auto& c : candidates) out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.source != b.source) return a.source < b.source;
        return a.target < b.target;
    });
    return out;
}

struct OracleMergeRound {
    double threshold = 0.0;
    std::vector<std::vector<std::string>> merges;  // sorted member lists, sorted
};

// Reference for one clustering round: nearest-rank 80th percentile floored,
// then a greedy descending-similarity scan with full pairwise validation.
inline OracleMergeRound oracle_merge_round(
    const std::map<std::pair<std::string, std::string>, double>& sims, double floor) {
    if (sims.empty()) return {floor, {}};

    std::vector<double> values;
    for (const auto& [pair, s] : sims) values.push_back(s);
    std::sort(values.begin(), values.end());
    std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.80 * static_cast<double>(values.size())));
    if (rank == 0) rank = 1;
    double threshold = std::max(values[rank - 1], floor);

    std::set<std::string> ids;
    for (const auto& [pair, s] : sims) {
        ids.insert(pair.first);
        ids.insert(pair.second);
    }
    std::map<std::string, std::set<std::string>> group;
    for (const auto& id : ids) group[id] = {id};
    auto lookup = [&](const std::string& a, const std::string& b) {
        return a < b ? sims.at({a, b}) : sims.at({b, a});
    };

    std::vector<std::pair<std::pair<std::string, std::string>, double>> order(sims.begin(),
                                                                              sims.end());
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });

    std::map<std::string, std::string> rep;
    for (const auto& id : ids) rep[id] = id;
    std::function<std::string(const std::string&)> find = [&](const std::string& x) {
        return rep[x] == x ? x : rep[x] = find(rep[x]);
    };

    for (const auto& [pair, s] : order) {
        if (s < threshold) break;
        std::string ra = find(pair.first);
        std::string rb = find(pair.second);
        if (ra == rb) continue;
        bool ok = true;
        for (const auto& x : group[ra]) {
            for (const auto& y : group[rb]) {
                if (lookup(x, y) < threshold) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (!ok) continue;
        for (const auto& y : group[rb]) group[ra].insert(y);
        group[rb].clear();
        rep[rb] = ra;
    }

    OracleMergeRound out;
    out.threshold = threshold;
    for (const auto& [r, members] : group) {
        if (members.size() < 2) continue;
        out.merges.emplace_back(members.begin(), members.end());
    }
    std::sort(out.merges.begin(), out.merges.end());
    return out;
}

}  // namespace medgraph::testkit
