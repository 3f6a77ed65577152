#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "medgraph/common.hpp"

namespace medgraph {

using Vector = std::vector<double>;

inline Vector unit_normalize(Vector v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-12) throw Error("cannot normalize a zero vector");
    for (double& x : v) x /= n;
    return v;
}

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string identity() const = 0;
    virtual std::size_t dimension() const = 0;

    // Returns a unit-normalized vector of exactly dimension() components.
    Vector embed(std::string_view text) {
        if (text.empty()) throw ProviderError("embed: empty input");
        Vector v = embed_raw(text);
        if (v.size() != dimension())
            throw ProviderError("embed: provider returned dimension " + std::to_string(v.size()) +
                                ", expected " + std::to_string(dimension()));
        for (double x : v) {
            if (!std::isfinite(x)) throw ProviderError("embed: non-finite component");
        }
        return unit_normalize(std::move(v));
    }

protected:
    virtual Vector embed_raw(std::string_view text) = 0;
};

// Deterministic stub: hash each character trigram (the whole text when shorter
// than 3 bytes) into a bucket, signed by one hash bit, then unit-normalize.
// If all contributions cancel, a single bucket derived from the full text is set.
class StubEmbedder final : public EmbeddingProvider {
public:
    StubEmbedder(std::size_t dimension, std::uint64_t seed)
        : dimension_(dimension), seed_(seed) {
        if (dimension == 0) throw ConfigError("embedding dimension must be positive");
    }

    std::string identity() const override { return "stub"; }
    std::size_t dimension() const override { return dimension_; }

protected:
    Vector embed_raw(std::string_view text) override {
        Vector v(dimension_, 0.0);
        auto add_gram = [&](std::string_view gram) {
            std::uint64_t h = fnv1a64(gram, kFnvBasis ^ seed_);
            double sign = ((h >> 32) & 1) ? -1.0 : 1.0;
            v[h % dimension_] += sign;
        };
        if (text.size() < 3) {
            add_gram(text);
        } else {
            for (std::size_t i = 0; i + 3 <= text.size(); ++i) add_gram(text.substr(i, 3));
        }
        double norm2 = 0.0;
        for (double x : v) norm2 += x * x;
        if (norm2 < 1e-12) {
            std::uint64_t h = fnv1a64(text, kFnvBasis ^ seed_);
            v[h % dimension_] = 1.0;
        }
        return v;
    }

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

}  // namespace medgraph
