#pragma once

#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>

#include "medgraph/common.hpp"

namespace medgraph {

enum class TokenScheme {
    Bytes4,      // ceil(byte length / 4), the default deterministic proxy
    Whitespace,  // whitespace-delimited word count
};

inline TokenScheme token_scheme_from_string(const std::string& s) {
    if (s == "bytes4") return TokenScheme::Bytes4;
    if (s == "whitespace") return TokenScheme::Whitespace;
    throw ConfigError("unknown token scheme: " + s);
}

inline std::string to_string(TokenScheme s) {
    return s == TokenScheme::Bytes4 ? "bytes4" : "whitespace";
}

class TokenCounter {
public:
    TokenCounter(TokenScheme scheme, std::size_t budget) : scheme_(scheme), budget_(budget) {}

    std::size_t count(std::string_view text) const {
        switch (scheme_) {
            case TokenScheme::Bytes4:
                return (text.size() + 3) / 4;
            case TokenScheme::Whitespace: {
                std::size_t n = 0;
                bool in_word = false;
                for (unsigned char c : text) {
                    bool ws = std::isspace(c) != 0;
                    if (!ws && !in_word) ++n;
                    in_word = !ws;
                }
                return n;
            }
        }
        return 0;
    }

    std::size_t budget() const { return budget_; }
    TokenScheme scheme() const { return scheme_; }

    bool within_budget(std::string_view text) const { return count(text) <= budget_; }

private:
    TokenScheme scheme_;
    std::size_t budget_;
};

}  // namespace medgraph
