#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "medgraph/chat.hpp"
#include "medgraph/common.hpp"
#include "medgraph/tokens.hpp"

namespace medgraph {

struct Document {
    std::string id;
    std::string raw;
    std::vector<std::string> paragraphs;
};

struct Chunk {
    std::string id;
    std::string document_id;
    std::size_t first_paragraph = 0;
    std::size_t last_paragraph = 0;  // inclusive
    std::size_t token_count = 0;

    static std::string make_id(const std::string& document_id, std::size_t first) {
        std::uint64_t h = fnv1a64(document_id);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(std::to_string(first), h);
        return "c" + to_hex(h);
    }
};

// Splits on runs of one-or-more newlines, trims each paragraph, drops empties.
inline std::vector<std::string> split_paragraphs(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view piece =
            nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
        std::string p = trim(piece);
        if (!p.empty()) out.push_back(std::move(p));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

// Splits a paragraph exceeding the budget into contiguous substrings, each
// within budget, preferring sentence boundaries. Concatenating the pieces
// restores the paragraph byte-for-byte.
inline std::vector<std::string> force_split_oversized(const std::string& paragraph,
                                                      const TokenCounter& counter) {
    if (counter.within_budget(paragraph)) return {paragraph};

    // Cut candidates: positions just past sentence punctuation and any
    // following whitespace run.
    std::vector<std::size_t> cuts;
    for (std::size_t i = 0; i < paragraph.size(); ++i) {
        char c = paragraph[i];
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i + 1;
            while (j < paragraph.size() &&
                   std::isspace(static_cast<unsigned char>(paragraph[j])))
                ++j;
            if (j < paragraph.size()) cuts.push_back(j);
            i = j - 1;
        }
    }

    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start < paragraph.size()) {
        std::string_view rest(paragraph.data() + start, paragraph.size() - start);
        if (counter.within_budget(rest)) {
            pieces.emplace_back(rest);
            break;
        }
        // Farthest sentence cut that still fits.
        std::size_t best = 0;
        for (std::size_t cut : cuts) {
            if (cut <= start) continue;
            std::string_view prefix(paragraph.data() + start, cut - start);
            if (counter.within_budget(prefix)) best = cut - start;
            else break;
        }
        if (best == 0) {
            // No usable sentence boundary: largest prefix within budget.
            std::size_t lo = 1, hi = rest.size();
            while (lo < hi) {
                std::size_t mid = (lo + hi + 1) / 2;
                if (counter.within_budget(rest.substr(0, mid))) lo = mid;
                else hi = mid - 1;
            }
            best = lo;
        }
        pieces.emplace_back(rest.substr(0, best));
        start += best;
    }
    return pieces;
}

inline Document make_document(std::string id, std::string raw, const TokenCounter& counter) {
    Document doc{std::move(id), std::move(raw), {}};
    for (auto& p : split_paragraphs(doc.raw)) {
        for (auto& piece : force_split_oversized(p, counter)) doc.paragraphs.push_back(std::move(piece));
    }
    return doc;
}

struct ChunkingResult {
    std::vector<Chunk> chunks;
    bool truncated_judge_context = false;  // CHUNK slot was front-truncated to fit budget
};

namespace detail {

inline bool parse_verdict(const std::string& raw, const std::string& where) {
    std::string t = trim(raw);
    std::size_t end = 0;
    while (end < t.size() && !std::isspace(static_cast<unsigned char>(t[end]))) ++end;
    std::string head = t.substr(0, end);
    for (char& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (head == "true") return true;
    if (head == "false") return false;
    throw ParseError("semantic judge returned unparseable verdict at " + where + ": '" + raw + "'");
}

}  // namespace detail

// Left fold over paragraphs: P_j joins the open chunk iff the judge affirms
// topic consistency of the trailing w-paragraph window against the chunk so
// far AND the extended chunk stays within the token budget.
inline ChunkingResult chunk_document(const Document& doc, ChatProvider& judge,
                                     const TokenCounter& counter, std::size_t window_size = 5) {
    if (window_size == 0) throw ConfigError("sliding window size must be positive");
    ChunkingResult result;
    if (doc.paragraphs.empty()) return result;

    auto flush = [&](std::size_t first, std::size_t last, std::size_t tokens) {
        result.chunks.push_back(
            {Chunk::make_id(doc.id, first), doc.id, first, last, tokens});
    };

    std::size_t first = 0;
    std::size_t tokens = counter.count(doc.paragraphs[0]);
    std::string chunk_text = doc.paragraphs[0];

    for (std::size_t j = 1; j < doc.paragraphs.size(); ++j) {
        const std::string& p = doc.paragraphs[j];
        std::size_t p_tokens = counter.count(p);

        // FIFO window {P_{j-w+1} .. P_j}, never more than w paragraphs.
        std::size_t wfirst = j + 1 >= window_size ? j + 1 - window_size : 0;
        std::string window;
        for (std::size_t i = wfirst; i <= j; ++i) {
            if (!window.empty()) window += "\n";
            window += doc.paragraphs[i];
        }

        bool fits = tokens + p_tokens <= counter.budget();
        bool same_topic = false;
        if (fits) {
            std::string context = chunk_text;
            for (;;) {
                try {
                    std::string verdict = judge.chat(
                        PromptKind::Sem, {{"WINDOW", window}, {"CHUNK", context}});
                    same_topic = detail::parse_verdict(
                        verdict, doc.id + " paragraph " + std::to_string(j));
                    break;
                } catch (const BudgetExceededError&) {
                    if (context.size() <= 1)
                        throw BudgetExceededError(
                            "semantic judge prompt cannot fit the token budget even with an "
                            "empty chunk context (document " + doc.id + ")");
                    // Send the chunk context verbatim but truncated from the front.
                    context = context.substr(context.size() / 2);
                    result.truncated_judge_context = true;
                }
            }
        }

        if (same_topic && fits) {
            tokens += p_tokens;
            chunk_text += "\n\n" + p;
        } else {
            flush(first, j - 1, tokens);
            first = j;
            tokens = p_tokens;
            chunk_text = p;
        }
    }
    flush(first, doc.paragraphs.size() - 1, tokens);
    return result;
}

inline std::string chunk_text(const Document& doc, const Chunk& c) {
    std::string out;
    for (std::size_t i = c.first_paragraph; i <= c.last_paragraph; ++i) {
        if (!out.empty()) out += "\n\n";
        out += doc.paragraphs[i];
    }
    return out;
}

}  // namespace medgraph
