#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medgraph/common.hpp"
#include "medgraph/tokens.hpp"

namespace medgraph {

enum class PromptKind { Sem, Ent, Rel, Tag, Mtag, Answer, Refine, QueryTag };

inline std::string to_string(PromptKind k) {
    switch (k) {
        case PromptKind::Sem: return "sem";
        case PromptKind::Ent: return "ent";
        case PromptKind::Rel: return "rel";
        case PromptKind::Tag: return "tag";
        case PromptKind::Mtag: return "mtag";
        case PromptKind::Answer: return "answer";
        case PromptKind::Refine: return "refine";
        case PromptKind::QueryTag: return "querytag";
    }
    return "?";
}

inline PromptKind prompt_kind_from_string(const std::string& s) {
    if (s == "sem") return PromptKind::Sem;
    if (s == "ent") return PromptKind::Ent;
    if (s == "rel") return PromptKind::Rel;
    if (s == "tag") return PromptKind::Tag;
    if (s == "mtag") return PromptKind::Mtag;
    if (s == "answer") return PromptKind::Answer;
    if (s == "refine") return PromptKind::Refine;
    if (s == "querytag") return PromptKind::QueryTag;
    throw ConfigError("unknown prompt kind: " + s);
}

using SlotMap = std::map<std::string, std::string>;

// Canonical rendering of a slot map: sorted "key=value" lines. Stub script
// matchers and fingerprints both operate on this form.
inline std::string canonical_slots(const SlotMap& slots) {
    std::string out;
    for (const auto& [k, v] : slots) {
        if (!out.empty()) out += '\n';
        out += k;
        out += '=';
        out += v;
    }
    return out;
}

inline std::string slot_fingerprint(PromptKind kind, const SlotMap& slots) {
    std::uint64_t h = fnv1a64(to_string(kind));
    h = fnv1a64("\x1f", h);
    h = fnv1a64(canonical_slots(slots), h);
    return to_hex(h);
}

struct AuditRecord {
    PromptKind kind;
    SlotMap slots;
    std::string rendered_prompt;
    std::string response;
};

class AuditLog {
public:
    void append(AuditRecord rec) {
        std::lock_guard<std::mutex> lock(mu_);
        records_.push_back(std::move(rec));
    }
    std::vector<AuditRecord> records() const {
        std::lock_guard<std::mutex> lock(mu_);
        return records_;
    }
    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return records_.size();
    }

private:
    mutable std::mutex mu_;
    std::vector<AuditRecord> records_;
};

using PromptTemplates = std::map<PromptKind, std::string>;

inline PromptTemplates default_prompt_templates() {
    return {
        {PromptKind::Sem,
         "Decide whether the new paragraphs continue the topic of the current chunk.\n"
         "WINDOW: {WINDOW}\nCHUNK: {CHUNK}\nAnswer True or False."},
        {PromptKind::Ent,
         "Identify all relevant entities in the following content. For each entity output one "
         "line: name{SEP}type{SEP}context.\nCONTENT: {CONTENT}"},
        {PromptKind::Rel,
         "Identify relationships between the following entities. For each relationship output "
         "one line: source name{SEP}description{SEP}target name.\nENTITIES: {ENTITIES}"},
        {PromptKind::Tag,
         "Generate a structured summary from the provided medical content, strictly adhering to "
         "the following categories: {CATEGORIES}. Output one line per category: "
         "category{SEP}text.\nCONTENT: {CONTENT}"},
        {PromptKind::Mtag,
         "Merge the following tag summaries into one more abstract summary, keeping the same "
         "categories. Output one line per category: category{SEP}text.\nFIRST: {FIRST}\n"
         "SECOND: {SECOND}"},
        {PromptKind::Answer,
         "Given QUESTION: {QUESTION}. GRAPH: {GRAPH}. Answer the user question: QUESTION using "
         "the graph: GRAPH."},
        {PromptKind::Refine,
         "Adjust the response:{RESPONSE} of the question: {QUESTION} using the updated "
         "information: {SUMMARY}"},
        {PromptKind::QueryTag,
         "Generate a structured tag summary for the user query, strictly adhering to the "
         "following categories: {CATEGORIES}. Output one line per category: "
         "category{SEP}text.\nQUERY: {QUERY}"},
    };
}

// Substitutes {KEY} placeholders. Every placeholder must have a slot; slots
// without a placeholder are allowed (they still participate in fingerprints).
inline std::string render_template(const std::string& tpl, const SlotMap& slots) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        std::size_t open = tpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        std::size_t close = tpl.find('}', open);
        if (close == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        out.append(tpl, pos, open - pos);
        std::string key = tpl.substr(open + 1, close - open - 1);
        auto it = slots.find(key);
        if (it == slots.end())
            throw ProviderError("prompt template placeholder {" + key + "} has no slot");
        out += it->second;
        pos = close + 1;
    }
    return out;
}

class ChatProvider {
public:
    ChatProvider(PromptTemplates templates, std::shared_ptr<TokenCounter> counter)
        : templates_(std::move(templates)), counter_(std::move(counter)) {}
    virtual ~ChatProvider() = default;

    virtual std::string identity() const = 0;

    bool has_kind(PromptKind kind) const { return templates_.count(kind) > 0; }

    std::string chat(PromptKind kind, const SlotMap& slots) {
        auto it = templates_.find(kind);
        if (it == templates_.end())
            throw ProviderError("unregistered prompt kind: " + to_string(kind));
        std::string rendered = render_template(it->second, slots);
        if (counter_ && !counter_->within_budget(rendered))
            throw BudgetExceededError("prompt for kind '" + to_string(kind) + "' exceeds token budget (" +
                                      std::to_string(counter_->count(rendered)) + " > " +
                                      std::to_string(counter_->budget()) + ")");
        std::string response = chat_raw(kind, slots, rendered);
        audit_.append({kind, slots, rendered, response});
        return response;
    }

    const AuditLog& audit() const { return audit_; }
    const TokenCounter* counter() const { return counter_.get(); }

protected:
    virtual std::string chat_raw(PromptKind kind, const SlotMap& slots,
                                 const std::string& rendered) = 0;

private:
    PromptTemplates templates_;
    std::shared_ptr<TokenCounter> counter_;
    AuditLog audit_;
};

enum class FallbackPolicy { Echo, Fixed, Error };

inline FallbackPolicy fallback_policy_from_string(const std::string& s) {
    if (s == "echo") return FallbackPolicy::Echo;
    if (s == "fixed") return FallbackPolicy::Fixed;
    if (s == "error") return FallbackPolicy::Error;
    throw ConfigError("unknown fallback policy: " + s);
}

struct ScriptEntry {
    PromptKind kind;
    std::string matcher;  // "*" | "fp:<hex>" | "has:<substr>" | "eq:<canonical slots>"
    std::string response;
    bool once = false;
};

// Ordered list of canned responses keyed by prompt kind and an input matcher.
// Lookup scans entries of the matching kind in file order; "once:" entries are
// consumed after their first hit.
struct StubScript {
    std::vector<ScriptEntry> entries;
    FallbackPolicy fallback = FallbackPolicy::Echo;
    std::string fixed_response;

    static std::string escape(std::string_view s) {
        std::string out;
        for (char c : s) {
            if (c == '\\') out += "\\\\";
            else if (c == '\n') out += "\\n";
            else if (c == '\t') out += "\\t";
            else out += c;
        }
        return out;
    }

    static std::string unescape(std::string_view s) {
        std::string out;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '\\' && i + 1 < s.size()) {
                char n = s[++i];
                if (n == 'n') out += '\n';
                else if (n == 't') out += '\t';
                else out += n;
            } else {
                out += s[i];
            }
        }
        return out;
    }

    std::string serialize() const {
        std::string out = "# stub script: kind<TAB>matcher<TAB>response\n";
        out += "!fallback\t";
        out += (fallback == FallbackPolicy::Echo ? "echo"
                : fallback == FallbackPolicy::Fixed ? "fixed" : "error");
        out += '\t';
        out += escape(fixed_response);
        out += '\n';
        for (const auto& e : entries) {
            out += to_string(e.kind);
            out += '\t';
            if (e.once) out += "once:";
            out += escape(e.matcher);
            out += '\t';
            out += escape(e.response);
            out += '\n';
        }
        return out;
    }

    static StubScript parse(std::string_view text) {
        StubScript s;
        for (const auto& line : split_lines(text)) {
            if (line.empty() || line[0] == '#') continue;
            std::size_t t1 = line.find('\t');
            std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
            if (t1 == std::string::npos || t2 == std::string::npos)
                throw ParseError("stub script: malformed line: " + line);
            std::string first = line.substr(0, t1);
            std::string matcher = unescape(line.substr(t1 + 1, t2 - t1 - 1));
            std::string response = unescape(line.substr(t2 + 1));
            if (first == "!fallback") {
                s.fallback = fallback_policy_from_string(matcher);
                s.fixed_response = response;
                continue;
            }
            ScriptEntry e;
            e.kind = prompt_kind_from_string(first);
            if (matcher.rfind("once:", 0) == 0) {
                e.once = true;
                matcher = matcher.substr(5);
            }
            e.matcher = matcher;
            e.response = response;
            s.entries.push_back(std::move(e));
        }
        return s;
    }
};

class ScriptedChatProvider final : public ChatProvider {
public:
    ScriptedChatProvider(StubScript script, PromptTemplates templates,
                         std::shared_ptr<TokenCounter> counter)
        : ChatProvider(std::move(templates), std::move(counter)), script_(std::move(script)),
          consumed_(script_.entries.size(), false) {}

    std::string identity() const override { return "stub-script"; }

protected:
    std::string chat_raw(PromptKind kind, const SlotMap& slots, const std::string&) override {
        std::string canonical = canonical_slots(slots);
        std::string fp = slot_fingerprint(kind, slots);
        std::lock_guard<std::mutex> lock(mu_);
        for (std::size_t i = 0; i < script_.entries.size(); ++i) {
            const auto& e = script_.entries[i];
            if (e.kind != kind || consumed_[i]) continue;
            if (matches(e.matcher, canonical, fp)) {
                if (e.once) consumed_[i] = true;
                return e.response;
            }
        }
        switch (script_.fallback) {
            case FallbackPolicy::Echo: return canonical;
            case FallbackPolicy::Fixed: return script_.fixed_response;
            case FallbackPolicy::Error:
                throw ProviderError("stub script: no entry for kind '" + to_string(kind) +
                                    "' fingerprint " + fp);
        }
        return {};
    }

private:
    static bool matches(const std::string& matcher, const std::string& canonical,
                        const std::string& fp) {
        if (matcher == "*") return true;
        if (matcher.rfind("fp:", 0) == 0) return matcher.substr(3) == fp;
        if (matcher.rfind("has:", 0) == 0)
            return canonical.find(matcher.substr(4)) != std::string::npos;
        if (matcher.rfind("eq:", 0) == 0) return matcher.substr(3) == canonical;
        throw ConfigError("stub script: unknown matcher form: " + matcher);
    }

    StubScript script_;
    std::vector<bool> consumed_;
    std::mutex mu_;
};

// Test helper: responses computed by an arbitrary function of (kind, slots).
class FunctionChatProvider final : public ChatProvider {
public:
    using Fn = std::function<std::string(PromptKind, const SlotMap&)>;

    FunctionChatProvider(Fn fn, PromptTemplates templates, std::shared_ptr<TokenCounter> counter)
        : ChatProvider(std::move(templates), std::move(counter)), fn_(std::move(fn)) {}

    std::string identity() const override { return "stub-function"; }

protected:
    std::string chat_raw(PromptKind kind, const SlotMap& slots, const std::string&) override {
        return fn_(kind, slots);
    }

private:
    Fn fn_;
};

}  // namespace medgraph
