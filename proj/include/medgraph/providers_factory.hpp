#pragma once

#include <fstream>
#include <memory>
#include <sstream>

#include "medgraph/chat.hpp"
#include "medgraph/config.hpp"
#include "medgraph/embedding.hpp"
#include "medgraph/remote.hpp"
#include "medgraph/tokens.hpp"

namespace medgraph {

struct Providers {
    std::shared_ptr<TokenCounter> counter;
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<EmbeddingProvider> embedder;
};

inline StubScript load_stub_script(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open stub script: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return StubScript::parse(buf.str());
}

inline Providers make_providers(const PipelineConfig& cfg) {
    Providers p;
    p.counter = std::make_shared<TokenCounter>(cfg.token_scheme, cfg.token_budget);

    if (cfg.provider.chat == "stub") {
        p.chat = std::make_shared<ScriptedChatProvider>(load_stub_script(cfg.paths.stub_script),
                                                        default_prompt_templates(), p.counter);
    } else if (cfg.provider.chat == "remote") {
        if (cfg.provider.endpoint.empty())
            throw ConfigError("provider.endpoint is required for remote chat");
        p.chat = std::make_shared<RemoteChatProvider>(cfg.provider.endpoint,
                                                      cfg.provider.chat_model,
                                                      cfg.provider.api_key_env,
                                                      default_prompt_templates(), p.counter);
    } else {
        throw ConfigError("provider.chat must be 'stub' or 'remote'");
    }

    if (cfg.provider.embedding == "stub") {
        p.embedder = std::make_shared<StubEmbedder>(cfg.provider.dimension, cfg.provider.seed);
    } else if (cfg.provider.embedding == "remote") {
        if (cfg.provider.endpoint.empty())
            throw ConfigError("provider.endpoint is required for remote embeddings");
        p.embedder = std::make_shared<RemoteEmbeddingProvider>(
            cfg.provider.endpoint, cfg.provider.embedding_model, cfg.provider.api_key_env,
            cfg.provider.dimension);
    } else {
        throw ConfigError("provider.embedding must be 'stub' or 'remote'");
    }
    return p;
}

}  // namespace medgraph
