#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "medgraph/chat.hpp"
#include "medgraph/embedding.hpp"

namespace medgraph {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{200};  // doubled per attempt
};

namespace detail {

inline std::string api_key_from_env(const std::string& var) {
    if (var.empty()) return {};
    const char* v = std::getenv(var.c_str());
    return v ? v : "";
}

template <typename Fn>
nlohmann::json post_json_with_retry(const std::string& endpoint, const std::string& path,
                                    const nlohmann::json& body, const std::string& api_key,
                                    const RetryPolicy& retry, Fn&& validate) {
    std::string last_error;
    for (int attempt = 0; attempt < retry.max_attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(retry.base_delay * (1 << (attempt - 1)));
        httplib::Client client(endpoint);
        client.set_read_timeout(60, 0);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("remote provider rejected request (status " +
                                 std::to_string(res->status) + "): " + res->body);
        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded()) {
            last_error = "response is not valid JSON";
            continue;
        }
        if (validate(j)) return j;
        last_error = "response missing expected fields";
    }
    throw TransportError("remote provider unavailable after " +
                         std::to_string(retry.max_attempts) + " attempts: " + last_error);
}

}  // namespace detail

// OpenAI-compatible chat completion client.
class RemoteChatProvider final : public ChatProvider {
public:
    RemoteChatProvider(std::string endpoint, std::string model, std::string api_key_env,
                       PromptTemplates templates, std::shared_ptr<TokenCounter> counter,
                       RetryPolicy retry = {})
        : ChatProvider(std::move(templates), std::move(counter)), endpoint_(std::move(endpoint)),
          model_(std::move(model)), api_key_(detail::api_key_from_env(api_key_env)),
          retry_(retry) {}

    std::string identity() const override { return "remote:" + model_; }

protected:
    std::string chat_raw(PromptKind, const SlotMap&, const std::string& rendered) override {
        nlohmann::json body;
        body["model"] = model_;
        body["messages"] = {{{"role", "user"}, {"content", rendered}}};
        auto j = detail::post_json_with_retry(
            endpoint_, "/v1/chat/completions", body, api_key_, retry_, [](const nlohmann::json& r) {
                return r.contains("choices") && !r["choices"].empty() &&
                       r["choices"][0].contains("message");
            });
        return j["choices"][0]["message"].value("content", "");
    }

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_;
    RetryPolicy retry_;
};

class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(std::string endpoint, std::string model, std::string api_key_env,
                            std::size_t dimension, RetryPolicy retry = {})
        : endpoint_(std::move(endpoint)), model_(std::move(model)),
          api_key_(detail::api_key_from_env(api_key_env)), dimension_(dimension), retry_(retry) {}

    std::string identity() const override { return "remote:" + model_; }
    std::size_t dimension() const override { return dimension_; }

protected:
    Vector embed_raw(std::string_view text) override {
        nlohmann::json body;
        body["model"] = model_;
        body["input"] = std::string(text);
        auto j = detail::post_json_with_retry(
            endpoint_, "/v1/embeddings", body, api_key_, retry_, [](const nlohmann::json& r) {
                return r.contains("data") && !r["data"].empty() &&
                       r["data"][0].contains("embedding");
            });
        return j["data"][0]["embedding"].get<Vector>();
    }

private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_;
    std::size_t dimension_;
    RetryPolicy retry_;
};

}  // namespace medgraph
