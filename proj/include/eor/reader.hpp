#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <string_view>

#include "eor/domain.hpp"
#include "eor/jsonl_store.hpp"
#include "eor/transport.hpp"

namespace eor {

enum class PromptKind { ReFree, Rag, Parametric, Compress };
enum class TemplateFamily { ChatInstruct15Words, ChatInstructFewWords };

std::string_view to_string(PromptKind kind);
std::string_view to_string(TemplateFamily family);
TemplateFamily template_family_from_string(std::string_view name);

/// Template body with `{query}` and `{document}` placeholders.
std::string_view prompt_template(PromptKind kind, TemplateFamily family);

/// Instantiates a template. Rag and Compress need a non-empty document.
std::string render_prompt(PromptKind kind, TemplateFamily family, const Query& query,
                          const Document& document = {});
std::string render_prompt(PromptKind kind, TemplateFamily family, std::string_view query,
                          std::string_view document_text);

enum class Mode { Live, Replay, Record };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);

inline constexpr int kDefaultMaxTokens = 64;

struct ReaderRequest {
    std::string model_id;
    std::string prompt;
    bool greedy = true;
    int max_tokens = kDefaultMaxTokens;
};

/// SHA-256 over the canonical JSON form of (model_id, prompt, decode).
std::string cache_key(const ReaderRequest& request);

class ReplayMiss : public Error {
public:
    explicit ReplayMiss(const std::string& key)
        : Error("replay cache miss for key " + key), key_(key) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Content-addressed store of reader responses, persisted as JSON Lines
/// records {key, model_id, response}.
class ReplayCache {
public:
    explicit ReplayCache(std::filesystem::path path = {}) : store_("response", std::move(path)) {}

    std::optional<std::string> lookup(const std::string& key) const;
    void store(const std::string& key, const std::string& model_id, const std::string& response);
    std::size_t size() const { return store_.size(); }

private:
    KeyedJsonlStore store_;
};

/// Anything that turns a prompt into reader text.
class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

struct ReaderConfig {
    std::string model_id = "reader";
    TemplateFamily family = TemplateFamily::ChatInstruct15Words;
    int max_tokens = kDefaultMaxTokens;
};

/// Wraps the external reader service behind the replay cache.
///
/// Wire protocol: POST {model_id, prompt, greedy: true, max_tokens} and
/// expect {text}.
class ReaderGateway : public TextGenerator {
public:
    ReaderGateway(ReaderConfig config, Mode mode, std::shared_ptr<ReplayCache> cache,
                  std::shared_ptr<Transport> transport, Endpoint endpoint);

    std::string generate(const ReaderRequest& request);
    std::string complete(const std::string& prompt) override;

    const ReaderConfig& config() const { return config_; }
    Mode mode() const { return mode_; }
    std::size_t network_calls() const { return network_calls_.load(); }

private:
    std::string call_service(const ReaderRequest& request);

    ReaderConfig config_;
    Mode mode_;
    std::shared_ptr<ReplayCache> cache_;
    std::shared_ptr<Transport> transport_;
    Endpoint endpoint_;
    std::atomic<std::size_t> network_calls_{0};
};

}  // namespace eor
