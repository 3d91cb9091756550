#include "eor/reader.hpp"

#include "eor/hashing.hpp"

namespace eor {

namespace {

constexpr std::string_view kReFree15 =
    "Please directly answer the following question within 15 words:\n{query}";
constexpr std::string_view kReFreeFew =
    "Please directly answer the following question with one or few words:\n{query}";
constexpr std::string_view kRag15 =
    "Assuming the following paragraphs are true:\n\n{document}\n\n"
    "Please directly answer the following question within 15 words:\n{query}";
constexpr std::string_view kRagFew =
    "Assuming the following paragraphs are true:\n\n{document}\n\n"
    "Please directly answer the following question with one or few words:\n{query}";
constexpr std::string_view kParametric =
    "Generate a background document to answer the given question.\n{query}.";
constexpr std::string_view kCompress =
    "Please truthfully summarize the document below, the summary should contain the most "
    "important information relevant to answer the query and be within 200 words:\n"
    "query: {query}\n\ndocument: {document}\n\nsummary:";

// Single left-to-right pass so placeholder-like text inside the query or
// document is never re-expanded.
std::string substitute(std::string_view body, std::string_view query, std::string_view document) {
    static constexpr std::string_view kQuery = "{query}";
    static constexpr std::string_view kDocument = "{document}";
    std::string out;
    out.reserve(body.size() + query.size() + document.size());
    std::size_t i = 0;
    while (i < body.size()) {
        if (body.substr(i, kQuery.size()) == kQuery) {
            out += query;
            i += kQuery.size();
        } else if (body.substr(i, kDocument.size()) == kDocument) {
            out += document;
            i += kDocument.size();
        } else {
            out.push_back(body[i++]);
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::ReFree: return "refree";
        case PromptKind::Rag: return "rag";
        case PromptKind::Parametric: return "parametric";
        case PromptKind::Compress: return "compress";
    }
    return "refree";
}

std::string_view to_string(TemplateFamily family) {
    return family == TemplateFamily::ChatInstruct15Words ? "chat-instruct-15-words"
                                                         : "chat-instruct-few-words";
}

TemplateFamily template_family_from_string(std::string_view name) {
    if (name == "chat-instruct-15-words") return TemplateFamily::ChatInstruct15Words;
    if (name == "chat-instruct-few-words") return TemplateFamily::ChatInstructFewWords;
    throw Error("unknown template family '" + std::string(name) + "'");
}

std::string_view prompt_template(PromptKind kind, TemplateFamily family) {
    const bool fifteen = family == TemplateFamily::ChatInstruct15Words;
    switch (kind) {
        case PromptKind::ReFree: return fifteen ? kReFree15 : kReFreeFew;
        case PromptKind::Rag: return fifteen ? kRag15 : kRagFew;
        case PromptKind::Parametric: return kParametric;
        case PromptKind::Compress: return kCompress;
    }
    return kReFree15;
}

std::string render_prompt(PromptKind kind, TemplateFamily family, std::string_view query,
                          std::string_view document_text) {
    if ((kind == PromptKind::Rag || kind == PromptKind::Compress) && document_text.empty()) {
        throw Error(std::string(to_string(kind)) + " prompt requires a non-empty document");
    }
    return substitute(prompt_template(kind, family), query, document_text);
}

std::string render_prompt(PromptKind kind, TemplateFamily family, const Query& query,
                          const Document& document) {
    return render_prompt(kind, family, query.text, document.text());
}

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::Live: return "live";
        case Mode::Replay: return "replay";
        case Mode::Record: return "record";
    }
    return "replay";
}

Mode mode_from_string(std::string_view name) {
    if (name == "live") return Mode::Live;
    if (name == "replay") return Mode::Replay;
    if (name == "record") return Mode::Record;
    throw Error("unknown mode '" + std::string(name) + "'");
}

std::string cache_key(const ReaderRequest& request) {
    const json canonical = {
        {"model_id", request.model_id},
        {"prompt", request.prompt},
        {"decode", {{"greedy", request.greedy}, {"max_tokens", request.max_tokens}}},
    };
    return sha256_hex(canonical.dump());
}

std::optional<std::string> ReplayCache::lookup(const std::string& key) const {
    auto record = store_.lookup(key);
    if (!record) return std::nullopt;
    return (*record)["response"].get<std::string>();
}

void ReplayCache::store(const std::string& key, const std::string& model_id,
                        const std::string& response) {
    store_.store(key, json{{"model_id", model_id}, {"response", response}});
}

ReaderGateway::ReaderGateway(ReaderConfig config, Mode mode, std::shared_ptr<ReplayCache> cache,
                             std::shared_ptr<Transport> transport, Endpoint endpoint)
    : config_(std::move(config)),
      mode_(mode),
      cache_(cache ? std::move(cache) : std::make_shared<ReplayCache>()),
      transport_(std::move(transport)),
      endpoint_(std::move(endpoint)) {
    if (config_.max_tokens <= 0) throw Error("max_tokens must be positive");
}

std::string ReaderGateway::call_service(const ReaderRequest& request) {
    if (!transport_ || endpoint_.empty()) {
        throw TransportError("reader service endpoint not configured (set EOR_READER_URL)");
    }
    ++network_calls_;
    const json body = {
        {"model_id", request.model_id},
        {"prompt", request.prompt},
        {"greedy", true},
        {"max_tokens", request.max_tokens},
    };
    const json reply = transport_->post_json(endpoint_.url, body, endpoint_.headers());
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw TransportError("reader service reply lacks a string 'text' field");
    }
    return reply["text"].get<std::string>();
}

std::string ReaderGateway::generate(const ReaderRequest& request) {
    if (!request.greedy) throw Error("only greedy decoding is supported");
    if (request.max_tokens <= 0) throw Error("max_tokens must be positive");

    const auto key = cache_key(request);
    switch (mode_) {
        case Mode::Live:
            return call_service(request);
        case Mode::Replay: {
            if (auto hit = cache_->lookup(key)) return *hit;
            throw ReplayMiss(key);
        }
        case Mode::Record: {
            if (auto hit = cache_->lookup(key)) return *hit;
            auto text = call_service(request);
            cache_->store(key, request.model_id, text);
            return text;
        }
    }
    throw Error("unreachable reader mode");
}

std::string ReaderGateway::complete(const std::string& prompt) {
    return generate(ReaderRequest{config_.model_id, prompt, true, config_.max_tokens});
}

}  // namespace eor
