#include "eor/scorer.hpp"

#include <cmath>

#include "eor/hashing.hpp"

namespace eor {

std::string score_key(const std::string& metric_id, const std::string& text_a,
                      const std::string& text_b) {
    const json canonical = {{"metric_id", metric_id}, {"text_a", text_a}, {"text_b", text_b}};
    return sha256_hex(canonical.dump());
}

std::optional<double> ScoreStore::lookup(const std::string& key) const {
    auto record = store_.lookup(key);
    if (!record) return std::nullopt;
    return (*record)["score"].get<double>();
}

void ScoreStore::store(const std::string& metric_id, const std::string& text_a,
                       const std::string& text_b, double score) {
    store_.store(score_key(metric_id, text_a, text_b),
                 json{{"metric_id", metric_id}, {"text_a", text_a}, {"text_b", text_b}, {"score", score}});
}

ScorerClient::ScorerClient(Mode mode, std::shared_ptr<ScoreStore> store,
                           std::shared_ptr<Transport> transport, Endpoint endpoint)
    : mode_(mode),
      store_(store ? std::move(store) : std::make_shared<ScoreStore>()),
      transport_(std::move(transport)),
      endpoint_(std::move(endpoint)) {}

double ScorerClient::call_service(const std::string& metric_id, const std::string& text_a,
                                  const std::string& text_b) {
    if (!transport_ || endpoint_.empty()) {
        throw TransportError("scorer service endpoint not configured (set EOR_SCORER_URL)");
    }
    ++network_calls_;
    const json body = {{"text_a", text_a}, {"text_b", text_b}, {"metric_id", metric_id}};
    const json reply = transport_->post_json(endpoint_.url, body, endpoint_.headers());
    if (!reply.contains("score") || !reply["score"].is_number()) {
        throw TransportError("scorer service reply lacks a numeric 'score' field");
    }
    const double s = reply["score"].get<double>();
    if (!std::isfinite(s)) throw TransportError("scorer service returned a non-finite score");
    return s;
}

double ScorerClient::score(const std::string& metric_id, const std::string& text_a,
                           const std::string& text_b) {
    const auto key = score_key(metric_id, text_a, text_b);
    switch (mode_) {
        case Mode::Live:
            return call_service(metric_id, text_a, text_b);
        case Mode::Replay:
            if (auto hit = store_->lookup(key)) return *hit;
            throw ReplayMiss(key);
        case Mode::Record: {
            if (auto hit = store_->lookup(key)) return *hit;
            const double s = call_service(metric_id, text_a, text_b);
            store_->store(metric_id, text_a, text_b, s);
            return s;
        }
    }
    throw Error("unreachable scorer mode");
}

}  // namespace eor
