#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "eor/jsonl_store.hpp"
#include "eor/reader.hpp"
#include "eor/transport.hpp"

namespace eor {

/// Key for a recorded (metric, text_a, text_b) triple.
std::string score_key(const std::string& metric_id, const std::string& text_a,
                      const std::string& text_b);

/// Recorded scorer triples as JSON Lines {key, metric_id, text_a, text_b, score}.
class ScoreStore {
public:
    explicit ScoreStore(std::filesystem::path path = {}) : store_("score", std::move(path)) {}

    std::optional<double> lookup(const std::string& key) const;
    void store(const std::string& metric_id, const std::string& text_a, const std::string& text_b,
               double score);
    std::size_t size() const { return store_.size(); }

private:
    KeyedJsonlStore store_;
};

/// Client for the external scoring service used by reranking, model-based
/// similarity metrics and semantic grading.
///
/// Wire protocol: POST {text_a, text_b, metric_id} and expect {score}.
class ScorerClient {
public:
    ScorerClient(Mode mode, std::shared_ptr<ScoreStore> store, std::shared_ptr<Transport> transport,
                 Endpoint endpoint);

    /// Raw service score; replay misses throw ReplayMiss naming the key.
    double score(const std::string& metric_id, const std::string& text_a, const std::string& text_b);

    std::size_t network_calls() const { return network_calls_.load(); }

private:
    double call_service(const std::string& metric_id, const std::string& text_a,
                        const std::string& text_b);

    Mode mode_;
    std::shared_ptr<ScoreStore> store_;
    std::shared_ptr<Transport> transport_;
    Endpoint endpoint_;
    std::atomic<std::size_t> network_calls_{0};
};

}  // namespace eor
