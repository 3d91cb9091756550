#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "eor/transport.hpp"

namespace eor {

class CacheCorruption : public Error {
public:
    using Error::Error;
};

/// Append-only map from content key to a JSON record, optionally persisted
/// as JSON Lines. Every record carries a "key" field and a value field; a
/// second record for the same key must carry the same value.
class KeyedJsonlStore {
public:
    /// `value_field` names the field compared on conflicting writes.
    explicit KeyedJsonlStore(std::string value_field, std::filesystem::path path = {});

    std::optional<json> lookup(const std::string& key) const;

    /// Inserts and appends one line; a no-op when an identical value is
    /// already stored.
    void store(const std::string& key, json record);

    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    void insert_locked(const std::string& key, json record, std::size_t line);

    std::string value_field_;
    std::filesystem::path path_;
    std::unordered_map<std::string, json> entries_;
    std::ofstream out_;
    mutable std::shared_mutex mutex_;
};

}  // namespace eor
