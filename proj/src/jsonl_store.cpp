#include "eor/jsonl_store.hpp"

namespace eor {

KeyedJsonlStore::KeyedJsonlStore(std::string value_field, std::filesystem::path path)
    : value_field_(std::move(value_field)), path_(std::move(path)) {
    if (path_.empty()) return;
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json record;
            try {
                record = json::parse(line);
            } catch (const json::parse_error& e) {
                throw CacheCorruption(path_.string() + ":" + std::to_string(line_no) +
                                      ": invalid JSON: " + e.what());
            }
            if (!record.contains("key") || !record.contains(value_field_)) {
                throw CacheCorruption(path_.string() + ":" + std::to_string(line_no) +
                                      ": record lacks 'key' or '" + value_field_ + "'");
            }
            const auto key = record["key"].get<std::string>();
            insert_locked(key, std::move(record), line_no);
        }
    } else if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw Error("cannot open " + path_.string() + " for appending");
}

void KeyedJsonlStore::insert_locked(const std::string& key, json record, std::size_t line) {
    auto it = entries_.find(key);
    if (it != entries_.end()) {
        if (it->second[value_field_] != record[value_field_]) {
            std::string where = path_.empty() ? "in-memory store" : path_.string();
            if (line > 0) where += ":" + std::to_string(line);
            throw CacheCorruption(where + ": key " + key + " rewritten with a different value");
        }
        return;
    }
    entries_.emplace(key, std::move(record));
}

std::optional<json> KeyedJsonlStore::lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void KeyedJsonlStore::store(const std::string& key, json record) {
    record["key"] = key;
    std::unique_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
        if (it->second[value_field_] != record[value_field_]) {
            throw CacheCorruption("key " + key + " rewritten with a different value");
        }
        return;
    }
    if (out_.is_open()) {
        out_ << record.dump() << '\n';
        out_.flush();
    }
    entries_.emplace(key, std::move(record));
}

std::size_t KeyedJsonlStore::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

}  // namespace eor
