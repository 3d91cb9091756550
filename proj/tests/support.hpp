#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "eor/transport.hpp"

namespace test {

namespace fs = std::filesystem;

/// Fresh scratch directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    auto dir = fs::temp_directory_path() /
               ("eor_test_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

/// In-process stand-in for the HTTP services.
class FakeTransport : public eor::Transport {
public:
    using Handler = std::function<eor::json(const std::string& url, const eor::json& body)>;

    explicit FakeTransport(Handler h) : handler_(std::move(h)) {}

    eor::json post_json(const std::string& url, const eor::json& body,
                        const std::map<std::string, std::string>& headers) override {
        ++calls;
        {
            std::lock_guard lock(mu_);
            last_headers = headers;
        }
        return handler_(url, body);
    }

    std::atomic<int> calls{0};
    std::map<std::string, std::string> last_headers;

private:
    Handler handler_;
    std::mutex mu_;
};

}  // namespace test
