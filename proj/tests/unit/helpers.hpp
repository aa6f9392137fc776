#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "iotmon/ingest.hpp"
#include "iotmon/random.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        iotmon::Rng rng(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
        path_ = std::filesystem::temp_directory_path() / ("iotmon-" + tag + "-" + std::to_string(rng.bits() % 1000000));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<iotmon::AttributeInstance> random_instances(std::size_t n, std::size_t p, std::uint64_t seed) {
    iotmon::Rng rng(seed);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("a" + std::to_string(j));
    auto schema = iotmon::make_schema(names);
    std::vector<iotmon::AttributeInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        iotmon::AttributeInstance x;
        x.device = iotmon::MacAddress(0x020000000000ULL + i % 3);
        x.window_start = 60.0 * static_cast<double>(i);
        x.schema = schema;
        for (std::size_t j = 0; j < p; ++j) x.values.push_back(rng.normal(0.0, 1.0 + static_cast<double>(j)));
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace testing
