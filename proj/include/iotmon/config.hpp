#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "iotmon/attributes.hpp"
#include "iotmon/monitor.hpp"
#include "iotmon/oneclass.hpp"
#include "iotmon/sececal.hpp"
#include "iotmon/supervised/forest.hpp"

namespace iotmon {

/// Every tunable of the pipeline. Loaded from a JSON object file and/or
/// `key=value` overrides; unknown keys are rejected.
struct Config {
    std::string timescales = "ch5";
    double interval_seconds = 60.0;
    double cumvar_target = 0.95;
    std::vector<std::size_t> k_candidates = default_k_candidates();
    double deriv_threshold = -0.01;
    std::string boundary_rule = "percentile";
    double boundary_percentile = 0.975;
    double iqr_factor = 1.5;
    double rise_target = 0.99;
    double rise_minutes = 720.0;
    double fall_target = 0.01;
    double fall_minutes = 90.0;
    double accept_threshold = 0.90;
    double alarm_level = 0.50;
    double confidence_floor = 0.025;
    std::string unknown_policy = "freeze";
    bool floor_in_stable = true;
    std::uint64_t seed = 1;
    std::size_t forest_trees = 100;
    std::size_t forest_max_features = 0;
    std::size_t forest_min_leaf = 2;
    std::size_t forest_downsample = 15;
    std::size_t info_gain_bins = 10;
    double printable_threshold = 0.85;
    double entropy_threshold = 7.2;

    /// Throws iotmon::Error("config", ...) for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void load(const std::filesystem::path& path);
    /// Cross-field range checks.
    void validate() const;

    TimescaleSet scales() const;
    OneClassConfig oneclass() const;
    MonitorConfig monitor() const;
    ForestConfig forest() const;
    EntropyThresholds entropy() const;
};

struct ConfigField {
    std::string key;
    std::string description;
    std::function<std::string(const Config&)> show;
    std::function<void(Config&, const std::string&)> assign;
};

const std::vector<ConfigField>& config_fields();

/// One line per field: key, default and description.
std::string config_help();

}  // namespace iotmon
