#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iotmon/oneclass.hpp"

namespace iotmon {

/// Per-instance rate that moves the score from 0.5 to `target` in `minutes`
/// consecutive updates: ln(target / (1 - target)) / minutes.
double lambda_from_policy(double target, double minutes);

/// One raw step of the sigmoid score map, S e^l / (1 + S (e^l - 1)).
double sigmoid_update(double score, double lambda);

/// Rise/fall policy expressed as (target score, minutes from 0.5).
struct ScorePolicy {
    double rise_target = 0.99;
    double rise_minutes = 720.0;  // 12 hours
    double fall_target = 0.01;
    double fall_minutes = 90.0;  // 1.5 hours

    double lambda_rise() const { return lambda_from_policy(rise_target, rise_minutes); }
    double lambda_fall() const { return lambda_from_policy(fall_target, fall_minutes); }
};

class ScoreTracker {
public:
    static constexpr double kFloor = 0.01;
    static constexpr double kCap = 0.99;
    static constexpr double kInitial = 0.01;

    ScoreTracker(double lambda_rise, double lambda_fall, double initial = kInitial);

    /// Applies the rise rate on a positive outcome and the fall rate on a
    /// negative one, then clamps to [0.01, 0.99].
    double update(bool positive);

    double score() const noexcept { return score_; }
    double lambda_rise() const noexcept { return lambda_rise_; }
    double lambda_fall() const noexcept { return lambda_fall_; }

private:
    double lambda_rise_;
    double lambda_fall_;
    double score_;
};

/// Highest-confidence positive verdict at or above `confidence_floor`;
/// ties go to the lexicographically smallest class. nullopt means "unknown".
std::optional<std::string> resolve_conflict(const std::map<std::string, ModelVerdict>& verdicts,
                                            double confidence_floor);

enum class Phase { Initial, Stable };

std::string_view to_string(Phase phase);

/// What happens to the trackers when no model wins an initial-phase instance.
enum class UnknownPolicy {
    Freeze,    // no tracker moves
    Penalize,  // every tracker takes a negative update
};

struct MonitorConfig {
    ScorePolicy policy;
    double accept_threshold = 0.90;
    double alarm_level = 0.50;
    double confidence_floor = 0.025;
    UnknownPolicy unknown = UnknownPolicy::Freeze;
    /// Treat low-confidence positives of the intended model as negative.
    bool floor_in_stable = true;
    double interval_seconds = 60.0;  // instance cadence; one instance = one step
};

/// Read-only set of trained models keyed by class name.
using ModelRegistry = std::map<std::string, DeviceModel>;

ModelRegistry load_registry(const std::filesystem::path& dir);

struct AnomalyEvent {
    MacAddress device;
    std::int64_t minute = 0;
    std::string model;
    double score = 0.0;
};

struct StepResult {
    std::int64_t minute = 0;
    Phase phase = Phase::Initial;  // phase the instance was evaluated in
    std::optional<std::string> winner;
    double confidence = 0.0;
    double score = 0.0;
    std::size_t models_consulted = 0;
    std::optional<AnomalyEvent> anomaly;
};

/// Initial/stable state machine for one device.
class DeviceMonitor {
public:
    DeviceMonitor(MacAddress device, MonitorConfig config);

    StepResult step(const AttributeInstance& instance, const ModelRegistry& registry);

    Phase phase() const noexcept { return phase_; }
    const std::optional<std::string>& intended_model() const noexcept { return intended_; }
    double score(const std::string& model) const;
    MacAddress device() const noexcept { return device_; }

private:
    ScoreTracker& tracker(const std::string& model);

    MacAddress device_;
    MonitorConfig config_;
    Phase phase_ = Phase::Initial;
    std::optional<std::string> intended_;
    std::map<std::string, ScoreTracker> trackers_;
};

/// Runs one monitor per device over instances ordered by window_start.
/// Returns rows in processing order (device-major).
struct MonitorRow {
    MacAddress device;
    StepResult result;
};

std::vector<MonitorRow> run_monitor(std::span<const AttributeInstance> instances, const ModelRegistry& registry,
                                    const MonitorConfig& config);

/// `.monitor.tsv`: `minute device phase winner confidence score alarm`.
void write_monitor_log(std::span<const MonitorRow> rows, std::ostream& out);
void write_monitor_log(std::span<const MonitorRow> rows, const std::filesystem::path& path);

}  // namespace iotmon
