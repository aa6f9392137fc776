#include "iotmon/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "iotmon/error.hpp"

namespace iotmon {

double lambda_from_policy(double target, double minutes) {
    if (!(target > 0.0 && target < 1.0) || target == 0.5)
        throw Error("monitor", "target score must lie in (0, 1) and differ from 0.5");
    if (!(minutes > 0.0)) throw Error("monitor", "time to target must be positive");
    return std::log(target / (1.0 - target)) / minutes;
}

double sigmoid_update(double score, double lambda) {
    return score * std::exp(lambda) / (1.0 + score * std::expm1(lambda));
}

ScoreTracker::ScoreTracker(double lambda_rise, double lambda_fall, double initial)
    : lambda_rise_(lambda_rise), lambda_fall_(lambda_fall), score_(std::clamp(initial, kFloor, kCap)) {
    if (!(lambda_rise > 0.0) || !(lambda_fall < 0.0))
        throw Error("monitor", "rise rate must be positive and fall rate negative");
}

double ScoreTracker::update(bool positive) {
    score_ = std::clamp(sigmoid_update(score_, positive ? lambda_rise_ : lambda_fall_), kFloor, kCap);
    return score_;
}

std::optional<std::string> resolve_conflict(const std::map<std::string, ModelVerdict>& verdicts,
                                            double confidence_floor) {
    std::optional<std::string> winner;
    double best = -1.0;
    // std::map iterates in lexicographic order, so strict '>' keeps the
    // smallest name on ties.
    for (const auto& [name, v] : verdicts) {
        if (!v.positive || v.confidence < confidence_floor) continue;
        if (v.confidence > best) {
            best = v.confidence;
            winner = name;
        }
    }
    return winner;
}

std::string_view to_string(Phase phase) { return phase == Phase::Initial ? "initial" : "stable"; }

ModelRegistry load_registry(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("monitor", "'" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    ModelRegistry reg;
    for (const auto& f : files) {
        DeviceModel m = load_model(f);
        const std::string name = m.device_class;
        if (!reg.emplace(name, std::move(m)).second)
            throw Error("monitor", "two models for class '" + name + "' in " + dir.string());
    }
    if (reg.empty()) throw Error("monitor", "no model files (*.json) in '" + dir.string() + "'");
    return reg;
}

// ---------------------------------------------------------------------------

DeviceMonitor::DeviceMonitor(MacAddress device, MonitorConfig config) : device_(device), config_(config) {
    if (!(config_.accept_threshold > ScoreTracker::kFloor && config_.accept_threshold <= ScoreTracker::kCap))
        throw Error("monitor", "accept threshold must lie in (0.01, 0.99]");
    if (!(config_.alarm_level > ScoreTracker::kFloor && config_.alarm_level <= ScoreTracker::kCap))
        throw Error("monitor", "alarm level must lie in (0.01, 0.99]");
    if (!(config_.confidence_floor >= 0.0 && config_.confidence_floor <= 1.0))
        throw Error("monitor", "confidence floor must lie in [0, 1]");
}

ScoreTracker& DeviceMonitor::tracker(const std::string& model) {
    auto it = trackers_.find(model);
    if (it == trackers_.end())
        it = trackers_.emplace(model, ScoreTracker(config_.policy.lambda_rise(), config_.policy.lambda_fall())).first;
    return it->second;
}

double DeviceMonitor::score(const std::string& model) const {
    auto it = trackers_.find(model);
    return it == trackers_.end() ? ScoreTracker::kInitial : it->second.score();
}

StepResult DeviceMonitor::step(const AttributeInstance& instance, const ModelRegistry& registry) {
    if (registry.empty()) throw Error("monitor", "empty model registry");
    StepResult out;
    out.minute = static_cast<std::int64_t>(std::floor(instance.window_start / config_.interval_seconds));
    out.phase = phase_;

    if (phase_ == Phase::Stable) {
        auto it = registry.find(*intended_);
        if (it == registry.end()) throw Error("monitor", "intended model '" + *intended_ + "' left the registry");
        const ModelVerdict v = test_instance(it->second, instance);
        out.models_consulted = 1;
        const bool positive = v.positive && (!config_.floor_in_stable || v.confidence >= config_.confidence_floor);
        ScoreTracker& t = tracker(*intended_);
        const double before = t.score();
        out.score = t.update(positive);
        out.confidence = v.confidence;
        if (positive) out.winner = *intended_;
        if (before >= config_.alarm_level && out.score < config_.alarm_level)
            out.anomaly = AnomalyEvent{device_, out.minute, *intended_, out.score};
        return out;
    }

    std::map<std::string, ModelVerdict> verdicts;
    for (const auto& [name, model] : registry) verdicts.emplace(name, test_instance(model, instance));
    out.models_consulted = verdicts.size();
    out.winner = resolve_conflict(verdicts, config_.confidence_floor);

    if (out.winner || config_.unknown == UnknownPolicy::Penalize) {
        for (const auto& [name, model] : registry) tracker(name).update(out.winner && name == *out.winner);
    }

    std::optional<std::string> leader;
    double lead = -1.0;
    for (const auto& [name, model] : registry) {
        const double s = tracker(name).score();
        if (s > lead) {
            lead = s;
            leader = name;
        }
    }
    if (out.winner) {
        out.confidence = verdicts.at(*out.winner).confidence;
        out.score = tracker(*out.winner).score();
    } else {
        out.score = lead;
    }
    if (lead >= config_.accept_threshold) {
        phase_ = Phase::Stable;
        intended_ = leader;
    }
    return out;
}

std::vector<MonitorRow> run_monitor(std::span<const AttributeInstance> instances, const ModelRegistry& registry,
                                    const MonitorConfig& config) {
    std::vector<MacAddress> order;
    std::map<MacAddress, std::vector<const AttributeInstance*>> by_device;
    for (const auto& inst : instances) {
        auto& bucket = by_device[inst.device];
        if (bucket.empty()) order.push_back(inst.device);
        bucket.push_back(&inst);
    }
    std::vector<MonitorRow> rows;
    rows.reserve(instances.size());
    for (MacAddress dev : order) {
        auto& bucket = by_device[dev];
        std::stable_sort(bucket.begin(), bucket.end(),
                         [](auto* a, auto* b) { return a->window_start < b->window_start; });
        DeviceMonitor mon(dev, config);
        for (const auto* inst : bucket) rows.push_back({dev, mon.step(*inst, registry)});
    }
    return rows;
}

void write_monitor_log(std::span<const MonitorRow> rows, std::ostream& out) {
    out << "minute\tdevice\tphase\twinner\tconfidence\tscore\talarm\n";
    for (const auto& r : rows) {
        const auto& s = r.result;
        out << s.minute << '\t' << r.device.str() << '\t' << to_string(s.phase) << '\t'
            << (s.winner ? *s.winner : std::string("-")) << '\t' << format_double(s.confidence) << '\t'
            << format_double(s.score) << '\t' << (s.anomaly ? 1 : 0) << '\n';
    }
}

void write_monitor_log(std::span<const MonitorRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("monitor", "cannot write '" + path.string() + "'");
    write_monitor_log(rows, out);
}

}  // namespace iotmon
