#include "iotmon/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iotmon/error.hpp"
#include "iotmon/ingest.hpp"

namespace iotmon {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
    throw Error("config", key + "='" + value + "': " + why);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) bad(key, v, "expected a number");
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad(key, v, "expected a non-negative integer");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key, v, "expected true or false");
}

std::string show_list(const std::vector<std::size_t>& ks) {
    std::string s;
    for (auto k : ks) s += (s.empty() ? "" : ",") + std::to_string(k);
    return s;
}

std::string show_bool(bool b) { return b ? "true" : "false"; }

template <class T>
ConfigField number(std::string key, std::string desc, T Config::*member) {
    ConfigField f;
    f.key = key;
    f.description = std::move(desc);
    f.show = [member](const Config& c) {
        if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
        else return std::to_string(c.*member);
    };
    f.assign = [member, key](Config& c, const std::string& v) {
        if constexpr (std::is_floating_point_v<T>) c.*member = parse_double(key, v);
        else c.*member = static_cast<T>(parse_uint(key, v));
    };
    return f;
}

ConfigField text(std::string key, std::string desc, std::string Config::*member,
                 std::vector<std::string> choices = {}) {
    ConfigField f;
    f.key = key;
    f.description = std::move(desc);
    f.show = [member](const Config& c) { return c.*member; };
    f.assign = [member, key, choices](Config& c, const std::string& v) {
        if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
            std::string all;
            for (const auto& ch : choices) all += (all.empty() ? "" : "|") + ch;
            bad(key, v, "expected one of " + all);
        }
        c.*member = v;
    };
    return f;
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        f.push_back(text("timescales", "attribute timescales: ch5 (1,2,4,8), ch4 (1..64) or a list like 1,4,16",
                         &Config::timescales));
        f.push_back(number("interval_seconds", "flow counter export interval in seconds (> 0)",
                           &Config::interval_seconds));
        f.push_back(number("cumvar_target", "PCA cumulative explained-variance target, in (0, 1]",
                           &Config::cumvar_target));
        {
            ConfigField k;
            k.key = "k_candidates";
            k.description = "comma-separated K values tried by the elbow search, ascending";
            k.show = [](const Config& c) { return show_list(c.k_candidates); };
            k.assign = [](Config& c, const std::string& v) {
                std::vector<std::size_t> ks;
                std::stringstream ss(v);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    const auto n = parse_uint("k_candidates", item);
                    if (n == 0) bad("k_candidates", v, "K must be positive");
                    if (!ks.empty() && n <= ks.back()) bad("k_candidates", v, "values must be strictly ascending");
                    ks.push_back(n);
                }
                if (ks.empty()) bad("k_candidates", v, "at least one K is required");
                c.k_candidates = std::move(ks);
            };
            f.push_back(std::move(k));
        }
        f.push_back(number("deriv_threshold", "elbow threshold on the inertia-per-instance slope (< 0)",
                           &Config::deriv_threshold));
        f.push_back(text("boundary_rule", "cluster boundary rule: percentile | iqr", &Config::boundary_rule,
                         {"percentile", "iqr"}));
        f.push_back(number("boundary_percentile", "member-distance quantile used as boundary, in (0, 1]",
                           &Config::boundary_percentile));
        f.push_back(number("iqr_factor", "IQR multiplier for the iqr boundary rule (>= 0)", &Config::iqr_factor));
        f.push_back(number("rise_target", "score reached from 0.5 after rise_minutes positives, in (0.5, 1)",
                           &Config::rise_target));
        f.push_back(number("rise_minutes", "consecutive positives to reach rise_target (> 0)",
                           &Config::rise_minutes));
        f.push_back(number("fall_target", "score reached from 0.5 after fall_minutes negatives, in (0, 0.5)",
                           &Config::fall_target));
        f.push_back(number("fall_minutes", "consecutive negatives to reach fall_target (> 0)",
                           &Config::fall_minutes));
        f.push_back(number("accept_threshold", "score that accepts an identity and enters the stable phase",
                           &Config::accept_threshold));
        f.push_back(number("alarm_level", "stable-phase score below which an anomaly is raised",
                           &Config::alarm_level));
        f.push_back(number("confidence_floor", "minimum confidence for a positive verdict to count, in [0, 1]",
                           &Config::confidence_floor));
        f.push_back(text("unknown_policy", "initial phase with no winner: freeze | penalize",
                         &Config::unknown_policy, {"freeze", "penalize"}));
        {
            ConfigField b;
            b.key = "floor_in_stable";
            b.description = "apply confidence_floor to the intended model in the stable phase (true|false)";
            b.show = [](const Config& c) { return show_bool(c.floor_in_stable); };
            b.assign = [](Config& c, const std::string& v) { c.floor_in_stable = parse_bool("floor_in_stable", v); };
            f.push_back(std::move(b));
        }
        f.push_back(number("seed", "random seed for K-means, forests and fixtures", &Config::seed));
        f.push_back(number("forest_trees", "trees per forest (> 0)", &Config::forest_trees));
        f.push_back(number("forest_max_features", "features tried per split; 0 means round(sqrt(p))",
                           &Config::forest_max_features));
        f.push_back(number("forest_min_leaf", "minimum samples per leaf (> 0)", &Config::forest_min_leaf));
        f.push_back(number("forest_downsample", "keep every n-th telemetry instance for forest training (> 0)",
                           &Config::forest_downsample));
        f.push_back(number("info_gain_bins", "equal-frequency bins for information gain (> 0)",
                           &Config::info_gain_bins));
        f.push_back(number("printable_threshold", "printable-ASCII share for a plaintext verdict, in [0, 1]",
                           &Config::printable_threshold));
        f.push_back(number("entropy_threshold", "bits per byte for an encrypted verdict, in [0, 8]",
                           &Config::entropy_threshold));
        return f;
    }();
    return fields;
}

void Config::set(const std::string& key, const std::string& value) {
    for (const auto& f : config_fields())
        if (f.key == key) {
            f.assign(*this, value);
            return;
        }
    throw Error("config", "unknown key '" + key + "'");
}

void Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config", "cannot open '" + path.string() + "'");
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw Error("config", "'" + path.string() + "' is not a JSON object");
    for (const auto& [key, v] : doc.items()) {
        std::string text;
        if (v.is_string()) text = v.get<std::string>();
        else if (v.is_boolean()) text = show_bool(v.get<bool>());
        else if (v.is_number_integer() || v.is_number_unsigned()) text = v.dump();
        else if (v.is_number_float()) text = format_double(v.get<double>());
        else if (v.is_array()) {
            for (const auto& e : v) {
                if (!e.is_number_unsigned() && !e.is_number_integer()) bad(key, v.dump(), "expected integers");
                text += (text.empty() ? "" : ",") + e.dump();
            }
        } else {
            bad(key, v.dump(), "unsupported value type");
        }
        set(key, text);
    }
}

void Config::validate() const {
    auto check = [](bool ok, const std::string& key, const std::string& why) {
        if (!ok) throw Error("config", key + ": " + why);
    };
    (void)scales();
    check(interval_seconds > 0, "interval_seconds", "must be positive");
    check(cumvar_target > 0 && cumvar_target <= 1, "cumvar_target", "must lie in (0, 1]");
    check(deriv_threshold < 0, "deriv_threshold", "must be negative");
    check(boundary_percentile > 0 && boundary_percentile <= 1, "boundary_percentile", "must lie in (0, 1]");
    check(iqr_factor >= 0, "iqr_factor", "must be non-negative");
    check(rise_target > 0.5 && rise_target < 1, "rise_target", "must lie in (0.5, 1)");
    check(fall_target > 0 && fall_target < 0.5, "fall_target", "must lie in (0, 0.5)");
    check(rise_minutes > 0, "rise_minutes", "must be positive");
    check(fall_minutes > 0, "fall_minutes", "must be positive");
    check(accept_threshold > 0.01 && accept_threshold <= 0.99, "accept_threshold", "must lie in (0.01, 0.99]");
    check(alarm_level > 0.01 && alarm_level <= 0.99, "alarm_level", "must lie in (0.01, 0.99]");
    check(confidence_floor >= 0 && confidence_floor <= 1, "confidence_floor", "must lie in [0, 1]");
    check(forest_trees > 0, "forest_trees", "must be positive");
    check(forest_min_leaf > 0, "forest_min_leaf", "must be positive");
    check(forest_downsample > 0, "forest_downsample", "must be positive");
    check(info_gain_bins > 0, "info_gain_bins", "must be positive");
    check(printable_threshold >= 0 && printable_threshold <= 1, "printable_threshold", "must lie in [0, 1]");
    check(entropy_threshold >= 0 && entropy_threshold <= 8, "entropy_threshold", "must lie in [0, 8]");
}

TimescaleSet Config::scales() const {
    try {
        return TimescaleSet::parse(timescales);
    } catch (const Error& e) {
        throw Error("config", "timescales: " + std::string(e.what()));
    }
}

OneClassConfig Config::oneclass() const {
    OneClassConfig c;
    c.cumvar_target = cumvar_target;
    c.k_candidates = k_candidates;
    c.deriv_threshold = deriv_threshold;
    c.seed = seed;
    c.boundary.rule = boundary_rule == "iqr" ? BoundaryRule::Iqr : BoundaryRule::Percentile;
    c.boundary.percentile = boundary_percentile;
    c.boundary.iqr_factor = iqr_factor;
    return c;
}

MonitorConfig Config::monitor() const {
    MonitorConfig m;
    m.policy = ScorePolicy{rise_target, rise_minutes, fall_target, fall_minutes};
    m.accept_threshold = accept_threshold;
    m.alarm_level = alarm_level;
    m.confidence_floor = confidence_floor;
    m.unknown = unknown_policy == "penalize" ? UnknownPolicy::Penalize : UnknownPolicy::Freeze;
    m.floor_in_stable = floor_in_stable;
    m.interval_seconds = interval_seconds;
    return m;
}

ForestConfig Config::forest() const {
    ForestConfig f;
    f.trees = forest_trees;
    f.max_features = forest_max_features;
    f.min_leaf = forest_min_leaf;
    f.seed = seed;
    return f;
}

EntropyThresholds Config::entropy() const {
    EntropyThresholds t;
    t.printable_fraction = printable_threshold;
    t.encrypted_entropy = entropy_threshold;
    return t;
}

std::string config_help() {
    const Config defaults;
    std::string out = "Configuration keys (--config FILE with a JSON object, or --set key=value):\n";
    for (const auto& f : config_fields()) {
        std::string head = "  " + f.key + " = " + f.show(defaults);
        if (head.size() < 36) head.resize(36, ' ');
        else head += "  ";
        out += head + f.description + "\n";
    }
    return out;
}

}  // namespace iotmon
