// iotmon command line: telemetry -> attributes -> models -> monitoring.
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "iotmon/config.hpp"
#include "iotmon/error.hpp"
#include "iotmon/fixture.hpp"
#include "iotmon/pipeline.hpp"
#include "iotmon/sececal.hpp"
#include "iotmon/supervised/forest.hpp"
#include "iotmon/supervised/info_gain.hpp"
#include "iotmon/supervised/metrics.hpp"
#include "iotmon/supervised/nbm.hpp"
#include "iotmon/supervised/two_stage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace iotmon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAlarm = 2;
constexpr int kExitUsage = 64;

constexpr double kNoBound = 1e300;

// Output sink: "-" or empty means stdout.
class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        file_.open(path);
        if (!file_) throw Error("output", "cannot write '" + path + "'");
    }
    std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("model", "cannot open '" + path + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error("model", "'" + path + "' is not a JSON document");
    return doc;
}

void write_json(const json& doc, const std::string& path) {
    Output out(path);
    out.get() << doc.dump(1) << '\n';
    if (!out.get()) throw Error("output", "write failed for '" + path + "'");
}

std::map<MacAddress, std::string> device_labels(const std::string& path) {
    std::map<MacAddress, std::string> m;
    for (auto& [mac, name] : read_device_map(path)) m[mac] = name;
    return m;
}

// "aa:..,bb:.." or a device-map file.
std::vector<MacAddress> parse_devices(const std::string& text) {
    std::vector<MacAddress> out;
    if (fs::is_regular_file(text)) {
        for (auto& [mac, name] : read_device_map(text)) out.push_back(mac);
    } else {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(MacAddress::from_string(item));
    }
    if (out.empty()) throw Error("devices", "no devices given");
    return out;
}

std::size_t parse_slot(const std::string& s) {
    for (std::size_t i = 0; i < kStage0Names.size(); ++i)
        if (s == kStage0Names[i]) return i;
    throw Error("nbm", "unknown bag '" + s + "' (ports|domains|ciphers)");
}

std::vector<AttributeInstance> load_instances(const std::string& path, double from, double to) {
    auto all = read_instances(fs::path(path));
    if (from == -kNoBound && to == kNoBound) return all;
    return slice_time(all, from, to);
}

// Hourly samples for the bag-of-words models, keyed by (device, hour).
struct HourSample {
    MacAddress device;
    double window_start = 0.0;
    Stage0Bags bags;
    std::vector<double> quantitative;
};

std::vector<HourSample> hourly_samples(const std::vector<EventRecord>& events, const std::vector<PacketRecord>* packets,
                                       const std::vector<MacAddress>& devices, double window) {
    const std::set<MacAddress> wanted(devices.begin(), devices.end());
    auto bags = bags_from_events(events, window);
    std::map<std::pair<MacAddress, std::int64_t>, Stage0Bags> keyed;
    for (auto& [k, b] : bags)
        if (wanted.count(k.first)) keyed[k] = std::move(b);

    std::map<MacAddress, std::vector<PacketRecord>> by_device;
    if (packets) {
        for (const auto& p : *packets) {
            if (wanted.count(p.src_mac)) by_device[p.src_mac].push_back(p);
            if (p.dst_mac != p.src_mac && wanted.count(p.dst_mac)) by_device[p.dst_mac].push_back(p);
        }
        for (const auto& [dev, pkts] : by_device)
            for (const auto& p : pkts) keyed.try_emplace({dev, static_cast<std::int64_t>(std::floor(p.ts / window))});
    }
    std::vector<HourSample> out;
    out.reserve(keyed.size());
    for (auto& [k, b] : keyed) {
        HourSample s{k.first, static_cast<double>(k.second) * window, std::move(b), {}};
        if (packets) s.quantitative = to_vector(session_attributes(by_device[k.first], k.first, s.window_start));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> session_names() { return {kSessionAttributeNames.begin(), kSessionAttributeNames.end()}; }

struct PredRow {
    MacAddress device;
    double window_start = 0.0;
    std::optional<std::string> truth;
    std::string predicted;
    double confidence = 0.0;
};

void write_predictions(const std::vector<PredRow>& rows, const std::string& path) {
    Output out(path);
    auto& o = out.get();
    o << "device\twindow_start\ttruth\tpredicted\tconfidence\n";
    for (const auto& r : rows)
        o << r.device.str() << '\t' << format_double(r.window_start) << '\t' << r.truth.value_or("-") << '\t'
          << r.predicted << '\t' << format_double(r.confidence) << '\n';
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        f.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) return f;
        start = tab + 1;
    }
}

std::vector<PredRow> read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("evaluate", "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("device\twindow_start\ttruth\tpredicted\tconfidence"))
        throw Error("evaluate", path + ": not a predictions file");
    std::vector<PredRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        const auto mac = f.size() == 5 ? MacAddress::parse(f[0]) : std::nullopt;
        if (!mac) throw Error("evaluate", path + ":" + std::to_string(lineno) + ": malformed row");
        PredRow r;
        r.device = *mac;
        try {
            r.window_start = std::stod(f[1]);
            r.confidence = std::stod(f[4]);
        } catch (const std::exception&) {
            throw Error("evaluate", path + ":" + std::to_string(lineno) + ": malformed number");
        }
        if (f[2] != "-") r.truth = f[2];
        r.predicted = f[3];
        rows.push_back(std::move(r));
    }
    return rows;
}

void report_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iotmon: IoT device classification and behaviour monitoring from flow telemetry"};
    app.footer("\n" + config_help());
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> overrides;
    app.add_option("--config", config_file, "JSON config file");
    app.add_option("--set", overrides, "override one config key (key=value), repeatable");

    Config cfg;
    std::function<int()> action;
    double from = -kNoBound, to = kNoBound;
    auto add_range = [&](CLI::App* sub) {
        sub->add_option("--from", from, "only windows starting at or after this unix time");
        sub->add_option("--to", to, "only windows starting before this unix time");
    };

    // telemetry
    std::string packets_file, devices_arg, gw_text, out_path, unmatched_log;
    auto* telemetry = app.add_subcommand("telemetry", "packet records -> per-minute flow counters");
    telemetry->add_option("--packets", packets_file, "packet JSONL")->required();
    telemetry->add_option("--devices", devices_arg, "comma-separated MACs or a device map file")->required();
    telemetry->add_option("--gw", gw_text, "gateway MAC")->required();
    telemetry->add_option("-o,--output", out_path, "flow counter TSV")->required();
    telemetry->add_option("--unmatched-log", unmatched_log, "write packets that match no rule here (JSONL)");
    telemetry->callback([&] {
        action = [&] {
            const auto gw = MacAddress::from_string(gw_text);
            const auto devices = parse_devices(devices_arg);
            ReadStats stats;
            const auto packets = read_packets(packets_file, &stats);
            const auto table = make_flow_table(gw, devices);
            CounterExporter exporter(table, cfg.interval_seconds);
            std::ofstream unmatched;
            if (!unmatched_log.empty()) {
                unmatched.open(unmatched_log);
                if (!unmatched) throw Error("telemetry", "cannot write '" + unmatched_log + "'");
                exporter.on_unmatched([&](const PacketRecord& p) { unmatched << to_json_line(p) << '\n'; });
            }
            for (const auto& p : packets) exporter.add(p);
            write_flow_counters(exporter.finish(), fs::path(out_path));
            std::cerr << "packets " << stats.records << ", malformed " << stats.malformed << ", matched "
                      << exporter.matched() << ", unmatched " << exporter.unmatched() << '\n';
            return kExitOk;
        };
    });

    // synthesize
    std::string flows_file, preset, labels_file;
    auto* synth = app.add_subcommand("synthesize", "flow counters -> attribute instances");
    synth->add_option("--flows", flows_file, "flow counter TSV")->required();
    synth->add_option("--preset", preset, "timescales (ch5, ch4 or a list); defaults to the config value");
    synth->add_option("--labels", labels_file, "device map used to label instances");
    synth->add_option("-o,--output", out_path, "instances TSV")->required();
    synth->callback([&] {
        action = [&] {
            const auto scales = preset.empty() ? cfg.scales() : TimescaleSet::parse(preset);
            const auto series = read_flow_counters(fs::path(flows_file));
            auto instances = synthesize(series, scales, cfg.interval_seconds);
            if (!labels_file.empty()) apply_labels(instances, device_labels(labels_file));
            write_instances(instances, fs::path(out_path));
            std::cerr << instances.size() << " instances\n";
            return kExitOk;
        };
    });

    // train-oneclass
    std::string instances_file, class_name, device_text;
    auto* train1 = app.add_subcommand("train-oneclass", "fit one device's one-class model");
    train1->add_option("--instances", instances_file, "instances TSV")->required();
    train1->add_option("--class", class_name, "class name; selects instances by label")->required();
    train1->add_option("--device", device_text, "select instances by device MAC instead of label");
    train1->add_option("-o,--output", out_path, "model file, or a directory to write <class>.json into")->required();
    add_range(train1);
    train1->callback([&] {
        action = [&] {
            const auto all = load_instances(instances_file, from, to);
            std::vector<AttributeInstance> mine;
            const auto dev = device_text.empty() ? std::nullopt : std::optional(MacAddress::from_string(device_text));
            for (const auto& i : all) {
                const bool take = dev ? i.device == *dev : (i.label && label_class(*i.label) == class_name);
                if (take) mine.push_back(i);
            }
            if (mine.empty()) throw Error("train-oneclass", "no instances selected for class '" + class_name + "'");
            std::vector<std::string> warnings;
            const auto model = train_device_model(mine, class_name, cfg.oneclass(), &warnings);
            report_warnings(warnings);
            fs::path target = out_path;
            if (fs::is_directory(target)) target /= class_name + ".json";
            save_model(model, target);
            std::cerr << class_name << ": " << mine.size() << " instances, K=" << model.k() << ", "
                      << model.projector.retained << " components\n";
            return kExitOk;
        };
    });

    // train-supervised
    std::string events_file, slot_name = "domains", model_file;
    double window = 3600.0;
    auto* trains = app.add_subcommand("train-supervised", "fit a supervised baseline");
    trains->require_subcommand(1);
    auto* t_nbm = trains->add_subcommand("nbm", "Naive Bayes over one bag of words");
    t_nbm->add_option("--events", events_file, "event JSONL")->required();
    t_nbm->add_option("--devices", devices_arg, "device map (MAC<TAB>class)")->required();
    t_nbm->add_option("--bag", slot_name, "ports | domains | ciphers")->capture_default_str();
    t_nbm->add_option("--window", window, "bag window in seconds")->capture_default_str();
    t_nbm->add_option("-o,--output", out_path, "model file")->required();
    t_nbm->callback([&] {
        action = [&] {
            const auto slot = parse_slot(slot_name);
            const auto labels = device_labels(devices_arg);
            std::vector<MacAddress> devs;
            for (const auto& [m, n] : labels) devs.push_back(m);
            std::vector<LabeledBag> training;
            for (auto& s : hourly_samples(read_events(events_file), nullptr, devs, window))
                training.push_back({labels.at(s.device), std::move(s.bags[slot])});
            json doc = to_json(nbm_train(training));
            doc["bag"] = slot_name;
            doc["window"] = window;
            write_json(doc, out_path);
            std::cerr << training.size() << " bags\n";
            return kExitOk;
        };
    });
    auto* t_forest = trains->add_subcommand("forest", "random forest over attribute instances");
    t_forest->add_option("--instances", instances_file, "labelled instances TSV")->required();
    t_forest->add_option("-o,--output", out_path, "model file")->required();
    add_range(t_forest);
    t_forest->callback([&] {
        action = [&] {
            const auto all = load_instances(instances_file, from, to);
            const auto kept = downsample(all, cfg.forest_downsample);
            if (kept.empty()) throw Error("forest", "no instances");
            const auto names = common_attribute_names(kept);
            std::vector<double> rows;
            std::vector<std::string> labels;
            for (const auto& i : kept) {
                if (!i.label) throw Error("forest", "instance of " + i.device.str() + " has no label");
                rows.insert(rows.end(), i.values.begin(), i.values.end());
                labels.push_back(*i.label);
            }
            std::vector<std::string> warnings;
            const auto model = forest_train(rows, names.size(), labels, names, cfg.forest(), &warnings);
            report_warnings(warnings);
            write_json(to_json(model), out_path);
            std::cerr << kept.size() << " instances, " << model.classes.size() << " classes\n";
            return kExitOk;
        };
    });
    auto* t_two = trains->add_subcommand("two-stage", "three Naive Bayes models feeding a forest");
    t_two->add_option("--events", events_file, "event JSONL")->required();
    t_two->add_option("--packets", packets_file, "packet JSONL for the hourly session attributes")->required();
    t_two->add_option("--devices", devices_arg, "device map (MAC<TAB>class)")->required();
    t_two->add_option("--window", window, "window in seconds")->capture_default_str();
    t_two->add_option("-o,--output", out_path, "model file")->required();
    t_two->callback([&] {
        action = [&] {
            const auto labels = device_labels(devices_arg);
            std::vector<MacAddress> devs;
            for (const auto& [m, n] : labels) devs.push_back(m);
            const auto packets = read_packets(packets_file);
            std::vector<TwoStageSample> samples;
            for (auto& s : hourly_samples(read_events(events_file), &packets, devs, window))
                samples.push_back({labels.at(s.device), std::move(s.bags), std::move(s.quantitative)});
            std::vector<std::string> warnings;
            const auto model = two_stage_train(samples, session_names(), cfg.forest(), &warnings);
            report_warnings(warnings);
            json doc = to_json(model);
            doc["window"] = window;
            write_json(doc, out_path);
            std::cerr << samples.size() << " samples\n";
            return kExitOk;
        };
    });

    // predict
    auto* predict = app.add_subcommand("predict", "apply a supervised model");
    predict->add_option("--model", model_file, "model written by train-supervised")->required();
    predict->add_option("--instances", instances_file, "instances TSV (forest)");
    predict->add_option("--events", events_file, "event JSONL (nbm, two-stage)");
    predict->add_option("--packets", packets_file, "packet JSONL (two-stage)");
    predict->add_option("--devices", devices_arg, "device map; selects devices and fills the truth column");
    predict->add_option("-o,--output", out_path, "predictions TSV (default stdout)");
    add_range(predict);
    predict->callback([&] {
        action = [&] {
            const json doc = read_json(model_file);
            const std::string format = doc.value("format", "");
            std::map<MacAddress, std::string> labels;
            if (!devices_arg.empty()) labels = device_labels(devices_arg);
            std::vector<PredRow> rows;
            if (format == "iotmon-forest") {
                if (instances_file.empty()) throw Error("predict", "forest models need --instances");
                const auto model = forest_from_json(doc);
                for (const auto& i : load_instances(instances_file, from, to)) {
                    if (!labels.empty() && !labels.count(i.device)) continue;
                    if (i.schema && *i.schema != model.attributes)
                        throw Error("predict", "instance attributes differ from the model's");
                    const auto p = forest_predict(model, i.values);
                    std::optional<std::string> truth = i.label;
                    if (auto it = labels.find(i.device); it != labels.end()) truth = it->second;
                    rows.push_back({i.device, i.window_start, truth, p.label, p.confidence});
                }
            } else if (format == "iotmon-nbm" || format == "iotmon-two-stage") {
                if (events_file.empty()) throw Error("predict", "bag-of-words models need --events");
                if (labels.empty()) throw Error("predict", "bag-of-words models need --devices");
                const bool two = format == "iotmon-two-stage";
                if (two && packets_file.empty()) throw Error("predict", "two-stage models need --packets");
                std::vector<MacAddress> devs;
                for (const auto& [m, n] : labels) devs.push_back(m);
                std::vector<PacketRecord> packets;
                if (two) packets = read_packets(packets_file);
                const double w = doc.value("window", 3600.0);
                const auto samples = hourly_samples(read_events(events_file), two ? &packets : nullptr, devs, w);
                if (two) {
                    const auto model = two_stage_from_json(doc);
                    for (const auto& s : samples) {
                        if (s.window_start < from || s.window_start >= to) continue;
                        const auto p = two_stage_predict(model, s.bags, s.quantitative);
                        rows.push_back({s.device, s.window_start, labels.at(s.device), p.label, p.confidence});
                    }
                } else {
                    const auto model = nbm_from_json(doc);
                    const auto slot = parse_slot(doc.value("bag", "domains"));
                    for (const auto& s : samples) {
                        if (s.window_start < from || s.window_start >= to) continue;
                        const auto p = nbm_predict(model, s.bags[slot]);
                        rows.push_back({s.device, s.window_start, labels.at(s.device), p.label, p.confidence});
                    }
                }
            } else {
                throw Error("predict", "'" + model_file + "' is not a supervised model");
            }
            write_predictions(rows, out_path);
            return kExitOk;
        };
    });

    // monitor
    std::string models_dir;
    auto* monitor = app.add_subcommand("monitor", "run the initial/stable phase machine over instances");
    monitor->add_option("--instances", instances_file, "instances TSV")->required();
    monitor->add_option("--models", models_dir, "directory of one-class models (*.json)")->required();
    monitor->add_option("-o,--output", out_path, "monitor TSV (default stdout)");
    add_range(monitor);
    monitor->callback([&] {
        action = [&] {
            const auto registry = load_registry(models_dir);
            const auto instances = load_instances(instances_file, from, to);
            const auto rows = run_monitor(instances, registry, cfg.monitor());
            Output out(out_path);
            write_monitor_log(rows, out.get());
            std::map<MacAddress, std::optional<std::string>> intended;
            std::size_t alarms = 0;
            for (const auto& r : rows) {
                auto& slot = intended[r.device];
                if (r.result.phase == Phase::Stable && !slot) slot = r.result.winner;
                if (r.result.anomaly) {
                    ++alarms;
                    std::cerr << "alarm " << r.device.str() << " minute " << r.result.anomaly->minute << " model "
                              << r.result.anomaly->model << " score " << format_double(r.result.anomaly->score)
                              << '\n';
                }
            }
            for (const auto& [dev, model] : intended)
                std::cerr << dev.str() << " -> " << model.value_or("unknown") << '\n';
            return alarms > 0 ? kExitAlarm : kExitOk;
        };
    });

    // evaluate
    std::string pred_file, truth_file, confusion_file;
    auto* evaluate = app.add_subcommand("evaluate", "precision/recall/F1 and a confusion matrix");
    evaluate->add_option("--pred", pred_file, "predictions TSV")->required();
    evaluate->add_option("--truth", truth_file, "device map giving each device's class (default: truth column)");
    evaluate->add_option("--confusion", confusion_file, "confusion matrix TSV (default stdout after metrics)");
    evaluate->callback([&] {
        action = [&] {
            auto rows = read_predictions(pred_file);
            std::map<MacAddress, std::string> truth;
            if (!truth_file.empty()) truth = device_labels(truth_file);
            std::vector<std::string> actual, predicted;
            for (const auto& r : rows) {
                std::optional<std::string> t = r.truth;
                if (auto it = truth.find(r.device); it != truth.end()) t = it->second;
                if (!t) throw Error("evaluate", "no truth for " + r.device.str());
                actual.push_back(*t);
                predicted.push_back(r.predicted);
            }
            if (actual.empty()) throw Error("evaluate", "no predictions");
            const auto cm = ConfusionMatrix::from_pairs(actual, predicted);
            write_metrics_tsv(compute_metrics(cm), std::cout);
            if (confusion_file.empty()) {
                std::cout << '\n';
                write_confusion_tsv(cm, std::cout);
            } else {
                Output out(confusion_file);
                write_confusion_tsv(cm, out.get());
            }
            return kExitOk;
        };
    });

    // rank-attributes
    auto* rank = app.add_subcommand("rank-attributes", "information gain of every attribute");
    rank->add_option("--instances", instances_file, "labelled instances TSV")->required();
    rank->add_option("-o,--output", out_path, "ranking TSV (default stdout)");
    add_range(rank);
    rank->callback([&] {
        action = [&] {
            const auto ranks = rank_attributes(load_instances(instances_file, from, to), cfg.info_gain_bins);
            Output out(out_path);
            out.get() << "attribute\tinfo_gain\n";
            for (const auto& r : ranks) out.get() << r.attribute << '\t' << format_double(r.gain) << '\n';
            return kExitOk;
        };
    });

    // entropy
    std::string entropy_file;
    auto* entropy = app.add_subcommand("entropy", "classify a payload as plaintext/encoded/encrypted-like");
    entropy->add_option("file", entropy_file, "payload bytes")->required();
    entropy->callback([&] {
        action = [&] {
            std::cout << to_json(classify_file(entropy_file, cfg.entropy())).dump(1) << '\n';
            return kExitOk;
        };
    });

    // gen-fixture
    std::size_t n_devices = 5;
    double days = 14.0;
    std::optional<std::size_t> flood_device;
    FloodInjection flood;
    bool no_replies = false;
    auto* gen = app.add_subcommand("gen-fixture", "synthetic traffic for N device profiles");
    gen->add_option("-o,--output", out_path, "output directory")->required();
    gen->add_option("--devices", n_devices, "number of profiles (1-5)")->capture_default_str();
    gen->add_option("--days", days, "simulated days")->capture_default_str();
    gen->add_option("--flood-device", flood_device, "inject a flood into this profile's remote flows");
    gen->add_option("--flood-start", flood.start_minute, "flood start, minutes from the fixture start")
        ->capture_default_str();
    gen->add_option("--flood-minutes", flood.duration_minutes, "flood length")->capture_default_str();
    gen->add_option("--flood-rate", flood.packets_per_minute, "flood packets per minute")->capture_default_str();
    gen->add_option("--flood-bytes", flood.packet_bytes, "flood packet size; 0 uses the heartbeat size")
        ->capture_default_str();
    gen->add_flag("--flood-no-replies", no_replies, "the device does not answer flood packets");
    gen->callback([&] {
        action = [&] {
            FixtureConfig fc;
            fc.devices = n_devices;
            fc.days = days;
            fc.seed = cfg.seed;
            if (flood_device) {
                flood.device = *flood_device;
                flood.replies = !no_replies;
                fc.flood = flood;
            }
            const auto fx = generate_fixture(fc);
            const fs::path dir = out_path;
            fs::create_directories(dir);
            write_packets(fx.packets, dir / "packets.jsonl");
            write_events(fx.events, dir / "events.jsonl");
            write_device_map(fx, dir / "devices.tsv");
            json meta{{"gateway", fx.gateway.str()},
                      {"start_ts", fc.start_ts},
                      {"end_ts", fc.start_ts + fc.days * 86400.0},
                      {"seed", fc.seed},
                      {"packets", fx.packets.size()},
                      {"events", fx.events.size()}};
            if (fc.flood)
                meta["flood"] = {{"device", fx.profiles.at(fc.flood->device).mac.str()},
                                 {"start_ts", fc.start_ts + fc.flood->start_minute * 60.0},
                                 {"minutes", fc.flood->duration_minutes},
                                 {"packets_per_minute", fc.flood->packets_per_minute}};
            write_json(meta, (dir / "fixture.json").string());
            std::ofstream(dir / "gateway.txt") << fx.gateway.str() << '\n';
            std::cerr << fx.packets.size() << " packets, " << fx.events.size() << " events\n";
            return kExitOk;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (!config_file.empty()) cfg.load(config_file);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::cerr << "--set expects key=value, got '" << kv << "'\n" << app.help();
                return kExitUsage;
            }
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        return action();
    } catch (const std::exception& e) {
        std::string what = e.what();
        for (auto& c : what)
            if (c == '\n') c = ' ';
        std::cerr << "error: " << what << '\n';
        return kExitError;
    }
}
