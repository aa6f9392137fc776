// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
// Usage: acceptance [N ...]   (no arguments runs all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "iotmon/attributes.hpp"
#include "iotmon/fixture.hpp"
#include "iotmon/flowtable.hpp"
#include "iotmon/monitor.hpp"
#include "iotmon/oneclass.hpp"
#include "iotmon/pipeline.hpp"
#include "iotmon/random.hpp"
#include "iotmon/sececal.hpp"
#include "iotmon/supervised/forest.hpp"
#include "iotmon/supervised/metrics.hpp"
#include "iotmon/supervised/nbm.hpp"

using namespace iotmon;
using Rational = boost::multiprecision::cpp_rational;

namespace {

// Tolerances and budgets, pinned.
constexpr double kScoreTol = 1e-6;
constexpr double kBudgetScoreSec = 1.0;
constexpr double kBudgetBandSec = 1.0;
constexpr double kBudgetNbmSec = 5.0;
constexpr double kBudgetClassifySec = 120.0;
constexpr double kBudgetAttackSec = 180.0;
constexpr double kBudgetTelemetrySec = 30.0;
constexpr double kPrecisionTarget = 0.979;
constexpr double kPrecisionTol = 0.0005;
constexpr double kStableWithinMinutes = 24 * 60;
constexpr double kAttackNegativeShare = 0.90;
constexpr std::int64_t kAlarmWithinMinutes = 95;
constexpr double kForestFlagCeiling = 0.50;
constexpr double kUniformEntropyMin = 7.99;

// Fixture layout: ten days train, the last four are monitored.
constexpr double kDays = 14.0;
constexpr double kTrainDays = 10.0;
constexpr std::size_t kFloodDevice = 1;  // camera
constexpr double kFloodStartMinute = 12 * 1440 + 600;  // day 12, 10:00
constexpr double kFloodMinutes = 180;
constexpr double kFloodRate = 100;
constexpr std::uint32_t kFloodBytes = 1400;  // MTU-sized frames

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome score_dynamics() {
    const auto t0 = Clock::now();
    const double lr = std::log(99.0) / 720.0;
    const double lf = std::log(1.0 / 99.0) / 90.0;
    ScoreTracker up(lr, lf, 0.5);
    for (int i = 0; i < 720; ++i) up.update(true);
    ScoreTracker down(lr, lf, 0.99);
    for (int i = 0; i < 90; ++i) down.update(false);
    const double at90 = down.score();
    for (int i = 0; i < 90; ++i) down.update(false);
    const double at180 = down.score();
    const double secs = seconds_since(t0);
    const bool ok = std::abs(up.score() - 0.99) <= kScoreTol && std::abs(at90 - 0.50) <= kScoreTol &&
                    std::abs(at180 - 0.01) <= kScoreTol && secs < kBudgetScoreSec;
    return {ok, fmt("720 up -> %.9f, 90 down -> %.9f, 180 down -> %.9f, %.3fs", up.score(), at90, at180, secs)};
}

// ---------------------------------------------------------------------------

Outcome band_probabilities() {
    const auto t0 = Clock::now();
    // Fixture-trained models: every cluster's band table sums to exactly 1.
    FixtureConfig fc;
    fc.days = 1.0;
    const Fixture fx = generate_fixture(fc);
    std::vector<MacAddress> devs;
    std::map<MacAddress, std::string> labels;
    for (const auto& p : fx.profiles) devs.push_back(p.mac), labels[p.mac] = p.name;
    auto insts = telemetry_instances(fx.packets, make_flow_table(fx.gateway, devs), TimescaleSet::ch5());
    apply_labels(insts, labels);

    std::size_t clusters = 0, bad_sum = 0, bad_double = 0;
    for (const auto& p : fx.profiles) {
        std::vector<AttributeInstance> mine;
        for (const auto& i : insts)
            if (i.device == p.mac) mine.push_back(i);
        const DeviceModel m = train_device_model(mine, p.name);
        for (std::size_t c = 0; c < m.k(); ++c, ++clusters) {
            Rational sum = 0;
            const Rational denom = Rational(kBands + m.retained_count[c]);
            for (std::size_t l = 0; l < kBands; ++l) {
                const Rational q = Rational(1 + m.band_count[c][l]) / denom;
                sum += q;
                if (m.band_prob[c][l] != static_cast<double>(q)) ++bad_double;
            }
            if (sum != 1) ++bad_sum;
        }
    }

    // A 90-member cluster with an empty innermost band.
    DeviceModel hand;
    hand.centroids = RowMatrix::Zero(1, 1);
    hand.boundary.percentile = 1.0;
    RowMatrix pts(90, 1);
    for (int i = 0; i < 90; ++i) pts(i, 0) = 0.15 + 0.85 * i / 89.0;
    std::vector<std::size_t> assign(90, 0);
    fit_boundaries_and_bands(hand, pts, assign);
    const double empty = hand.band_prob[0][0];
    const double secs = seconds_since(t0);
    const bool ok = clusters > 0 && bad_sum == 0 && bad_double == 0 && hand.retained_count[0] == 90 &&
                    hand.band_count[0][0] == 0 && empty == 0.01 && secs < kBudgetBandSec;
    return {ok, fmt("%zu clusters, %zu sums != 1, %zu inexact doubles, empty band -> %.17g, %.3fs", clusters,
                    bad_sum, bad_double, empty, secs)};
}

// ---------------------------------------------------------------------------

Outcome nbm_oracle() {
    const auto t0 = Clock::now();
    // Three classes over words a, b, c; "d" is never seen in training and
    // lands in the "others" column, so the vocabulary has four columns.
    const std::vector<LabeledBag> train = {
        {"x", {{"a", 3}, {"b", 1}}}, {"x", {{"a", 2}}},         {"x", {{"c", 1}}},  {"x", {{"a", 1}, {"b", 1}}},
        {"y", {{"b", 4}, {"c", 1}}}, {"y", {{"b", 1}, {"a", 1}}}, {"y", {{"c", 2}}},
        {"z", {{"c", 5}}},           {"z", {{"a", 1}, {"c", 1}}},
    };
    const NbmModel model = nbm_train(train);
    const std::size_t n_words = model.vocabulary.size();
    const std::size_t n_cls = model.classes.size();

    // Exact oracle: P(c) * prod_w Pr(w|c)^n_w in rationals.
    std::vector<Rational> prior(n_cls);
    std::vector<std::vector<Rational>> pw(n_cls, std::vector<Rational>(n_words));
    std::size_t total = 0;
    for (auto n : model.class_instances) total += n;
    for (std::size_t c = 0; c < n_cls; ++c) {
        prior[c] = Rational(model.class_instances[c], total);
        std::uint64_t class_total = 0;
        for (const auto& lb : train)
            if (lb.label == model.classes[c])
                for (const auto& [w, n] : lb.bag) class_total += n;
        for (std::size_t w = 0; w < n_words; ++w) {
            std::uint64_t n = 0;
            for (const auto& lb : train)
                if (lb.label == model.classes[c])
                    if (auto it = lb.bag.find(model.vocabulary[w]); it != lb.bag.end()) n += it->second;
            pw[c][w] = Rational(1 + n, n_words + class_total);
        }
    }
    std::size_t norm_bad = 0;
    for (std::size_t c = 0; c < n_cls; ++c)
        if (std::accumulate(pw[c].begin(), pw[c].end(), Rational(0)) != 1) ++norm_bad;

    const std::vector<std::string> words = {"a", "b", "c", "d"};
    std::size_t cases = 0, agree = 0, ties = 0;
    double max_conf_err = 0;
    for (int code = 0; code < 256; ++code) {
        BagOfWords bag;
        std::vector<int> n(4);
        for (int w = 0; w < 4; ++w) {
            n[w] = (code >> (2 * w)) & 3;
            if (n[w]) bag[words[w]] = static_cast<std::uint64_t>(n[w]);
        }
        std::vector<Rational> post(n_cls);
        for (std::size_t c = 0; c < n_cls; ++c) {
            post[c] = prior[c];
            for (int w = 0; w < 4; ++w)
                for (int k = 0; k < n[w]; ++k) post[c] *= pw[c][model.word_index(words[w])];
        }
        const auto best = static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin());
        if (std::count(post.begin(), post.end(), post[best]) > 1) ++ties;
        const Rational z = std::accumulate(post.begin(), post.end(), Rational(0));
        const NbmPrediction p = nbm_predict(model, bag);
        ++cases;
        if (p.class_index == best) ++agree;
        max_conf_err = std::max(max_conf_err, std::abs(p.confidence - static_cast<double>(post[best] / z)));
    }
    const double secs = seconds_since(t0);
    const bool ok = cases >= 200 && agree == cases && ties == 0 && norm_bad == 0 && max_conf_err < 1e-12 &&
                    secs < kBudgetNbmSec;
    return {ok, fmt("%zu/%zu bags agree, %zu exact ties, %zu unnormalized classes, max posterior err %.2g, %.3fs",
                    agree, cases, ties, norm_bad, max_conf_err, secs)};
}

// ---------------------------------------------------------------------------

struct Pipeline {
    Fixture fx;
    std::map<MacAddress, std::string> labels;
    std::vector<AttributeInstance> train, test;
    ModelRegistry registry;
    std::vector<MonitorRow> rows;
    double monitor_start = 0;
};

Pipeline run_pipeline(const FixtureConfig& fc) {
    Pipeline p;
    p.fx = generate_fixture(fc);
    std::vector<MacAddress> devs;
    for (const auto& d : p.fx.profiles) devs.push_back(d.mac), p.labels[d.mac] = d.name;
    auto insts = telemetry_instances(p.fx.packets, make_flow_table(p.fx.gateway, devs), TimescaleSet::ch5());
    apply_labels(insts, p.labels);
    p.monitor_start = fc.start_ts + kTrainDays * 86400.0;
    p.train = slice_time(insts, fc.start_ts, p.monitor_start);
    p.test = slice_time(insts, p.monitor_start, fc.start_ts + kDays * 86400.0);
    for (const auto& d : p.fx.profiles) {
        std::vector<AttributeInstance> mine;
        for (const auto& i : p.train)
            if (i.device == d.mac) mine.push_back(i);
        p.registry.emplace(d.name, train_device_model(mine, d.name));
    }
    p.rows = run_monitor(p.test, p.registry, MonitorConfig{});
    return p;
}

Outcome classification() {
    const auto t0 = Clock::now();
    const Pipeline p = run_pipeline(FixtureConfig{});
    const std::int64_t start_minute = static_cast<std::int64_t>(p.monitor_start / 60.0);
    std::size_t correct = 0, in_time = 0;
    std::string detail;
    for (const auto& d : p.fx.profiles) {
        std::optional<std::int64_t> stable_at;
        std::optional<std::string> wins_first;
        std::size_t wins = 0, seen = 0;
        for (const auto& r : p.rows) {
            if (r.device != d.mac || r.result.phase != Phase::Initial) continue;
            ++seen;
            if (r.result.winner == d.name) ++wins;
        }
        DeviceMonitor replay(d.mac, MonitorConfig{});
        for (const auto& i : p.test) {
            if (i.device != d.mac) continue;
            const auto s = replay.step(i, p.registry);
            if (replay.phase() == Phase::Stable) {
                stable_at = s.minute;
                break;
            }
        }
        const bool right = replay.intended_model() == d.name;
        const bool fast = stable_at && *stable_at - start_minute + 1 <= kStableWithinMinutes;
        correct += right;
        in_time += fast;
        detail += fmt("%s->%s@%lldm(own %zu/%zu) ", d.name.c_str(),
                      replay.intended_model() ? replay.intended_model()->c_str() : "none",
                      stable_at ? static_cast<long long>(*stable_at - start_minute + 1) : -1LL, wins, seen);
    }
    const double secs = seconds_since(t0);
    const bool ok = correct == 5 && in_time == 5 && secs < kBudgetClassifySec;
    return {ok, fmt("%zu/5 correct, %zu/5 stable within 24h; ", correct, in_time) + detail + fmt("%.1fs", secs)};
}

// ---------------------------------------------------------------------------

Outcome attack_detection() {
    const auto t0 = Clock::now();
    FixtureConfig fc;
    fc.flood = FloodInjection{kFloodDevice, kFloodStartMinute, kFloodMinutes, kFloodRate, kFloodBytes, true};
    const Pipeline p = run_pipeline(fc);
    const auto& target = p.fx.profiles[kFloodDevice];
    const auto attack_begin = static_cast<std::int64_t>(fc.start_ts / 60.0 + kFloodStartMinute);
    const auto attack_end = attack_begin + static_cast<std::int64_t>(kFloodMinutes);

    std::size_t in_window = 0, negative = 0;
    bool stable_before = false;
    std::optional<std::int64_t> alarm_after;
    for (const auto& r : p.rows) {
        if (r.device != target.mac) continue;
        const auto m = r.result.minute;
        if (m == attack_begin) stable_before = r.result.phase == Phase::Stable;
        if (m < attack_begin || m >= attack_end) continue;
        ++in_window;
        if (!r.result.winner) ++negative;
        if (r.result.anomaly && !alarm_after) alarm_after = m - attack_begin + 1;
    }
    const double neg_share = in_window ? static_cast<double>(negative) / static_cast<double>(in_window) : 0.0;

    // Multi-class forest on the same training days, downsampled.
    const auto sparse = downsample(p.train, 15);
    const auto names = common_attribute_names(sparse);
    std::vector<double> rows;
    std::vector<std::string> y;
    for (const auto& i : sparse) {
        rows.insert(rows.end(), i.values.begin(), i.values.end());
        y.push_back(*i.label);
    }
    const ForestModel forest = forest_train(rows, names.size(), y, names, ForestConfig{});
    std::size_t flagged = 0, forest_seen = 0;
    for (const auto& i : p.test) {
        const auto m = static_cast<std::int64_t>(i.window_start / 60.0);
        if (i.device != target.mac || m < attack_begin || m >= attack_end) continue;
        ++forest_seen;
        if (forest_predict(forest, i.values).label != target.name) ++flagged;
    }
    const double forest_share = forest_seen ? static_cast<double>(flagged) / static_cast<double>(forest_seen) : 1.0;
    const double secs = seconds_since(t0);
    const bool ok = stable_before && neg_share >= kAttackNegativeShare && alarm_after &&
                    *alarm_after <= kAlarmWithinMinutes && forest_share < kForestFlagCeiling &&
                    secs < kBudgetAttackSec;
    return {ok, fmt("stable before attack %s, one-class negatives %zu/%zu (%.3f), alarm after %lld min, "
                    "forest label changes %zu/%zu (%.3f), %.1fs",
                    stable_before ? "yes" : "no", negative, in_window, neg_share,
                    alarm_after ? static_cast<long long>(*alarm_after) : -1LL, flagged, forest_seen, forest_share,
                    secs)};
}

// ---------------------------------------------------------------------------

Outcome metrics_regression() {
    const ClassMetrics m = binary_metrics(0.987, 0.022, 0.013, "IoT");
    const bool ok = std::abs(m.precision - kPrecisionTarget) <= kPrecisionTol;
    return {ok, fmt("precision %.5f, expected %.3f +/- %.4f", m.precision, kPrecisionTarget, kPrecisionTol)};
}

// ---------------------------------------------------------------------------

Outcome telemetry_invariants() {
    const auto t0 = Clock::now();
    constexpr std::size_t kPackets = 1'000'000;
    const MacAddress gw = MacAddress::from_string("02:00:00:00:00:01");
    std::vector<MacAddress> devs;
    for (int i = 0; i < 5; ++i) devs.push_back(MacAddress(0x020000000010ULL + static_cast<std::uint64_t>(i)));
    const FlowTable table = make_flow_table(gw, devs);
    const auto rules = table.rules();

    std::vector<MacAddress> pool = devs;
    pool.push_back(gw);
    pool.push_back(MacAddress::from_string("02:00:00:00:00:99"));
    pool.push_back(MacAddress::from_string("01:00:5e:7f:ff:fa"));
    const std::uint16_t ports[] = {53, 123, 1900, 443, 8080, 5353};
    Rng rng(7);
    std::vector<PacketRecord> packets(kPackets);
    for (std::size_t i = 0; i < kPackets; ++i) {
        auto& p = packets[i];
        p.ts = 1'500'000'000.0 + static_cast<double>(i) * 0.01;
        p.src_mac = pool[rng.below(pool.size())];
        p.dst_mac = pool[rng.below(pool.size())];
        const auto kind = rng.below(4);
        p.proto = kind == 0 ? proto::kTcp : kind == 1 ? proto::kUdp : kind == 2 ? proto::kIcmp : proto::kUdp;
        if (p.proto != proto::kIcmp) {
            p.src_port = ports[rng.below(6)];
            p.dst_port = ports[rng.below(6)];
        }
        p.length = static_cast<std::uint32_t>(60 + rng.below(1400));
    }

    std::size_t dominance = 0, disagreement = 0;
    std::uint64_t matched_bytes = 0, matched_packets = 0;
    CounterExporter exporter(table);
    for (const auto& p : packets) {
        const auto got = exporter.add(p);
        const auto ref = match_packet(p, rules);
        if (got != ref) ++disagreement;
        if (!got) continue;
        ++matched_packets;
        matched_bytes += p.length;
        for (std::size_t r = 0; r < rules.size(); ++r) {
            if (r == *got || !rules[r].match.matches(p)) continue;
            if (rules[r].priority > rules[*got].priority || (rules[r].priority == rules[*got].priority && r < *got))
                ++dominance;
        }
    }
    const auto series = exporter.finish();
    std::uint64_t counted_bytes = 0, counted_packets = 0;
    for (const auto& s : series)
        for (const auto& c : s.samples) counted_bytes += c.bytes, counted_packets += c.packets;
    const std::size_t single = (counted_bytes != matched_bytes) + (counted_packets != matched_packets) +
                               (exporter.matched() + exporter.unmatched() != kPackets);

    const auto inst = synthesize(series, TimescaleSet::ch5());
    const std::size_t ch5 = attribute_names(kAllFlows, TimescaleSet::ch5()).size();
    const std::size_t ch4 = attribute_names(kAllFlows, TimescaleSet::ch4()).size();
    const std::size_t synth = inst.empty() ? 0 : inst.front().size();
    const double secs = seconds_since(t0);
    const bool ok = dominance == 0 && disagreement == 0 && single == 0 && ch5 == 64 && ch4 == 112 && synth == 64 &&
                    secs < kBudgetTelemetrySec;
    return {ok, fmt("%zu packets (%llu matched): %zu priority violations, %zu matcher disagreements, "
                    "%zu count violations; attributes ch5=%zu ch4=%zu synthesized=%zu, %.1fs",
                    kPackets, static_cast<unsigned long long>(matched_packets), dominance, disagreement, single, ch5,
                    ch4, synth, secs)};
}

// ---------------------------------------------------------------------------

Outcome entropy_checks() {
    Rng rng(11);
    std::vector<std::uint8_t> uniform(1 << 20);
    for (auto& b : uniform) b = static_cast<std::uint8_t>(rng.below(256));
    const double hu = shannon_entropy(uniform);
    const std::vector<std::uint8_t> constant(100 * 1024, 0x41);
    const double hc = shannon_entropy(constant);
    std::size_t perm_bad = 0;
    for (int s = 0; s < 100; ++s) {
        std::vector<std::uint8_t> v(1 + rng.below(20000));
        const auto alphabet = 1 + rng.below(256);
        for (auto& b : v) b = static_cast<std::uint8_t>(rng.below(alphabet));
        const double h = shannon_entropy(v);
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
        if (shannon_entropy(v) != h) ++perm_bad;
    }
    const bool ok = hu > kUniformEntropyMin && hc == 0.0 && perm_bad == 0;
    return {ok, fmt("uniform 1 MiB -> %.5f, constant -> %g, %zu/100 permutations changed entropy", hu, hc, perm_bad)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"consistency-score dynamics", score_dynamics},
        {"Laplace band probabilities", band_probabilities},
        {"NBM exact-posterior equivalence", nbm_oracle},
        {"end-to-end synthetic classification", classification},
        {"attack detection vs multi-class forest", attack_detection},
        {"precision from IoT-detector rates", metrics_regression},
        {"telemetry invariants", telemetry_invariants},
        {"byte entropy", entropy_checks},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.count(n)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
