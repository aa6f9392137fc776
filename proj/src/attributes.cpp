#include "iotmon/attributes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <tuple>

#include "iotmon/error.hpp"

namespace iotmon {

TimescaleSet TimescaleSet::ch5() { return from_list({1, 2, 4, 8}); }

TimescaleSet TimescaleSet::ch4() { return from_list({1, 2, 4, 8, 16, 32, 64}); }

TimescaleSet TimescaleSet::from_list(std::vector<int> scales) {
    if (scales.empty()) throw Error("attributes", "empty timescale list");
    for (int s : scales)
        if (s < 1 || s > 64 || (s & (s - 1)) != 0)
            throw Error("attributes", "timescale " + std::to_string(s) + " is not a power of two in [1, 64]");
    std::sort(scales.begin(), scales.end());
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
    TimescaleSet t;
    t.scales_ = std::move(scales);
    return t;
}

TimescaleSet TimescaleSet::parse(std::string_view text) {
    if (text == "ch5") return ch5();
    if (text == "ch4") return ch4();
    std::vector<int> scales;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const auto tok = text.substr(start, comma - start);
        int v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            throw Error("attributes", "bad timescale preset '" + std::string(text) + "'");
        scales.push_back(v);
        start = comma + 1;
    }
    return from_list(std::move(scales));
}

std::string_view metric_key(FlowMetric metric) {
    return metric == FlowMetric::AvgPacketSize ? "avg_pkt_size" : "avg_rate";
}

std::string attribute_name(FlowName flow, FlowMetric metric, int scale) {
    std::string name(flow_key(flow));
    name += ':';
    name += metric_key(metric);
    name += '@';
    name += std::to_string(scale);
    name += 'm';
    return name;
}

std::vector<std::string> attribute_names(std::span<const FlowName> flows, const TimescaleSet& scales) {
    std::vector<std::string> names;
    names.reserve(flows.size() * 2 * scales.size());
    for (FlowName f : flows)
        for (FlowMetric m : {FlowMetric::AvgPacketSize, FlowMetric::AvgRate})
            for (int s : scales.scales()) names.push_back(attribute_name(f, m, s));
    return names;
}

std::vector<AttributeInstance> synthesize(std::span<const FlowCounterSeries> series, const TimescaleSet& scales,
                                          double interval_seconds) {
    // Group by device, first-seen order; flows sorted canonically.
    std::vector<MacAddress> devices;
    std::map<MacAddress, std::vector<const FlowCounterSeries*>> by_device;
    for (const auto& s : series) {
        auto& bucket = by_device[s.device];
        if (bucket.empty()) devices.push_back(s.device);
        for (const auto* other : bucket)
            if (other->flow == s.flow)
                throw Error("attributes", "duplicate series for " + s.device.str() + " " + std::string(flow_key(s.flow)));
        bucket.push_back(&s);
    }
    if (devices.empty()) return {};

    std::vector<FlowName> flows;
    for (auto& [dev, bucket] : by_device) {
        std::sort(bucket.begin(), bucket.end(), [](auto* a, auto* b) { return a->flow < b->flow; });
        std::vector<FlowName> these;
        for (const auto* s : bucket) these.push_back(s->flow);
        if (flows.empty()) flows = these;
        if (these != flows) throw Error("attributes", "device " + dev.str() + " has a different flow set");
    }
    auto schema = make_schema(attribute_names(flows, scales));

    std::vector<AttributeInstance> out;
    for (MacAddress dev : devices) {
        const auto& bucket = by_device[dev];
        const auto& ref = bucket.front()->samples;
        const std::size_t n = ref.size();
        for (const auto* s : bucket) {
            if (s->samples.size() != n || (n > 0 && (s->samples.front().minute != ref.front().minute ||
                                                     s->samples.back().minute != ref.back().minute)))
                throw Error("attributes", "series of " + dev.str() + " are not aligned (zero-fill them first)");
            for (std::size_t i = 1; i < n; ++i)
                if (s->samples[i].minute != s->samples[i - 1].minute + 1)
                    throw Error("attributes", "series of " + dev.str() + " have gaps (zero-fill them first)");
        }

        // Integer prefix sums keep window sums exact until the final division.
        std::vector<std::vector<std::uint64_t>> byte_prefix(bucket.size()), pkt_prefix(bucket.size());
        for (std::size_t f = 0; f < bucket.size(); ++f) {
            byte_prefix[f].assign(n + 1, 0);
            pkt_prefix[f].assign(n + 1, 0);
            for (std::size_t i = 0; i < n; ++i) {
                byte_prefix[f][i + 1] = byte_prefix[f][i] + bucket[f]->samples[i].bytes;
                pkt_prefix[f][i + 1] = pkt_prefix[f][i] + bucket[f]->samples[i].packets;
            }
        }

        for (std::size_t t = 0; t < n; ++t) {
            AttributeInstance inst;
            inst.device = dev;
            inst.window_start = static_cast<double>(ref[t].minute) * interval_seconds;
            inst.schema = schema;
            inst.values.reserve(schema->size());
            for (std::size_t f = 0; f < bucket.size(); ++f) {
                for (FlowMetric m : {FlowMetric::AvgPacketSize, FlowMetric::AvgRate}) {
                    for (int s : scales.scales()) {
                        const std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(s), t + 1);
                        const std::size_t lo = t + 1 - width;
                        const std::uint64_t bytes = byte_prefix[f][t + 1] - byte_prefix[f][lo];
                        const std::uint64_t pkts = pkt_prefix[f][t + 1] - pkt_prefix[f][lo];
                        double v = 0.0;
                        if (m == FlowMetric::AvgPacketSize)
                            v = pkts == 0 ? 0.0 : static_cast<double>(bytes) / static_cast<double>(pkts);
                        else
                            v = static_cast<double>(bytes) / static_cast<double>(width);
                        inst.values.push_back(v);
                    }
                }
            }
            out.push_back(std::move(inst));
        }
    }
    return out;
}

std::vector<AttributeInstance> downsample(std::span<const AttributeInstance> instances, std::size_t factor) {
    if (factor < 1) throw Error("attributes", "downsample factor must be >= 1");
    std::vector<MacAddress> order;
    std::map<MacAddress, std::vector<const AttributeInstance*>> by_device;
    for (const auto& inst : instances) {
        auto& bucket = by_device[inst.device];
        if (bucket.empty()) order.push_back(inst.device);
        bucket.push_back(&inst);
    }
    std::vector<AttributeInstance> out;
    for (MacAddress dev : order) {
        auto& bucket = by_device[dev];
        std::stable_sort(bucket.begin(), bucket.end(),
                         [](auto* a, auto* b) { return a->window_start < b->window_start; });
        for (std::size_t i = 0; i < bucket.size(); i += factor) out.push_back(*bucket[i]);
    }
    return out;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double median_gap(std::vector<double> times) {
    if (times.size() < 2) return 0.0;
    std::sort(times.begin(), times.end());
    std::vector<double> gaps;
    gaps.reserve(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
    return median(std::move(gaps));
}

std::string endpoint(const std::optional<std::string>& ip, MacAddress mac, const std::optional<std::uint16_t>& port) {
    std::string e = ip ? *ip : mac.str();
    e += '#';
    e += port ? std::to_string(*port) : "-";
    return e;
}

}  // namespace

SessionAttributes session_attributes(std::span<const PacketRecord> packets, MacAddress device, double hour_start) {
    const double hour_end = hour_start + 3600.0;
    std::vector<const PacketRecord*> in_hour;
    for (const auto& p : packets)
        if (p.ts >= hour_start && p.ts < hour_end) in_hour.push_back(&p);
    SessionAttributes out;
    if (in_hour.empty()) return out;
    std::stable_sort(in_hour.begin(), in_hour.end(), [](auto* a, auto* b) { return a->ts < b->ts; });

    struct FlowStats {
        double bytes = 0.0;
        double first = 0.0;
        double last = 0.0;
    };
    std::map<std::tuple<int, std::string, std::string>, FlowStats> flows;
    std::vector<double> dns_queries, ntp_queries;
    for (std::size_t i = 0; i < in_hour.size(); ++i) {
        const auto& p = *in_hour[i];
        out.flow_volume += p.length;
        if (i > 0) out.sleep_time = std::max(out.sleep_time, p.ts - in_hour[i - 1]->ts);

        std::string a = endpoint(p.src_ip, p.src_mac, p.src_port);
        std::string b = endpoint(p.dst_ip, p.dst_mac, p.dst_port);
        if (b < a) std::swap(a, b);
        auto [it, fresh] = flows.try_emplace({p.proto, std::move(a), std::move(b)});
        if (fresh) it->second.first = p.ts;
        it->second.bytes += p.length;
        it->second.last = p.ts;

        if (p.src_mac == device && p.proto == proto::kUdp) {
            if (p.dst_port == 53) dns_queries.push_back(p.ts);
            if (p.dst_port == 123) ntp_queries.push_back(p.ts);
        }
    }
    const FlowStats* busiest = nullptr;
    for (const auto& [key, stats] : flows)
        if (!busiest || stats.bytes > busiest->bytes) busiest = &stats;
    out.flow_duration = busiest->last - busiest->first;
    out.mean_rate = out.flow_duration > 0.0 ? 8.0 * out.flow_volume / out.flow_duration : 0.0;
    out.dns_interval = median_gap(std::move(dns_queries));
    out.ntp_interval = median_gap(std::move(ntp_queries));
    return out;
}

std::vector<double> to_vector(const SessionAttributes& s) {
    return {s.flow_volume, s.flow_duration, s.mean_rate, s.sleep_time, s.dns_interval, s.ntp_interval};
}

}  // namespace iotmon
