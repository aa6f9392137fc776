#include "iotmon/flowtable.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "iotmon/error.hpp"

namespace iotmon {

std::string_view flow_key(FlowName flow) {
    switch (flow) {
        case FlowName::DnsUp: return "dns_out";
        case FlowName::DnsDown: return "dns_in";
        case FlowName::NtpUp: return "ntp_out";
        case FlowName::NtpDown: return "ntp_in";
        case FlowName::SsdpUp: return "ssdp_out";
        case FlowName::RemoteUp: return "remote_out";
        case FlowName::RemoteDown: return "remote_in";
        case FlowName::LocalDown: return "local_in";
    }
    return "?";
}

std::optional<FlowName> parse_flow_key(std::string_view key) {
    for (FlowName f : kAllFlows)
        if (flow_key(f) == key) return f;
    return std::nullopt;
}

bool FlowMatch::matches(const PacketRecord& pkt) const {
    if (src_mac && *src_mac != pkt.src_mac) return false;
    if (dst_mac && *dst_mac != pkt.dst_mac) return false;
    if (proto && *proto != pkt.proto) return false;
    if (src_port && pkt.src_port != src_port) return false;
    if (dst_port && pkt.dst_port != dst_port) return false;
    return true;
}

std::vector<FlowRuleSpec> install_device_rules(MacAddress dev, MacAddress gw) {
    if (dev == gw) throw Error("flowtable", "device MAC equals gateway MAC " + dev.str());

    auto rule = [dev](FlowName name, int prio, FlowMatch m) { return FlowRuleSpec{dev, name, m, prio, "forward"}; };
    auto udp_out = [dev](std::uint16_t port) {
        FlowMatch m;
        m.src_mac = dev;
        m.proto = proto::kUdp;
        m.dst_port = port;
        return m;
    };
    auto udp_in = [dev](std::uint16_t port) {
        FlowMatch m;
        m.dst_mac = dev;
        m.proto = proto::kUdp;
        m.src_port = port;
        return m;
    };
    FlowMatch remote_up;
    remote_up.src_mac = dev;
    remote_up.dst_mac = gw;
    FlowMatch remote_down;
    remote_down.src_mac = gw;
    remote_down.dst_mac = dev;
    FlowMatch local_down;
    local_down.dst_mac = dev;

    return {
        rule(FlowName::DnsUp, priority::kSignaling, udp_out(53)),
        rule(FlowName::DnsDown, priority::kSignaling, udp_in(53)),
        rule(FlowName::NtpUp, priority::kSignaling, udp_out(123)),
        rule(FlowName::NtpDown, priority::kSignaling, udp_in(123)),
        rule(FlowName::SsdpUp, priority::kSignaling, udp_out(1900)),
        rule(FlowName::RemoteUp, priority::kRemote, remote_up),
        rule(FlowName::RemoteDown, priority::kRemote, remote_down),
        rule(FlowName::LocalDown, priority::kLocal, local_down),
    };
}

std::optional<std::size_t> match_packet(const PacketRecord& pkt, std::span<const FlowRuleSpec> rules) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (!rules[i].match.matches(pkt)) continue;
        if (!best || rules[i].priority > rules[*best].priority) best = i;
    }
    return best;
}

// ---------------------------------------------------------------------------

void FlowTable::install_device(MacAddress dev) {
    if (!gateway_) throw Error("flowtable", "no gateway MAC configured");
    const auto rules = install_device_rules(dev, *gateway_);
    install_rules(rules);
}

void FlowTable::install_rules(std::span<const FlowRuleSpec> rules) {
    std::vector<MacAddress> owners;
    for (const auto& r : rules)
        if (std::find(owners.begin(), owners.end(), r.device) == owners.end()) owners.push_back(r.device);

    // Keep each device's rules contiguous: replaced devices keep their slot.
    std::vector<FlowRuleSpec> merged;
    for (MacAddress dev : devices_) {
        const bool replaced = std::find(owners.begin(), owners.end(), dev) != owners.end();
        if (replaced) {
            for (const auto& r : rules)
                if (r.device == dev) merged.push_back(r);
        } else {
            for (const auto& r : rules_)
                if (r.device == dev) merged.push_back(r);
        }
    }
    for (MacAddress dev : owners) {
        if (std::find(devices_.begin(), devices_.end(), dev) != devices_.end()) continue;
        devices_.push_back(dev);
        for (const auto& r : rules)
            if (r.device == dev) merged.push_back(r);
    }
    rules_ = std::move(merged);
    reindex();
}

void FlowTable::reindex() {
    by_mac_.clear();
    unkeyed_.clear();
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& m = rules_[i].match;
        if (!m.src_mac && !m.dst_mac) {
            unkeyed_.push_back(i);
            continue;
        }
        if (m.src_mac) by_mac_[*m.src_mac].push_back(i);
        if (m.dst_mac && m.dst_mac != m.src_mac) by_mac_[*m.dst_mac].push_back(i);
    }
}

std::optional<std::size_t> FlowTable::match(const PacketRecord& pkt) const {
    std::optional<std::size_t> best;
    auto consider = [&](std::size_t i) {
        const auto& r = rules_[i];
        if (best) {
            const int bp = rules_[*best].priority;
            if (r.priority < bp || (r.priority == bp && i > *best)) return;
        }
        if (r.match.matches(pkt)) best = i;
    };
    for (MacAddress mac : {pkt.src_mac, pkt.dst_mac}) {
        auto it = by_mac_.find(mac);
        if (it == by_mac_.end()) continue;
        for (std::size_t i : it->second) consider(i);
        if (pkt.src_mac == pkt.dst_mac) break;
    }
    for (std::size_t i : unkeyed_) consider(i);
    return best;
}

// ---------------------------------------------------------------------------

CounterExporter::CounterExporter(const FlowTable& table, double interval_seconds)
    : table_(table), interval_(interval_seconds), cells_(table.rules().size()) {
    if (!(interval_seconds > 0.0)) throw Error("flowtable", "export interval must be positive");
}

std::optional<std::size_t> CounterExporter::add(const PacketRecord& pkt) {
    const auto minute = static_cast<std::int64_t>(std::floor(pkt.ts / interval_));
    first_minute_ = first_minute_ ? std::min(*first_minute_, minute) : minute;
    last_minute_ = last_minute_ ? std::max(*last_minute_, minute) : minute;

    auto idx = table_.match(pkt);
    if (!idx) {
        ++unmatched_;
        if (unmatched_sink_) unmatched_sink_(pkt);
        return std::nullopt;
    }
    ++matched_;
    Cell& cell = cells_[*idx][minute];
    cell.bytes += pkt.length;
    cell.packets += 1;
    return idx;
}

std::vector<FlowCounterSeries> CounterExporter::finish() const {
    const auto rules = table_.rules();
    std::vector<FlowCounterSeries> out;
    out.reserve(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        FlowCounterSeries s{rules[i].device, rules[i].name, {}};
        if (first_minute_) {
            s.samples.reserve(static_cast<std::size_t>(*last_minute_ - *first_minute_ + 1));
            auto it = cells_[i].begin();
            for (std::int64_t m = *first_minute_; m <= *last_minute_; ++m) {
                FlowCounterSample sample{m, 0, 0};
                if (it != cells_[i].end() && it->first == m) {
                    sample.bytes = it->second.bytes;
                    sample.packets = it->second.packets;
                    ++it;
                }
                s.samples.push_back(sample);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<FlowCounterSeries> export_counters(std::span<const PacketRecord> packets, const FlowTable& table,
                                               double interval_seconds) {
    CounterExporter exporter(table, interval_seconds);
    for (const auto& p : packets) exporter.add(p);
    return exporter.finish();
}

void write_flow_counters(std::span<const FlowCounterSeries> series, std::ostream& out) {
    out << "device\tflow\tminute\tbytes\tpackets\n";
    for (const auto& s : series) {
        const std::string dev = s.device.str();
        const std::string_view flow = flow_key(s.flow);
        for (const auto& smp : s.samples)
            out << dev << '\t' << flow << '\t' << smp.minute << '\t' << smp.bytes << '\t' << smp.packets << '\n';
    }
}

void write_flow_counters(std::span<const FlowCounterSeries> series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("flowtable", "cannot write '" + path.string() + "'");
    write_flow_counters(series, out);
}

std::vector<FlowCounterSeries> read_flow_counters(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("device\tflow\tminute\tbytes\tpackets", 0) != 0)
        throw Error("flowtable", "counter dump must start with header 'device flow minute bytes packets'");

    std::vector<FlowCounterSeries> out;
    std::map<std::pair<std::uint64_t, int>, std::size_t> slot;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string dev, flow;
        FlowCounterSample smp;
        if (!(fields >> dev >> flow >> smp.minute >> smp.bytes >> smp.packets))
            throw Error("flowtable", "line " + std::to_string(line_no) + ": malformed counter row");
        auto mac = MacAddress::parse(dev);
        auto name = parse_flow_key(flow);
        if (!mac || !name) throw Error("flowtable", "line " + std::to_string(line_no) + ": bad device or flow");
        const auto key = std::pair{mac->bits(), static_cast<int>(*name)};
        auto [it, inserted] = slot.try_emplace(key, out.size());
        if (inserted) out.push_back(FlowCounterSeries{*mac, *name, {}});
        auto& samples = out[it->second].samples;
        if (!samples.empty() && samples.back().minute >= smp.minute)
            throw Error("flowtable", "line " + std::to_string(line_no) + ": minute index not increasing");
        samples.push_back(smp);
    }
    return out;
}

std::vector<FlowCounterSeries> read_flow_counters(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("flowtable", "cannot open '" + path.string() + "'");
    return read_flow_counters(in);
}

}  // namespace iotmon
