#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iotmon/ingest.hpp"
#include "iotmon/mac.hpp"

namespace iotmon {

/// The eight per-device telemetry flows, in their canonical rule order.
enum class FlowName : std::uint8_t {
    DnsUp,
    DnsDown,
    NtpUp,
    NtpDown,
    SsdpUp,
    RemoteUp,
    RemoteDown,
    LocalDown,
};

inline constexpr std::array<FlowName, 8> kAllFlows = {
    FlowName::DnsUp,    FlowName::DnsDown,  FlowName::NtpUp,      FlowName::NtpDown,
    FlowName::SsdpUp,   FlowName::RemoteUp, FlowName::RemoteDown, FlowName::LocalDown,
};

/// Stable identifier used in counter dumps and attribute names
/// ("dns_out", "remote_in", ...).
std::string_view flow_key(FlowName flow);
std::optional<FlowName> parse_flow_key(std::string_view key);

namespace priority {
inline constexpr int kSignaling = 100;
inline constexpr int kRemote = 10;
inline constexpr int kLocal = 1;
}  // namespace priority

/// Match fields; an absent field is a wildcard.
struct FlowMatch {
    std::optional<MacAddress> src_mac;
    std::optional<MacAddress> dst_mac;
    std::optional<int> proto;
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;

    bool matches(const PacketRecord& pkt) const;
};

struct FlowRuleSpec {
    MacAddress device;  // owner of the counters
    FlowName name = FlowName::LocalDown;
    FlowMatch match;
    int priority = priority::kLocal;
    std::string action = "forward";  // recorded, never acted upon
};

/// The eight proactive rules for one device behind gateway `gw`.
/// Throws when dev == gw.
std::vector<FlowRuleSpec> install_device_rules(MacAddress dev, MacAddress gw);

/// Reference matcher: highest priority wins, earlier rule wins a tie.
/// Returns the index of the matched rule in `rules`.
std::optional<std::size_t> match_packet(const PacketRecord& pkt, std::span<const FlowRuleSpec> rules);

/// Rule set indexed by MAC for fast matching. Semantics are identical to
/// match_packet() over rules() in installation order.
class FlowTable {
public:
    FlowTable() = default;
    explicit FlowTable(MacAddress gateway) : gateway_(gateway) {}

    /// Installs the full eight-rule set for `dev`. Reinstalling replaces.
    void install_device(MacAddress dev);
    /// Installs an arbitrary (e.g. reduced) rule list, replacing any rules
    /// previously owned by the same devices.
    void install_rules(std::span<const FlowRuleSpec> rules);

    std::optional<std::size_t> match(const PacketRecord& pkt) const;

    std::span<const FlowRuleSpec> rules() const noexcept { return rules_; }
    const std::vector<MacAddress>& devices() const noexcept { return devices_; }
    std::optional<MacAddress> gateway() const noexcept { return gateway_; }

private:
    void reindex();

    std::optional<MacAddress> gateway_;
    std::vector<FlowRuleSpec> rules_;
    std::vector<MacAddress> devices_;
    std::unordered_map<MacAddress, std::vector<std::size_t>> by_mac_;
    std::vector<std::size_t> unkeyed_;  // rules with no MAC constraint
};

struct FlowCounterSample {
    std::int64_t minute = 0;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 0;

    friend bool operator==(const FlowCounterSample&, const FlowCounterSample&) = default;
};

/// Per-interval deltas for one (device, flow) pair.
struct FlowCounterSeries {
    MacAddress device;
    FlowName flow = FlowName::LocalDown;
    std::vector<FlowCounterSample> samples;

    friend bool operator==(const FlowCounterSeries&, const FlowCounterSeries&) = default;
};

/// Streams packets through a flow table, accumulating one counter cell per
/// (rule, interval). finish() zero-fills every rule between the first and
/// last interval observed in the stream.
class CounterExporter {
public:
    explicit CounterExporter(const FlowTable& table, double interval_seconds = 60.0);

    /// Returns the matched rule index, if any.
    std::optional<std::size_t> add(const PacketRecord& pkt);

    std::vector<FlowCounterSeries> finish() const;

    std::size_t matched() const noexcept { return matched_; }
    std::size_t unmatched() const noexcept { return unmatched_; }

    void on_unmatched(std::function<void(const PacketRecord&)> sink) { unmatched_sink_ = std::move(sink); }

private:
    struct Cell {
        std::uint64_t bytes = 0;
        std::uint64_t packets = 0;
    };

    const FlowTable& table_;
    double interval_;
    std::vector<std::map<std::int64_t, Cell>> cells_;
    std::optional<std::int64_t> first_minute_;
    std::optional<std::int64_t> last_minute_;
    std::size_t matched_ = 0;
    std::size_t unmatched_ = 0;
    std::function<void(const PacketRecord&)> unmatched_sink_;
};

std::vector<FlowCounterSeries> export_counters(std::span<const PacketRecord> packets, const FlowTable& table,
                                               double interval_seconds = 60.0);

/// `.flows.tsv`: header `device flow minute bytes packets`.
void write_flow_counters(std::span<const FlowCounterSeries> series, std::ostream& out);
void write_flow_counters(std::span<const FlowCounterSeries> series, const std::filesystem::path& path);
std::vector<FlowCounterSeries> read_flow_counters(std::istream& in);
std::vector<FlowCounterSeries> read_flow_counters(const std::filesystem::path& path);

}  // namespace iotmon
