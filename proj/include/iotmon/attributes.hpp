#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iotmon/flowtable.hpp"
#include "iotmon/ingest.hpp"

namespace iotmon {

/// Window lengths (in counter intervals, i.e. minutes) over which flow
/// attributes are averaged. Each scale is a power of two in [1, 64].
class TimescaleSet {
public:
    /// {1, 2, 4, 8}: 8 flows x 2 metrics x 4 scales = 64 attributes.
    static TimescaleSet ch5();
    /// {1, 2, ..., 64}: 8 flows x 2 metrics x 7 scales = 112 attributes.
    static TimescaleSet ch4();
    /// Validates, sorts and de-duplicates; throws on an invalid scale.
    static TimescaleSet from_list(std::vector<int> scales);
    /// "ch5", "ch4", or a comma-separated list such as "1,4,16".
    static TimescaleSet parse(std::string_view text);

    const std::vector<int>& scales() const noexcept { return scales_; }
    std::size_t size() const noexcept { return scales_.size(); }

private:
    std::vector<int> scales_;
};

enum class FlowMetric { AvgPacketSize, AvgRate };

std::string_view metric_key(FlowMetric metric);

/// `<flow>:<metric>@<scale>m`, e.g. "remote_in:avg_rate@8m".
std::string attribute_name(FlowName flow, FlowMetric metric, int scale);

/// Attribute names produced by synthesize() for the given flows, in order
/// flow -> metric (avg_pkt_size, avg_rate) -> scale.
std::vector<std::string> attribute_names(std::span<const FlowName> flows, const TimescaleSet& scales);

/// One instance per device per minute. For flow f and scale s the window is
/// [t-s+1, t], truncated at the first minute of the series:
///   avg_pkt_size = sum(bytes) / sum(packets)   (0 when no packets)
///   avg_rate     = sum(bytes) / window_minutes (bytes per minute)
/// Every device must carry the same flow set over a zero-filled range.
std::vector<AttributeInstance> synthesize(std::span<const FlowCounterSeries> series, const TimescaleSet& scales,
                                          double interval_seconds = 60.0);

/// Keeps every `factor`-th instance per device (by window_start), starting
/// with the first. Output is grouped by device in first-seen order.
std::vector<AttributeInstance> downsample(std::span<const AttributeInstance> instances, std::size_t factor = 15);

/// Hourly activity/volume/signaling summary for one device.
struct SessionAttributes {
    double flow_volume = 0.0;    // bytes, both directions
    double flow_duration = 0.0;  // seconds, busiest 5-tuple flow
    double mean_rate = 0.0;      // bits per second
    double sleep_time = 0.0;     // seconds, longest silence between packets
    double dns_interval = 0.0;   // seconds, median gap between DNS queries
    double ntp_interval = 0.0;   // seconds, median gap between NTP queries

    friend bool operator==(const SessionAttributes&, const SessionAttributes&) = default;
};

/// `packets` must already be filtered to traffic of `device`; only those in
/// [hour_start, hour_start + 3600) are considered.
SessionAttributes session_attributes(std::span<const PacketRecord> packets, MacAddress device, double hour_start);

inline constexpr std::array<std::string_view, 6> kSessionAttributeNames = {
    "flow_volume", "flow_duration", "mean_rate", "sleep_time", "dns_interval", "ntp_interval",
};

std::vector<double> to_vector(const SessionAttributes& s);

}  // namespace iotmon
