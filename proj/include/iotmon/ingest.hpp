#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iotmon/mac.hpp"

namespace iotmon {

namespace proto {
inline constexpr int kUnset = 0;
inline constexpr int kIcmp = 1;
inline constexpr int kTcp = 6;
inline constexpr int kUdp = 17;
}  // namespace proto

/// Header summary of one observed packet.
struct PacketRecord {
    double ts = 0.0;
    MacAddress src_mac;
    MacAddress dst_mac;
    std::optional<std::string> src_ip;
    std::optional<std::string> dst_ip;
    int proto = proto::kUnset;
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;
    std::uint32_t length = 0;

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

enum class EventKind { Domain, RemotePort, CipherSuite };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

/// One pre-extracted bag-of-words token observation (domain, port, cipher).
struct EventRecord {
    double ts = 0.0;
    MacAddress device;
    EventKind kind = EventKind::Domain;
    std::string value;
    std::uint32_t count = 1;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Parses one JSON line; returns nullopt when the line violates the record
/// contract (missing/mistyped field, negative length, ports without TCP/UDP).
std::optional<PacketRecord> parse_packet_line(std::string_view line);
std::optional<EventRecord> parse_event_line(std::string_view line);

std::string to_json_line(const PacketRecord& pkt);
std::string to_json_line(const EventRecord& ev);

struct ReadStats {
    std::size_t lines = 0;
    std::size_t records = 0;
    std::size_t malformed = 0;
    /// Records dropped because they trail the newest timestamp by more than
    /// the reorder window. Also counted in `malformed`.
    std::size_t skewed = 0;
    std::vector<std::size_t> first_bad_lines;  // 1-based, at most 10

    double malformed_fraction() const {
        return lines == 0 ? 0.0 : static_cast<double>(malformed) / static_cast<double>(lines);
    }
};

/// Streaming reader for newline-delimited records. Records are yielded in
/// file order; timestamps may go backwards by up to `reorder_window` seconds.
template <typename Record>
class RecordReader {
public:
    static constexpr double kDefaultReorderWindow = 60.0;
    static constexpr double kMaxMalformedFraction = 0.01;

    explicit RecordReader(const std::filesystem::path& path,
                          double reorder_window = kDefaultReorderWindow);

    std::optional<Record> next();

    /// Throws when more than 1% of lines were malformed.
    void finish() const;

    const ReadStats& stats() const noexcept { return stats_; }

private:
    void mark_bad();

    std::filesystem::path path_;
    std::ifstream in_;
    double reorder_window_;
    double newest_ts_ = -1e300;
    ReadStats stats_;
};

using PacketReader = RecordReader<PacketRecord>;
using EventReader = RecordReader<EventRecord>;

/// Reads a whole file and calls finish(). `stats` receives the counters.
std::vector<PacketRecord> read_packets(const std::filesystem::path& path,
                                       ReadStats* stats = nullptr);
std::vector<EventRecord> read_events(const std::filesystem::path& path,
                                     ReadStats* stats = nullptr);

void write_packets(std::span<const PacketRecord> packets, const std::filesystem::path& path);
void write_events(std::span<const EventRecord> events, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Attribute instances

/// Ordered attribute names shared by every instance of a dataset.
using AttributeSchema = std::shared_ptr<const std::vector<std::string>>;

AttributeSchema make_schema(std::vector<std::string> names);

struct AttributeInstance {
    MacAddress device;
    double window_start = 0.0;
    std::optional<std::string> label;
    AttributeSchema schema;
    std::vector<double> values;  // aligned with *schema

    std::optional<double> get(std::string_view name) const;
    std::size_t size() const noexcept { return values.size(); }

    friend bool operator==(const AttributeInstance& a, const AttributeInstance& b);
};

/// Class part of a "class:state" label.
std::string label_class(std::string_view label);

/// Verifies all instances share one attribute-name list; throws listing the
/// symmetric difference otherwise. Returns that list (empty when no data).
std::vector<std::string> common_attribute_names(std::span<const AttributeInstance> instances);

void write_instances(std::span<const AttributeInstance> instances, std::ostream& out);
void write_instances(std::span<const AttributeInstance> instances, const std::filesystem::path& path);
std::vector<AttributeInstance> read_instances(std::istream& in);
std::vector<AttributeInstance> read_instances(const std::filesystem::path& path);

/// Shortest text that reads back to exactly `v` (never more than 17 digits).
std::string format_double(double v);

}  // namespace iotmon
