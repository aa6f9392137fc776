#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iotmon/ingest.hpp"
#include "iotmon/mac.hpp"

namespace iotmon {

/// Periodic behaviour of one synthetic device. Periods are in seconds and
/// jittered by `jitter` (fraction of the period, uniform).
struct DeviceProfile {
    std::string name;  // class label
    MacAddress mac;
    std::string ip;

    double dns_period = 0.0;  // 0 disables
    std::uint32_t dns_query_bytes = 0;
    std::uint32_t dns_reply_bytes = 0;
    double ntp_period = 0.0;
    double ssdp_period = 0.0;
    std::uint32_t ssdp_bytes = 0;

    double heartbeat_period = 0.0;  // remote keep-alive exchange
    std::uint32_t heartbeat_up_packets = 0;
    std::uint32_t heartbeat_down_packets = 0;
    std::uint32_t heartbeat_up_bytes = 0;
    std::uint32_t heartbeat_down_bytes = 0;

    double burst_rate_per_hour = 0.0;  // Poisson activity bursts (remote)
    std::uint32_t burst_packets = 0;   // mean packets per direction
    std::uint32_t burst_up_bytes = 0;
    std::uint32_t burst_down_bytes = 0;

    double local_period = 0.0;  // LAN controller traffic towards the device
    std::uint32_t local_bytes = 0;

    double jitter = 0.1;
    std::uint16_t remote_port = 443;
    std::vector<std::string> domains;
    std::vector<std::string> ciphers;
};

/// Five built-in profiles with distinct periodicities. `n` <= 5.
std::vector<DeviceProfile> builtin_profiles(std::size_t n = 5);

struct FloodInjection {
    std::size_t device = 0;      // index into the profile list
    double start_minute = 0.0;   // minutes from the fixture start
    double duration_minutes = 180.0;
    double packets_per_minute = 100.0;
    std::uint32_t packet_bytes = 0;  // 0 -> the device's heartbeat downlink size
    bool replies = true;             // device answers each packet on remote_out
};

struct FixtureConfig {
    std::size_t devices = 5;
    double days = 14.0;
    std::uint64_t seed = 1;
    double start_ts = 1'500'000'000.0;  // aligned to a minute
    std::optional<FloodInjection> flood;
    std::vector<DeviceProfile> profiles;  // empty -> builtin_profiles(devices)
};

struct Fixture {
    MacAddress gateway;
    std::vector<DeviceProfile> profiles;
    std::vector<PacketRecord> packets;  // sorted by ts
    std::vector<EventRecord> events;    // sorted by ts
};

Fixture generate_fixture(const FixtureConfig& config);

/// `device\tclass` lines, one per profile.
void write_device_map(const Fixture& fixture, const std::filesystem::path& path);
std::vector<std::pair<MacAddress, std::string>> read_device_map(const std::filesystem::path& path);

}  // namespace iotmon
