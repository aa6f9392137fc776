#include "iotmon/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "iotmon/error.hpp"
#include "iotmon/random.hpp"

namespace iotmon {

namespace {

const MacAddress kGateway = MacAddress::from_string("02:00:00:00:00:01");
const MacAddress kController = MacAddress::from_string("02:00:00:00:00:99");  // phone app on the LAN
const MacAddress kSsdpMulticast = MacAddress::from_string("01:00:5e:7f:ff:fa");
constexpr const char* kGatewayIp = "192.168.1.1";
constexpr const char* kControllerIp = "192.168.1.50";

DeviceProfile base(std::string name, int idx) {
    DeviceProfile p;
    p.name = std::move(name);
    p.mac = MacAddress(0x020000000010ULL + static_cast<std::uint64_t>(idx));
    p.ip = "192.168.1." + std::to_string(10 + idx);
    return p;
}

}  // namespace

std::vector<DeviceProfile> builtin_profiles(std::size_t n) {
    if (n == 0 || n > 5) throw Error("fixture", "between 1 and 5 built-in profiles are available");
    std::vector<DeviceProfile> out;

    auto plug = base("smart_plug", 0);
    plug.dns_period = 1800, plug.dns_query_bytes = 74, plug.dns_reply_bytes = 120;
    plug.ntp_period = 3600;
    plug.heartbeat_period = 30, plug.heartbeat_up_packets = 2, plug.heartbeat_down_packets = 1;
    plug.heartbeat_up_bytes = 160, plug.heartbeat_down_bytes = 130;
    plug.burst_rate_per_hour = 0.5, plug.burst_packets = 6, plug.burst_up_bytes = 180, plug.burst_down_bytes = 150;
    plug.local_period = 600, plug.local_bytes = 110;
    plug.remote_port = 1883;
    plug.domains = {"plug.cloud.example", "fw.plug.example"};
    plug.ciphers = {"0xc02f"};
    out.push_back(plug);

    auto cam = base("camera", 1);
    cam.dns_period = 300, cam.dns_query_bytes = 82, cam.dns_reply_bytes = 180;
    cam.ntp_period = 1800;
    cam.heartbeat_period = 20, cam.heartbeat_up_packets = 2, cam.heartbeat_down_packets = 2;
    cam.heartbeat_up_bytes = 300, cam.heartbeat_down_bytes = 150;
    cam.burst_rate_per_hour = 4, cam.burst_packets = 150, cam.burst_up_bytes = 1200, cam.burst_down_bytes = 80;
    cam.remote_port = 443;
    cam.domains = {"video.cam.example", "api.cam.example", "time.cam.example"};
    cam.ciphers = {"0xc02b", "0xc02f"};
    out.push_back(cam);

    auto sensor = base("motion_sensor", 2);
    sensor.dns_period = 600, sensor.dns_query_bytes = 70, sensor.dns_reply_bytes = 100;
    sensor.ntp_period = 7200;
    sensor.heartbeat_period = 60, sensor.heartbeat_up_packets = 1, sensor.heartbeat_down_packets = 1;
    sensor.heartbeat_up_bytes = 80, sensor.heartbeat_down_bytes = 70;
    sensor.burst_rate_per_hour = 2, sensor.burst_packets = 10, sensor.burst_up_bytes = 90,
    sensor.burst_down_bytes = 75;
    sensor.remote_port = 8883;
    sensor.domains = {"events.sensor.example"};
    sensor.ciphers = {"0x009c"};
    out.push_back(sensor);

    auto hub = base("hub", 3);
    hub.dns_period = 120, hub.dns_query_bytes = 78, hub.dns_reply_bytes = 140;
    hub.ntp_period = 900;
    hub.ssdp_period = 300, hub.ssdp_bytes = 350;
    hub.heartbeat_period = 15, hub.heartbeat_up_packets = 3, hub.heartbeat_down_packets = 3;
    hub.heartbeat_up_bytes = 200, hub.heartbeat_down_bytes = 250;
    hub.burst_rate_per_hour = 3, hub.burst_packets = 50, hub.burst_up_bytes = 500, hub.burst_down_bytes = 600;
    hub.local_period = 60, hub.local_bytes = 150;
    hub.remote_port = 443;
    hub.domains = {"hub.example", "rules.hub.example", "update.hub.example"};
    hub.ciphers = {"0xc030", "0xc02f"};
    out.push_back(hub);

    auto speaker = base("speaker", 4);
    speaker.dns_period = 60, speaker.dns_query_bytes = 90, speaker.dns_reply_bytes = 210;
    speaker.ntp_period = 1024;
    speaker.ssdp_period = 600, speaker.ssdp_bytes = 450;
    speaker.heartbeat_period = 45, speaker.heartbeat_up_packets = 2, speaker.heartbeat_down_packets = 4;
    speaker.heartbeat_up_bytes = 150, speaker.heartbeat_down_bytes = 900;
    speaker.burst_rate_per_hour = 1, speaker.burst_packets = 300, speaker.burst_up_bytes = 100,
    speaker.burst_down_bytes = 1400;
    speaker.local_period = 300, speaker.local_bytes = 200;
    speaker.remote_port = 4070;
    speaker.domains = {"stream.speaker.example", "api.speaker.example", "ads.speaker.example"};
    speaker.ciphers = {"0x1301", "0x1302"};
    out.push_back(speaker);

    out.resize(n);
    return out;
}

namespace {

class Emitter {
public:
    Emitter(const DeviceProfile& p, std::size_t index, Rng& rng, Fixture& out)
        : p_(p), rng_(rng), out_(out), remote_ip_("52.10.0." + std::to_string(10 + index)),
          ntp_ip_("17.253.0." + std::to_string(10 + index)),
          ephemeral_(static_cast<std::uint16_t>(40000 + 100 * index)) {}

    /// Burst payloads vary by +-10%; signalling messages have fixed sizes.
    std::uint32_t size(std::uint32_t mean) {
        const double v = static_cast<double>(mean) * rng_.uniform(0.9, 1.1);
        return std::max<std::uint32_t>(60, static_cast<std::uint32_t>(std::lround(v)));
    }

    void packet(double ts, MacAddress src, MacAddress dst, const std::string& sip, const std::string& dip, int proto,
                std::uint16_t sport, std::uint16_t dport, std::uint32_t len) {
        PacketRecord r;
        r.ts = ts;
        r.src_mac = src;
        r.dst_mac = dst;
        r.src_ip = sip;
        r.dst_ip = dip;
        r.proto = proto;
        r.src_port = sport;
        r.dst_port = dport;
        r.length = len;
        out_.packets.push_back(std::move(r));
    }

    void up(double ts, std::uint32_t len) {
        packet(ts, p_.mac, kGateway, p_.ip, remote_ip_, proto::kTcp, ephemeral_, p_.remote_port, len);
    }
    void down(double ts, std::uint32_t len) {
        packet(ts, kGateway, p_.mac, remote_ip_, p_.ip, proto::kTcp, p_.remote_port, ephemeral_, len);
    }

    void event(double ts, EventKind kind, std::string value) {
        out_.events.push_back(EventRecord{ts, p_.mac, kind, std::move(value), 1});
    }

    void connection_events(double ts) {
        event(ts, EventKind::RemotePort, std::to_string(p_.remote_port));
        if (!p_.ciphers.empty()) event(ts, EventKind::CipherSuite, p_.ciphers[rng_.below(p_.ciphers.size())]);
    }

    /// Calls f(ts) at jittered multiples of `period` within [t0, t1).
    template <class F>
    void periodic(double period, double t0, double t1, F&& f) {
        if (period <= 0) return;
        double t = t0 + rng_.uniform(0, period);
        while (t < t1) {
            f(t);
            t += period * (1.0 + rng_.uniform(-p_.jitter, p_.jitter));
        }
    }

    void run(double t0, double t1) {
        periodic(p_.dns_period, t0, t1, [&](double t) {
            // message sizes depend only on the queried name
            const std::string name = p_.domains.empty() ? std::string() : p_.domains[rng_.below(p_.domains.size())];
            const auto extra = static_cast<std::uint32_t>(name.size());
            const auto sport = static_cast<std::uint16_t>(50000 + rng_.below(10000));
            packet(t, p_.mac, kGateway, p_.ip, kGatewayIp, proto::kUdp, sport, 53, p_.dns_query_bytes + extra);
            packet(t + 0.02, kGateway, p_.mac, kGatewayIp, p_.ip, proto::kUdp, 53, sport, p_.dns_reply_bytes + extra);
            if (!name.empty()) event(t, EventKind::Domain, name);
        });
        periodic(p_.ntp_period, t0, t1, [&](double t) {
            packet(t, p_.mac, kGateway, p_.ip, ntp_ip_, proto::kUdp, 123, 123, 90);
            packet(t + 0.03, kGateway, p_.mac, ntp_ip_, p_.ip, proto::kUdp, 123, 123, 90);
        });
        periodic(p_.ssdp_period, t0, t1, [&](double t) {
            for (int i = 0; i < 3; ++i)
                packet(t + 0.1 * i, p_.mac, kSsdpMulticast, p_.ip, "239.255.255.250", proto::kUdp, 1900, 1900,
                       p_.ssdp_bytes);
        });
        periodic(p_.heartbeat_period, t0, t1, [&](double t) {
            for (std::uint32_t i = 0; i < p_.heartbeat_up_packets; ++i) up(t + 0.01 * i, p_.heartbeat_up_bytes);
            for (std::uint32_t i = 0; i < p_.heartbeat_down_packets; ++i)
                down(t + 0.05 + 0.01 * i, p_.heartbeat_down_bytes);
        });
        periodic(3600.0, t0, t1, [&](double t) { connection_events(t); });
        if (p_.burst_rate_per_hour > 0) {
            const double mean_gap = 3600.0 / p_.burst_rate_per_hour;
            for (double t = t0 - mean_gap * std::log(1.0 - rng_.uniform()); t < t1;
                 t -= mean_gap * std::log(1.0 - rng_.uniform())) {
                const auto n = static_cast<std::uint32_t>(
                    std::lround(p_.burst_packets * rng_.uniform(0.7, 1.3)));
                const double span = rng_.uniform(20.0, 90.0);
                for (std::uint32_t i = 0; i < n; ++i) {
                    const double ts = t + span * rng_.uniform();
                    if (ts >= t1) continue;
                    up(ts, size(p_.burst_up_bytes));
                    down(ts + 0.02, size(p_.burst_down_bytes));
                }
                connection_events(t);
            }
        }
        periodic(p_.local_period, t0, t1, [&](double t) {
            packet(t, kController, p_.mac, kControllerIp, p_.ip, proto::kTcp, 52000, 8080, p_.local_bytes);
        });
    }

    void flood(const FloodInjection& f, double t0) {
        const std::uint32_t len = f.packet_bytes ? f.packet_bytes : p_.heartbeat_down_bytes;
        const auto per_minute = static_cast<std::uint64_t>(std::llround(f.packets_per_minute));
        const auto minutes = static_cast<std::uint64_t>(std::llround(f.duration_minutes));
        const double start = t0 + 60.0 * f.start_minute;
        for (std::uint64_t m = 0; m < minutes; ++m)
            for (std::uint64_t i = 0; i < per_minute; ++i) {
                const double ts = start + 60.0 * m + 60.0 * (static_cast<double>(i) + rng_.uniform(0.0, 0.5)) /
                                                          static_cast<double>(per_minute);
                down(ts, size(len));
                if (f.replies) up(ts + 0.005, size(len));
            }
    }

private:
    const DeviceProfile& p_;
    Rng& rng_;
    Fixture& out_;
    std::string remote_ip_;
    std::string ntp_ip_;
    std::uint16_t ephemeral_;
};

}  // namespace

Fixture generate_fixture(const FixtureConfig& config) {
    if (!(config.days > 0)) throw Error("fixture", "duration must be positive");
    if (std::fmod(config.start_ts, 60.0) != 0.0) throw Error("fixture", "start timestamp must be minute-aligned");
    Fixture fx;
    fx.gateway = kGateway;
    fx.profiles = config.profiles.empty() ? builtin_profiles(config.devices) : config.profiles;
    const double t0 = config.start_ts;
    const double t1 = t0 + config.days * 86400.0;
    if (config.flood) {
        const auto& f = *config.flood;
        if (f.device >= fx.profiles.size()) throw Error("fixture", "flood target index out of range");
        if (f.start_minute < 0 || t0 + 60.0 * (f.start_minute + f.duration_minutes) > t1)
            throw Error("fixture", "flood window lies outside the simulated period");
        if (!(f.packets_per_minute > 0)) throw Error("fixture", "flood rate must be positive");
    }
    for (std::size_t i = 0; i < fx.profiles.size(); ++i) {
        // one stream per device so adding a flood never perturbs the others
        Rng rng(config.seed * 0x9E3779B97F4A7C15ULL + i + 1);
        Emitter e(fx.profiles[i], i, rng, fx);
        e.run(t0, t1);
        if (config.flood && config.flood->device == i) {
            Rng flood_rng(config.seed ^ 0xF100D);
            Emitter f(fx.profiles[i], i, flood_rng, fx);
            f.flood(*config.flood, t0);
        }
    }
    // clip to the simulated period; replies may spill past its end
    std::erase_if(fx.packets, [&](const PacketRecord& r) { return r.ts >= t1; });
    auto by_ts = [](const auto& a, const auto& b) { return a.ts < b.ts; };
    std::stable_sort(fx.packets.begin(), fx.packets.end(), by_ts);
    std::stable_sort(fx.events.begin(), fx.events.end(), by_ts);
    return fx;
}

void write_device_map(const Fixture& fixture, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("fixture", "cannot write '" + path.string() + "'");
    out << "device\tclass\n";
    for (const auto& p : fixture.profiles) out << p.mac.str() << '\t' << p.name << '\n';
}

std::vector<std::pair<MacAddress, std::string>> read_device_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("devices", "cannot open '" + path.string() + "'");
    std::vector<std::pair<MacAddress, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.starts_with('#') || (lineno == 1 && line.starts_with("device\t"))) continue;
        const auto tab = line.find('\t');
        const auto mac = MacAddress::parse(line.substr(0, tab));
        if (tab == std::string::npos || !mac || tab + 1 >= line.size())
            throw Error("devices", path.string() + ":" + std::to_string(lineno) + ": expected 'MAC<TAB>class'");
        out.emplace_back(*mac, line.substr(tab + 1));
    }
    return out;
}

}  // namespace iotmon
