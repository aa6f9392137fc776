#include <doctest.h>

#include "helpers.hpp"
#include "iotmon/attributes.hpp"
#include "iotmon/error.hpp"

using namespace iotmon;

namespace {

const MacAddress kDev = MacAddress::from_string("02:00:00:00:00:10");

// All eight flows for one device over `minutes`, zero except `flow`.
std::vector<FlowCounterSeries> one_flow(FlowName flow, const std::vector<std::uint64_t>& bytes,
                                        const std::vector<std::uint64_t>& packets) {
    std::vector<FlowCounterSeries> out;
    for (auto f : kAllFlows) {
        FlowCounterSeries s{kDev, f, {}};
        for (std::size_t m = 0; m < bytes.size(); ++m)
            s.samples.push_back({static_cast<std::int64_t>(m), f == flow ? bytes[m] : 0, f == flow ? packets[m] : 0});
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_SUITE("attributes") {

TEST_CASE("presets and names") {
    CHECK(TimescaleSet::ch5().scales() == std::vector<int>{1, 2, 4, 8});
    CHECK(TimescaleSet::ch4().size() == 7);
    CHECK(TimescaleSet::parse("16,1,4,4").scales() == std::vector<int>{1, 4, 16});
    CHECK_THROWS_AS(TimescaleSet::parse("3"), Error);
    CHECK_THROWS_AS(TimescaleSet::parse("128"), Error);
    CHECK_THROWS_AS(TimescaleSet::parse("ch9"), Error);
    CHECK(attribute_name(FlowName::RemoteDown, FlowMetric::AvgRate, 8) == "remote_in:avg_rate@8m");
    CHECK(attribute_names(kAllFlows, TimescaleSet::ch5()).size() == 64);
    CHECK(attribute_names(kAllFlows, TimescaleSet::ch4()).size() == 112);
    CHECK(attribute_names(kAllFlows, TimescaleSet::parse("1,4,16")).size() == 48);
}

TEST_CASE("dns bytes [72,0,72,0], t=3, s=4") {
    auto insts = synthesize(one_flow(FlowName::DnsUp, {72, 0, 72, 0}, {1, 0, 1, 0}), TimescaleSet::ch5());
    REQUIRE(insts.size() == 4);
    const auto& x = insts[3];
    CHECK(x.window_start == 180.0);
    CHECK(x.get("dns_out:avg_rate@4m") == 36.0);
    CHECK(x.get("dns_out:avg_pkt_size@4m") == 72.0);
    CHECK(x.get("dns_out:avg_rate@1m") == 0.0);
    CHECK(x.get("dns_out:avg_pkt_size@1m") == 0.0);  // no packets
    CHECK(x.get("remote_in:avg_rate@8m") == 0.0);
    CHECK(x.size() == 64);
}

TEST_CASE("windows before the first minute are truncated") {
    auto insts = synthesize(one_flow(FlowName::DnsUp, {72, 0, 72, 0}, {1, 0, 1, 0}), TimescaleSet::ch5());
    CHECK(insts[0].get("dns_out:avg_rate@8m") == 72.0);   // one minute covered
    CHECK(insts[1].get("dns_out:avg_rate@4m") == 36.0);   // two minutes covered
    CHECK(insts[2].get("dns_out:avg_rate@8m") == 48.0);   // 144 / 3
}

TEST_CASE("scale consistency and exact window sums") {
    Rng rng(9);
    std::vector<std::uint64_t> bytes, packets;
    for (int m = 0; m < 200; ++m) {
        const auto n = rng.below(20);
        packets.push_back(n);
        bytes.push_back(n * (60 + rng.below(1400)));
    }
    const auto scales = TimescaleSet::ch4();
    auto insts = synthesize(one_flow(FlowName::RemoteUp, bytes, packets), scales);
    REQUIRE(insts.size() == 200);
    std::size_t bad = 0;
    for (std::size_t t = 0; t < insts.size(); ++t) {
        if (insts[t].get("remote_out:avg_rate@1m") != static_cast<double>(bytes[t])) ++bad;
        for (int s : scales.scales()) {
            if (t + 1 < static_cast<std::size_t>(s)) continue;
            std::uint64_t sum = 0;
            for (std::size_t k = t + 1 - s; k <= t; ++k) sum += bytes[k];
            const double rate = *insts[t].get("remote_out:avg_rate@" + std::to_string(s) + "m");
            if (rate * s != static_cast<double>(sum)) ++bad;
        }
    }
    CHECK(bad == 0);
}

TEST_CASE("attribute count is flows x 2 x scales for every preset") {
    for (const char* preset : {"ch5", "ch4", "1", "2,32", "1,2,4,8,16,32,64"}) {
        const auto scales = TimescaleSet::parse(preset);
        auto insts = synthesize(one_flow(FlowName::LocalDown, {1, 2, 3}, {1, 1, 1}), scales);
        CHECK(insts[0].size() == 8 * 2 * scales.size());
    }
}

TEST_CASE("gaps and ragged flow sets are refused") {
    auto series = one_flow(FlowName::DnsUp, {1, 2, 3}, {1, 1, 1});
    series[2].samples.erase(series[2].samples.begin() + 1);
    CHECK_THROWS_AS(synthesize(series, TimescaleSet::ch5()), Error);
}

TEST_CASE("downsample") {
    auto make = [](std::size_t n) { return testing::random_instances(n, 2, 1); };
    auto one_device = [&](std::size_t n) {
        auto xs = make(n);
        for (auto& x : xs) x.device = kDev;
        return xs;
    };
    auto xs = one_device(45);
    auto kept = downsample(xs, 15);
    REQUIRE(kept.size() == 3);
    CHECK(kept[0] == xs[0]);
    CHECK(kept[1] == xs[15]);
    CHECK(kept[2] == xs[30]);
    CHECK(downsample(xs, 1).size() == 45);
    CHECK(downsample(one_device(100), 15).size() == 7);
    // per device: three devices interleaved, 99 instances -> 33 each -> 3 each
    CHECK(downsample(make(99), 15).size() == 9);
}

TEST_CASE("session attributes") {
    SUBCASE("no packets give zeros") {
        CHECK(session_attributes({}, kDev, 0.0) == SessionAttributes{});
    }
    SUBCASE("two DNS queries 300 s apart") {
        std::vector<PacketRecord> ps(2);
        for (int i = 0; i < 2; ++i) {
            ps[i].ts = 10.0 + 300.0 * i;
            ps[i].src_mac = kDev;
            ps[i].proto = proto::kUdp;
            ps[i].src_port = 5353;
            ps[i].dst_port = 53;
            ps[i].length = 80;
        }
        CHECK(session_attributes(ps, kDev, 0.0).dns_interval == 300.0);
        CHECK(session_attributes(ps, kDev, 0.0).ntp_interval == 0.0);
    }
    SUBCASE("ten 100-byte packets") {
        std::vector<PacketRecord> ps(10);
        for (int i = 0; i < 10; ++i) {
            ps[i].ts = 100.0 + 2.0 * i;
            ps[i].src_mac = kDev;
            ps[i].src_ip = "10.0.0.2";
            ps[i].dst_ip = "52.0.0.1";
            ps[i].proto = proto::kTcp;
            ps[i].src_port = 40000;
            ps[i].dst_port = 443;
            ps[i].length = 100;
        }
        const auto s = session_attributes(ps, kDev, 0.0);
        CHECK(s.flow_volume == 1000.0);
        CHECK(s.flow_duration == 18.0);
        CHECK(s.mean_rate == doctest::Approx(8.0 * 1000.0 / 18.0));
        CHECK(s.sleep_time == 2.0);
        // packets outside the hour are ignored
        CHECK(session_attributes(ps, kDev, 3600.0) == SessionAttributes{});
    }
}

}
