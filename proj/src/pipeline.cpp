#include "iotmon/pipeline.hpp"

namespace iotmon {

FlowTable make_flow_table(MacAddress gateway, std::span<const MacAddress> devices) {
    FlowTable table(gateway);
    for (MacAddress dev : devices) table.install_device(dev);
    return table;
}

std::vector<AttributeInstance> telemetry_instances(std::span<const PacketRecord> packets, const FlowTable& table,
                                                   const TimescaleSet& scales, double interval_seconds) {
    const auto series = export_counters(packets, table, interval_seconds);
    return synthesize(series, scales, interval_seconds);
}

void apply_labels(std::vector<AttributeInstance>& instances, const std::map<MacAddress, std::string>& labels) {
    for (auto& inst : instances)
        if (auto it = labels.find(inst.device); it != labels.end()) inst.label = it->second;
}

std::vector<AttributeInstance> slice_time(std::span<const AttributeInstance> instances, double from, double to) {
    std::vector<AttributeInstance> out;
    for (const auto& inst : instances)
        if (inst.window_start >= from && inst.window_start < to) out.push_back(inst);
    return out;
}

}  // namespace iotmon
