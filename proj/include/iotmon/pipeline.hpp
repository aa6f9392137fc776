#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "iotmon/attributes.hpp"
#include "iotmon/flowtable.hpp"
#include "iotmon/ingest.hpp"

namespace iotmon {

/// Flow table with the eight-rule set installed for each device.
FlowTable make_flow_table(MacAddress gateway, std::span<const MacAddress> devices);

/// Packets -> per-minute counters -> attribute instances.
std::vector<AttributeInstance> telemetry_instances(std::span<const PacketRecord> packets, const FlowTable& table,
                                                   const TimescaleSet& scales, double interval_seconds = 60.0);

/// Sets each instance's label from the device map; devices not in the map keep theirs.
void apply_labels(std::vector<AttributeInstance>& instances, const std::map<MacAddress, std::string>& labels);

/// Instances with window_start in [from, to).
std::vector<AttributeInstance> slice_time(std::span<const AttributeInstance> instances, double from, double to);

}  // namespace iotmon
