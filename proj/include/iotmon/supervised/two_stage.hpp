#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iotmon/ingest.hpp"
#include "iotmon/supervised/forest.hpp"
#include "iotmon/supervised/nbm.hpp"

namespace iotmon {

/// Stage-0 bags in fixed order: remote ports, domain names, cipher suites.
inline constexpr std::array<const char*, 3> kStage0Names{"ports", "domains", "ciphers"};
using Stage0Bags = std::array<BagOfWords, 3>;

/// Stage-0 bag index for an event kind.
std::size_t stage0_slot(EventKind kind);

/// Groups events into per-device windows of `window_seconds` (hourly by
/// default), keyed by (device, window index).
std::map<std::pair<MacAddress, std::int64_t>, Stage0Bags> bags_from_events(std::span<const EventRecord> events,
                                                                           double window_seconds = 3600.0);

struct TwoStageSample {
    std::string label;
    Stage0Bags bags;
    std::vector<double> quantitative;
};

struct TwoStageModel {
    std::array<NbmModel, 3> stage0;
    ForestModel stage1;
    std::vector<std::string> quantitative_names;

    /// Throws unless all stage-0 models and the forest share one class set.
    void validate() const;
};

/// Stage-1 input: one-hot tentative class per stage-0 model, the three
/// stage-0 confidences, then the quantitative attributes.
std::vector<double> stage1_features(const std::array<NbmModel, 3>& stage0, const Stage0Bags& bags,
                                    std::span<const double> quantitative);
std::vector<std::string> stage1_feature_names(const std::vector<std::string>& classes,
                                              const std::vector<std::string>& quantitative_names);

/// Stage-1 is trained on the stage-0 outputs for the training samples themselves.
TwoStageModel two_stage_train(std::span<const TwoStageSample> samples, std::vector<std::string> quantitative_names,
                              const ForestConfig& forest, std::vector<std::string>* warnings = nullptr);

ForestPrediction two_stage_predict(const TwoStageModel& model, const Stage0Bags& bags,
                                   std::span<const double> quantitative);

nlohmann::json to_json(const TwoStageModel& model);
TwoStageModel two_stage_from_json(const nlohmann::json& doc);

}  // namespace iotmon
