#include "iotmon/supervised/two_stage.hpp"

#include <cmath>

#include "iotmon/error.hpp"

namespace iotmon {

using nlohmann::json;

std::size_t stage0_slot(EventKind kind) {
    switch (kind) {
        case EventKind::RemotePort: return 0;
        case EventKind::Domain: return 1;
        case EventKind::CipherSuite: return 2;
    }
    return 0;
}

std::map<std::pair<MacAddress, std::int64_t>, Stage0Bags> bags_from_events(std::span<const EventRecord> events,
                                                                           double window_seconds) {
    if (!(window_seconds > 0.0)) throw Error("two-stage", "window length must be positive");
    std::map<std::pair<MacAddress, std::int64_t>, Stage0Bags> out;
    for (const auto& ev : events) {
        const auto w = static_cast<std::int64_t>(std::floor(ev.ts / window_seconds));
        if (ev.count > 0) out[{ev.device, w}][stage0_slot(ev.kind)][ev.value] += ev.count;
    }
    return out;
}

void TwoStageModel::validate() const {
    const auto& classes = stage1.classes;
    for (std::size_t s = 0; s < 3; ++s)
        if (stage0[s].classes != classes)
            throw Error("two-stage", std::string("stage-0 '") + kStage0Names[s] +
                                         "' class set differs from the stage-1 class set");
    if (stage1.attributes.size() != 3 * classes.size() + 3 + quantitative_names.size())
        throw Error("two-stage", "stage-1 attribute count does not match classes and quantitative attributes");
}

std::vector<double> stage1_features(const std::array<NbmModel, 3>& stage0, const Stage0Bags& bags,
                                    std::span<const double> quantitative) {
    const std::size_t c = stage0[0].classes.size();
    std::vector<double> x(3 * c + 3 + quantitative.size(), 0.0);
    for (std::size_t s = 0; s < 3; ++s) {
        const NbmPrediction p = nbm_predict(stage0[s], bags[s]);
        x[s * c + p.class_index] = 1.0;
        x[3 * c + s] = p.confidence;
    }
    std::copy(quantitative.begin(), quantitative.end(), x.begin() + static_cast<std::ptrdiff_t>(3 * c + 3));
    return x;
}

std::vector<std::string> stage1_feature_names(const std::vector<std::string>& classes,
                                              const std::vector<std::string>& quantitative_names) {
    std::vector<std::string> names;
    for (const char* s : kStage0Names)
        for (const auto& c : classes) names.push_back(std::string(s) + "=" + c);
    for (const char* s : kStage0Names) names.push_back(std::string(s) + ":confidence");
    names.insert(names.end(), quantitative_names.begin(), quantitative_names.end());
    return names;
}

TwoStageModel two_stage_train(std::span<const TwoStageSample> samples, std::vector<std::string> quantitative_names,
                              const ForestConfig& forest, std::vector<std::string>* warnings) {
    if (samples.empty()) throw Error("two-stage", "no training instances");
    for (const auto& s : samples)
        if (s.quantitative.size() != quantitative_names.size())
            throw Error("two-stage", "sample quantitative attribute count does not match names");
    TwoStageModel model;
    model.quantitative_names = std::move(quantitative_names);
    for (std::size_t s = 0; s < 3; ++s) {
        std::vector<LabeledBag> bags;
        bags.reserve(samples.size());
        for (const auto& sample : samples) bags.push_back({sample.label, sample.bags[s]});
        model.stage0[s] = nbm_train(bags);
    }
    const auto& classes = model.stage0[0].classes;
    std::vector<double> rows;
    std::vector<std::string> labels;
    for (const auto& sample : samples) {
        const auto x = stage1_features(model.stage0, sample.bags, sample.quantitative);
        rows.insert(rows.end(), x.begin(), x.end());
        labels.push_back(sample.label);
    }
    const std::size_t p = 3 * classes.size() + 3 + model.quantitative_names.size();
    model.stage1 = forest_train(rows, p, labels, stage1_feature_names(classes, model.quantitative_names), forest,
                                warnings);
    model.validate();
    return model;
}

ForestPrediction two_stage_predict(const TwoStageModel& model, const Stage0Bags& bags,
                                   std::span<const double> quantitative) {
    model.validate();
    if (quantitative.size() != model.quantitative_names.size())
        throw Error("two-stage", "expected " + std::to_string(model.quantitative_names.size()) +
                                     " quantitative attributes, got " + std::to_string(quantitative.size()));
    return forest_predict(model.stage1, stage1_features(model.stage0, bags, quantitative));
}

json to_json(const TwoStageModel& model) {
    json doc{{"format", "iotmon-two-stage"}, {"version", 1}, {"quantitative", model.quantitative_names}};
    for (std::size_t s = 0; s < 3; ++s) doc["stage0"][kStage0Names[s]] = to_json(model.stage0[s]);
    doc["stage1"] = to_json(model.stage1);
    return doc;
}

TwoStageModel two_stage_from_json(const json& doc) {
    try {
        if (doc.at("format") != "iotmon-two-stage") throw Error("two-stage", "not a two-stage model document");
        TwoStageModel m;
        m.quantitative_names = doc.at("quantitative").get<std::vector<std::string>>();
        for (std::size_t s = 0; s < 3; ++s) m.stage0[s] = nbm_from_json(doc.at("stage0").at(kStage0Names[s]));
        m.stage1 = forest_from_json(doc.at("stage1"));
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw Error("two-stage", std::string("malformed model document: ") + e.what());
    }
}

}  // namespace iotmon
