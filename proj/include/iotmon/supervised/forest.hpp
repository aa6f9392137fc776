#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace iotmon {

struct ForestConfig {
    std::size_t trees = 100;
    std::size_t max_features = 0;  // features tried per split; 0 -> round(sqrt(p))
    std::size_t min_leaf = 2;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0 -> hardware concurrency
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    std::vector<double> distribution;  // class shares of the training samples reaching the node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::vector<std::size_t> features_considered;  // sorted union over all splits

    const std::vector<double>& leaf(std::span<const double> x) const;
    /// Majority class of the leaf reached by `x`; ties go to the lower index.
    std::size_t vote(std::span<const double> x) const;
};

struct ForestModel {
    std::vector<std::string> classes;  // sorted
    std::vector<std::string> attributes;
    std::vector<DecisionTree> trees;
    ForestConfig config;
};

/// Bagged CART trees with Gini impurity. `rows` is n x p row-major.
/// A single-class training set yields a constant model and a warning.
ForestModel forest_train(std::span<const double> rows, std::size_t n_features, std::span<const std::string> labels,
                         std::vector<std::string> attribute_names, const ForestConfig& config,
                         std::vector<std::string>* warnings = nullptr);

struct ForestPrediction {
    std::size_t class_index = 0;
    std::string label;
    double confidence = 0.0;  // vote share of the winner
    std::vector<double> votes;  // vote share per class, sums to 1
};

ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x);

nlohmann::json to_json(const ForestModel& model);
ForestModel forest_from_json(const nlohmann::json& doc);

}  // namespace iotmon
