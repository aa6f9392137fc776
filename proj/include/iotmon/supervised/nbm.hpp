#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace iotmon {

/// Word -> occurrence count for one instance window.
using BagOfWords = std::map<std::string, std::uint64_t>;

/// Vocabulary column for words never seen in training.
inline constexpr std::string_view kOthersWord = "others";

struct LabeledBag {
    std::string label;
    BagOfWords bag;
};

/// Multinomial Naive Bayes with add-one smoothing:
///   Pr(w|c) = (1 + n(w,c)) / (N + n(c)),  N = vocabulary size incl. "others".
struct NbmModel {
    std::vector<std::string> classes;     // sorted
    std::vector<std::string> vocabulary;  // sorted training words, then "others"
    std::vector<std::uint64_t> class_instances;
    std::vector<std::vector<std::uint64_t>> word_counts;  // [class][word]
    std::vector<std::uint64_t> class_totals;
    std::vector<double> log_prior;
    std::vector<std::vector<double>> log_word_prob;  // [class][word]

    /// Column of `word`, or the "others" column.
    std::size_t word_index(std::string_view word) const;
    std::size_t others_index() const noexcept { return vocabulary.size() - 1; }

    void rebuild_index();

private:
    std::unordered_map<std::string, std::size_t> index_;
};

/// Throws when there are no instances or no words at all.
NbmModel nbm_train(std::span<const LabeledBag> training);

struct NbmPrediction {
    std::size_t class_index = 0;
    std::string label;
    std::vector<double> log_scores;  // log P(c) + sum n_w log Pr(w|c)
    double confidence = 0.0;         // normalized posterior of the winner
};

/// An empty bag falls back to the priors alone.
NbmPrediction nbm_predict(const NbmModel& model, const BagOfWords& bag);

nlohmann::json to_json(const NbmModel& model);
NbmModel nbm_from_json(const nlohmann::json& doc);

}  // namespace iotmon
