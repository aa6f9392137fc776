#include "iotmon/supervised/nbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "iotmon/error.hpp"

namespace iotmon {

using nlohmann::json;

std::size_t NbmModel::word_index(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? others_index() : it->second;
}

void NbmModel::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < vocabulary.size(); ++i) index_.emplace(vocabulary[i], i);
}

namespace {

void derive_probabilities(NbmModel& m) {
    const double total_instances = static_cast<double>(
        std::accumulate(m.class_instances.begin(), m.class_instances.end(), std::uint64_t{0}));
    const double n_words = static_cast<double>(m.vocabulary.size());
    m.log_prior.resize(m.classes.size());
    m.log_word_prob.assign(m.classes.size(), std::vector<double>(m.vocabulary.size()));
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        m.log_prior[c] = std::log(static_cast<double>(m.class_instances[c]) / total_instances);
        const double denom = n_words + static_cast<double>(m.class_totals[c]);
        for (std::size_t w = 0; w < m.vocabulary.size(); ++w)
            m.log_word_prob[c][w] = std::log((1.0 + static_cast<double>(m.word_counts[c][w])) / denom);
    }
    m.rebuild_index();
}

}  // namespace

NbmModel nbm_train(std::span<const LabeledBag> training) {
    if (training.empty()) throw Error("nbm", "no training instances");
    std::set<std::string> classes, words;
    for (const auto& lb : training) {
        classes.insert(lb.label);
        for (const auto& [w, n] : lb.bag)
            if (n > 0 && w != kOthersWord) words.insert(w);
    }
    const bool has_others = std::any_of(training.begin(), training.end(), [](const LabeledBag& lb) {
        auto it = lb.bag.find(std::string(kOthersWord));
        return it != lb.bag.end() && it->second > 0;
    });
    if (words.empty() && !has_others) throw Error("nbm", "empty vocabulary");

    NbmModel m;
    m.classes.assign(classes.begin(), classes.end());
    m.vocabulary.assign(words.begin(), words.end());
    m.vocabulary.emplace_back(kOthersWord);
    m.rebuild_index();
    m.class_instances.assign(m.classes.size(), 0);
    m.class_totals.assign(m.classes.size(), 0);
    m.word_counts.assign(m.classes.size(), std::vector<std::uint64_t>(m.vocabulary.size(), 0));
    for (const auto& lb : training) {
        const auto c = static_cast<std::size_t>(
            std::lower_bound(m.classes.begin(), m.classes.end(), lb.label) - m.classes.begin());
        ++m.class_instances[c];
        for (const auto& [w, n] : lb.bag) {
            m.word_counts[c][m.word_index(w)] += n;
            m.class_totals[c] += n;
        }
    }
    derive_probabilities(m);
    return m;
}

NbmPrediction nbm_predict(const NbmModel& model, const BagOfWords& bag) {
    NbmPrediction p;
    p.log_scores = model.log_prior;
    for (const auto& [w, n] : bag) {
        if (n == 0) continue;
        const std::size_t col = model.word_index(w);
        for (std::size_t c = 0; c < model.classes.size(); ++c)
            p.log_scores[c] += static_cast<double>(n) * model.log_word_prob[c][col];
    }
    p.class_index = static_cast<std::size_t>(std::max_element(p.log_scores.begin(), p.log_scores.end()) -
                                             p.log_scores.begin());
    p.label = model.classes[p.class_index];
    const double top = p.log_scores[p.class_index];
    double z = 0.0;
    for (double s : p.log_scores) z += std::exp(s - top);
    p.confidence = 1.0 / z;
    return p;
}

json to_json(const NbmModel& model) {
    return json{{"format", "iotmon-nbm"},
                {"version", 1},
                {"classes", model.classes},
                {"vocabulary", model.vocabulary},
                {"class_instances", model.class_instances},
                {"word_counts", model.word_counts},
                {"class_totals", model.class_totals}};
}

NbmModel nbm_from_json(const json& doc) {
    try {
        if (doc.at("format") != "iotmon-nbm") throw Error("nbm", "not a Naive Bayes model document");
        NbmModel m;
        m.classes = doc.at("classes").get<std::vector<std::string>>();
        m.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
        m.class_instances = doc.at("class_instances").get<std::vector<std::uint64_t>>();
        m.word_counts = doc.at("word_counts").get<std::vector<std::vector<std::uint64_t>>>();
        m.class_totals = doc.at("class_totals").get<std::vector<std::uint64_t>>();
        if (m.classes.empty() || m.vocabulary.empty() || m.vocabulary.back() != kOthersWord ||
            m.class_instances.size() != m.classes.size() || m.word_counts.size() != m.classes.size() ||
            m.class_totals.size() != m.classes.size())
            throw Error("nbm", "inconsistent model document");
        for (const auto& row : m.word_counts)
            if (row.size() != m.vocabulary.size()) throw Error("nbm", "inconsistent model document");
        derive_probabilities(m);
        return m;
    } catch (const json::exception& e) {
        throw Error("nbm", std::string("malformed model document: ") + e.what());
    }
}

}  // namespace iotmon
