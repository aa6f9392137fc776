#include "iotmon/supervised/info_gain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "iotmon/error.hpp"

namespace iotmon {

std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins) {
    if (bins == 0) throw Error("info-gain", "bin count must be positive");
    const std::size_t n = values.size();
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (distinct.size() <= bins) {
            out[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), values[i]) -
                                              distinct.begin());
        } else {
            const auto rank = static_cast<std::size_t>(
                std::lower_bound(sorted.begin(), sorted.end(), values[i]) - sorted.begin());
            out[i] = rank * bins / n;
        }
    }
    return out;
}

double entropy_bits(std::span<const double> counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total <= 0) return 0.0;
    double h = 0.0;
    for (double c : counts)
        if (c > 0) h -= (c / total) * std::log2(c / total);
    return h;
}

double info_gain(std::span<const double> values, std::span<const std::size_t> labels, std::size_t bins) {
    if (values.size() != labels.size()) throw Error("info-gain", "value and label counts differ");
    if (values.empty()) return 0.0;
    const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
    const auto binned = equal_frequency_bins(values, bins);
    const std::size_t nb = *std::max_element(binned.begin(), binned.end()) + 1;
    std::vector<double> cls(k, 0.0);
    std::vector<std::vector<double>> joint(nb, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        cls[labels[i]] += 1.0;
        joint[binned[i]][labels[i]] += 1.0;
    }
    const double n = static_cast<double>(labels.size());
    double conditional = 0.0;
    for (const auto& row : joint) {
        const double m = std::accumulate(row.begin(), row.end(), 0.0);
        if (m > 0) conditional += (m / n) * entropy_bits(row);
    }
    return std::max(0.0, entropy_bits(cls) - conditional);
}

std::vector<AttributeRank> rank_attributes(std::span<const AttributeInstance> instances, std::size_t bins) {
    if (instances.empty()) throw Error("info-gain", "no instances");
    const auto names = common_attribute_names(instances);
    std::map<std::string, std::size_t> class_index;
    std::vector<std::size_t> labels;
    labels.reserve(instances.size());
    for (const auto& inst : instances) {
        if (!inst.label) throw Error("info-gain", "instance of " + inst.device.str() + " has no label");
        labels.push_back(class_index.emplace(*inst.label, class_index.size()).first->second);
    }
    std::vector<AttributeRank> ranks;
    std::vector<double> column(instances.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        for (std::size_t i = 0; i < instances.size(); ++i) column[i] = instances[i].values[j];
        ranks.push_back({names[j], info_gain(column, labels, bins)});
    }
    std::stable_sort(ranks.begin(), ranks.end(), [](const auto& a, const auto& b) { return a.gain > b.gain; });
    return ranks;
}

}  // namespace iotmon
