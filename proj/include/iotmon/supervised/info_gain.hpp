#pragma once

#include <span>
#include <string>
#include <vector>

#include "iotmon/ingest.hpp"

namespace iotmon {

/// Equal-frequency discretization into at most `bins` bins. Tied values
/// always share a bin; when there are no more distinct values than bins,
/// each distinct value gets its own bin.
std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins = 10);

/// Shannon entropy in bits of a count vector.
double entropy_bits(std::span<const double> counts);

/// H(class) - H(class | binned attribute).
double info_gain(std::span<const double> values, std::span<const std::size_t> labels, std::size_t bins = 10);

struct AttributeRank {
    std::string attribute;
    double gain = 0.0;
};

/// Descending by gain; ties keep attribute order. Every instance needs a label.
std::vector<AttributeRank> rank_attributes(std::span<const AttributeInstance> instances, std::size_t bins = 10);

}  // namespace iotmon
