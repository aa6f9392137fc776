#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace iotmon {

/// Counts (or rates) indexed [actual][predicted].
struct ConfusionMatrix {
    std::vector<std::string> classes;  // sorted
    std::vector<std::vector<double>> counts;

    explicit ConfusionMatrix(std::vector<std::string> class_names);

    /// Class set is the sorted union of both sequences.
    static ConfusionMatrix from_pairs(std::span<const std::string> truth, std::span<const std::string> predicted);

    void add(const std::string& actual, const std::string& predicted, double weight = 1.0);
    std::size_t index(const std::string& name) const;
    double total() const;
};

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double support = 0.0;  // actual instances of the class
    // set when the corresponding denominator was zero and the value was forced to 0
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

/// precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = 2PR/(P+R).
ClassMetrics binary_metrics(double tp, double fp, double fn, std::string name = {});

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    // support-weighted averages
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
};

MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// Root relative squared error of class-probability outputs against one-hot
/// targets, relative to predicting the class frequencies. Conventions vary
/// across toolkits; informational only.
double rrse(std::span<const std::vector<double>> probabilities, std::span<const std::size_t> truth);

/// Row-normalized percentages, rows actual, columns predicted.
void write_confusion_tsv(const ConfusionMatrix& cm, std::ostream& out);
void write_metrics_tsv(const MetricsReport& report, std::ostream& out);

}  // namespace iotmon
