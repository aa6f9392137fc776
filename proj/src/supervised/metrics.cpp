#include "iotmon/supervised/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "iotmon/error.hpp"
#include "iotmon/ingest.hpp"

namespace iotmon {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names) : classes(std::move(class_names)) {
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    counts.assign(classes.size(), std::vector<double>(classes.size(), 0.0));
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const std::string> truth,
                                            std::span<const std::string> predicted) {
    if (truth.size() != predicted.size())
        throw Error("metrics", "truth has " + std::to_string(truth.size()) + " labels, predictions " +
                                   std::to_string(predicted.size()));
    std::set<std::string> names(truth.begin(), truth.end());
    names.insert(predicted.begin(), predicted.end());
    ConfusionMatrix cm({names.begin(), names.end()});
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
}

std::size_t ConfusionMatrix::index(const std::string& name) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), name);
    if (it == classes.end() || *it != name) throw Error("metrics", "unknown class '" + name + "'");
    return static_cast<std::size_t>(it - classes.begin());
}

void ConfusionMatrix::add(const std::string& actual, const std::string& predicted, double weight) {
    if (!(weight >= 0.0)) throw Error("metrics", "negative confusion count");
    counts[index(actual)][index(predicted)] += weight;
}

double ConfusionMatrix::total() const {
    double t = 0.0;
    for (const auto& row : counts)
        for (double v : row) t += v;
    return t;
}

ClassMetrics binary_metrics(double tp, double fp, double fn, std::string name) {
    if (tp < 0 || fp < 0 || fn < 0) throw Error("metrics", "negative confusion count");
    ClassMetrics m;
    m.name = std::move(name);
    m.support = tp + fn;
    if (tp + fp > 0) m.precision = tp / (tp + fp);
    else m.precision_undefined = true;
    if (tp + fn > 0) m.recall = tp / (tp + fn);
    else m.recall_undefined = true;
    if (m.precision + m.recall > 0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else m.f1_undefined = true;
    return m;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    MetricsReport r;
    const std::size_t k = cm.classes.size();
    const double total = cm.total();
    double correct = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        double fp = 0.0, fn = 0.0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.counts[o][c];
            fn += cm.counts[c][o];
        }
        const double tp = cm.counts[c][c];
        correct += tp;
        r.per_class.push_back(binary_metrics(tp, fp, fn, cm.classes[c]));
    }
    if (total > 0) {
        r.accuracy = correct / total;
        for (const auto& m : r.per_class) {
            const double w = m.support / total;
            r.weighted_precision += w * m.precision;
            r.weighted_recall += w * m.recall;
            r.weighted_f1 += w * m.f1;
        }
    }
    return r;
}

double rrse(std::span<const std::vector<double>> probabilities, std::span<const std::size_t> truth) {
    if (probabilities.size() != truth.size() || truth.empty())
        throw Error("metrics", "rrse needs one probability vector per truth label");
    const std::size_t k = probabilities.front().size();
    std::vector<double> prior(k, 0.0);
    for (auto t : truth) {
        if (t >= k) throw Error("metrics", "truth label out of range");
        prior[t] += 1.0;
    }
    for (auto& p : prior) p /= static_cast<double>(truth.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (probabilities[i].size() != k) throw Error("metrics", "ragged probability vectors");
        for (std::size_t c = 0; c < k; ++c) {
            const double target = c == truth[i] ? 1.0 : 0.0;
            num += (probabilities[i][c] - target) * (probabilities[i][c] - target);
            den += (prior[c] - target) * (prior[c] - target);
        }
    }
    return den > 0 ? std::sqrt(num / den) : 0.0;
}

void write_confusion_tsv(const ConfusionMatrix& cm, std::ostream& out) {
    out << "actual\\predicted";
    for (const auto& c : cm.classes) out << '\t' << c;
    out << '\n';
    for (std::size_t a = 0; a < cm.classes.size(); ++a) {
        double row = 0.0;
        for (double v : cm.counts[a]) row += v;
        out << cm.classes[a];
        for (double v : cm.counts[a]) out << '\t' << format_double(row > 0 ? 100.0 * v / row : 0.0);
        out << '\n';
    }
}

void write_metrics_tsv(const MetricsReport& report, std::ostream& out) {
    auto cell = [](double v, bool undefined) { return undefined ? format_double(v) + "*" : format_double(v); };
    out << "class\tprecision\trecall\tf1\tsupport\n";
    for (const auto& m : report.per_class)
        out << m.name << '\t' << cell(m.precision, m.precision_undefined) << '\t'
            << cell(m.recall, m.recall_undefined) << '\t' << cell(m.f1, m.f1_undefined) << '\t'
            << format_double(m.support) << '\n';
    out << "weighted\t" << format_double(report.weighted_precision) << '\t' << format_double(report.weighted_recall)
        << '\t' << format_double(report.weighted_f1) << '\t' << "-\n";
    out << "accuracy\t" << format_double(report.accuracy) << "\t-\t-\t-\n";
}

}  // namespace iotmon
