#include "iotmon/supervised/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "iotmon/error.hpp"
#include "iotmon/random.hpp"

namespace iotmon {

using nlohmann::json;

const std::vector<double>& DecisionTree::leaf(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].distribution;
}

std::size_t DecisionTree::vote(std::span<const double> x) const {
    const auto& d = leaf(x);
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

namespace {

struct TrainingView {
    std::span<const double> rows;
    std::size_t p;
    std::vector<std::size_t> y;
    std::size_t n_classes;
    double at(std::size_t row, std::size_t f) const { return rows[row * p + f]; }
};

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = -1.0;  // sum_c l_c^2/n_l + sum_c r_c^2/n_r; larger is purer
};

class TreeBuilder {
public:
    TreeBuilder(const TrainingView& data, const ForestConfig& cfg, std::size_t m, std::uint64_t seed)
        : data_(data), cfg_(cfg), m_(m), rng_(seed) {}

    DecisionTree build() {
        const std::size_t n = data_.y.size();
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = static_cast<std::size_t>(rng_.below(n));

        struct Pending {
            std::size_t node;
            std::vector<std::size_t> idx;
        };
        DecisionTree tree;
        tree.nodes.emplace_back();
        std::vector<Pending> stack;
        stack.push_back({0, std::move(sample)});
        std::set<std::size_t> used;
        while (!stack.empty()) {
            Pending cur = std::move(stack.back());
            stack.pop_back();
            std::vector<double> counts(data_.n_classes, 0.0);
            for (auto i : cur.idx) counts[data_.y[i]] += 1.0;
            const double total = static_cast<double>(cur.idx.size());
            const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
            for (auto& c : counts) c /= total;
            tree.nodes[cur.node].distribution = counts;
            if (pure || cur.idx.size() < 2 * cfg_.min_leaf) continue;

            const Split best = find_split(cur.idx, used);
            if (best.score < 0.0) continue;
            std::vector<std::size_t> left, right;
            for (auto i : cur.idx) (data_.at(i, best.feature) <= best.threshold ? left : right).push_back(i);
            const int l = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[cur.node];
            node.feature = static_cast<int>(best.feature);
            node.threshold = best.threshold;
            node.left = l;
            node.right = l + 1;
            stack.push_back({static_cast<std::size_t>(l + 1), std::move(right)});
            stack.push_back({static_cast<std::size_t>(l), std::move(left)});
        }
        tree.features_considered.assign(used.begin(), used.end());
        return tree;
    }

private:
    Split find_split(const std::vector<std::size_t>& idx, std::set<std::size_t>& used) {
        std::vector<std::size_t> order(data_.p);
        std::iota(order.begin(), order.end(), 0);
        Split best;
        std::vector<std::pair<double, std::size_t>> col(idx.size());
        std::vector<double> left(data_.n_classes), right(data_.n_classes);
        for (std::size_t k = 0; k < data_.p; ++k) {
            // Lazy Fisher-Yates: draw features one at a time, stop after m once a split exists.
            std::swap(order[k], order[k + rng_.below(data_.p - k)]);
            if (k >= m_ && best.score >= 0.0) break;
            const std::size_t f = order[k];
            used.insert(f);
            for (std::size_t j = 0; j < idx.size(); ++j) col[j] = {data_.at(idx[j], f), data_.y[idx[j]]};
            std::sort(col.begin(), col.end());
            std::fill(left.begin(), left.end(), 0.0);
            std::fill(right.begin(), right.end(), 0.0);
            for (const auto& [v, c] : col) right[c] += 1.0;
            double sl = 0.0, sr = 0.0;
            for (double r : right) sr += r * r;
            const std::size_t n = col.size();
            for (std::size_t j = 0; j + 1 < n; ++j) {
                const std::size_t c = col[j].second;
                sl += 2.0 * left[c] + 1.0;
                sr -= 2.0 * right[c] - 1.0;
                left[c] += 1.0;
                right[c] -= 1.0;
                const std::size_t nl = j + 1, nr = n - nl;
                if (col[j].first == col[j + 1].first || nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
                const double score = sl / static_cast<double>(nl) + sr / static_cast<double>(nr);
                if (score > best.score) {
                    best.score = score;
                    best.feature = f;
                    double mid = 0.5 * (col[j].first + col[j + 1].first);
                    if (!(mid < col[j + 1].first)) mid = col[j].first;  // adjacent doubles
                    best.threshold = mid;
                }
            }
        }
        return best;
    }

    const TrainingView& data_;
    const ForestConfig& cfg_;
    std::size_t m_;
    Rng rng_;
};

std::uint64_t tree_seed(std::uint64_t seed, std::size_t t) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(t) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

ForestModel forest_train(std::span<const double> rows, std::size_t n_features, std::span<const std::string> labels,
                         std::vector<std::string> attribute_names, const ForestConfig& config,
                         std::vector<std::string>* warnings) {
    if (labels.empty()) throw Error("forest", "no training instances");
    if (n_features == 0) throw Error("forest", "no attributes");
    if (rows.size() != labels.size() * n_features) throw Error("forest", "row matrix does not match label count");
    if (attribute_names.size() != n_features) throw Error("forest", "attribute name count does not match columns");
    if (config.trees == 0) throw Error("forest", "tree count must be positive");
    if (config.min_leaf == 0) throw Error("forest", "min_leaf must be positive");
    for (double v : rows)
        if (!std::isfinite(v)) throw Error("forest", "non-finite attribute value");

    ForestModel model;
    model.config = config;
    model.attributes = std::move(attribute_names);
    std::set<std::string> classes(labels.begin(), labels.end());
    model.classes.assign(classes.begin(), classes.end());

    TrainingView view{rows, n_features, {}, model.classes.size()};
    view.y.reserve(labels.size());
    for (const auto& l : labels)
        view.y.push_back(static_cast<std::size_t>(
            std::lower_bound(model.classes.begin(), model.classes.end(), l) - model.classes.begin()));

    if (model.classes.size() == 1) {
        if (warnings) warnings->push_back("single-class training set; forest predicts '" + model.classes[0] + "' always");
        DecisionTree t;
        t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, {1.0}});
        model.trees.assign(config.trees, t);
        return model;
    }

    const std::size_t m = config.max_features
                              ? std::min(config.max_features, n_features)
                              : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                                             std::sqrt(static_cast<double>(n_features)))));
    model.trees.resize(config.trees);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < config.trees; t = next++)
            model.trees[t] = TreeBuilder(view, config, m, tree_seed(config.seed, t)).build();
    };
    std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, config.trees);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    return model;
}

ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x) {
    if (x.size() != model.attributes.size())
        throw Error("forest", "instance has " + std::to_string(x.size()) + " attributes, model expects " +
                                  std::to_string(model.attributes.size()));
    ForestPrediction p;
    p.votes.assign(model.classes.size(), 0.0);
    for (const auto& t : model.trees) p.votes[t.vote(x)] += 1.0;
    for (auto& v : p.votes) v /= static_cast<double>(model.trees.size());
    p.class_index = static_cast<std::size_t>(std::max_element(p.votes.begin(), p.votes.end()) - p.votes.begin());
    p.label = model.classes[p.class_index];
    p.confidence = p.votes[p.class_index];
    return p;
}

json to_json(const ForestModel& model) {
    json trees = json::array();
    for (const auto& t : model.trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes) {
            if (n.feature < 0)
                nodes.push_back(json{{"dist", n.distribution}});
            else
                nodes.push_back(json{{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right},
                                     {"dist", n.distribution}});
        }
        trees.push_back(json{{"features", t.features_considered}, {"nodes", std::move(nodes)}});
    }
    return json{{"format", "iotmon-forest"},
                {"version", 1},
                {"classes", model.classes},
                {"attributes", model.attributes},
                {"config",
                 {{"trees", model.config.trees},
                  {"max_features", model.config.max_features},
                  {"min_leaf", model.config.min_leaf},
                  {"seed", model.config.seed}}},
                {"trees", std::move(trees)}};
}

ForestModel forest_from_json(const json& doc) {
    try {
        if (doc.at("format") != "iotmon-forest") throw Error("forest", "not a forest model document");
        ForestModel m;
        m.classes = doc.at("classes").get<std::vector<std::string>>();
        m.attributes = doc.at("attributes").get<std::vector<std::string>>();
        const auto& c = doc.at("config");
        m.config.trees = c.at("trees").get<std::size_t>();
        m.config.max_features = c.at("max_features").get<std::size_t>();
        m.config.min_leaf = c.at("min_leaf").get<std::size_t>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        for (const auto& jt : doc.at("trees")) {
            DecisionTree t;
            t.features_considered = jt.at("features").get<std::vector<std::size_t>>();
            for (const auto& jn : jt.at("nodes")) {
                TreeNode n;
                n.distribution = jn.at("dist").get<std::vector<double>>();
                if (jn.contains("f")) {
                    n.feature = jn.at("f").get<int>();
                    n.threshold = jn.at("t").get<double>();
                    n.left = jn.at("l").get<int>();
                    n.right = jn.at("r").get<int>();
                }
                if (n.distribution.size() != m.classes.size())
                    throw Error("forest", "node distribution does not match class count");
                t.nodes.push_back(std::move(n));
            }
            const auto nn = static_cast<int>(t.nodes.size());
            if (nn == 0) throw Error("forest", "empty tree");
            for (const auto& n : t.nodes)
                if (n.feature >= 0 && (n.feature >= static_cast<int>(m.attributes.size()) || n.left <= 0 ||
                                       n.left >= nn || n.right <= 0 || n.right >= nn))
                    throw Error("forest", "tree node references out of range");
            m.trees.push_back(std::move(t));
        }
        if (m.trees.empty() || m.classes.empty()) throw Error("forest", "model has no trees or classes");
        return m;
    } catch (const json::exception& e) {
        throw Error("forest", std::string("malformed model document: ") + e.what());
    }
}

}  // namespace iotmon
