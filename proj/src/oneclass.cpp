#include "iotmon/oneclass.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "iotmon/error.hpp"
#include "iotmon/random.hpp"

namespace iotmon {

using nlohmann::json;

namespace {

constexpr Eigen::Index kAssignBlock = 1024;

double squared_distance(const RowMatrix& a, Eigen::Index i, const RowMatrix& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

// Nearest centroid for every point via blocked X*C^T; returns true if any
// assignment changed.
bool assign_nearest(const RowMatrix& points, const Eigen::VectorXd& point_norms, const RowMatrix& centroids,
                    std::vector<std::size_t>& assignment, std::vector<double>& dist2) {
    const Eigen::Index n = points.rows();
    const Eigen::Index k = centroids.rows();
    const Eigen::VectorXd centroid_norms = centroids.rowwise().squaredNorm();
    const Eigen::MatrixXd ct = centroids.transpose();
    bool changed = false;
    Eigen::MatrixXd gram;
    for (Eigen::Index start = 0; start < n; start += kAssignBlock) {
        const Eigen::Index rows = std::min(kAssignBlock, n - start);
        gram.noalias() = points.middleRows(start, rows) * ct;
        for (Eigen::Index r = 0; r < rows; ++r) {
            Eigen::Index best = 0;
            double best_val = centroid_norms[0] - 2.0 * gram(r, 0);
            for (Eigen::Index j = 1; j < k; ++j) {
                const double v = centroid_norms[j] - 2.0 * gram(r, j);
                if (v < best_val) {
                    best_val = v;
                    best = j;
                }
            }
            const auto i = static_cast<std::size_t>(start + r);
            if (assignment[i] != static_cast<std::size_t>(best)) {
                assignment[i] = static_cast<std::size_t>(best);
                changed = true;
            }
            dist2[i] = std::max(0.0, point_norms[start + r] + best_val);
        }
    }
    return changed;
}

RowMatrix seed_plus_plus(const RowMatrix& points, std::size_t k, Rng& rng) {
    const Eigen::Index n = points.rows();
    RowMatrix centers(static_cast<Eigen::Index>(k), points.cols());
    auto first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    centers.row(0) = points.row(first);
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(points, i, centers, 0);

    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double run = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                run += d2[static_cast<std::size_t>(i)];
                if (run > target && d2[static_cast<std::size_t>(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        const auto ci = static_cast<Eigen::Index>(c);
        centers.row(ci) = points.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& d = d2[static_cast<std::size_t>(i)];
            d = std::min(d, squared_distance(points, i, centers, ci));
        }
    }
    return centers;
}

}  // namespace

KMeansResult kmeans_fit(const RowMatrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k == 0) throw Error("kmeans", "K must be positive");
    if (k > n) throw Error("kmeans", "K=" + std::to_string(k) + " exceeds point count " + std::to_string(n));

    Rng rng(seed);
    KMeansResult res;
    res.centroids = seed_plus_plus(points, k, rng);
    res.assignment.assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<double> dist2(n, 0.0);
    const Eigen::VectorXd norms = points.rowwise().squaredNorm();
    std::vector<std::size_t> counts(k);

    bool converged = false;
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        const bool changed = assign_nearest(points, norms, res.centroids, res.assignment, dist2);
        res.iterations = iter + 1;
        if (iter > 0 && !changed) {
            converged = true;
            break;
        }

        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t a : res.assignment) ++counts[a];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            // Re-seed at the point farthest from its centroid, taken from a
            // cluster that can spare it.
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (counts[res.assignment[i]] > 1 && (far == n || dist2[i] > dist2[far])) far = i;
            if (far == n) break;
            --counts[res.assignment[far]];
            res.assignment[far] = c;
            counts[c] = 1;
            dist2[far] = 0.0;
        }

        res.centroids.setZero();
        for (std::size_t i = 0; i < n; ++i)
            res.centroids.row(static_cast<Eigen::Index>(res.assignment[i])) += points.row(static_cast<Eigen::Index>(i));
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0) res.centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
    }
    if (!converged) assign_nearest(points, norms, res.centroids, res.assignment, dist2);

    res.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        res.inertia += squared_distance(points, static_cast<Eigen::Index>(i), res.centroids,
                                        static_cast<Eigen::Index>(res.assignment[i]));
    return res;
}

std::size_t count_distinct_rows(const RowMatrix& points) {
    const auto n = static_cast<std::size_t>(points.rows());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto row_less = [&](std::size_t a, std::size_t b) {
        for (Eigen::Index c = 0; c < points.cols(); ++c) {
            const double x = points(static_cast<Eigen::Index>(a), c);
            const double y = points(static_cast<Eigen::Index>(b), c);
            if (x != y) return x < y;
        }
        return false;
    };
    std::sort(idx.begin(), idx.end(), row_less);
    std::size_t distinct = n == 0 ? 0 : 1;
    for (std::size_t i = 1; i < n; ++i)
        if (row_less(idx[i - 1], idx[i])) ++distinct;
    return distinct;
}

std::vector<std::size_t> default_k_candidates() {
    std::vector<std::size_t> out;
    for (std::size_t k = 2; k <= 1024; k *= 2) out.push_back(k);
    return out;
}

KSelection select_k(const RowMatrix& points, std::vector<std::size_t> candidates, double deriv_threshold,
                    std::uint64_t seed) {
    if (candidates.empty()) throw Error("select_k", "no K candidates");
    if (!std::is_sorted(candidates.begin(), candidates.end()) ||
        std::adjacent_find(candidates.begin(), candidates.end()) != candidates.end())
        throw Error("select_k", "K candidates must be strictly ascending");
    if (points.rows() == 0) throw Error("select_k", "no points");

    KSelection sel;
    const std::size_t distinct = count_distinct_rows(points);
    const std::size_t largest = candidates.back();
    std::erase_if(candidates, [&](std::size_t k) { return k == 0 || k > distinct; });
    if (candidates.size() == 0) {
        sel.warnings.push_back("only " + std::to_string(distinct) + " distinct points; using K=" +
                               std::to_string(distinct));
        candidates.push_back(distinct);
    } else if (candidates.back() < largest) {
        sel.warnings.push_back("only " + std::to_string(distinct) + " distinct points; K candidates truncated at " +
                               std::to_string(candidates.back()));
    }

    const double n = static_cast<double>(points.rows());
    KMeansResult current = kmeans_fit(points, candidates[0], seed);
    sel.curve.push_back({candidates[0], current.inertia / n});
    for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
        KMeansResult next = kmeans_fit(points, candidates[i + 1], seed);
        sel.curve.push_back({candidates[i + 1], next.inertia / n});
        const double deriv = (sel.curve[i + 1].inertia_per_instance - sel.curve[i].inertia_per_instance) /
                             static_cast<double>(candidates[i + 1] - candidates[i]);
        if (deriv > deriv_threshold) {
            sel.k = candidates[i];
            sel.fit = std::move(current);
            return sel;
        }
        current = std::move(next);
    }
    sel.k = candidates.back();
    sel.fit = std::move(current);
    return sel;
}

// ---------------------------------------------------------------------------

std::size_t band_index(double distance, double radius) {
    if (distance <= 0.0) return 1;
    const double b = std::ceil(static_cast<double>(kBands) * distance / radius);
    if (b < 1.0) return 1;
    if (b > static_cast<double>(kBands)) return kBands;
    return static_cast<std::size_t>(b);
}

double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error("quantile", "empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

void fit_boundaries_and_bands(DeviceModel& model, const RowMatrix& projected, std::span<const std::size_t> assignment) {
    const std::size_t k = model.k();
    if (static_cast<std::size_t>(projected.rows()) != assignment.size())
        throw Error("oneclass", "assignment size does not match point count");

    std::vector<std::vector<double>> distances(k);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] >= k) throw Error("oneclass", "assignment refers to a missing cluster");
        distances[assignment[i]].push_back(
            std::sqrt(squared_distance(projected, static_cast<Eigen::Index>(i), model.centroids,
                                       static_cast<Eigen::Index>(assignment[i]))));
    }

    model.boundary_radius.assign(k, 0.0);
    model.cluster_likelihood.assign(k, 0.0);
    model.band_count.assign(k, {});
    model.retained_count.assign(k, 0);
    model.band_prob.assign(k, {});
    const double total = static_cast<double>(assignment.size());
    for (std::size_t c = 0; c < k; ++c) {
        auto& d = distances[c];
        if (d.empty()) throw Error("oneclass", "cluster " + std::to_string(c) + " has no members");
        std::sort(d.begin(), d.end());
        double radius = 0.0;
        if (model.boundary.rule == BoundaryRule::Percentile) {
            radius = sorted_quantile(d, model.boundary.percentile);
        } else {
            const double q1 = sorted_quantile(d, 0.25);
            const double q3 = sorted_quantile(d, 0.75);
            radius = q3 + model.boundary.iqr_factor * (q3 - q1);
        }
        radius = std::max(radius, kRadiusFloor);
        model.boundary_radius[c] = radius;
        model.cluster_likelihood[c] = static_cast<double>(d.size()) / total;

        for (double dist : d) {
            if (dist > radius) break;
            ++model.band_count[c][band_index(dist, radius) - 1];
            ++model.retained_count[c];
        }
        const double denom = static_cast<double>(kBands + model.retained_count[c]);
        for (std::size_t l = 0; l < kBands; ++l)
            model.band_prob[c][l] = static_cast<double>(1 + model.band_count[c][l]) / denom;
    }
}

double empirical_confidence(std::span<const double> sorted_probs, double p) {
    if (sorted_probs.empty()) return 0.0;
    const auto below = std::lower_bound(sorted_probs.begin(), sorted_probs.end(), p) - sorted_probs.begin();
    return static_cast<double>(below) / static_cast<double>(sorted_probs.size());
}

ModelVerdict test_projected(const DeviceModel& model, const Eigen::VectorXd& z) {
    if (model.k() == 0) throw Error("oneclass", "model has no clusters");
    if (z.size() != model.centroids.cols()) throw Error("oneclass", "projected dimension mismatch");
    ModelVerdict v;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < model.centroids.rows(); ++c) {
        const double d2 = (model.centroids.row(c).transpose() - z).squaredNorm();
        if (d2 < best) {
            best = d2;
            v.nearest_cluster = static_cast<std::size_t>(c);
        }
    }
    v.distance = std::sqrt(best);
    const double radius = model.boundary_radius[v.nearest_cluster];
    v.positive = v.distance <= radius;
    if (!v.positive) return v;
    v.band = band_index(v.distance, radius);
    v.associate_prob = model.cluster_likelihood[v.nearest_cluster] * model.band_prob[v.nearest_cluster][*v.band - 1];
    v.confidence = empirical_confidence(model.train_prob_cdf, v.associate_prob);
    return v;
}

ModelVerdict test_values(const DeviceModel& model, const Eigen::VectorXd& x) {
    return test_projected(model, model.projector.project(model.scaler.apply(x)));
}

ModelVerdict test_instance(const DeviceModel& model, const AttributeInstance& x) {
    const auto& names = model.attributes();
    static const std::vector<std::string> kNone;
    const auto& have = x.schema ? *x.schema : kNone;
    if (have == names) return test_values(model, Eigen::Map<const Eigen::VectorXd>(x.values.data(), x.values.size()));

    std::unordered_map<std::string_view, std::size_t> pos;
    for (std::size_t i = 0; i < have.size(); ++i) pos.emplace(have[i], i);
    std::vector<std::string> missing, extra;
    Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto it = pos.find(names[i]);
        if (it == pos.end()) {
            missing.push_back(names[i]);
        } else {
            v[static_cast<Eigen::Index>(i)] = x.values[it->second];
            pos.erase(it);
        }
    }
    for (const auto& [name, i] : pos) extra.emplace_back(name);
    if (!missing.empty() || !extra.empty()) {
        std::sort(extra.begin(), extra.end());
        std::string msg = "attribute mismatch for model '" + model.device_class + "';";
        if (!missing.empty()) {
            msg += " missing:";
            for (const auto& m : missing) msg += " " + m;
        }
        if (!extra.empty()) {
            msg += " extra:";
            for (const auto& e : extra) msg += " " + e;
        }
        throw Error("oneclass", msg);
    }
    return test_values(model, v);
}

DeviceModel train_device_model(std::span<const AttributeInstance> train, const std::string& device_class,
                               const OneClassConfig& config, std::vector<std::string>* warnings) {
    if (train.size() < 2) throw Error("oneclass", "class '" + device_class + "' has fewer than 2 training instances");
    DeviceModel model;
    model.device_class = device_class;
    model.seed = config.seed;
    model.cumvar_target = config.cumvar_target;
    model.boundary = config.boundary;

    const RowMatrix raw = to_matrix(train);
    model.scaler = fit_scaler(raw, common_attribute_names(train));
    const RowMatrix scaled = model.scaler.apply(raw);
    model.projector = fit_pca(scaled, config.cumvar_target);
    const RowMatrix projected = model.projector.project(scaled);

    KSelection sel = select_k(projected, config.k_candidates, config.deriv_threshold, config.seed);
    if (warnings)
        for (auto& w : sel.warnings) warnings->push_back(device_class + ": " + w);
    model.elbow = sel.curve;
    model.centroids = sel.fit.centroids;

    // Drop clusters left empty (possible only if Lloyd hit its iteration cap).
    std::vector<std::size_t> members(model.k(), 0);
    for (std::size_t a : sel.fit.assignment) ++members[a];
    if (std::find(members.begin(), members.end(), 0) != members.end()) {
        std::vector<std::size_t> remap(model.k());
        RowMatrix kept(0, model.centroids.cols());
        std::size_t next = 0;
        for (std::size_t c = 0; c < model.k(); ++c) {
            if (members[c] == 0) continue;
            remap[c] = next++;
            kept.conservativeResize(static_cast<Eigen::Index>(next), Eigen::NoChange);
            kept.row(static_cast<Eigen::Index>(next - 1)) = model.centroids.row(static_cast<Eigen::Index>(c));
        }
        for (auto& a : sel.fit.assignment) a = remap[a];
        model.centroids = std::move(kept);
        if (warnings) warnings->push_back(device_class + ": dropped empty clusters");
    }

    fit_boundaries_and_bands(model, projected, sel.fit.assignment);

    model.train_prob_cdf.clear();
    for (Eigen::Index i = 0; i < projected.rows(); ++i) {
        const ModelVerdict v = test_projected(model, projected.row(i).transpose());
        if (v.positive) model.train_prob_cdf.push_back(v.associate_prob);
    }
    std::sort(model.train_prob_cdf.begin(), model.train_prob_cdf.end());
    return model;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json matrix_to_json(const RowMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

RowMatrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    RowMatrix m(rows, cols);
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows) throw Error("model", "matrix row count mismatch");
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = data.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("model", "matrix column count mismatch");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json to_json(const DeviceModel& model) {
    json doc;
    doc["format"] = "iotmon-oneclass";
    doc["version"] = DeviceModel::kFormatVersion;
    doc["device_class"] = model.device_class;
    doc["attributes"] = model.scaler.attributes;
    doc["seed"] = model.seed;
    doc["cumvar_target"] = model.cumvar_target;
    doc["boundary"] = {{"rule", model.boundary.rule == BoundaryRule::Percentile ? "percentile" : "iqr"},
                       {"percentile", model.boundary.percentile},
                       {"iqr_factor", model.boundary.iqr_factor}};
    doc["scaler"] = {{"mean", vector_to_json(model.scaler.mean)}, {"stddev", vector_to_json(model.scaler.stddev)}};
    doc["projector"] = {{"components", matrix_to_json(model.projector.components)},
                        {"explained_ratio", vector_to_json(model.projector.explained_ratio)},
                        {"retained", model.projector.retained}};
    doc["k"] = model.k();
    doc["centroids"] = matrix_to_json(model.centroids);
    doc["boundary_radius"] = model.boundary_radius;
    doc["cluster_likelihood"] = model.cluster_likelihood;
    doc["band_count"] = model.band_count;
    doc["retained_count"] = model.retained_count;
    doc["band_prob"] = model.band_prob;
    doc["train_prob_cdf"] = model.train_prob_cdf;
    json elbow = json::array();
    for (const auto& e : model.elbow) elbow.push_back({{"k", e.k}, {"inertia_per_instance", e.inertia_per_instance}});
    doc["elbow"] = std::move(elbow);
    return doc;
}

DeviceModel device_model_from_json(const json& doc) {
    try {
        if (doc.at("format") != "iotmon-oneclass") throw Error("model", "not a one-class model file");
        if (doc.at("version").get<int>() != DeviceModel::kFormatVersion)
            throw Error("model", "unsupported model version " + doc.at("version").dump());
        DeviceModel m;
        m.device_class = doc.at("device_class").get<std::string>();
        m.scaler.attributes = doc.at("attributes").get<std::vector<std::string>>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.cumvar_target = doc.at("cumvar_target").get<double>();
        const auto& b = doc.at("boundary");
        m.boundary.rule = b.at("rule") == "iqr" ? BoundaryRule::Iqr : BoundaryRule::Percentile;
        m.boundary.percentile = b.at("percentile").get<double>();
        m.boundary.iqr_factor = b.at("iqr_factor").get<double>();
        m.scaler.mean = vector_from_json(doc.at("scaler").at("mean"));
        m.scaler.stddev = vector_from_json(doc.at("scaler").at("stddev"));
        m.projector.components = matrix_from_json(doc.at("projector").at("components"));
        m.projector.explained_ratio = vector_from_json(doc.at("projector").at("explained_ratio"));
        m.projector.retained = doc.at("projector").at("retained").get<std::size_t>();
        m.centroids = matrix_from_json(doc.at("centroids"));
        m.boundary_radius = doc.at("boundary_radius").get<std::vector<double>>();
        m.cluster_likelihood = doc.at("cluster_likelihood").get<std::vector<double>>();
        m.band_count = doc.at("band_count").get<std::vector<std::array<std::uint64_t, kBands>>>();
        m.retained_count = doc.at("retained_count").get<std::vector<std::uint64_t>>();
        m.band_prob = doc.at("band_prob").get<std::vector<std::array<double, kBands>>>();
        m.train_prob_cdf = doc.at("train_prob_cdf").get<std::vector<double>>();
        for (const auto& e : doc.at("elbow"))
            m.elbow.push_back({e.at("k").get<std::size_t>(), e.at("inertia_per_instance").get<double>()});

        const std::size_t k = m.k();
        const auto p = static_cast<Eigen::Index>(m.scaler.attributes.size());
        if (m.scaler.mean.size() != p || m.scaler.stddev.size() != p || m.projector.components.cols() != p ||
            m.projector.retained > static_cast<std::size_t>(p) ||
            m.centroids.cols() != static_cast<Eigen::Index>(m.projector.retained) || m.boundary_radius.size() != k ||
            m.cluster_likelihood.size() != k || m.band_prob.size() != k || m.band_count.size() != k ||
            m.retained_count.size() != k || doc.at("k").get<std::size_t>() != k)
            throw Error("model", "inconsistent dimensions in model file");
        if (!std::is_sorted(m.train_prob_cdf.begin(), m.train_prob_cdf.end()))
            throw Error("model", "training probability list is not sorted");
        return m;
    } catch (const json::exception& e) {
        throw Error("model", std::string("malformed model document: ") + e.what());
    }
}

void save_model(const DeviceModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("model", "cannot write '" + path.string() + "'");
    out << to_json(model).dump(1) << '\n';
}

DeviceModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("model", "cannot open '" + path.string() + "'");
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error("model", "'" + path.string() + "' is not valid JSON");
    return device_model_from_json(doc);
}

}  // namespace iotmon
