#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iotmon/ingest.hpp"
#include "iotmon/preprocess.hpp"

namespace iotmon {

// ---------------------------------------------------------------------------
// K-means

struct KMeansResult {
    RowMatrix centroids;                 // K x d
    std::vector<std::size_t> assignment;  // cluster of each point
    double inertia = 0.0;                 // sum of squared distances to assigned centroid
    std::size_t iterations = 0;
};

inline constexpr std::size_t kMaxLloydIterations = 300;

/// Lloyd's algorithm from k-means++ seeding. Deterministic for a given seed.
/// Clusters that go empty are re-seeded at the point farthest from its
/// centroid. Throws when k is 0 or exceeds the number of points.
KMeansResult kmeans_fit(const RowMatrix& points, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations = kMaxLloydIterations);

/// Number of distinct rows (exact comparison).
std::size_t count_distinct_rows(const RowMatrix& points);

struct ElbowPoint {
    std::size_t k = 0;
    double inertia_per_instance = 0.0;
};

struct KSelection {
    std::size_t k = 0;
    std::vector<ElbowPoint> curve;  // every candidate actually fitted
    std::vector<std::string> warnings;
    KMeansResult fit;  // the fit at the selected k
};

/// 2, 4, ..., 1024.
std::vector<std::size_t> default_k_candidates();

/// Elbow rule: the selected K is the smallest candidate whose forward
/// difference of inertia-per-instance, (I(K') - I(K)) / (K' - K), exceeds
/// `deriv_threshold`; the largest candidate when none does. Candidates above
/// the number of distinct points are dropped with a warning. Fitting stops
/// as soon as the answer is known.
KSelection select_k(const RowMatrix& points, std::vector<std::size_t> candidates = default_k_candidates(),
                    double deriv_threshold = -0.01, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Device model

inline constexpr std::size_t kBands = 10;
inline constexpr double kRadiusFloor = 1e-9;

enum class BoundaryRule { Percentile, Iqr };

struct BoundaryConfig {
    BoundaryRule rule = BoundaryRule::Percentile;
    double percentile = 0.975;
    double iqr_factor = 1.5;
};

/// Band of a point at `distance` from a centroid with boundary `radius`:
/// ceil(10 * distance / radius) clamped to [1, 10].
std::size_t band_index(double distance, double radius);

/// Linear-interpolation quantile of an ascending-sorted sample.
double sorted_quantile(std::span<const double> sorted, double q);

struct DeviceModel {
    static constexpr int kFormatVersion = 1;

    std::string device_class;
    Scaler scaler;
    Projector projector;
    RowMatrix centroids;
    std::vector<double> boundary_radius;
    std::vector<double> cluster_likelihood;
    /// Retained members per band; band_prob is derived from these.
    std::vector<std::array<std::uint64_t, kBands>> band_count;
    std::vector<std::uint64_t> retained_count;
    std::vector<std::array<double, kBands>> band_prob;
    std::vector<double> train_prob_cdf;  // ascending
    std::uint64_t seed = 0;
    double cumvar_target = 0.95;
    BoundaryConfig boundary;
    std::vector<ElbowPoint> elbow;

    std::size_t k() const noexcept { return static_cast<std::size_t>(centroids.rows()); }
    const std::vector<std::string>& attributes() const noexcept { return scaler.attributes; }
};

/// Fills radii, likelihoods and Laplace-smoothed band tables from the
/// projected training points and their cluster assignment. Cluster
/// likelihoods use all members; band statistics only members inside the
/// boundary. Throws if a cluster has no members.
void fit_boundaries_and_bands(DeviceModel& model, const RowMatrix& projected,
                              std::span<const std::size_t> assignment);

struct ModelVerdict {
    bool positive = false;
    std::size_t nearest_cluster = 0;
    double distance = 0.0;
    std::optional<std::size_t> band;  // 1..10 when positive
    double associate_prob = 0.0;
    double confidence = 0.0;  // fraction of training probabilities strictly below
};

/// Verdict for an already projected point.
ModelVerdict test_projected(const DeviceModel& model, const Eigen::VectorXd& z);
/// Verdict for raw attribute values ordered as model.attributes().
ModelVerdict test_values(const DeviceModel& model, const Eigen::VectorXd& x);
/// Verdict for an instance; attributes are matched by name, and a missing
/// or extra attribute is fatal.
ModelVerdict test_instance(const DeviceModel& model, const AttributeInstance& x);

/// Fraction of `sorted_probs` strictly below `p`.
double empirical_confidence(std::span<const double> sorted_probs, double p);

struct OneClassConfig {
    double cumvar_target = 0.95;
    std::vector<std::size_t> k_candidates = default_k_candidates();
    double deriv_threshold = -0.01;
    std::uint64_t seed = 1;
    BoundaryConfig boundary;
};

/// Scale -> PCA -> elbow-selected K-means -> boundaries/bands -> training CDF.
DeviceModel train_device_model(std::span<const AttributeInstance> train, const std::string& device_class,
                               const OneClassConfig& config = {}, std::vector<std::string>* warnings = nullptr);

nlohmann::json to_json(const DeviceModel& model);
DeviceModel device_model_from_json(const nlohmann::json& doc);
void save_model(const DeviceModel& model, const std::filesystem::path& path);
DeviceModel load_model(const std::filesystem::path& path);

}  // namespace iotmon
