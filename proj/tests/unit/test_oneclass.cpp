#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "iotmon/error.hpp"
#include "iotmon/oneclass.hpp"

using namespace iotmon;

namespace {

RowMatrix blobs(const std::vector<std::vector<double>>& centers, std::size_t per, double sd, std::uint64_t seed) {
    Rng rng(seed);
    const auto d = centers.front().size();
    RowMatrix m(centers.size() * per, d);
    Eigen::Index r = 0;
    for (const auto& c : centers)
        for (std::size_t i = 0; i < per; ++i, ++r)
            for (std::size_t j = 0; j < d; ++j) m(r, j) = c[j] + rng.normal(0.0, sd);
    return m;
}

double inertia_of(const RowMatrix& pts, const RowMatrix& centroids) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        total += (centroids.rowwise() - pts.row(i)).rowwise().squaredNorm().minCoeff();
    return total;
}

// Plain Lloyd from K distinct random points.
double random_restart(const RowMatrix& pts, std::size_t k, Rng& rng) {
    RowMatrix c(k, pts.cols());
    std::vector<Eigen::Index> picked;
    while (picked.size() < k) {
        const auto i = static_cast<Eigen::Index>(rng.below(pts.rows()));
        if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
    }
    for (std::size_t j = 0; j < k; ++j) c.row(j) = pts.row(picked[j]);
    for (int it = 0; it < 100; ++it) {
        RowMatrix sum = RowMatrix::Zero(k, pts.cols());
        std::vector<int> n(k, 0);
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            Eigen::Index a = 0;
            (c.rowwise() - pts.row(i)).rowwise().squaredNorm().minCoeff(&a);
            sum.row(a) += pts.row(i);
            ++n[a];
        }
        for (std::size_t j = 0; j < k; ++j)
            if (n[j] > 0) c.row(j) = sum.row(j) / n[j];
    }
    return inertia_of(pts, c);
}

// One cluster at the origin in 1-D; members at the given distances.
DeviceModel hand_model(const std::vector<double>& distances, double percentile) {
    DeviceModel m;
    m.centroids = RowMatrix::Zero(1, 1);
    m.boundary.percentile = percentile;
    RowMatrix pts(distances.size(), 1);
    for (std::size_t i = 0; i < distances.size(); ++i) pts(i, 0) = distances[i];
    std::vector<std::size_t> assign(distances.size(), 0);
    fit_boundaries_and_bands(m, pts, assign);
    return m;
}

std::vector<AttributeInstance> device_data(std::size_t n, std::uint64_t seed) {
    // three behaviour modes in 6 attributes
    Rng rng(seed);
    auto schema = make_schema({"a", "b", "c", "d", "e", "f"});
    std::vector<AttributeInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double mode = static_cast<double>(rng.below(3));
        AttributeInstance x;
        x.device = MacAddress(0x020000000010ULL);
        x.window_start = 60.0 * i;
        x.schema = schema;
        x.values = {mode * 100 + rng.normal(0, 3), mode * 20 + rng.normal(0, 1), rng.normal(50, 5),
                    mode + rng.normal(0, 0.1), 7.0, rng.normal(0, 1)};
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace

TEST_SUITE("oneclass") {

TEST_CASE("K=1 centroid is the mean") {
    const RowMatrix pts = blobs({{1, 2}, {5, -3}}, 50, 1.0, 3);
    const auto fit = kmeans_fit(pts, 1, 1);
    CHECK((fit.centroids.row(0) - pts.colwise().mean()).norm() < 1e-12);
}

TEST_CASE("two separated blobs split cleanly") {
    const RowMatrix pts = blobs({{0, 0, 0}, {20, 20, 20}}, 100, 1.0, 4);
    const auto fit = kmeans_fit(pts, 2, 9);
    for (int i = 0; i < 100; ++i) CHECK(fit.assignment[i] == fit.assignment[0]);
    for (int i = 100; i < 200; ++i) CHECK(fit.assignment[i] == fit.assignment[100]);
    CHECK(fit.assignment[0] != fit.assignment[100]);
}

TEST_CASE("same data and seed give identical centroids; K above n is fatal") {
    const RowMatrix pts = blobs({{0, 0}, {3, 3}, {6, 0}}, 40, 1.0, 5);
    CHECK(kmeans_fit(pts, 5, 42).centroids == kmeans_fit(pts, 5, 42).centroids);
    CHECK_THROWS_AS(kmeans_fit(pts, 121, 1), Error);
    CHECK_THROWS_AS(kmeans_fit(pts, 0, 1), Error);
}

TEST_CASE("k-means quality is within 5% of the best of 1000 random restarts") {
    Rng rng(77);
    for (std::size_t k : {2, 3, 4}) {
        const RowMatrix pts = blobs({{0, 0}, {4, 1}, {1, 5}, {6, 6}, {3, 3}}, 30, 1.2, 10 + k);
        const double ours = kmeans_fit(pts, k, 1).inertia;
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < 1000; ++r) best = std::min(best, random_restart(pts, k, rng));
        CHECK(ours <= 1.05 * best);
        CHECK(ours == doctest::Approx(inertia_of(pts, kmeans_fit(pts, k, 1).centroids)));
    }
}

TEST_CASE("elbow: flat inertia picks 2") {
    Rng rng(1);
    RowMatrix pts(500, 2);
    for (auto& v : pts.reshaped()) v = rng.uniform(0.0, 0.01);
    CHECK(select_k(pts, {2, 4, 8, 16}).k == 2);
}

TEST_CASE("elbow: 128 planted clusters pick 128") {
    std::vector<std::vector<double>> corners;
    for (int mask = 0; mask < 128; ++mask) {
        std::vector<double> c(7);
        for (int b = 0; b < 7; ++b) c[b] = (mask >> b & 1) ? 10.0 : 0.0;
        corners.push_back(c);
    }
    const RowMatrix pts = blobs(corners, 20, 0.1, 6);
    const auto sel = select_k(pts, {2, 4, 8, 16, 32, 64, 128, 256, 512});
    CHECK(sel.k == 128);
    // only the candidates needed were fitted
    CHECK(sel.curve.back().k == 256);
}

TEST_CASE("elbow: infeasible candidates are dropped with a warning") {
    const RowMatrix pts = blobs({{0, 0}, {9, 9}}, 10, 1.0, 2);
    const auto sel = select_k(pts, {2, 4, 8, 16, 32, 64});
    CHECK(sel.k <= 16);
    CHECK_FALSE(sel.warnings.empty());
}

TEST_CASE("band index edges") {
    CHECK(band_index(0.0, 2.0) == 1);
    CHECK(band_index(0.1, 2.0) == 1);
    CHECK(band_index(0.2, 2.0) == 1);
    CHECK(band_index(0.21, 2.0) == 2);
    CHECK(band_index(2.0, 2.0) == 10);
    CHECK(band_index(5.0, 2.0) == 10);
}

TEST_CASE("40 points at distances 1..40: 97.5th percentile is 39.025") {
    std::vector<double> d(40);
    std::iota(d.begin(), d.end(), 1.0);
    CHECK(sorted_quantile(d, 0.975) == doctest::Approx(39.025).epsilon(1e-12));
    CHECK(hand_model(d, 0.975).boundary_radius[0] == doctest::Approx(39.025).epsilon(1e-12));
}

TEST_CASE("Laplace bands: 8 of 90 gives 0.09, an empty band gives 0.01") {
    // radius = max distance = 10 with percentile 1.0; band l holds (l-1, l]
    std::vector<double> d;
    for (int i = 0; i < 8; ++i) d.push_back(2.5);    // band 3
    for (int i = 0; i < 81; ++i) d.push_back(5.5);   // band 6
    d.push_back(10.0);                               // band 10
    const auto m = hand_model(d, 1.0);
    REQUIRE(m.retained_count[0] == 90);
    CHECK(m.band_prob[0][2] == 9.0 / 100.0);
    CHECK(m.band_prob[0][0] == 1.0 / 100.0);
    CHECK(m.band_prob[0][5] == 82.0 / 100.0);
    CHECK(m.cluster_likelihood[0] == 1.0);
}

TEST_CASE("members beyond the boundary are left out of the bands but not the likelihood") {
    std::vector<double> d(40);
    std::iota(d.begin(), d.end(), 1.0);
    const auto m = hand_model(d, 0.975);
    CHECK(m.retained_count[0] == 39);
    CHECK(std::accumulate(m.band_count[0].begin(), m.band_count[0].end(), std::uint64_t{0}) == 39);
}

TEST_CASE("a zero-spread cluster gets the radius floor") {
    const auto m = hand_model({0.0, 0.0, 0.0}, 0.975);
    CHECK(m.boundary_radius[0] == kRadiusFloor);
    CHECK(m.retained_count[0] == 3);
}

TEST_CASE("verdicts at the centroid, far away and above every training probability") {
    auto m = hand_model({1.0, 2.0, 3.0, 4.0, 10.0}, 1.0);
    m.train_prob_cdf = {0.1, 0.2, 0.3};
    Eigen::VectorXd z(1);
    z << 0.0;
    auto v = test_projected(m, z);
    CHECK(v.positive);
    CHECK(v.band == 1u);
    CHECK(v.associate_prob == m.cluster_likelihood[0] * m.band_prob[0][0]);
    CHECK(v.confidence == doctest::Approx(1.0 / 3.0));  // 2/15 beats only 0.1
    z << 10.0;
    v = test_projected(m, z);
    CHECK(v.positive);
    CHECK(v.band == 10u);
    z << 10.5;
    v = test_projected(m, z);
    CHECK_FALSE(v.positive);
    CHECK_FALSE(v.band);
    CHECK(v.confidence == 0.0);
    m.train_prob_cdf = {0.001, 0.002};
    z << 1.0;
    CHECK(test_projected(m, z).confidence == 1.0);
}

TEST_CASE("confidence is a strict-less rank and monotone") {
    const std::vector<double> cdf{0.1, 0.2, 0.2, 0.4};
    CHECK(empirical_confidence(cdf, 0.2) == 0.25);
    CHECK(empirical_confidence(cdf, 0.3) == 0.75);
    CHECK(empirical_confidence(cdf, 0.05) == 0.0);
    CHECK(empirical_confidence(cdf, 0.5) == 1.0);
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        CHECK(empirical_confidence(cdf, std::min(a, b)) <= empirical_confidence(cdf, std::max(a, b)));
    }
}

TEST_CASE("trained model: invariants, self-coverage and verdict-boundary consistency") {
    const auto train = device_data(3000, 3);
    std::vector<std::string> warnings;
    OneClassConfig cfg;
    cfg.k_candidates = {2, 4, 8, 16, 32, 64};
    const auto m = train_device_model(train, "plug", cfg, &warnings);
    CHECK(m.device_class == "plug");
    CHECK(std::abs(std::accumulate(m.cluster_likelihood.begin(), m.cluster_likelihood.end(), 0.0) - 1.0) < 1e-9);
    for (double l : m.cluster_likelihood) CHECK(l > 0.0);
    for (double r : m.boundary_radius) CHECK(r > 0.0);
    CHECK(std::is_sorted(m.train_prob_cdf.begin(), m.train_prob_cdf.end()));

    std::size_t positive = 0, inconsistent = 0;
    for (const auto& x : train) {
        const auto v = test_instance(m, x);
        positive += v.positive;
        const bool inside = v.distance <= m.boundary_radius[v.nearest_cluster];
        inconsistent += inside != v.positive;
        if (!v.positive) inconsistent += v.confidence != 0.0;
    }
    CHECK(inconsistent == 0);
    CHECK(static_cast<double>(positive) / train.size() >= 0.95);
}

TEST_CASE("attribute mismatches are fatal and named") {
    OneClassConfig cfg;
    cfg.k_candidates = {2, 4};
    const auto m = train_device_model(device_data(200, 1), "plug", cfg);
    auto x = device_data(1, 9)[0];
    x.schema = make_schema({"a", "b", "c", "d", "e", "zz"});
    try {
        test_instance(m, x);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }
}

TEST_CASE("model file round-trips byte for byte") {
    testing::TempDir dir("oneclass-json");
    OneClassConfig cfg;
    cfg.k_candidates = {2, 4, 8};
    const auto m = train_device_model(device_data(500, 2), "camera", cfg);
    save_model(m, dir / "camera.json");
    const auto back = load_model(dir / "camera.json");
    CHECK(to_json(back).dump() == to_json(m).dump());
    const auto x = device_data(5, 8);
    for (const auto& i : x) {
        const auto a = test_instance(m, i), b = test_instance(back, i);
        CHECK(a.positive == b.positive);
        CHECK(a.associate_prob == b.associate_prob);
        CHECK(a.confidence == b.confidence);
    }
}

TEST_CASE("training is deterministic for a seed") {
    OneClassConfig cfg;
    cfg.k_candidates = {2, 4, 8, 16};
    const auto data = device_data(800, 4);
    CHECK(to_json(train_device_model(data, "x", cfg)).dump() == to_json(train_device_model(data, "x", cfg)).dump());
}

}
