#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "iotmon/error.hpp"
#include "iotmon/supervised/forest.hpp"
#include "iotmon/supervised/info_gain.hpp"
#include "iotmon/supervised/metrics.hpp"
#include "iotmon/supervised/two_stage.hpp"

using namespace iotmon;

namespace {

struct Table {
    std::vector<double> rows;
    std::vector<std::string> labels;
    std::size_t p = 0;
};

Table blobs(std::size_t per, std::uint64_t seed) {
    Rng rng(seed);
    Table t;
    t.p = 4;
    const double centers[3][4] = {{0, 0, 0, 0}, {10, 0, 5, 0}, {0, 10, 0, 5}};
    for (std::size_t i = 0; i < 3 * per; ++i) {
        const auto c = i % 3;
        for (std::size_t j = 0; j < 4; ++j) t.rows.push_back(centers[c][j] + rng.normal(0, 1));
        t.labels.push_back("k" + std::to_string(c));
    }
    return t;
}

std::vector<std::string> names(std::size_t p) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < p; ++j) out.push_back("f" + std::to_string(j));
    return out;
}

ForestConfig small_forest(std::uint64_t seed = 1) {
    ForestConfig c;
    c.trees = 25;
    c.seed = seed;
    c.threads = 1;
    return c;
}

double plain_entropy(const std::vector<std::size_t>& labels) {
    std::map<std::size_t, double> n;
    for (auto l : labels) n[l] += 1;
    double h = 0.0;
    for (auto& [k, c] : n) h -= c / labels.size() * std::log2(c / labels.size());
    return h;
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("separable blobs are classified perfectly") {
    const auto train = blobs(100, 1), test = blobs(50, 2);
    const auto m = forest_train(train.rows, train.p, train.labels, names(4), small_forest());
    CHECK(m.classes == std::vector<std::string>{"k0", "k1", "k2"});
    std::size_t right = 0;
    for (std::size_t i = 0; i < test.labels.size(); ++i) {
        const auto pr = forest_predict(m, std::span(test.rows).subspan(i * 4, 4));
        right += pr.label == test.labels[i];
        double sum = 0.0;
        for (double v : pr.votes) sum += v;
        CHECK(sum == doctest::Approx(1.0));
        CHECK(pr.confidence == pr.votes[pr.class_index]);
    }
    CHECK(right == test.labels.size());
}

TEST_CASE("identical training rows of one class give confidence 1 on that row") {
    auto t = blobs(30, 3);
    const std::vector<double> row{3, 3, 3, 3};
    for (int i = 0; i < 20; ++i) {
        t.rows.insert(t.rows.end(), row.begin(), row.end());
        t.labels.push_back("dup");
    }
    const auto m = forest_train(t.rows, t.p, t.labels, names(4), small_forest());
    const auto pr = forest_predict(m, row);
    CHECK(pr.label == "dup");
    CHECK(pr.confidence == 1.0);
}

TEST_CASE("same seed, same forest; threads do not change it") {
    const auto t = blobs(60, 4);
    auto a = small_forest(9), b = small_forest(9);
    b.threads = 4;
    CHECK(to_json(forest_train(t.rows, t.p, t.labels, names(4), a)).dump() ==
          to_json(forest_train(t.rows, t.p, t.labels, names(4), b)).dump());
    const auto m = forest_train(t.rows, t.p, t.labels, names(4), a);
    CHECK(to_json(forest_from_json(to_json(m))).dump() == to_json(m).dump());
}

TEST_CASE("single-class training set warns and predicts that class") {
    std::vector<double> rows{1, 2, 3, 4};
    std::vector<std::string> labels{"only", "only"};
    std::vector<std::string> warnings;
    const auto m = forest_train(rows, 2, labels, names(2), small_forest(), &warnings);
    CHECK(warnings.size() == 1);
    const std::vector<double> x{9, 9};
    CHECK(forest_predict(m, x).label == "only");
    CHECK(forest_predict(m, x).confidence == 1.0);
}

}

TEST_SUITE("two_stage") {

TEST_CASE("identical bags, quantitative attributes tell the classes apart") {
    // both classes speak to the same endpoint; only traffic volume differs
    Rng rng(5);
    std::vector<TwoStageSample> train;
    for (int i = 0; i < 80; ++i) {
        TwoStageSample s;
        s.label = i % 2 ? "scale" : "cuff";
        s.bags[0]["443"] = 2;
        s.bags[1]["api.vendor.example"] = 1;
        s.bags[2]["c02f"] = 1;
        s.quantitative = {i % 2 ? rng.normal(100, 5) : rng.normal(900, 5)};
        train.push_back(s);
    }
    const auto m = two_stage_train(train, {"volume"}, small_forest());
    // stage 0 alone cannot tell them apart
    CHECK(nbm_predict(m.stage0[0], train[0].bags[0]).confidence == doctest::Approx(0.5));
    CHECK(two_stage_predict(m, train[0].bags, std::vector<double>{100.0}).label == "scale");
    CHECK(two_stage_predict(m, train[0].bags, std::vector<double>{900.0}).label == "cuff");
}

TEST_CASE("agreement between stage 0 and stage 1") {
    std::vector<TwoStageSample> train;
    for (int i = 0; i < 60; ++i) {
        TwoStageSample s;
        s.label = "d" + std::to_string(i % 3);
        s.bags[0][std::to_string(1000 + i % 3)] = 1;
        s.bags[1]["host" + std::to_string(i % 3)] = 1;
        s.bags[2]["c0" + std::to_string(i % 3)] = 1;
        s.quantitative = {static_cast<double>(i % 3)};
        train.push_back(s);
    }
    const auto m = two_stage_train(train, {"q"}, small_forest());
    for (const auto& s : train) {
        const auto pr = two_stage_predict(m, s.bags, s.quantitative);
        CHECK(pr.label == s.label);
        CHECK(nbm_predict(m.stage0[0], s.bags[0]).label == s.label);
    }
    const auto back = two_stage_from_json(to_json(m));
    CHECK(to_json(back).dump() == to_json(m).dump());
}

TEST_CASE("empty bags still predict from priors and quantitative attributes") {
    std::vector<TwoStageSample> train;
    for (int i = 0; i < 40; ++i) {
        TwoStageSample s;
        s.label = i % 2 ? "a" : "b";
        s.bags[0]["80"] = 1;
        s.bags[1]["d.example"] = 1;
        s.bags[2]["c02f"] = 1;
        s.quantitative = {i % 2 ? 1.0 : 50.0};
        train.push_back(s);
    }
    const auto m = two_stage_train(train, {"q"}, small_forest());
    CHECK(two_stage_predict(m, Stage0Bags{}, std::vector<double>{1.0}).label == "a");
    CHECK_THROWS_AS(two_stage_predict(m, Stage0Bags{}, std::vector<double>{}), Error);
}

TEST_CASE("stage models with different class sets are refused") {
    std::vector<TwoStageSample> train;
    for (int i = 0; i < 10; ++i) {
        TwoStageSample s;
        s.label = i % 2 ? "a" : "b";
        s.bags[0]["p"] = 1;
        s.bags[1]["d"] = 1;
        s.bags[2]["c"] = 1;
        s.quantitative = {1.0 * i};
        train.push_back(s);
    }
    auto m = two_stage_train(train, {"q"}, small_forest());
    m.stage0[1] = nbm_train(std::vector<LabeledBag>{{"a", {{"x", 1}}}, {"z", {{"y", 1}}}});
    CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("hourly bag windows") {
    const MacAddress dev(0x020000000010ULL);
    std::vector<EventRecord> ev{{10, dev, EventKind::RemotePort, "443", 1},
                                {20, dev, EventKind::RemotePort, "443", 2},
                                {3700, dev, EventKind::Domain, "x.example", 1}};
    const auto bags = bags_from_events(ev);
    REQUIRE(bags.size() == 2);
    CHECK(bags.at({dev, 0})[0].at("443") == 3);
    CHECK(bags.at({dev, 1})[1].at("x.example") == 1);
}

}

TEST_SUITE("metrics") {

TEST_CASE("perfect classifier") {
    std::vector<std::string> t{"a", "b", "c", "a"};
    const auto r = compute_metrics(ConfusionMatrix::from_pairs(t, t));
    CHECK(r.accuracy == 1.0);
    for (const auto& m : r.per_class) {
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
}

TEST_CASE("binary definitions") {
    const auto m = binary_metrics(8, 2, 2);
    CHECK(m.precision == 0.8);
    CHECK(m.recall == 0.8);
    CHECK(m.f1 == doctest::Approx(0.8));
    const auto z = binary_metrics(0, 0, 0);
    CHECK(z.precision_undefined);
    CHECK(z.recall_undefined);
    CHECK(z.f1_undefined);
    CHECK(z.f1 == 0.0);
    CHECK_THROWS_AS(binary_metrics(-1, 0, 0), Error);
}

TEST_CASE("weighted recall equals accuracy on random confusions") {
    Rng rng(6);
    const char* cls[] = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> t, p;
        for (int i = 0; i < 200; ++i) {
            t.push_back(cls[rng.below(4)]);
            p.push_back(rng.chance(0.6) ? t.back() : cls[rng.below(4)]);
        }
        const auto r = compute_metrics(ConfusionMatrix::from_pairs(t, p));
        double right = 0;
        for (int i = 0; i < 200; ++i) right += t[i] == p[i];
        CHECK(r.accuracy == doctest::Approx(right / 200.0));
        CHECK(r.weighted_recall == doctest::Approx(r.accuracy).epsilon(1e-12));
    }
}

TEST_CASE("confusion tsv rows are percentages") {
    std::vector<std::string> t{"a", "a", "a", "b"}, p{"a", "a", "b", "b"};
    std::stringstream out;
    write_confusion_tsv(ConfusionMatrix::from_pairs(t, p), out);
    const std::string s = out.str();
    CHECK(s.find("66.6") != std::string::npos);
    CHECK(s.find("33.3") != std::string::npos);
    CHECK_THROWS_AS(ConfusionMatrix::from_pairs(t, std::vector<std::string>{"a"}), Error);
}

}

TEST_SUITE("info_gain") {

TEST_CASE("an attribute equal to the label recovers the class entropy") {
    std::vector<std::size_t> labels;
    std::vector<double> values;
    for (int i = 0; i < 500; ++i) {
        labels.push_back(i % 5);
        values.push_back(static_cast<double>(i % 5));
    }
    CHECK(info_gain(values, labels) == doctest::Approx(plain_entropy(labels)).epsilon(1e-12));
    CHECK(plain_entropy(labels) == doctest::Approx(std::log2(5.0)));
}

TEST_CASE("an independent attribute carries almost nothing") {
    Rng rng(7);
    std::vector<std::size_t> labels;
    std::vector<double> values;
    for (int i = 0; i < 20000; ++i) {
        labels.push_back(rng.below(4));
        values.push_back(rng.normal());
    }
    const double g = info_gain(values, labels);
    CHECK(g >= 0.0);
    CHECK(g < 0.02);
}

TEST_CASE("equal-frequency bins keep ties together") {
    const std::vector<double> v{1, 1, 1, 1, 2, 3, 4, 5, 6, 7};
    const auto b = equal_frequency_bins(v, 3);
    CHECK(b[0] == b[3]);
    CHECK(std::set<std::size_t>(b.begin(), b.end()).size() <= 3);
    const auto few = equal_frequency_bins(std::vector<double>{3, 1, 2, 1}, 10);
    CHECK(few[1] == few[3]);
    CHECK(std::set<std::size_t>(few.begin(), few.end()).size() == 3);
    CHECK(entropy_bits(std::vector<double>{1, 1}) == 1.0);
}

TEST_CASE("ranking puts the planted attribute first and ignores constants") {
    auto xs = testing::random_instances(900, 5, 8);
    Rng rng(2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto c = i % 3;
        xs[i].label = "c" + std::to_string(c);
        xs[i].values[3] = 10.0 * c + rng.normal(0, 0.5);
        xs[i].values[4] = 42.0;
    }
    const auto ranks = rank_attributes(xs);
    REQUIRE(ranks.size() == 5);
    CHECK(ranks[0].attribute == "a3");
    CHECK(ranks.back().attribute == "a4");
    CHECK(ranks.back().gain == 0.0);
    xs[0].label.reset();
    CHECK_THROWS_AS(rank_attributes(xs), Error);
}

}
