#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "aegis/metrics.hpp"

using namespace aegis;

TEST_CASE("held-out corpus confusion counts reproduce the reported rates") {
    ConfusionCounts c{57551, 265, 123505, 287};
    MetricsReport r = compute_metrics(c);
    // exact ratios of the counts
    CHECK(r.tpr == doctest::Approx(0.9950378643798195).epsilon(1e-12));
    CHECK(r.fpr == doctest::Approx(0.0021410681102044).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.9952271430300724).epsilon(1e-12));
    // the rounded headline numbers
    CHECK(std::abs(r.tpr - 0.9950) < 5e-4);
    CHECK(std::abs(r.fpr - 0.002141) < 5e-4);
    CHECK(std::abs(r.f1 - 0.9952) < 5e-4);
}

TEST_CASE("degenerate classifiers") {
    MetricsReport perfect = compute_metrics(ConfusionCounts{50, 0, 50, 0});
    CHECK(perfect.tpr == 1.0);
    CHECK(perfect.fpr == 0.0);
    CHECK(perfect.f1 == 1.0);

    MetricsReport allpos = compute_metrics(ConfusionCounts{50, 50, 0, 0});
    CHECK(allpos.tpr == 1.0);
    CHECK(allpos.fpr == 1.0);

    CHECK_THROWS_AS(compute_metrics(ConfusionCounts{0, 5, 5, 0}), Error);
    CHECK_THROWS_AS(compute_metrics(ConfusionCounts{5, 0, 0, 5}), Error);
}

TEST_CASE("f1 is the harmonic mean of precision and recall") {
    std::mt19937_64 rng(6);
    for (int it = 0; it < 200; ++it) {
        ConfusionCounts c{1 + rng() % 1000, rng() % 1000, 1 + rng() % 1000, rng() % 1000};
        MetricsReport r = compute_metrics(c);
        if (r.precision + r.tpr > 0) {
            double harmonic = 2 * r.precision * r.tpr / (r.precision + r.tpr);
            CHECK(r.f1 == doctest::Approx(harmonic).epsilon(1e-12));
        }
    }
}

TEST_CASE("roc auc") {
    SUBCASE("perfect separation scores auc 1") {
        std::vector<double> scores{0.9, 0.8, 0.7, 0.2, 0.1};
        std::vector<int> labels{1, 1, 1, 0, 0};
        MetricsReport r = compute_metrics(ConfusionCounts{3, 0, 2, 0}, scores, labels);
        CHECK(r.roc_auc == doctest::Approx(1.0));
        CHECK(!r.sweep.empty());
    }
    SUBCASE("random scores on balanced labels sit near one half") {
        std::mt19937_64 rng(12);
        std::vector<double> scores;
        std::vector<int> labels;
        ConfusionCounts c;
        for (int i = 0; i < 4000; ++i) {
            double s = std::uniform_real_distribution<double>(0, 1)(rng);
            int l = i % 2;
            scores.push_back(s);
            labels.push_back(l);
            bool pred = s >= 0.5;
            if (l == 1) (pred ? c.tp : c.fn)++;
            else (pred ? c.fp : c.tn)++;
        }
        MetricsReport r = compute_metrics(c, scores, labels);
        CHECK(r.roc_auc > 0.45);
        CHECK(r.roc_auc < 0.55);
        CHECK(r.roc_auc >= 0.0);
        CHECK(r.roc_auc <= 1.0);
    }
    SUBCASE("sweep endpoints span the unit square") {
        std::vector<double> scores{0.3, 0.6, 0.2, 0.8};
        std::vector<int> labels{0, 1, 0, 1};
        MetricsReport r = compute_metrics(ConfusionCounts{2, 0, 2, 0}, scores, labels);
        CHECK(r.sweep.front().tpr == 0.0);
        CHECK(r.sweep.front().fpr == 0.0);
        CHECK(r.sweep.back().tpr == 1.0);
        CHECK(r.sweep.back().fpr == 1.0);
    }
}
