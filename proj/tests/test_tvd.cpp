#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "aegis/tvd.hpp"

using namespace aegis;

TEST_CASE("position softmax") {
    SUBCASE("equal scores are uniform") {
        Vec<double> s(8, 3.7);
        auto p = position_softmax(s);
        for (double v : p) CHECK(v == doctest::Approx(0.125).epsilon(1e-12));
    }
    SUBCASE("(0, ln 3) -> (0.25, 0.75)") {
        Vec<double> s{0.0, std::log(3.0)};
        auto p = position_softmax(s);
        CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("huge score stays finite and one-hot") {
        Vec<double> s(16, 0.0);
        s[5] = 1000.0;
        auto p = position_softmax(s);
        CHECK(all_finite(p.data(), p.size()));
        CHECK(p[5] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("sums to one") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g(0, 10);
        for (int it = 0; it < 100; ++it) {
            Vec<double> s(64);
            for (auto& v : s) v = g(rng);
            auto p = position_softmax(s);
            double sum = 0;
            for (double v : p) sum += v;
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("shannon entropy in bits") {
    CHECK(shannon_entropy(Vec<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(shannon_entropy(Vec<double>{0.0, 1.0, 0.0}) == 0.0);
    CHECK(shannon_entropy(Vec<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.5).epsilon(1e-12));

    CHECK_THROWS_AS(shannon_entropy(Vec<double>{0.5, 0.4}), Error);
    CHECK_THROWS_AS(shannon_entropy(Vec<double>{1.5, -0.5}), Error);
}

TEST_CASE("entropy range and extremes over random scores") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 5);
    const int n = 64;
    const double hmax = std::log2(static_cast<double>(n));
    for (int it = 0; it < 10000; ++it) {
        Vec<double> s(n);
        for (auto& v : s) v = g(rng);
        double h = shannon_entropy(position_softmax(s));
        CHECK(h >= 0.0);
        CHECK(h <= hmax + 1e-12);
    }
    Vec<double> flat(n, 1.23);
    CHECK(shannon_entropy(position_softmax(flat)) == doctest::Approx(hmax).epsilon(1e-9));
}

TEST_CASE("softmax shift invariance is exact and flags agree") {
    std::mt19937_64 rng(3);
    TvdConfig cfg;
    cfg.baseline_entropy = 4.0;
    for (int it = 0; it < 200; ++it) {
        Vec<double> s(32);
        // grid-valued scores and a power-of-two shift: the additions are
        // exact, so the shifted softmax must be bit-identical
        for (auto& v : s) v = static_cast<double>(static_cast<int>(rng() % 256)) / 16.0;
        Vec<double> shifted = s;
        for (auto& v : shifted) v += 8.0;
        auto p0 = position_softmax(s);
        auto p1 = position_softmax(shifted);
        for (size_t i = 0; i < p0.size(); ++i) CHECK(p0[i] == p1[i]);
        double h0 = shannon_entropy(p0);
        double h1 = shannon_entropy(p1);
        CHECK(h0 == h1);
        CHECK(classify_entropy(h0, cfg).anomaly == classify_entropy(h1, cfg).anomaly);
    }
}

TEST_CASE("raising the top score never increases entropy") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 2);
    for (int it = 0; it < 500; ++it) {
        Vec<double> s(16);
        for (auto& v : s) v = g(rng);
        size_t arg = 0;
        for (size_t i = 1; i < s.size(); ++i)
            if (s[i] > s[arg]) arg = i;
        double h = shannon_entropy(position_softmax(s));
        s[arg] += std::uniform_real_distribution<double>(0.0, 3.0)(rng);
        double h2 = shannon_entropy(position_softmax(s));
        CHECK(h2 <= h + 1e-12);
    }
}

TEST_CASE("class-1 rule") {
    TvdConfig cfg;
    cfg.baseline_entropy = 5.0;
    cfg.tau_threshold = 0.12;

    CHECK(classify_entropy(4.0, cfg).anomaly);       // 4.0 < 4.88
    CHECK_FALSE(classify_entropy(5.0, cfg).anomaly); // boundary: strict inequality
    CHECK_FALSE(classify_entropy(4.88, cfg).anomaly);
    CHECK(classify_entropy(4.0, cfg).score == doctest::Approx(1.0));

    // constant hidden states: maximal entropy stays benign whenever the
    // baseline cannot exceed log2 N
    const int n = 128;
    HiddenTrajectory<double> traj;
    traj.scores.assign(n, 2.5);
    TvdConfig c2;
    c2.baseline_entropy = std::log2(static_cast<double>(n));
    auto r = detect(traj, c2);
    CHECK(r.entropy == doctest::Approx(std::log2(static_cast<double>(n))));
    CHECK_FALSE(r.anomaly);
}

TEST_CASE("thermo loss scoping and values") {
    TvdConfig cfg;
    cfg.baseline_entropy = 5.0;
    cfg.lambda = 0.1;
    CHECK(thermo_loss(4.0, 0, cfg) == doctest::Approx(-3.5).epsilon(1e-12));
    CHECK(thermo_loss(4.0, 1, cfg) == 0.0);
    CHECK(thermo_loss(0.5, 0, cfg) == doctest::Approx(0.0)); // lambda * baseline crossing
}

TEST_CASE("baseline EMA") {
    CHECK(update_baseline(5.0, {4.0}, 0.9) == doctest::Approx(4.9).epsilon(1e-12));
    CHECK(update_baseline(5.0, {5.0, 5.0}, 0.37) == doctest::Approx(5.0));
    CHECK(update_baseline(5.0, {}, 0.9) == 5.0);
    CHECK(update_baseline(5.0, {4.0}, 1.0) == doctest::Approx(5.0)); // momentum -> 1 limit
}
