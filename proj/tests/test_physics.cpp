#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <unistd.h>

#include "aegis/physics.hpp"

using namespace aegis;

namespace {

PacketRecord make_pkt(double ts, uint32_t frame, uint32_t payload, uint32_t src, uint32_t dst,
                      uint16_t sport = 1000, uint16_t dport = 2000) {
    PacketRecord r;
    r.timestamp = ts;
    r.frame_len = frame;
    r.payload_len = payload;
    r.src_ip = src;
    r.dst_ip = dst;
    r.src_port = sport;
    r.dst_port = dport;
    r.is_tcp = true;
    r.tcp_flags = 24;
    r.tcp_window = 8192;
    return r;
}

std::string temp_path(const char* stem) {
    return std::string("/tmp/aegis_test_") + stem + "_" + std::to_string(getpid());
}

} // namespace

TEST_CASE("extract_vector evaluates the six features") {
    PacketRecord r = make_pkt(10.0, 1514, 1460, 0xc0a80105 /*192.168.1.5*/, 0x08080808);
    auto local = std::vector<Cidr>{parse_cidr("192.168.0.0/16")};
    PhysicsVector v = extract_vector(r, std::nullopt, local);
    CHECK(v.flags == doctest::Approx(0.09411764705882353).epsilon(1e-12));
    CHECK(v.payload_ratio == doctest::Approx(0.96433289299867900).epsilon(1e-12));
    CHECK(v.iat == 0.0); // first packet of the flow
    CHECK(v.direction == 1.0);
    CHECK(v.size == 1514.0);
    CHECK(v.window == 8192.0);

    PhysicsVector v2 = extract_vector(r, 9.25, local);
    CHECK(v2.iat == doctest::Approx(0.75));
    PhysicsVector clamped = extract_vector(r, 11.0, local); // out-of-order timestamp
    CHECK(clamped.iat == 0.0);

    r.src_ip = 0x08080404;
    CHECK(extract_vector(r, std::nullopt, local).direction == -1.0);
    CHECK(extract_vector(r, std::nullopt, rfc1918_nets()).direction == -1.0);
}

TEST_CASE("fit_norm_stats mean and population std of log1p") {
    const double e = std::exp(1.0);
    SUBCASE("constant column") {
        std::vector<PhysicsVector> corpus(8);
        for (auto& v : corpus) v.size = e - 1.0;
        NormStats s = fit_norm_stats(corpus);
        CHECK(s.mu_log[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.sigma_log[0] == doctest::Approx(0.0));
    }
    SUBCASE("two point column") {
        std::vector<PhysicsVector> corpus(2);
        corpus[0].size = 0.0;
        corpus[1].size = e * e - 1.0;
        NormStats s = fit_norm_stats(corpus);
        CHECK(s.mu_log[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.sigma_log[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("empty corpus") {
        CHECK_THROWS_AS(fit_norm_stats({}), Error);
    }
}

TEST_CASE("normalize applies the log-z transform to scale columns only") {
    NormStats s;
    s.mu_log = {0, 0, 0};
    s.sigma_log = {1, 1, 1};
    PhysicsVector v;
    v.size = 0;
    v.iat = std::exp(1.0) - 1.0;
    v.direction = -1;
    v.window = 0;
    v.flags = 0.25;
    v.payload_ratio = 0.75;
    auto out = normalize(v, s);
    CHECK(out[COL_SIZE] == doctest::Approx(0.0));
    CHECK(out[COL_IAT] == doctest::Approx(1.0 / (1.0 + 1e-5)).epsilon(1e-12));
    CHECK(out[COL_DIR] == -1.0);
    CHECK(out[COL_FLAGS] == 0.25);
    CHECK(out[COL_PAYLOAD] == 0.75);

    SUBCASE("constant column divides by epsilon alone") {
        NormStats c;
        c.mu_log = {std::log1p(100.0), 0, 0};
        c.sigma_log = {0, 1, 1};
        PhysicsVector at_mu;
        at_mu.size = 100.0;
        CHECK(normalize(at_mu, c)[COL_SIZE] == 0.0);
        PhysicsVector off;
        off.size = 200.0;
        CHECK(std::isfinite(normalize(off, c)[COL_SIZE]));
    }
}

TEST_CASE("normalization is monotone and self-standardizing") {
    std::mt19937_64 rng(7);
    std::vector<PhysicsVector> corpus;
    for (int i = 0; i < 5000; ++i) {
        PhysicsVector v;
        v.size = std::exp(std::uniform_real_distribution<double>(0, 8)(rng));
        v.iat = std::exp(std::uniform_real_distribution<double>(-9, 1)(rng));
        v.window = std::uniform_real_distribution<double>(0, 65535)(rng);
        corpus.push_back(v);
    }
    NormStats s = fit_norm_stats(corpus);

    // monotone in x for the log-z columns
    double prev = -1e300;
    for (double x : {0.0, 0.5, 3.0, 100.0, 1e6, 1e12}) {
        PhysicsVector v;
        v.size = x;
        double z = normalize(v, s)[COL_SIZE];
        CHECK(z > prev);
        prev = z;
    }

    // fit-then-normalize standardizes the corpus
    double mean = 0, var = 0;
    for (const auto& v : corpus) mean += normalize(v, s)[COL_SIZE];
    mean /= corpus.size();
    for (const auto& v : corpus) {
        double z = normalize(v, s)[COL_SIZE];
        var += (z - mean) * (z - mean);
    }
    var /= corpus.size();
    CHECK(std::abs(mean) < 1e-9);
    // sigma carries the epsilon guard, so std lands at sigma/(sigma+eps)
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-4);
}

TEST_CASE("denormalize_scale inverts the iat transform") {
    NormStats s;
    s.mu_log = {1.0, -3.5, 9.0};
    s.sigma_log = {0.5, 1.25, 2.0};
    for (double iat : {0.0, 1e-5, 0.02, 1.0, 30.0}) {
        PhysicsVector v;
        v.iat = iat;
        double z = normalize(v, s)[COL_IAT];
        CHECK(denormalize_scale(z, s, 1) == doctest::Approx(iat).epsilon(1e-9));
    }
}

TEST_CASE("windowing groups by bidirectional flow and conserves packets") {
    const int n = 10;
    std::vector<PhysicsVector> dummy(1);
    dummy[0].size = 100;
    WindowBuilder wb(n, fit_norm_stats(dummy), rfc1918_nets());

    SUBCASE("one flow of 2n packets gives two windows") {
        int windows = 0;
        for (int i = 0; i < 2 * n; ++i)
            if (wb.push(make_pkt(i * 0.1, 100, 46, 0xc0a80101, 0x08080808))) ++windows;
        CHECK(windows == 2);
        auto totals = wb.finish();
        CHECK(totals.dropped_partials == 0);
        CHECK(n * totals.windows_out + totals.residual_rows == totals.packets_in);
    }
    SUBCASE("n-1 packets gives zero windows and one dropped partial") {
        for (int i = 0; i < n - 1; ++i)
            CHECK_FALSE(wb.push(make_pkt(i * 0.1, 100, 46, 0xc0a80101, 0x08080808)));
        auto totals = wb.finish();
        CHECK(totals.windows_out == 0);
        CHECK(totals.dropped_partials == 1);
        CHECK(totals.residual_rows == static_cast<uint64_t>(n - 1));
    }
    SUBCASE("two interleaved flows produce distinct ids") {
        std::vector<FlowWindow> got;
        for (int i = 0; i < n; ++i) {
            if (auto w = wb.push(make_pkt(i * 0.2, 100, 46, 0xc0a80101, 0x08080808)))
                got.push_back(*w);
            if (auto w = wb.push(make_pkt(i * 0.2 + 0.05, 200, 146, 0xc0a80102, 0x08080404)))
                got.push_back(*w);
        }
        REQUIRE(got.size() == 2);
        CHECK(got[0].flow_id != got[1].flow_id);
    }
    SUBCASE("both directions of a connection share one flow id") {
        PacketRecord a = make_pkt(0, 100, 46, 0xc0a80101, 0x08080808, 1111, 443);
        PacketRecord b = make_pkt(1, 100, 46, 0x08080808, 0xc0a80101, 443, 1111);
        CHECK(flow_key(a) == flow_key(b));
    }
}

TEST_CASE("window file round trip") {
    std::mt19937_64 rng(21);
    NormStats stats;
    stats.mu_log = {1, 2, 3};
    stats.sigma_log = {0.5, 0.25, 0.125};
    const int n = 16;
    std::vector<FlowWindow> windows;
    for (int i = 0; i < 100; ++i) {
        FlowWindow w;
        w.flow_id = rng();
        w.start_time = static_cast<double>(rng() % 1000000) * 1e-3;
        w.label = static_cast<int8_t>(i % 3 - 1);
        w.data = Mat<float>(n, kDims);
        for (auto& v : w.data.a) v = std::uniform_real_distribution<float>(-4, 4)(rng);
        windows.push_back(w);
    }
    std::string path = temp_path("windows");
    write_windows(path, windows, stats, n);
    WindowFile f = read_windows(path);
    CHECK(f.n == n);
    CHECK(f.stats == stats);
    REQUIRE(f.windows.size() == windows.size());
    for (size_t i = 0; i < windows.size(); ++i) CHECK(f.windows[i] == windows[i]);

    SUBCASE("wrong magic") {
        std::string bad = temp_path("badmagic");
        FILE* fp = fopen(bad.c_str(), "wb");
        fwrite("NOPE", 1, 4, fp);
        fclose(fp);
        try {
            (void)read_windows(bad);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BadMagic);
        }
        std::remove(bad.c_str());
    }
    SUBCASE("unsupported version") {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        data[4] = 9; // version field
        std::string vp = temp_path("version");
        std::ofstream out(vp, std::ios::binary);
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.close();
        try {
            (void)read_windows(vp);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::VersionMismatch);
        }
        std::remove(vp.c_str());
    }
    SUBCASE("truncated mid-tensor") {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::string cut = temp_path("truncated");
        std::ofstream out(cut, std::ios::binary);
        out.write(data.data(), static_cast<std::streamsize>(data.size() - 17));
        out.close();
        try {
            (void)read_windows(cut);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Truncated);
        }
        std::remove(cut.c_str());
    }
    std::remove(path.c_str());
}
