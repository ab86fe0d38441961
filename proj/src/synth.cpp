#include "aegis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "aegis/errors.hpp"

namespace aegis {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Microsecond grid, same arithmetic the pcap parser uses to rebuild
/// timestamps, so generated records survive write/parse bit-exactly.
double quantize_us(double t) {
    long long us = std::llround(t * 1e6);
    return static_cast<double>(us / 1000000) + static_cast<double>(us % 1000000) * 1e-6;
}

constexpr uint32_t kTcpHeaders = 14 + 20 + 20;

struct FlowEndpoints {
    uint32_t local_ip, remote_ip;
    uint16_t local_port, remote_port;
};

FlowEndpoints endpoints_for(int flow_index) {
    FlowEndpoints e;
    e.local_ip = (192u << 24) | (168u << 16) | ((flow_index / 200 % 250 + 1) << 8) |
                 (flow_index % 200 + 1);
    e.remote_ip = (203u << 24) | (0u << 16) | (113u << 8) | (flow_index % 254 + 1);
    e.local_port = static_cast<uint16_t>(10000 + flow_index % 50000);
    e.remote_port = 443;
    return e;
}

uint32_t draw_mixture_size(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double u = u01(rng);
    if (u < 0.45) return std::uniform_int_distribution<uint32_t>(54, 120)(rng);
    if (u < 0.70) return std::uniform_int_distribution<uint32_t>(200, 1200)(rng);
    return std::uniform_int_distribution<uint32_t>(1400, 1514)(rng);
}

uint8_t draw_benign_flags(std::mt19937_64& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < 0.55) return 0x10; // ACK
    if (u < 0.95) return 0x18; // PSH+ACK
    if (u < 0.975) return 0x02; // SYN
    return 0x11;                // FIN+ACK
}

} // namespace

const char* profile_kind_name(ProfileKind k) {
    switch (k) {
    case ProfileKind::benign_stochastic: return "benign_stochastic";
    case ProfileKind::c2_beacon: return "c2_beacon";
    default: return "morphed_beacon";
    }
}

ProfileKind profile_kind_from_name(const std::string& name) {
    if (name == "benign_stochastic") return ProfileKind::benign_stochastic;
    if (name == "c2_beacon") return ProfileKind::c2_beacon;
    if (name == "morphed_beacon") return ProfileKind::morphed_beacon;
    throw Error(ErrorCode::InvalidArgument, "unknown profile kind: " + name);
}

TrafficProfile TrafficProfile::defaults(ProfileKind kind, uint64_t seed) {
    TrafficProfile p;
    p.kind = kind;
    p.seed = seed;
    switch (kind) {
    case ProfileKind::benign_stochastic:
        p.iat_law = {IatLaw::Type::lognormal, -4.0, 1.2, 1.0, 0.0};
        p.size_law = {SizeLaw::Type::empirical_mixture, 0, 0};
        break;
    case ProfileKind::c2_beacon:
        p.iat_law = {IatLaw::Type::fixed, 0, 0, 1.0, 0.001};
        p.size_law = {SizeLaw::Type::fixed, 128, 2};
        break;
    case ProfileKind::morphed_beacon:
        // benign volumetrics, beacon timing
        p.iat_law = {IatLaw::Type::fixed, 0, 0, 1.0, 0.001};
        p.size_law = {SizeLaw::Type::empirical_mixture, 0, 0};
        break;
    }
    return p;
}

std::vector<PacketRecord> generate(const TrafficProfile& profile, int flows,
                                   int packets_per_flow) {
    if (flows < 1 || packets_per_flow < 1)
        throw Error(ErrorCode::InvalidArgument, "generate: counts must be >= 1");

    const bool beacon_timing = profile.iat_law.type == IatLaw::Type::fixed;
    const bool benign_volumetrics = profile.kind != ProfileKind::c2_beacon;

    std::vector<PacketRecord> out;
    out.reserve(static_cast<size_t>(flows) * packets_per_flow);

    for (int f = 0; f < flows; ++f) {
        std::mt19937_64 rng(splitmix64(profile.seed ^ (0x9e3779b97f4a7c15ull * (f + 1))));
        const FlowEndpoints ep = endpoints_for(f);

        double t = 1.7e9 + f * 0.37 +
                   std::uniform_real_distribution<double>(0.0, 0.25)(rng);
        t = quantize_us(t);

        uint16_t beacon_window = 29200;
        uint32_t benign_window_base =
            std::uniform_int_distribution<uint32_t>(8192, 65535)(rng);

        for (int i = 0; i < packets_per_flow; ++i) {
            if (i > 0) {
                double iat;
                if (beacon_timing) {
                    const IatLaw& law = profile.iat_law;
                    double jitter =
                        law.jitter_fraction > 0
                            ? law.jitter_fraction *
                                  std::uniform_real_distribution<double>(-1.0, 1.0)(rng)
                            : 0.0;
                    iat = law.period * (1.0 + jitter);
                } else {
                    std::normal_distribution<double> g(profile.iat_law.mu, profile.iat_law.sigma);
                    iat = std::exp(g(rng));
                }
                t = quantize_us(t + std::max(0.0, iat));
            }

            PacketRecord r;
            r.timestamp = t;
            r.is_tcp = true;

            if (profile.size_law.type == SizeLaw::Type::empirical_mixture) {
                r.frame_len = draw_mixture_size(rng);
            } else {
                double j = profile.size_law.jitter > 0
                               ? std::uniform_int_distribution<int>(
                                     -static_cast<int>(profile.size_law.jitter),
                                     static_cast<int>(profile.size_law.jitter))(rng)
                               : 0;
                r.frame_len = static_cast<uint32_t>(
                    std::clamp(profile.size_law.bytes + j, 54.0, 65535.0));
            }
            r.payload_len = r.frame_len - kTcpHeaders;

            bool egress;
            if (benign_volumetrics) {
                egress = std::bernoulli_distribution(0.5)(rng);
                double w = benign_window_base *
                           (1.0 + 0.02 * std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
                r.tcp_window = static_cast<uint16_t>(std::clamp(w, 1024.0, 65535.0));
                r.tcp_flags = draw_benign_flags(rng);
            } else {
                egress = i % 2 == 0;
                r.tcp_window = beacon_window;
                r.tcp_flags = 0x18;
            }

            if (egress) {
                r.src_ip = ep.local_ip;
                r.dst_ip = ep.remote_ip;
                r.src_port = ep.local_port;
                r.dst_port = ep.remote_port;
            } else {
                r.src_ip = ep.remote_ip;
                r.dst_ip = ep.local_ip;
                r.src_port = ep.remote_port;
                r.dst_port = ep.local_port;
            }
            out.push_back(r);
        }
    }
    return out;
}

std::vector<FlowWindow> inject_noise(const std::vector<FlowWindow>& windows,
                                     const NoiseSpec& spec) {
    if (spec.level < 0) throw Error(ErrorCode::InvalidArgument, "noise level must be >= 0");
    std::vector<FlowWindow> out = windows;
    if (spec.level == 0.0 || windows.empty()) return out;

    // Per-column std over the whole window set.
    std::array<double, kDims> sigma{};
    for (int col : spec.target_columns) {
        double mean = 0;
        uint64_t count = 0;
        for (const FlowWindow& w : windows)
            for (int r = 0; r < w.data.rows; ++r) {
                mean += w.data[r][col];
                ++count;
            }
        mean /= static_cast<double>(count);
        double var = 0;
        for (const FlowWindow& w : windows)
            for (int r = 0; r < w.data.rows; ++r) {
                double d = w.data[r][col] - mean;
                var += d * d;
            }
        sigma[col] = std::sqrt(var / static_cast<double>(count));
    }

    std::mt19937_64 rng(splitmix64(spec.seed));
    for (FlowWindow& w : out)
        for (int r = 0; r < w.data.rows; ++r)
            for (int col : spec.target_columns) {
                std::normal_distribution<double> g(0.0, spec.level * sigma[col]);
                w.data[r][col] += static_cast<float>(g(rng));
            }
    return out;
}

namespace {

struct RawWindow {
    uint64_t flow_id = 0;
    double start_time = 0;
    int label = -1;
    int stratum = 0;
    std::vector<PhysicsVector> rows;
};

std::vector<RawWindow> raw_windows(const std::vector<PacketRecord>& records, int n, int label,
                                   int stratum) {
    struct FlowState {
        double prev_ts = 0;
        bool has_prev = false;
        double start = 0;
        std::vector<PhysicsVector> rows;
    };
    std::unordered_map<uint64_t, FlowState> flows;
    std::vector<RawWindow> out;
    const auto& nets = rfc1918_nets();
    for (const PacketRecord& r : records) {
        uint64_t key = flow_key(r);
        FlowState& st = flows[key];
        if (st.rows.empty()) st.start = r.timestamp;
        PhysicsVector v = extract_vector(
            r, st.has_prev ? std::optional<double>(st.prev_ts) : std::nullopt, nets);
        st.prev_ts = r.timestamp;
        st.has_prev = true;
        st.rows.push_back(v);
        if (static_cast<int>(st.rows.size()) == n) {
            RawWindow w;
            w.flow_id = key;
            w.start_time = st.start;
            w.label = label;
            w.stratum = stratum;
            w.rows = std::move(st.rows);
            st.rows.clear();
            out.push_back(std::move(w));
        }
    }
    return out;
}

FlowWindow finalize_window(const RawWindow& raw, const NormStats& stats) {
    FlowWindow w;
    w.flow_id = raw.flow_id;
    w.start_time = raw.start_time;
    w.label = static_cast<int8_t>(raw.label);
    w.data = Mat<float>(static_cast<int>(raw.rows.size()), kDims);
    for (size_t r = 0; r < raw.rows.size(); ++r) {
        auto norm = normalize(raw.rows[r], stats);
        for (int c = 0; c < kDims; ++c) w.data[static_cast<int>(r)][c] = static_cast<float>(norm[c]);
    }
    return w;
}

} // namespace

CorpusResult build_corpus(const CorpusConfig& config) {
    if (config.profiles.size() < 2)
        throw Error(ErrorCode::InsufficientData, "build_corpus: need at least two profiles");

    std::vector<std::vector<RawWindow>> strata;
    CorpusResult result;
    for (size_t pi = 0; pi < config.profiles.size(); ++pi) {
        const CorpusProfileSpec& spec = config.profiles[pi];
        auto records = generate(spec.profile, spec.flows, spec.packets_per_flow);
        auto wins = raw_windows(records, config.n, spec.label, static_cast<int>(pi));
        if (wins.empty())
            throw Error(ErrorCode::InsufficientData,
                        std::string("profile produced no complete windows: ") +
                            profile_kind_name(spec.profile.kind));
        result.windows_per_profile.push_back(wins.size());
        strata.push_back(std::move(wins));
    }

    // Stratified 80/20 split by (label, profile).
    std::mt19937_64 rng(splitmix64(config.seed));
    std::vector<const RawWindow*> train_raw, test_raw;
    for (auto& stratum : strata) {
        std::shuffle(stratum.begin(), stratum.end(), rng);
        size_t n_test = static_cast<size_t>(std::llround(config.test_fraction * stratum.size()));
        for (size_t i = 0; i < stratum.size(); ++i)
            (i < n_test ? test_raw : train_raw).push_back(&stratum[i]);
    }
    if (train_raw.empty() || test_raw.empty())
        throw Error(ErrorCode::InsufficientData, "build_corpus: empty split");

    std::vector<PhysicsVector> train_rows;
    for (const RawWindow* w : train_raw)
        train_rows.insert(train_rows.end(), w->rows.begin(), w->rows.end());
    result.stats = fit_norm_stats(train_rows);

    for (const RawWindow* w : train_raw) result.train.push_back(finalize_window(*w, result.stats));
    for (const RawWindow* w : test_raw) result.test.push_back(finalize_window(*w, result.stats));
    return result;
}

CorpusConfig parse_corpus_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
            line.pop_back();
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "bad config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }

    auto get = [&kv](const std::string& key, const std::string& fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    };

    CorpusConfig cfg;
    cfg.n = std::stoi(get("n", "100"));
    cfg.seed = std::stoull(get("seed", "1"));
    cfg.test_fraction = std::stod(get("test_fraction", "0.2"));
    int count = std::stoi(get("profile.count", "0"));
    for (int i = 0; i < count; ++i) {
        std::string p = "profile." + std::to_string(i) + ".";
        CorpusProfileSpec spec;
        spec.profile = TrafficProfile::defaults(profile_kind_from_name(get(p + "kind", "")),
                                                std::stoull(get(p + "seed", std::to_string(i + 1))));
        spec.label = std::stoi(get(p + "label", "0"));
        spec.flows = std::stoi(get(p + "flows", "10"));
        spec.packets_per_flow = std::stoi(get(p + "packets_per_flow", "1000"));
        if (kv.count(p + "iat.type"))
            spec.profile.iat_law.type = get(p + "iat.type", "") == "fixed" ? IatLaw::Type::fixed
                                                                           : IatLaw::Type::lognormal;
        spec.profile.iat_law.mu = std::stod(get(p + "iat.mu", std::to_string(spec.profile.iat_law.mu)));
        spec.profile.iat_law.sigma =
            std::stod(get(p + "iat.sigma", std::to_string(spec.profile.iat_law.sigma)));
        spec.profile.iat_law.period =
            std::stod(get(p + "iat.period", std::to_string(spec.profile.iat_law.period)));
        spec.profile.iat_law.jitter_fraction =
            std::stod(get(p + "iat.jitter", std::to_string(spec.profile.iat_law.jitter_fraction)));
        if (kv.count(p + "size.type"))
            spec.profile.size_law.type = get(p + "size.type", "") == "fixed"
                                             ? SizeLaw::Type::fixed
                                             : SizeLaw::Type::empirical_mixture;
        spec.profile.size_law.bytes =
            std::stod(get(p + "size.bytes", std::to_string(spec.profile.size_law.bytes)));
        spec.profile.size_law.jitter =
            std::stod(get(p + "size.jitter", std::to_string(spec.profile.size_law.jitter)));
        cfg.profiles.push_back(spec);
    }
    return cfg;
}

CorpusConfig desk_corpus_config(uint64_t seed) {
    CorpusConfig cfg;
    cfg.n = 100;
    cfg.seed = seed;

    CorpusProfileSpec benign;
    benign.profile = TrafficProfile::defaults(ProfileKind::benign_stochastic, seed + 1);
    benign.label = 0;
    benign.flows = 100;
    benign.packets_per_flow = 1000;
    cfg.profiles.push_back(benign);

    CorpusProfileSpec beacon;
    beacon.profile = TrafficProfile::defaults(ProfileKind::c2_beacon, seed + 2);
    beacon.label = 1;
    beacon.flows = 50;
    beacon.packets_per_flow = 1000;
    cfg.profiles.push_back(beacon);

    // The morphed tier also anchors its beacon period onto the benign mean
    // IAT (exp(mu + sigma^2/2) of the benign law) with 1% jitter, so timing
    // rigidity is the only separating signal left.
    CorpusProfileSpec morphed;
    morphed.profile = TrafficProfile::defaults(ProfileKind::morphed_beacon, seed + 3);
    morphed.profile.iat_law.period = std::exp(-4.0 + 1.2 * 1.2 / 2.0);
    morphed.profile.iat_law.jitter_fraction = 0.01;
    morphed.label = 1;
    morphed.flows = 50;
    morphed.packets_per_flow = 1000;
    cfg.profiles.push_back(morphed);
    return cfg;
}

} // namespace aegis
