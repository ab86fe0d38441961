#include "aegis/physics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace aegis {

namespace {

constexpr char kWindowMagic[4] = {'A', 'E', 'G', 'T'};
constexpr uint32_t kWindowVersion = 1;

uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    static_assert(std::endian::native == std::endian::little,
                  "file formats are little-endian; byte-swap writers needed on this host");
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in.gcount() != sizeof(T)) throw Error(ErrorCode::Truncated, "window file truncated");
}

} // namespace

Cidr parse_cidr(const std::string& text) {
    unsigned a, b, c, d, len;
    if (std::sscanf(text.c_str(), "%u.%u.%u.%u/%u", &a, &b, &c, &d, &len) != 5 || a > 255 ||
        b > 255 || c > 255 || d > 255 || len > 32)
        throw Error(ErrorCode::InvalidArgument, "bad CIDR: " + text);
    return Cidr{a << 24 | b << 16 | c << 8 | d, static_cast<int>(len)};
}

const std::vector<Cidr>& rfc1918_nets() {
    static const std::vector<Cidr> nets = {
        parse_cidr("10.0.0.0/8"),
        parse_cidr("172.16.0.0/12"),
        parse_cidr("192.168.0.0/16"),
    };
    return nets;
}

PhysicsVector extract_vector(const PacketRecord& pkt, std::optional<double> prev_ts,
                             const std::vector<Cidr>& local_nets) {
    PhysicsVector v;
    v.size = pkt.frame_len;
    v.iat = prev_ts ? std::max(0.0, pkt.timestamp - *prev_ts) : 0.0;
    bool local = false;
    for (const Cidr& net : local_nets)
        if (net.contains(pkt.src_ip)) {
            local = true;
            break;
        }
    v.direction = local ? 1.0 : -1.0;
    v.window = pkt.tcp_window;
    v.flags = pkt.tcp_flags / 255.0;
    v.payload_ratio = pkt.frame_len > 0 ? static_cast<double>(pkt.payload_len) / pkt.frame_len : 0.0;
    return v;
}

NormStats fit_norm_stats(const std::vector<PhysicsVector>& corpus) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "fit_norm_stats: empty corpus");
    constexpr int cols[3] = {COL_SIZE, COL_IAT, COL_WIN};
    NormStats s;
    const double inv_n = 1.0 / static_cast<double>(corpus.size());
    for (int k = 0; k < 3; ++k) {
        double mean = 0;
        for (const PhysicsVector& v : corpus) mean += std::log1p(v[cols[k]]);
        mean *= inv_n;
        double var = 0;
        for (const PhysicsVector& v : corpus) {
            double d = std::log1p(v[cols[k]]) - mean;
            var += d * d;
        }
        s.mu_log[k] = mean;
        s.sigma_log[k] = std::sqrt(var * inv_n); // population std
    }
    return s;
}

std::array<double, kDims> normalize(const PhysicsVector& v, const NormStats& stats) {
    std::array<double, kDims> out{};
    constexpr int scale_cols[3] = {COL_SIZE, COL_IAT, COL_WIN};
    for (int k = 0; k < 3; ++k)
        out[scale_cols[k]] =
            (std::log1p(v[scale_cols[k]]) - stats.mu_log[k]) / (stats.sigma_log[k] + NormStats::epsilon);
    out[COL_DIR] = v.direction;
    out[COL_FLAGS] = v.flags;
    out[COL_PAYLOAD] = v.payload_ratio;
    return out;
}

double denormalize_scale(double normalized, const NormStats& stats, int scale_idx) {
    double logv = normalized * (stats.sigma_log[scale_idx] + NormStats::epsilon) + stats.mu_log[scale_idx];
    return std::max(0.0, std::expm1(logv));
}

uint64_t flow_key(const PacketRecord& pkt) {
    // Canonicalize so both directions share one key.
    uint64_t a = static_cast<uint64_t>(pkt.src_ip) << 16 | pkt.src_port;
    uint64_t b = static_cast<uint64_t>(pkt.dst_ip) << 16 | pkt.dst_port;
    if (a > b) std::swap(a, b);
    uint8_t proto = pkt.is_tcp ? 6 : 17;
    uint64_t h = fnv1a64(&a, sizeof a);
    h = fnv1a64(&b, sizeof b, h);
    h = fnv1a64(&proto, sizeof proto, h);
    return h;
}

WindowBuilder::WindowBuilder(int n, NormStats stats, std::vector<Cidr> local_nets)
    : n_(n), stats_(stats), local_nets_(std::move(local_nets)) {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "window length must be >= 2");
}

std::optional<FlowWindow> WindowBuilder::push(const PacketRecord& pkt) {
    ++totals_.packets_in;
    uint64_t key = flow_key(pkt);
    FlowState& st = flows_[key];
    if (st.rows.empty()) st.start_time = pkt.timestamp;

    PhysicsVector v = extract_vector(
        pkt, st.has_prev ? std::optional<double>(st.prev_ts) : std::nullopt, local_nets_);
    st.prev_ts = pkt.timestamp;
    st.has_prev = true;
    st.rows.push_back(v);

    if (static_cast<int>(st.rows.size()) < n_) return std::nullopt;

    FlowWindow w;
    w.flow_id = key;
    w.start_time = st.start_time;
    w.label = -1;
    w.data = Mat<float>(n_, kDims);
    for (int r = 0; r < n_; ++r) {
        auto norm = normalize(st.rows[r], stats_);
        for (int c = 0; c < kDims; ++c) w.data[r][c] = static_cast<float>(norm[c]);
    }
    st.rows.clear(); // next window of this flow starts fresh; IAT chain continues
    ++totals_.windows_out;
    return w;
}

WindowBuilder::Totals WindowBuilder::finish() {
    for (auto& [key, st] : flows_) {
        if (!st.rows.empty()) {
            ++totals_.dropped_partials;
            totals_.residual_rows += st.rows.size();
            st.rows.clear();
        }
    }
    return totals_;
}

void write_windows(const std::string& path, const std::vector<FlowWindow>& windows,
                   const NormStats& stats, int n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);

    out.write(kWindowMagic, 4);
    write_raw(out, kWindowVersion);
    write_raw(out, static_cast<uint32_t>(n));
    write_raw(out, static_cast<uint32_t>(kDims));
    write_raw(out, static_cast<uint64_t>(windows.size()));
    for (int k = 0; k < 3; ++k) write_raw(out, stats.mu_log[k]);
    for (int k = 0; k < 3; ++k) write_raw(out, stats.sigma_log[k]);
    write_raw(out, NormStats::epsilon);

    for (const FlowWindow& w : windows) {
        if (w.data.rows != n || w.data.cols != kDims)
            throw Error(ErrorCode::DimMismatch, "window shape does not match file header");
        write_raw(out, w.flow_id);
        write_raw(out, w.start_time);
        write_raw(out, w.label);
        out.write(reinterpret_cast<const char*>(w.data.a.data()),
                  static_cast<std::streamsize>(w.data.size() * sizeof(float)));
    }
    if (!out) throw Error(ErrorCode::IoFailure, "short write: " + path);
}

WindowFile read_windows(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kWindowMagic, 4) != 0)
        throw Error(ErrorCode::BadMagic, "not a window-tensor file: " + path);
    uint32_t version, n, dims;
    read_raw(in, version);
    if (version != kWindowVersion)
        throw Error(ErrorCode::VersionMismatch, "unsupported window file version");
    read_raw(in, n);
    read_raw(in, dims);
    if (dims != kDims) throw Error(ErrorCode::DimMismatch, "window file has wrong column count");
    uint64_t count;
    read_raw(in, count);

    WindowFile f;
    f.n = static_cast<int>(n);
    for (int k = 0; k < 3; ++k) read_raw(in, f.stats.mu_log[k]);
    for (int k = 0; k < 3; ++k) read_raw(in, f.stats.sigma_log[k]);
    double eps;
    read_raw(in, eps);

    f.windows.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        FlowWindow& w = f.windows[i];
        read_raw(in, w.flow_id);
        read_raw(in, w.start_time);
        read_raw(in, w.label);
        w.data = Mat<float>(f.n, kDims);
        in.read(reinterpret_cast<char*>(w.data.a.data()),
                static_cast<std::streamsize>(w.data.size() * sizeof(float)));
        if (static_cast<size_t>(in.gcount()) != w.data.size() * sizeof(float))
            throw Error(ErrorCode::Truncated, "window file truncated mid-tensor");
    }
    return f;
}

} // namespace aegis
