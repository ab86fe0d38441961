#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "aegis/errors.hpp"
#include "aegis/linalg.hpp"
#include "aegis/pcap.hpp"

namespace aegis {

// Fixed feature-column order used everywhere downstream.
enum Column : int { COL_SIZE = 0, COL_IAT = 1, COL_DIR = 2, COL_WIN = 3, COL_FLAGS = 4, COL_PAYLOAD = 5 };
constexpr int kDims = 6;

/// One packet's 6-D physics vector, raw scale.
struct PhysicsVector {
    double size = 0;          // bytes
    double iat = 0;           // seconds, >= 0
    double direction = 1.0;   // +1 egress / -1 ingress
    double window = 0;        // advertised receiver window, bytes
    double flags = 0;         // raw flag byte / 255, in [0,1]
    double payload_ratio = 0; // payload bytes / frame bytes, in [0,1]

    double operator[](int col) const {
        switch (col) {
        case COL_SIZE: return size;
        case COL_IAT: return iat;
        case COL_DIR: return direction;
        case COL_WIN: return window;
        case COL_FLAGS: return flags;
        default: return payload_ratio;
        }
    }
};

/// log1p Z-score statistics for the scale columns (size, iat, window).
struct NormStats {
    std::array<double, 3> mu_log{0, 0, 0};
    std::array<double, 3> sigma_log{0, 0, 0};
    static constexpr double epsilon = 1e-5;

    bool operator==(const NormStats&) const = default;
};

/// N x 6 normalized window of one flow; the unit of inference.
struct FlowWindow {
    uint64_t flow_id = 0;
    double start_time = 0;
    int8_t label = -1; // 0 benign, 1 malicious, -1 unlabeled
    Mat<float> data;   // n rows x 6 cols, arrival order

    bool operator==(const FlowWindow&) const = default;
};

struct Cidr {
    uint32_t addr = 0; // host byte order
    int prefix = 0;

    bool contains(uint32_t ip) const {
        if (prefix == 0) return true;
        uint32_t mask = prefix >= 32 ? 0xffffffffu : ~(0xffffffffu >> prefix);
        return (ip & mask) == (addr & mask);
    }
};

/// Parse "a.b.c.d/len". Throws InvalidArgument.
Cidr parse_cidr(const std::string& text);

/// RFC 1918 blocks; the default read of "private IP source" for egress.
const std::vector<Cidr>& rfc1918_nets();

/// Raw physics vector from one packet. iat is clamped at 0 and is 0 for the
/// first packet of a flow (prev_ts empty).
PhysicsVector extract_vector(const PacketRecord& pkt, std::optional<double> prev_ts,
                             const std::vector<Cidr>& local_nets);

/// Mean and population standard deviation of log(x+1) over the scale columns.
/// Throws EmptyCorpus.
NormStats fit_norm_stats(const std::vector<PhysicsVector>& corpus);

/// Apply the log-scaled Z-score transform to the scale columns; direction,
/// flags and payload ratio pass through unchanged.
std::array<double, kDims> normalize(const PhysicsVector& v, const NormStats& stats);

/// Invert the scale-column transform for one value (used to recover raw IAT
/// for the time-aware cells). Result clamped at 0.
double denormalize_scale(double normalized, const NormStats& stats, int scale_idx);

/// Unordered bidirectional 5-tuple hash; both directions of a connection map
/// to the same id.
uint64_t flow_key(const PacketRecord& pkt);

/// Groups packets by bidirectional flow and emits non-overlapping windows of
/// exactly n packets. Trailing partials are dropped and counted on finish().
class WindowBuilder {
public:
    WindowBuilder(int n, NormStats stats, std::vector<Cidr> local_nets);

    /// Feed one packet; returns a completed window when a flow reaches n rows.
    std::optional<FlowWindow> push(const PacketRecord& pkt);

    struct Totals {
        uint64_t packets_in = 0;
        uint64_t windows_out = 0;
        uint64_t dropped_partials = 0; // partial windows discarded at finish
        uint64_t residual_rows = 0;    // rows inside those partials
    };

    /// Drop trailing partial windows and return conservation totals:
    /// n * windows_out + residual_rows == packets_in.
    Totals finish();

    const Totals& totals() const { return totals_; }

private:
    struct FlowState {
        double prev_ts = 0;
        bool has_prev = false;
        double start_time = 0;
        std::vector<PhysicsVector> rows;
    };

    int n_;
    NormStats stats_;
    std::vector<Cidr> local_nets_;
    std::unordered_map<uint64_t, FlowState> flows_;
    Totals totals_;
};

/// Window-tensor file ("AEGT"): windows plus the NormStats they were
/// normalized with. Layout is documented in docs/formats.md.
void write_windows(const std::string& path, const std::vector<FlowWindow>& windows,
                   const NormStats& stats, int n);

struct WindowFile {
    int n = 0;
    NormStats stats;
    std::vector<FlowWindow> windows;
};

WindowFile read_windows(const std::string& path);

} // namespace aegis
