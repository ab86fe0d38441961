#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aegis/metrics.hpp"
#include "aegis/model.hpp"
#include "aegis/physics.hpp"
#include "aegis/ring.hpp"
#include "aegis/synth.hpp"

namespace aegis {

struct ExtractResult {
    WindowFile file; // stats fitted on this capture
    uint64_t packets = 0;
    uint64_t skipped_frames = 0;
    WindowBuilder::Totals totals;
};

/// pcap -> normalized windows, NormStats fitted on the capture itself.
ExtractResult extract_windows(const std::string& pcap_path, int n,
                              const std::vector<Cidr>& local_nets = rfc1918_nets());

struct ReplayStats {
    uint64_t published = 0;
    uint64_t would_block = 0;
};

/// Userspace harvester: parse a capture, extract the raw per-flow physics
/// vectors and publish one slot per packet. Blocks (spinning politely) on a
/// full ring; an optional stop flag aborts the replay.
ReplayStats replay_pcap_to_ring(const std::string& pcap_path, Ring& ring,
                                const std::vector<Cidr>& local_nets = rfc1918_nets(),
                                const std::atomic<bool>* stop = nullptr);

struct DetectOptions {
    int swarm_batch = 64;     // windows per inference batch
    int poll_us = 500;        // sleep between empty polls
    double idle_timeout_s = 2.0;
};

struct DetectStats {
    uint64_t slots_consumed = 0;
    uint64_t windows = 0;
    uint64_t flagged_malicious = 0;
    uint64_t residual_rows = 0; // buffered rows never completing a window
    uint64_t batches = 0;
};

/// Per emitted verdict: the verdict, the per-flow window index, and the
/// wall-clock latency of the inference batch it belonged to.
using VerdictSink =
    std::function<void(const DetectionVerdict&, uint64_t window_index, double batch_latency_us)>;

/// Engine role: consume slots, assemble per-flow windows of params.hyper.n
/// rows normalized with the checkpoint stats, run inference in swarm batches
/// and stream verdicts. Returns when the producer is done and the ring has
/// drained, or after idle_timeout_s without traffic.
DetectStats detect_stream(Ring& ring, const ModelParams<float>& params, const DetectOptions& opt,
                          const VerdictSink& sink,
                          const std::atomic<bool>* producer_done = nullptr);

struct EvalResult {
    ConfusionCounts counts;
    MetricsReport metrics;
    uint64_t windows = 0;
};

/// Classifier-OR-TVD verdicts against labels; ROC from the probabilities.
EvalResult eval_windows(const std::vector<FlowWindow>& windows, const ModelParams<float>& params);

struct StressRow {
    double level = 0;
    double f1 = 0, tpr = 0, fpr = 0;
};

/// The Gaussian-noise stress protocol: evaluate at each level on noisy copies
/// of the test windows (noise on the normalized IAT column).
std::vector<StressRow> stress_eval(const std::vector<FlowWindow>& test,
                                   const ModelParams<float>& params,
                                   const std::vector<double>& levels, uint64_t seed);

struct CalibrationSummary {
    double baseline = 0;
    double tau = 0;
    double mean_entropy = 0, std_entropy = 0, min_entropy = 0;
    uint64_t windows = 0;
};

/// Fit the benign entropy baseline (mean window entropy) and, when a target
/// false-positive rate is given, the threshold tau from the benign lower
/// tail. Mutates params.tvd.
CalibrationSummary calibrate_tvd(const std::vector<FlowWindow>& benign_windows,
                                 ModelParams<float>& params,
                                 std::optional<double> fp_target = std::nullopt);

struct BenchReport {
    uint64_t records = 0;
    double seconds = 0;
    double records_per_sec = 0;
    double p50_us = 0, p90_us = 0, p99_us = 0, max_us = 0;
    uint64_t would_block = 0;
    uint64_t batches = 0;
    int schedules = 0;
};

/// Two-thread producer/consumer benchmark over a fresh ring file. Runs
/// `schedules` randomized stall patterns and audits the sequence field:
/// any loss, duplication or reordering throws SequenceGap.
BenchReport bench_ring(const std::string& ring_path, uint64_t records, uint64_t capacity,
                       int batch, uint64_t seed, int schedules);

} // namespace aegis
