#include "aegis/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>

namespace aegis {

namespace {

double steady_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

ExtractResult extract_windows(const std::string& pcap_path, int n,
                              const std::vector<Cidr>& local_nets) {
    std::ifstream in(pcap_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open pcap: " + pcap_path);
    PcapReader reader(in);

    // First pass: raw vectors per flow to fit stats on this capture.
    struct FlowState {
        double prev_ts = 0;
        bool has_prev = false;
        double start = 0;
        std::vector<PhysicsVector> rows;
    };
    std::unordered_map<uint64_t, FlowState> flows;
    struct RawWin {
        uint64_t flow_id;
        double start;
        std::vector<PhysicsVector> rows;
    };
    std::vector<RawWin> wins;
    std::vector<PhysicsVector> all_rows;

    ExtractResult res;
    while (auto pkt = reader.next()) {
        ++res.packets;
        uint64_t key = flow_key(*pkt);
        FlowState& st = flows[key];
        if (st.rows.empty()) st.start = pkt->timestamp;
        PhysicsVector v = extract_vector(
            *pkt, st.has_prev ? std::optional<double>(st.prev_ts) : std::nullopt, local_nets);
        st.prev_ts = pkt->timestamp;
        st.has_prev = true;
        st.rows.push_back(v);
        all_rows.push_back(v);
        if (static_cast<int>(st.rows.size()) == n) {
            wins.push_back({key, st.start, std::move(st.rows)});
            st.rows.clear();
        }
    }
    res.skipped_frames = reader.skipped();
    if (all_rows.empty()) throw Error(ErrorCode::EmptyCorpus, "no decodable packets in " + pcap_path);

    res.file.n = n;
    res.file.stats = fit_norm_stats(all_rows);
    for (const RawWin& rw : wins) {
        FlowWindow w;
        w.flow_id = rw.flow_id;
        w.start_time = rw.start;
        w.label = -1;
        w.data = Mat<float>(n, kDims);
        for (int r = 0; r < n; ++r) {
            auto norm = normalize(rw.rows[r], res.file.stats);
            for (int c = 0; c < kDims; ++c) w.data[r][c] = static_cast<float>(norm[c]);
        }
        res.file.windows.push_back(std::move(w));
    }
    res.totals.packets_in = res.packets;
    res.totals.windows_out = res.file.windows.size();
    for (auto& [key, st] : flows)
        if (!st.rows.empty()) {
            ++res.totals.dropped_partials;
            res.totals.residual_rows += st.rows.size();
        }
    return res;
}

ReplayStats replay_pcap_to_ring(const std::string& pcap_path, Ring& ring,
                                const std::vector<Cidr>& local_nets,
                                const std::atomic<bool>* stop) {
    std::ifstream in(pcap_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open pcap: " + pcap_path);
    PcapReader reader(in);

    struct FlowState {
        double prev_ts = 0;
        bool has_prev = false;
    };
    std::unordered_map<uint64_t, FlowState> flows;
    ReplayStats stats;

    while (auto pkt = reader.next()) {
        if (stop && stop->load(std::memory_order_relaxed)) break;
        uint64_t key = flow_key(*pkt);
        FlowState& st = flows[key];
        PhysicsVector v = extract_vector(
            *pkt, st.has_prev ? std::optional<double>(st.prev_ts) : std::nullopt, local_nets);
        st.prev_ts = pkt->timestamp;
        st.has_prev = true;

        RingSlot slot;
        slot.flow_id = key;
        slot.timestamp = pkt->timestamp;
        slot.physics[COL_SIZE] = static_cast<float>(v.size);
        slot.physics[COL_IAT] = static_cast<float>(v.iat);
        slot.physics[COL_DIR] = static_cast<float>(v.direction);
        slot.physics[COL_WIN] = static_cast<float>(v.window);
        slot.physics[COL_FLAGS] = static_cast<float>(v.flags);
        slot.physics[COL_PAYLOAD] = static_cast<float>(v.payload_ratio);

        while (!ring.publish(slot)) {
            ++stats.would_block;
            if (stop && stop->load(std::memory_order_relaxed)) return stats;
            std::this_thread::yield();
        }
        ++stats.published;
    }
    return stats;
}

DetectStats detect_stream(Ring& ring, const ModelParams<float>& params, const DetectOptions& opt,
                          const VerdictSink& sink, const std::atomic<bool>* producer_done) {
    const int n = params.hyper.n;
    DetectStats stats;

    struct FlowBuf {
        std::vector<RingSlot> rows;
        double start_time = 0;
        uint64_t windows_emitted = 0;
    };
    std::unordered_map<uint64_t, FlowBuf> flows;
    std::vector<FlowWindow> pending;
    std::vector<uint64_t> pending_index; // per-flow window index
    std::vector<RingSlot> chunk(4096);

    auto run_batch = [&](size_t count) {
        if (count == 0) return;
        std::vector<FlowWindow> batch(pending.begin(), pending.begin() + count);
        double t0 = steady_seconds();
        auto verdicts = infer_batch(batch, params);
        double latency_us = (steady_seconds() - t0) * 1e6;
        ++stats.batches;
        for (size_t i = 0; i < verdicts.size(); ++i) {
            if (verdicts[i].malicious) ++stats.flagged_malicious;
            ++stats.windows;
            sink(verdicts[i], pending_index[i], latency_us);
        }
        pending.erase(pending.begin(), pending.begin() + count);
        pending_index.erase(pending_index.begin(), pending_index.begin() + count);
    };

    double idle_since = steady_seconds();
    for (;;) {
        size_t got = ring.consume_batch(chunk.data(), chunk.size());
        if (got == 0) {
            bool drained = producer_done && producer_done->load(std::memory_order_acquire) &&
                           ring.read_counter() == ring.write_counter();
            bool idle_expired = steady_seconds() - idle_since > opt.idle_timeout_s;
            if (drained || idle_expired) {
                while (!pending.empty()) run_batch(std::min<size_t>(pending.size(), opt.swarm_batch));
                break;
            }
            std::this_thread::sleep_for(std::chrono::microseconds(opt.poll_us));
            continue;
        }
        idle_since = steady_seconds();
        stats.slots_consumed += got;

        for (size_t i = 0; i < got; ++i) {
            const RingSlot& s = chunk[i];
            FlowBuf& fb = flows[s.flow_id];
            if (fb.rows.empty()) fb.start_time = s.timestamp;
            fb.rows.push_back(s);
            if (static_cast<int>(fb.rows.size()) == n) {
                FlowWindow w;
                w.flow_id = s.flow_id;
                w.start_time = fb.start_time;
                w.label = -1;
                w.data = Mat<float>(n, kDims);
                for (int r = 0; r < n; ++r) {
                    PhysicsVector v;
                    v.size = fb.rows[r].physics[COL_SIZE];
                    v.iat = fb.rows[r].physics[COL_IAT];
                    v.direction = fb.rows[r].physics[COL_DIR];
                    v.window = fb.rows[r].physics[COL_WIN];
                    v.flags = fb.rows[r].physics[COL_FLAGS];
                    v.payload_ratio = fb.rows[r].physics[COL_PAYLOAD];
                    auto norm = normalize(v, params.stats);
                    for (int c = 0; c < kDims; ++c) w.data[r][c] = static_cast<float>(norm[c]);
                }
                pending.push_back(std::move(w));
                pending_index.push_back(fb.windows_emitted++);
                fb.rows.clear();
            }
        }
        while (pending.size() >= static_cast<size_t>(opt.swarm_batch))
            run_batch(opt.swarm_batch);
    }

    for (auto& [key, fb] : flows) stats.residual_rows += fb.rows.size();
    return stats;
}

EvalResult eval_windows(const std::vector<FlowWindow>& windows, const ModelParams<float>& params) {
    if (windows.empty()) throw Error(ErrorCode::InvalidArgument, "eval: no windows");
    EvalResult res;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const FlowWindow& w : windows) {
        if (w.label != 0 && w.label != 1)
            throw Error(ErrorCode::InvalidArgument, "eval: window without label");
        DetectionVerdict v = classify_window(w, params);
        if (w.label == 1)
            (v.malicious ? res.counts.tp : res.counts.fn)++;
        else
            (v.malicious ? res.counts.fp : res.counts.tn)++;
        scores.push_back(v.probability);
        labels.push_back(w.label);
    }
    res.windows = windows.size();
    res.metrics = compute_metrics(res.counts, scores, labels);
    return res;
}

std::vector<StressRow> stress_eval(const std::vector<FlowWindow>& test,
                                   const ModelParams<float>& params,
                                   const std::vector<double>& levels, uint64_t seed) {
    std::vector<StressRow> rows;
    for (double level : levels) {
        NoiseSpec spec;
        spec.level = level;
        spec.seed = seed;
        auto noisy = inject_noise(test, spec);
        EvalResult ev = eval_windows(noisy, params);
        rows.push_back({level, ev.metrics.f1, ev.metrics.tpr, ev.metrics.fpr});
    }
    return rows;
}

CalibrationSummary calibrate_tvd(const std::vector<FlowWindow>& benign_windows,
                                 ModelParams<float>& params, std::optional<double> fp_target) {
    if (benign_windows.empty())
        throw Error(ErrorCode::InvalidArgument, "calibrate-tvd: no benign windows");
    std::vector<double> entropies;
    entropies.reserve(benign_windows.size());
    for (const FlowWindow& w : benign_windows) {
        Mat<float> x = w.data;
        ForwardArtifacts<float> art = forward(x, params);
        if (art.finite) entropies.push_back(art.entropy);
    }
    if (entropies.empty()) throw Error(ErrorCode::InvalidArgument, "calibrate-tvd: no finite entropies");

    CalibrationSummary s;
    s.windows = entropies.size();
    for (double h : entropies) s.mean_entropy += h;
    s.mean_entropy /= static_cast<double>(entropies.size());
    double var = 0;
    for (double h : entropies) var += (h - s.mean_entropy) * (h - s.mean_entropy);
    s.std_entropy = std::sqrt(var / static_cast<double>(entropies.size()));
    s.min_entropy = *std::min_element(entropies.begin(), entropies.end());

    params.tvd.baseline_entropy = s.mean_entropy;
    if (fp_target) {
        std::sort(entropies.begin(), entropies.end());
        size_t idx = static_cast<size_t>(std::floor(*fp_target * entropies.size()));
        idx = std::min(idx, entropies.size() - 1);
        double quantile = entropies[idx];
        params.tvd.tau_threshold = std::max(s.mean_entropy - quantile, 1e-3);
    }
    s.baseline = params.tvd.baseline_entropy;
    s.tau = params.tvd.tau_threshold;
    return s;
}

BenchReport bench_ring(const std::string& ring_path, uint64_t records, uint64_t capacity,
                       int batch, uint64_t seed, int schedules) {
    Ring producer_ring = Ring::create(ring_path, capacity);
    Ring consumer_ring = Ring::open(ring_path);

    std::atomic<uint64_t> would_block{0};
    std::atomic<bool> failed{false};

    const double t0 = steady_seconds();

    std::thread producer([&] {
        uint64_t lcg = seed * 6364136223846793005ull + 1442695040888963407ull;
        uint64_t per_schedule = records / schedules;
        uint64_t published = 0;
        for (int sch = 0; sch < schedules && !failed; ++sch) {
            lcg = lcg * 6364136223846793005ull + 1442695040888963407ull;
            const uint64_t stall_mask = (1ull << (10 + (lcg >> 33) % 6)) - 1; // 1k..32k
            uint64_t target = sch == schedules - 1 ? records : published + per_schedule;
            while (published < target) {
                RingSlot slot;
                slot.flow_id = published;
                slot.timestamp = steady_seconds();
                while (!producer_ring.publish(slot)) {
                    would_block.fetch_add(1, std::memory_order_relaxed);
                    std::this_thread::yield();
                    if (failed) return;
                }
                ++published;
                lcg = lcg * 6364136223846793005ull + 1442695040888963407ull;
                if ((lcg & stall_mask) == 0)
                    std::this_thread::sleep_for(std::chrono::microseconds((lcg >> 40) % 100));
            }
        }
    });

    BenchReport report;
    report.records = records;
    report.schedules = schedules;
    std::vector<RingSlot> buf(batch);
    std::vector<double> latencies;
    latencies.reserve(records / 64 + 1);
    uint64_t expected = 0;
    uint64_t lcg = seed ^ 0x5deece66dull;
    uint64_t consumer_stall_mask = 0x3fff;

    try {
        while (expected < records) {
            size_t got = consumer_ring.consume_batch(buf.data(), batch);
            if (got == 0) {
                std::this_thread::yield();
                continue;
            }
            ++report.batches;
            double now = steady_seconds();
            for (size_t i = 0; i < got; ++i) {
                if (buf[i].sequence != expected || buf[i].flow_id != expected) {
                    failed = true;
                    throw Error(ErrorCode::SequenceGap,
                                "sequence audit failed at " + std::to_string(expected));
                }
                if (expected % 64 == 0) latencies.push_back((now - buf[i].timestamp) * 1e6);
                ++expected;
            }
            lcg = lcg * 6364136223846793005ull + 1442695040888963407ull;
            if ((lcg & consumer_stall_mask) == 0) {
                std::this_thread::sleep_for(std::chrono::microseconds((lcg >> 40) % 100));
                consumer_stall_mask = (1ull << (10 + (lcg >> 33) % 6)) - 1;
            }
        }
    } catch (...) {
        failed = true;
        producer.join();
        throw;
    }
    producer.join();

    report.seconds = steady_seconds() - t0;
    report.records_per_sec = records / report.seconds;
    report.would_block = would_block.load();
    if (!latencies.empty()) {
        std::sort(latencies.begin(), latencies.end());
        auto pct = [&latencies](double q) {
            size_t idx = static_cast<size_t>(q * (latencies.size() - 1));
            return latencies[idx];
        };
        report.p50_us = pct(0.50);
        report.p90_us = pct(0.90);
        report.p99_us = pct(0.99);
        report.max_us = latencies.back();
    }
    return report;
}

} // namespace aegis
