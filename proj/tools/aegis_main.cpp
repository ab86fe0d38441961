// aegis command line: extract, synth, train, eval, detect, stress,
// bench-ring, calibrate-tvd. Exit codes: 0 success, 1 data error, 2 usage.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aegis/checkpoint.hpp"
#include "aegis/harness.hpp"
#include "aegis/trainer.hpp"

using nlohmann::json;

namespace {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw aegis::Error(aegis::ErrorCode::IoFailure, "cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw aegis::Error(aegis::ErrorCode::InvalidArgument, "bad config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::vector<double> parse_levels(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw aegis::Error(aegis::ErrorCode::InvalidArgument, "empty noise list");
    return out;
}

std::ostream& open_sink(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::trunc);
    if (!file) throw aegis::Error(aegis::ErrorCode::IoFailure, "cannot open output: " + path);
    return file;
}

int cmd_extract(const std::string& pcap, const std::string& out, int n) {
    auto res = aegis::extract_windows(pcap, n);
    aegis::write_windows(out, res.file.windows, res.file.stats, n);
    std::printf("packets=%llu skipped_frames=%llu windows=%llu dropped_partials=%llu\n",
                (unsigned long long)res.packets, (unsigned long long)res.skipped_frames,
                (unsigned long long)res.file.windows.size(),
                (unsigned long long)res.totals.dropped_partials);
    return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_prefix, uint64_t seed,
              bool seed_given, const std::string& pcap_prefix) {
    aegis::CorpusConfig cfg =
        config_path.empty() ? aegis::desk_corpus_config() : aegis::parse_corpus_config(config_path);
    if (seed_given) {
        // Re-derive the per-profile seeds from the override.
        if (config_path.empty()) cfg = aegis::desk_corpus_config(seed);
        else cfg.seed = seed;
    }
    auto corpus = aegis::build_corpus(cfg);
    aegis::write_windows(out_prefix + ".train.aegt", corpus.train, corpus.stats, cfg.n);
    aegis::write_windows(out_prefix + ".test.aegt", corpus.test, corpus.stats, cfg.n);
    std::printf("train_windows=%zu test_windows=%zu\n", corpus.train.size(), corpus.test.size());
    for (size_t i = 0; i < cfg.profiles.size(); ++i)
        std::printf("profile=%s label=%d windows=%llu\n",
                    aegis::profile_kind_name(cfg.profiles[i].profile.kind), cfg.profiles[i].label,
                    (unsigned long long)corpus.windows_per_profile[i]);

    if (!pcap_prefix.empty()) {
        for (const auto& spec : cfg.profiles) {
            auto records = aegis::generate(spec.profile, spec.flows, spec.packets_per_flow);
            std::string path = pcap_prefix + "." + aegis::profile_kind_name(spec.profile.kind) + ".pcap";
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            uint64_t bytes = aegis::write_pcap(records, out);
            std::printf("wrote %s (%llu bytes, %zu packets)\n", path.c_str(),
                        (unsigned long long)bytes, records.size());
        }
    }
    return 0;
}

int cmd_train(const std::string& windows_path, const std::string& out,
              const std::string& config_path, uint64_t seed, bool seed_given, int batch,
              bool batch_given) {
    aegis::WindowFile wf = aegis::read_windows(windows_path);

    aegis::Hyper hyper;
    hyper.n = wf.n;
    aegis::TrainConfig cfg;
    if (!config_path.empty()) {
        auto kv = parse_kv_file(config_path);
        auto get = [&kv](const std::string& k, double fb) {
            auto it = kv.find(k);
            return it == kv.end() ? fb : std::stod(it->second);
        };
        hyper.d = static_cast<int>(get("d", hyper.d));
        hyper.d_h = static_cast<int>(get("d_h", hyper.d_h));
        hyper.d_s = static_cast<int>(get("d_s", hyper.d_s));
        cfg.lr = get("lr", cfg.lr);
        cfg.weight_decay = get("weight_decay", cfg.weight_decay);
        cfg.epochs = static_cast<int>(get("epochs", cfg.epochs));
        cfg.batch_size = static_cast<int>(get("batch", cfg.batch_size));
        cfg.focal.gamma = get("focal_gamma", cfg.focal.gamma);
        cfg.focal.alpha = get("focal_alpha", cfg.focal.alpha);
        cfg.seed = static_cast<uint64_t>(get("seed", static_cast<double>(cfg.seed)));
    }
    if (seed_given) cfg.seed = seed;
    if (batch_given) cfg.batch_size = batch;

    auto result = aegis::train(wf.windows, hyper, wf.stats, cfg);
    std::printf("epoch\ttrain_loss\tval_loss\tapplied\tdiscarded\tbaseline_bits\n");
    for (const auto& e : result.epochs)
        std::printf("%d\t%.6f\t%.6f\t%llu\t%llu\t%.4f\n", e.epoch, e.train_loss, e.val_loss,
                    (unsigned long long)e.batches_applied, (unsigned long long)e.batches_discarded,
                    e.baseline_entropy);
    std::printf("best_epoch=%d batches_seen=%llu applied=%llu discarded=%llu\n", result.best_epoch,
                (unsigned long long)result.batches_seen, (unsigned long long)result.batches_applied,
                (unsigned long long)result.batches_discarded);
    aegis::save_checkpoint(out, result.params);
    std::printf("checkpoint=%s\n", out.c_str());
    return 0;
}

int cmd_eval(const std::string& windows_path, const std::string& ckpt, const std::string& out) {
    aegis::WindowFile wf = aegis::read_windows(windows_path);
    auto params = aegis::load_checkpoint(ckpt);
    auto res = aegis::eval_windows(wf.windows, params);

    std::printf("windows\ttp\tfp\ttn\tfn\ttpr\tfpr\tprecision\tf1\troc_auc\n");
    std::printf("%llu\t%llu\t%llu\t%llu\t%llu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n",
                (unsigned long long)res.windows, (unsigned long long)res.counts.tp,
                (unsigned long long)res.counts.fp, (unsigned long long)res.counts.tn,
                (unsigned long long)res.counts.fn, res.metrics.tpr, res.metrics.fpr,
                res.metrics.precision, res.metrics.f1, res.metrics.roc_auc);

    if (!out.empty()) {
        json j;
        j["version"] = 1;
        j["windows"] = res.windows;
        j["counts"] = {{"tp", res.counts.tp}, {"fp", res.counts.fp}, {"tn", res.counts.tn}, {"fn", res.counts.fn}};
        j["metrics"] = {{"tpr", res.metrics.tpr},
                        {"fpr", res.metrics.fpr},
                        {"precision", res.metrics.precision},
                        {"f1", res.metrics.f1},
                        {"roc_auc", res.metrics.roc_auc}};
        json sweep = json::array();
        for (const auto& p : res.metrics.sweep)
            sweep.push_back({{"threshold", std::isinf(p.threshold) ? 1e308 : p.threshold},
                             {"tpr", p.tpr},
                             {"fpr", p.fpr}});
        j["sweep"] = sweep;
        std::ofstream f(out, std::ios::trunc);
        if (!f) throw aegis::Error(aegis::ErrorCode::IoFailure, "cannot open report: " + out);
        f << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_detect(const std::string& ring_path, const std::string& ckpt, const std::string& pcap,
               int batch, const std::string& out, double idle_s) {
    auto params = aegis::load_checkpoint(ckpt);

    aegis::Ring ring = pcap.empty() ? aegis::Ring::open(ring_path)
                                    : aegis::Ring::create(ring_path, 1 << 16);
    // With an internal harvester the stream ends when the replay ends; an
    // attach to an externally fed ring stops only on the idle timeout.
    std::atomic<bool> producer_done{false};
    std::thread replay;
    aegis::ReplayStats rstats;
    if (!pcap.empty()) {
        aegis::Ring producer = aegis::Ring::open(ring_path);
        replay = std::thread([&rstats, &producer_done, pcap, p = std::move(producer)]() mutable {
            rstats = aegis::replay_pcap_to_ring(pcap, p);
            producer_done.store(true, std::memory_order_release);
        });
    }

    std::ofstream file;
    std::ostream& sink = open_sink(file, out);
    aegis::DetectOptions opt;
    opt.swarm_batch = batch;
    opt.idle_timeout_s = idle_s;
    auto stats = aegis::detect_stream(
        ring, params, opt,
        [&sink](const aegis::DetectionVerdict& v, uint64_t idx, double latency_us) {
            sink << v.flow_id << "," << idx << "," << v.probability << "," << v.entropy << ","
                 << (v.tvd_flag ? 1 : 0) << "," << (v.malicious ? "malicious" : "benign") << ","
                 << latency_us << "\n";
        },
        &producer_done);
    if (replay.joinable()) replay.join();

    std::fprintf(stderr,
                 "slots=%llu windows=%llu flagged=%llu batches=%llu residual_rows=%llu "
                 "published=%llu would_block=%llu\n",
                 (unsigned long long)stats.slots_consumed, (unsigned long long)stats.windows,
                 (unsigned long long)stats.flagged_malicious, (unsigned long long)stats.batches,
                 (unsigned long long)stats.residual_rows, (unsigned long long)rstats.published,
                 (unsigned long long)rstats.would_block);
    return 0;
}

int cmd_stress(const std::string& windows_path, const std::string& ckpt, const std::string& noise,
               uint64_t seed, const std::string& out) {
    aegis::WindowFile wf = aegis::read_windows(windows_path);
    auto params = aegis::load_checkpoint(ckpt);
    auto rows = aegis::stress_eval(wf.windows, params, parse_levels(noise), seed);

    std::ofstream file;
    std::ostream& sink = open_sink(file, out);
    sink << "level\tf1\ttpr\tfpr\n";
    for (const auto& r : rows) {
        char line[128];
        std::snprintf(line, sizeof line, "%.2f\t%.6f\t%.6f\t%.6f\n", r.level, r.f1, r.tpr, r.fpr);
        sink << line;
    }
    return 0;
}

int cmd_bench_ring(const std::string& ring_path, uint64_t records, uint64_t capacity, int batch,
                   uint64_t seed, int schedules) {
    std::remove(ring_path.c_str());
    auto report = aegis::bench_ring(ring_path, records, capacity, batch, seed, schedules);
    std::printf("records=%llu seconds=%.3f throughput=%.0f rec/s batches=%llu would_block=%llu\n",
                (unsigned long long)report.records, report.seconds, report.records_per_sec,
                (unsigned long long)report.batches, (unsigned long long)report.would_block);
    std::printf("latency_us p50=%.1f p90=%.1f p99=%.1f max=%.1f (schedules=%d)\n", report.p50_us,
                report.p90_us, report.p99_us, report.max_us, report.schedules);
    std::remove(ring_path.c_str());
    return 0;
}

int cmd_calibrate(const std::string& windows_path, const std::string& ckpt, const std::string& out,
                  double fp_target, bool fp_given) {
    aegis::WindowFile wf = aegis::read_windows(windows_path);
    std::vector<aegis::FlowWindow> benign;
    for (const auto& w : wf.windows)
        if (w.label == 0 || w.label == -1) benign.push_back(w);
    auto params = aegis::load_checkpoint(ckpt);
    auto summary = aegis::calibrate_tvd(
        benign, params, fp_given ? std::optional<double>(fp_target) : std::nullopt);
    aegis::save_checkpoint(out.empty() ? ckpt : out, params);
    std::printf("windows=%llu baseline=%.4f tau=%.4f mean=%.4f std=%.4f min=%.4f\n",
                (unsigned long long)summary.windows, summary.baseline, summary.tau,
                summary.mean_entropy, summary.std_entropy, summary.min_entropy);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"thermodynamic flow-physics anomaly detector"};
    app.require_subcommand(1);

    std::string pcap, windows, checkpoint, ring, config, out, noise = "0,0.05,0.10,0.15";
    int n = 100, batch = 64, schedules = 100;
    uint64_t seed = 42, records = 1000000, capacity = 65536;
    double fp_target = 0.01, idle_s = 2.0;

    auto* extract = app.add_subcommand("extract", "pcap -> window tensors");
    extract->add_option("--pcap", pcap, "input capture")->required();
    extract->add_option("--out", out, "output window file")->required();
    extract->add_option("--n", n, "window length");

    auto* synth = app.add_subcommand("synth", "build the synthetic corpus");
    synth->add_option("--config", config, "corpus config (key=value)");
    synth->add_option("--out", out, "output prefix")->required();
    auto* synth_seed = synth->add_option("--seed", seed, "corpus seed");
    synth->add_option("--pcap", pcap, "also write per-profile pcaps with this prefix");

    auto* train = app.add_subcommand("train", "windows -> checkpoint");
    train->add_option("--windows", windows, "training windows")->required();
    train->add_option("--out", out, "checkpoint path")->required();
    train->add_option("--config", config, "training config (key=value)");
    auto* train_seed = train->add_option("--seed", seed, "training seed");
    auto* train_batch = train->add_option("--batch", batch, "batch size");

    auto* eval = app.add_subcommand("eval", "checkpoint + windows -> metrics");
    eval->add_option("--windows", windows, "labeled windows")->required();
    eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    eval->add_option("--out", out, "machine-readable report (json)");

    auto* detect = app.add_subcommand("detect", "attach to a ring and stream verdicts");
    detect->add_option("--ring", ring, "ring file")->required();
    detect->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    detect->add_option("--pcap", pcap, "replay this capture through an internal harvester");
    detect->add_option("--batch", batch, "swarm batch size");
    detect->add_option("--out", out, "verdict line output (default stdout)");
    detect->add_option("--idle-s", idle_s, "stop after this many idle seconds");

    auto* stress = app.add_subcommand("stress", "noise-stress F1 table");
    stress->add_option("--windows", windows, "labeled test windows")->required();
    stress->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    stress->add_option("--noise", noise, "comma-separated levels");
    stress->add_option("--seed", seed, "noise seed");
    stress->add_option("--out", out, "table output (default stdout)");

    auto* bench = app.add_subcommand("bench-ring", "SPSC ring throughput/latency");
    bench->add_option("--ring", ring, "ring file path")->required();
    bench->add_option("--records", records, "records to transfer");
    bench->add_option("--capacity", capacity, "ring capacity (power of two)");
    bench->add_option("--batch", batch, "consumer batch");
    bench->add_option("--seed", seed, "stall schedule seed");
    bench->add_option("--schedules", schedules, "randomized stall schedules");

    auto* calibrate = app.add_subcommand("calibrate-tvd", "fit entropy baseline on benign windows");
    calibrate->add_option("--windows", windows, "benign windows")->required();
    calibrate->add_option("--checkpoint", checkpoint, "input checkpoint")->required();
    calibrate->add_option("--out", out, "output checkpoint (default: overwrite input)");
    auto* fp_opt = calibrate->add_option("--fp-target", fp_target, "benign flag-rate target for tau");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (extract->parsed()) return cmd_extract(pcap, out, n);
        if (synth->parsed()) return cmd_synth(config, out, seed, synth_seed->count() > 0, pcap);
        if (train->parsed())
            return cmd_train(windows, out, config, seed, train_seed->count() > 0, batch,
                             train_batch->count() > 0);
        if (eval->parsed()) return cmd_eval(windows, checkpoint, out);
        if (detect->parsed()) return cmd_detect(ring, checkpoint, pcap, batch, out, idle_s);
        if (stress->parsed()) return cmd_stress(windows, checkpoint, noise, seed, out);
        if (bench->parsed())
            return cmd_bench_ring(ring, records, capacity, batch, seed, schedules);
        if (calibrate->parsed())
            return cmd_calibrate(windows, checkpoint, out, fp_target, fp_opt->count() > 0);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
