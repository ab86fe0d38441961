#pragma once

#include <cmath>

#include "aegis/dynamics.hpp"
#include "aegis/errors.hpp"
#include "aegis/linalg.hpp"

namespace aegis {

/// Thermodynamic variance detection settings. Entropies are in bits on the
/// position-softmax scale, so baseline lives in [0, log2 N].
struct TvdConfig {
    double baseline_entropy = 0.0;
    double tau_threshold = 0.12;
    double lambda = 0.1;
};

struct TvdResult {
    double entropy = 0.0; // bits
    double score = 0.0;   // baseline - entropy
    bool anomaly = false; // Class-1 flag
};

/// Max-shifted softmax across positions; sums to 1 and never overflows.
template <typename S>
Vec<S> position_softmax(const Vec<S>& scores) {
    Vec<S> p(scores.size());
    S mx = scores[0];
    for (S s : scores)
        if (s > mx) mx = s;
    S sum = S(0);
    for (size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - mx);
        sum += p[i];
    }
    S inv = S(1) / sum;
    for (auto& v : p) v *= inv;
    return p;
}

/// Shannon entropy in bits with 0 log 0 := 0. Throws NotADistribution when
/// the input has negative mass or does not sum to 1 within 1e-9.
template <typename S>
double shannon_entropy(const Vec<S>& p) {
    double sum = 0;
    for (S v : p) {
        if (v < S(0)) throw Error(ErrorCode::NotADistribution, "negative probability");
        sum += static_cast<double>(v);
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::NotADistribution, "probabilities do not sum to 1");
    double h = 0;
    for (S v : p)
        if (v > S(0)) h -= static_cast<double>(v) * std::log2(static_cast<double>(v));
    return h;
}

/// Class-1 rule: anomaly iff H < baseline - tau (strict).
inline TvdResult classify_entropy(double entropy_bits, const TvdConfig& cfg) {
    TvdResult r;
    r.entropy = entropy_bits;
    r.score = cfg.baseline_entropy - entropy_bits;
    r.anomaly = entropy_bits < cfg.baseline_entropy - cfg.tau_threshold;
    return r;
}

template <typename S>
TvdResult detect(const HiddenTrajectory<S>& traj, const TvdConfig& cfg) {
    Vec<double> scores(traj.scores.begin(), traj.scores.end());
    return classify_entropy(shannon_entropy(position_softmax(scores)), cfg);
}

/// Auxiliary training signal, scoped to benign-labeled samples:
/// lambda * baseline - H. Malicious samples contribute 0.
inline double thermo_loss(double entropy_bits, int label, const TvdConfig& cfg) {
    if (label != 0) return 0.0;
    return cfg.lambda * cfg.baseline_entropy - entropy_bits;
}

/// EMA update of the benign-entropy baseline. An empty batch leaves the
/// running value unchanged.
inline double update_baseline(double running, const std::vector<double>& batch_benign_entropies,
                              double momentum = 0.99) {
    if (batch_benign_entropies.empty()) return running;
    double mean = 0;
    for (double h : batch_benign_entropies) mean += h;
    mean /= static_cast<double>(batch_benign_entropies.size());
    return running * momentum + mean * (1.0 - momentum);
}

} // namespace aegis
