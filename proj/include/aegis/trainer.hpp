#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "aegis/model.hpp"

namespace aegis {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int batch_size = 32;
    int epochs = 10;
    FocalConfig focal;                 // gamma 2.0, alpha 0.75
    double sampler_benign_frac = 0.54; // expected benign share per batch
    double baseline_momentum = 0.99;
    double val_fraction = 0.10;
    uint64_t seed = 42;
};

/// Decoupled-weight-decay Adam over the flattened tensor list.
template <typename S>
class AdamW {
public:
    AdamW(ModelParams<S>& params, double lr, double weight_decay)
        : lr_(lr), wd_(weight_decay) {
        params.visit([this](const typename ModelParams<S>::TensorRef& t) {
            m_.emplace_back(t.count, S(0));
            v_.emplace_back(t.count, S(0));
        });
    }

    void step(ModelParams<S>& params, ModelParams<S>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        size_t gi = 0;
        std::vector<S*> gptrs;
        grads.visit([&gptrs](const typename ModelParams<S>::TensorRef& t) { gptrs.push_back(t.data); });
        params.visit([&](const typename ModelParams<S>::TensorRef& t) {
            S* g = gptrs[gi];
            Vec<S>& m = m_[gi];
            Vec<S>& v = v_[gi];
            for (size_t i = 0; i < t.count; ++i) {
                m[i] = S(beta1_) * m[i] + S(1.0 - beta1_) * g[i];
                v[i] = S(beta2_) * v[i] + S(1.0 - beta2_) * g[i] * g[i];
                S mhat = m[i] / S(bc1);
                S vhat = v[i] / S(bc2);
                t.data[i] -= S(lr_) * mhat / (std::sqrt(vhat) + S(eps_)) + S(lr_ * wd_) * t.data[i];
            }
            ++gi;
        });

        // Keep the stability invariants after the unconstrained update.
        for (auto& a : params.ssm.a_diag.a)
            if (a > S(-1e-4)) a = S(-1e-4);
        for (auto& t : params.ltc.tau_theta)
            if (t < S(kTauFloor)) t = S(kTauFloor);
    }

private:
    double lr_, wd_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
    std::vector<Vec<S>> m_, v_;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    uint64_t batches_applied = 0;
    uint64_t batches_discarded = 0;
    double baseline_entropy = 0;
};

struct TrainResult {
    ModelParams<float> params; // best-validation snapshot
    std::vector<EpochStats> epochs;
    int best_epoch = 0;
    uint64_t batches_seen = 0;
    uint64_t batches_applied = 0;
    uint64_t batches_discarded = 0;
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

template <typename S>
double dataset_loss(const std::vector<const FlowWindow*>& set, const ModelParams<S>& mp,
                    const FocalConfig& fc) {
    double focal_sum = 0, thermo_sum = 0;
    int n_benign = 0;
    size_t counted = 0;
    for (const FlowWindow* w : set) {
        Mat<S> x(w->data.rows, w->data.cols);
        for (size_t i = 0; i < w->data.a.size(); ++i) x.a[i] = static_cast<S>(w->data.a[i]);
        ForwardArtifacts<S> art;
        try {
            art = forward(x, mp);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFiniteInput) throw;
            continue; // corrupted window: skip, mirroring the batch discard rule
        }
        if (!art.finite) continue;
        ++counted;
        focal_sum += static_cast<double>(focal_loss(art.probability, w->label, fc.gamma, fc.alpha));
        if (w->label == 0) {
            thermo_sum += thermo_loss(art.entropy, 0, mp.tvd);
            ++n_benign;
        }
    }
    if (counted == 0) return std::numeric_limits<double>::infinity();
    double loss = focal_sum / static_cast<double>(counted);
    if (n_benign > 0) loss += thermo_sum / n_benign;
    return loss;
}

} // namespace detail

/// Train on labeled windows: AdamW updates, 54/46 weighted sampling with
/// replacement, discard (and count) batches with non-finite loss or gradient,
/// per-batch benign-entropy EMA, and best-checkpoint selection on a stratified
/// 10% validation split. Deterministic for a fixed seed and dataset.
inline TrainResult train(const std::vector<FlowWindow>& dataset, const Hyper& hyper,
                         const NormStats& stats, const TrainConfig& cfg) {
    std::vector<int> benign_idx, malicious_idx;
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].label == 0) benign_idx.push_back(static_cast<int>(i));
        else if (dataset[i].label == 1) malicious_idx.push_back(static_cast<int>(i));
    }
    if (benign_idx.empty() || malicious_idx.empty())
        throw Error(ErrorCode::SingleClassDataset, "training needs both classes");

    std::mt19937_64 rng(detail::splitmix64(cfg.seed));

    // Stratified validation split.
    std::vector<const FlowWindow*> val;
    std::vector<int> train_benign, train_malicious;
    auto split = [&](std::vector<int>& idx, std::vector<int>& train_out) {
        std::shuffle(idx.begin(), idx.end(), rng);
        size_t n_val = static_cast<size_t>(std::llround(cfg.val_fraction * idx.size()));
        n_val = std::min(n_val, idx.size() > 1 ? idx.size() - 1 : size_t(0));
        for (size_t i = 0; i < idx.size(); ++i) {
            if (i < n_val) val.push_back(&dataset[idx[i]]);
            else train_out.push_back(idx[i]);
        }
    };
    split(benign_idx, train_benign);
    split(malicious_idx, train_malicious);
    const size_t train_size = train_benign.size() + train_malicious.size();

    ModelParams<float> params = ModelParams<float>::init(hyper, cfg.seed);
    params.stats = stats;
    AdamW<float> opt(params, cfg.lr, cfg.weight_decay);

    TrainResult result;
    result.params = params;
    double best_val = std::numeric_limits<double>::infinity();

    ModelParams<float> grads = ModelParams<float>::zeros(hyper);
    const int batches_per_epoch =
        static_cast<int>((train_size + cfg.batch_size - 1) / cfg.batch_size);
    std::bernoulli_distribution pick_benign(cfg.sampler_benign_frac);

    Mat<float> x;
    ForwardCache<float> tape;
    std::vector<int> batch;
    std::vector<ForwardArtifacts<float>> arts;
    std::vector<double> benign_entropies;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0;
        uint64_t applied = 0, discarded = 0;

        for (int bi = 0; bi < batches_per_epoch; ++bi) {
            ++result.batches_seen;
            batch.clear();
            for (int s = 0; s < cfg.batch_size; ++s) {
                if (pick_benign(rng)) {
                    std::uniform_int_distribution<size_t> d(0, train_benign.size() - 1);
                    batch.push_back(train_benign[d(rng)]);
                } else {
                    std::uniform_int_distribution<size_t> d(0, train_malicious.size() - 1);
                    batch.push_back(train_malicious[d(rng)]);
                }
            }

            int n_benign = 0;
            for (int idx : batch)
                if (dataset[idx].label == 0) ++n_benign;

            grads.visit([](const ModelParams<float>::TensorRef& t) {
                std::fill(t.data, t.data + t.count, 0.f);
            });

            double batch_loss = 0;
            benign_entropies.clear();
            bool corrupted = false;
            arts.clear();

            try {
                for (int idx : batch) {
                    const FlowWindow& w = dataset[idx];
                    x = w.data;
                    ForwardArtifacts<float> art = forward(x, params, &tape);
                    if (!art.finite) {
                        corrupted = true;
                        break;
                    }
                    const float focal_w = 1.0f / static_cast<float>(cfg.batch_size);
                    const float thermo_w =
                        (w.label == 0 && n_benign > 0) ? 1.0f / static_cast<float>(n_benign) : 0.0f;
                    batch_loss +=
                        focal_loss(art.probability, w.label, cfg.focal.gamma, cfg.focal.alpha) *
                            focal_w +
                        thermo_loss(art.entropy, w.label, params.tvd) * thermo_w;
                    backward(x, w.label, params, art, tape, cfg.focal, focal_w, thermo_w, grads);
                    if (w.label == 0) benign_entropies.push_back(art.entropy);
                }
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonFiniteInput) throw;
                corrupted = true;
            }

            if (!corrupted) {
                bool grads_finite = std::isfinite(batch_loss);
                grads.visit([&grads_finite](const ModelParams<float>::TensorRef& t) {
                    if (grads_finite && !all_finite(t.data, t.count)) grads_finite = false;
                });
                corrupted = !grads_finite;
            }

            if (corrupted) {
                ++discarded;
                ++result.batches_discarded;
                continue;
            }

            opt.step(params, grads);
            params.tvd.baseline_entropy = update_baseline(params.tvd.baseline_entropy,
                                                          benign_entropies, cfg.baseline_momentum);
            epoch_loss += batch_loss;
            ++applied;
            ++result.batches_applied;
        }

        std::vector<const FlowWindow*> val_set = val;
        if (val_set.empty())
            for (int idx : train_benign) val_set.push_back(&dataset[idx]); // degenerate fallback
        double val_loss = detail::dataset_loss(val_set, params, cfg.focal);

        EpochStats es;
        es.epoch = epoch;
        es.train_loss = applied > 0 ? epoch_loss / applied : 0.0;
        es.val_loss = val_loss;
        es.batches_applied = applied;
        es.batches_discarded = discarded;
        es.baseline_entropy = params.tvd.baseline_entropy;
        result.epochs.push_back(es);

        if (val_loss < best_val) {
            best_val = val_loss;
            result.params = params;
            result.best_epoch = epoch;
        }
    }
    return result;
}

} // namespace aegis
