#include "aegis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aegis {

MetricsReport compute_metrics(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0 || c.fp + c.tn == 0)
        throw Error(ErrorCode::DegenerateClass, "compute_metrics: one class is empty");
    MetricsReport r;
    r.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    r.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    r.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    return r;
}

MetricsReport compute_metrics(const ConfusionCounts& c, const std::vector<double>& scores,
                              const std::vector<int>& labels) {
    MetricsReport r = compute_metrics(c);
    if (scores.size() != labels.size() || scores.empty())
        throw Error(ErrorCode::InvalidArgument, "compute_metrics: score/label size mismatch");

    uint64_t pos = 0, neg = 0;
    for (int l : labels) (l == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw Error(ErrorCode::DegenerateClass, "roc needs both classes");

    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });

    // Walk thresholds from +inf down; emit one point per distinct score.
    double auc = 0;
    uint64_t tp = 0, fp = 0;
    double prev_fpr = 0, prev_tpr = 0;
    r.sweep.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    size_t i = 0;
    while (i < order.size()) {
        double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        double tpr = static_cast<double>(tp) / pos;
        double fpr = static_cast<double>(fp) / neg;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        r.sweep.push_back({s, tpr, fpr});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    r.roc_auc = auc;
    return r;
}

} // namespace aegis
