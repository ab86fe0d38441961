#pragma once

#include <cstdint>
#include <vector>

#include "aegis/errors.hpp"

namespace aegis {

struct ConfusionCounts {
    uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    uint64_t total() const { return tp + fp + tn + fn; }
};

struct RocPoint {
    double threshold = 0;
    double tpr = 0;
    double fpr = 0;
};

struct MetricsReport {
    double tpr = 0;
    double fpr = 0;
    double precision = 0;
    double f1 = 0;
    double roc_auc = 0; // 0 when no score list was provided
    std::vector<RocPoint> sweep;
};

/// tpr = tp/(tp+fn), fpr = fp/(fp+tn), f1 = 2tp/(2tp+fp+fn).
/// Throws DegenerateClass when either class is empty.
MetricsReport compute_metrics(const ConfusionCounts& c);

/// Same, plus trapezoid ROC-AUC and the threshold sweep from per-sample
/// scores (higher = more malicious) and 0/1 labels.
MetricsReport compute_metrics(const ConfusionCounts& c, const std::vector<double>& scores,
                              const std::vector<int>& labels);

} // namespace aegis
