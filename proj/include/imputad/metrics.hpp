#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "imputad/core.hpp"

namespace imputad {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline ConfusionCounts confusion(const Labels& pred, const Labels& truth) {
    require(pred.size() == truth.size(), "length_mismatch", "prediction and truth lengths differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && truth[i]) ++c.tp;
        else if (pred[i]) ++c.fp;
        else if (truth[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// Zero denominators yield 0.
inline PrecisionRecall prf(std::size_t tp, std::size_t fp, std::size_t fn) {
    PrecisionRecall r;
    r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

inline PrecisionRecall prf(const ConfusionCounts& c) { return prf(c.tp, c.fp, c.fn); }

inline PrecisionRecall point_prf(const Labels& pred, const Labels& truth) { return prf(confusion(pred, truth)); }

// Any detection inside a true segment marks the whole segment detected.
// Only used for comparability with methods that report it.
inline Labels point_adjust(const Labels& pred, const Labels& truth) {
    require(pred.size() == truth.size(), "length_mismatch", "prediction and truth lengths differ");
    Labels out = pred;
    for (const auto& iv : labels_to_intervals(truth)) {
        bool hit = false;
        for (std::size_t t = iv.start; t <= iv.end && !hit; ++t) hit = pred[t] != 0;
        if (hit)
            for (std::size_t t = iv.start; t <= iv.end; ++t) out[t] = 1;
    }
    return out;
}

// Event-level matching: a true interval is recalled if any detection
// overlaps it; a detection is precise if it overlaps any true interval.
struct IntervalMatch {
    std::size_t true_count = 0, detected_count = 0;
    std::size_t recalled = 0, precise = 0;

    double recall() const { return true_count == 0 ? 0.0 : static_cast<double>(recalled) / static_cast<double>(true_count); }
    double precision() const {
        return detected_count == 0 ? 0.0 : static_cast<double>(precise) / static_cast<double>(detected_count);
    }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

inline IntervalMatch match_intervals(const std::vector<AnomalyInterval>& detected,
                                     const std::vector<AnomalyInterval>& truth) {
    IntervalMatch m{truth.size(), detected.size(), 0, 0};
    for (const auto& t : truth)
        m.recalled += std::any_of(detected.begin(), detected.end(), [&](const auto& d) { return d.overlaps(t); });
    for (const auto& d : detected)
        m.precise += std::any_of(truth.begin(), truth.end(), [&](const auto& t) { return d.overlaps(t); });
    return m;
}

namespace detail {

// Indices sorted by descending score; equal scores stay adjacent.
inline std::vector<std::size_t> descending(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    return idx;
}

inline std::pair<std::size_t, std::size_t> class_counts(const std::vector<double>& scores, const Labels& truth) {
    require(scores.size() == truth.size(), "length_mismatch", "score and truth lengths differ");
    const auto pos = static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](auto l) { return l != 0; }));
    return {pos, truth.size() - pos};
}

}  // namespace detail

// Area under the ROC curve: thresholds sweep the distinct scores from high
// to low (ties form one step) and the curve is integrated by trapezoids.
inline double auroc(const std::vector<double>& scores, const Labels& truth) {
    const auto [pos, neg] = detail::class_counts(scores, truth);
    require(pos > 0 && neg > 0, "degenerate_labels", "degenerate labels");
    const auto idx = detail::descending(scores);
    double area = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < idx.size();) {
        const std::size_t tp0 = tp, fp0 = fp;
        const double s = scores[idx[k]];
        for (; k < idx.size() && scores[idx[k]] == s; ++k) (truth[idx[k]] ? tp : fp)++;
        area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) / 2.0;
    }
    return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Average precision: sum over threshold steps of (recall gain) x precision.
inline double auprc(const std::vector<double>& scores, const Labels& truth) {
    const auto [pos, neg] = detail::class_counts(scores, truth);
    (void)neg;
    require(pos > 0, "degenerate_labels", "no positive labels");
    const auto idx = detail::descending(scores);
    double ap = 0.0;
    std::size_t tp = 0, seen = 0;
    for (std::size_t k = 0; k < idx.size();) {
        const std::size_t tp0 = tp;
        const double s = scores[idx[k]];
        for (; k < idx.size() && scores[idx[k]] == s; ++k, ++seen) tp += truth[idx[k]] ? 1 : 0;
        ap += static_cast<double>(tp - tp0) / static_cast<double>(pos) * static_cast<double>(tp) /
              static_cast<double>(seen);
    }
    return ap;
}

}  // namespace imputad
