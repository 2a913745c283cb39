#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <vector>

#include "imputad/core.hpp"
#include "imputad/imputer.hpp"
#include "imputad/scoring.hpp"

namespace imputad {

struct DetectionConfig {
    ScoringConfig scoring;
    bool localization = true;  // false: flagged windows are reported whole
};

// Shift scan around a change in window state. `previous_start` and
// `active_start` are consecutive scan windows (Delta = active - previous
// <= stride). For a start search shift_scores[i-1] is the score of the
// window starting at previous_start + i; for an end search it is the score
// of the window starting at active_start - i; i = 1 .. Delta-1.
struct LocalizationState {
    std::size_t previous_start = 0;
    std::size_t active_start = 0;
    std::size_t window = 0;
    std::vector<double> shift_scores;
    bool anomaly_flag = false;

    std::size_t delta() const noexcept { return active_start - previous_start; }
};

inline LocalizationState scan_start(const std::function<double(std::size_t)>& score, std::size_t previous_start,
                                    std::size_t active_start, std::size_t window) {
    require(active_start > previous_start, "bad_state", "active window must follow the previous window");
    LocalizationState st{previous_start, active_start, window, {}, false};
    for (std::size_t i = 1; i < st.delta(); ++i) st.shift_scores.push_back(score(previous_start + i));
    return st;
}

inline LocalizationState scan_end(const std::function<double(std::size_t)>& score, std::size_t previous_start,
                                  std::size_t active_start, std::size_t window) {
    require(active_start > previous_start, "bad_state", "active window must follow the previous window");
    LocalizationState st{previous_start, active_start, window, {}, true};
    for (std::size_t i = 1; i < st.delta(); ++i) st.shift_scores.push_back(score(active_start - i));
    return st;
}

// The previous window is clean and the active one is not, so the start lies
// in the stripe of elements the active window added. Take the largest shift
// whose window is still clean; the start is the element right after it.
// With no clean shift the start is the first stripe element.
inline std::size_t localize_start(const LocalizationState& st, double threshold) {
    std::size_t best = 0;
    for (std::size_t i = 1; i <= st.shift_scores.size(); ++i)
        if (st.shift_scores[i - 1] <= threshold) best = i;
    return st.previous_start + st.window + best;
}

// The previous window is anomalous and the active one clean, so the end lies
// in the stripe of elements that left the window. Walk back from the clean
// window; the first shift that turns anomalous exposes the last anomalous
// element. With none, the end is the first stripe element.
inline std::size_t localize_end(const LocalizationState& st, double threshold) {
    for (std::size_t i = 1; i <= st.shift_scores.size(); ++i)
        if (st.shift_scores[i - 1] > threshold) return st.active_start - i;
    return st.previous_start;
}

// Sorts and merges intervals that overlap, touch, or leave a gap shorter
// than `min_gap` timesteps.
inline std::vector<AnomalyInterval> merge_intervals(std::vector<AnomalyInterval> v, std::size_t min_gap,
                                                    std::vector<double>* peaks = nullptr) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a].start < v[b].start; });
    std::vector<AnomalyInterval> out;
    std::vector<double> out_peaks;
    for (auto i : order) {
        const double p = peaks ? (*peaks)[i] : 0.0;
        if (!out.empty() && v[i].start <= out.back().end + std::max<std::size_t>(min_gap, 1)) {
            out.back().end = std::max(out.back().end, v[i].end);
            out_peaks.back() = std::max(out_peaks.back(), p);
        } else {
            out.push_back(v[i]);
            out_peaks.push_back(p);
        }
    }
    if (peaks) *peaks = std::move(out_peaks);
    return out;
}

struct DetectionResult {
    std::vector<AnomalyInterval> intervals;
    std::vector<double> peak_scores;  // aligned with intervals
    AnomalyScoreTrace trace;
    std::vector<LocalizationState> localizations;
};

inline DetectionResult flag_points(const std::vector<double>& scores, double threshold) {
    DetectionResult r;
    r.trace.mode = ScoreMode::Point;
    r.trace.point_scores = scores;
    r.trace.threshold = threshold;
    for (std::size_t t = 0; t < scores.size(); ++t)
        if (scores[t] > threshold) {
            r.intervals.push_back({t, t});
            r.peak_scores.push_back(scores[t]);
        }
    return r;
}

// Point anomalies: timesteps whose residual exceeds the threshold.
inline DetectionResult detect_points(const TimeSeries& x, const ImputerModel& model, double threshold,
                                     const ScoringConfig& cfg = {}) {
    require(model.head() == Head::Reconstruction, "head_mismatch",
            "point detection requires a reconstruction-head model");
    return flag_points(point_scores(x, model, cfg, threshold), threshold);
}

// Window-state machine over precomputed window scores. `score` evaluates
// arbitrary window starts for the shift scans.
inline DetectionResult detect_from_window_scores(std::size_t series_length, const std::vector<Window>& windows,
                                                 const std::vector<double>& scores,
                                                 const std::function<double(std::size_t)>& score,
                                                 double threshold, std::size_t stride, bool localization) {
    DetectionResult r;
    r.trace.mode = ScoreMode::Sequence;
    r.trace.windows = windows;
    r.trace.window_scores = scores;
    r.trace.threshold = threshold;
    std::vector<AnomalyInterval> found;
    std::vector<double> peaks;

    if (!localization) {
        for (std::size_t k = 0; k < windows.size(); ++k)
            if (scores[k] > threshold) {
                found.push_back({windows[k].start, windows[k].end()});
                peaks.push_back(scores[k]);
            }
        r.intervals = merge_intervals(std::move(found), 0, &peaks);
        r.peak_scores = std::move(peaks);
        return r;
    }

    const std::size_t len = windows.front().length;
    bool flag = false;
    std::size_t start = 0;
    double peak = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const bool anomalous = scores[k] > threshold;
        if (!flag && anomalous) {
            if (k == 0) {
                start = windows[0].start;
            } else {
                auto st = scan_start(score, windows[k - 1].start, windows[k].start, len);
                start = localize_start(st, threshold);
                st.anomaly_flag = true;
                r.localizations.push_back(std::move(st));
            }
            flag = true;
            peak = scores[k];
        } else if (flag && anomalous) {
            peak = std::max(peak, scores[k]);
        } else if (flag && !anomalous) {
            auto st = scan_end(score, windows[k - 1].start, windows[k].start, len);
            const std::size_t end = std::max(localize_end(st, threshold), start);
            st.anomaly_flag = false;
            r.localizations.push_back(std::move(st));
            found.push_back({start, end});
            peaks.push_back(peak);
            flag = false;
        }
    }
    if (flag) {
        found.push_back({start, series_length - 1});
        peaks.push_back(peak);
    }
    r.intervals = merge_intervals(std::move(found), stride, &peaks);
    r.peak_scores = std::move(peaks);
    return r;
}

// Sequence anomalies from the bidirectional model: windows of length omega
// slide by mu, each is scored by DTW between the window and its
// reconstruction, and threshold crossings are localized to single steps.
inline DetectionResult detect_sequences(const TimeSeries& x, const ImputerModel& model, double threshold,
                                        const DetectionConfig& cfg = {}) {
    require(model.head() == Head::Bidirectional, "head_mismatch",
            "sequence detection requires a bidirectional-head model");
    WindowScorer scorer(x, model, cfg.scoring);
    const std::size_t len = scorer.window_length();
    const std::size_t stride = std::min(std::max<std::size_t>(cfg.scoring.stride, 1), len);
    const auto windows = slice_windows(x.length(), len, stride);
    const auto starts = window_starts(windows);

    if (cfg.scoring.sequence_scoring == SequenceScoring::Residual) {
        auto r = flag_points(scorer.residuals(starts), threshold);
        r.trace.mode = ScoreMode::Sequence;
        r.intervals = merge_intervals(std::move(r.intervals), 0, &r.peak_scores);
        return r;
    }

    scorer.prefetch(starts);
    std::vector<double> scores;
    scores.reserve(starts.size());
    for (auto s : starts) scores.push_back(scorer.dtw(s));
    return detect_from_window_scores(x.length(), windows, scores, [&](std::size_t s) { return scorer.dtw(s); },
                                     threshold, stride, cfg.localization);
}

}  // namespace imputad
