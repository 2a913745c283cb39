#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imputad/core.hpp"
#include "imputad/imputer.hpp"
#include "imputad/masking.hpp"
#include "imputad/parallel.hpp"

namespace imputad {

// Sum over variates of the absolute imputation error at one timestep.
inline double residual_score(std::span<const double> x, std::span<const double> xhat) {
    require(x.size() == xhat.size(), "dimension_mismatch", "residual operands differ in dimension");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(xhat[i] - x[i]);
    return s;
}

// Residual at every timestep of two d x T tensors.
inline std::vector<double> residual_scores(const Tensor& x, const Tensor& xhat) {
    require(x.same_shape(xhat), "dimension_mismatch", "residual operands differ in shape");
    std::vector<double> e(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t t = 0; t < x.cols; ++t) e[t] += std::fabs(xhat(i, t) - x(i, t));
    return e;
}

// Unconstrained dynamic time warping between a (d x m) and b (d x n) with
// L1 local cost. O(m n) time, O(n) memory.
inline double dtw_distance(const Tensor& a, const Tensor& b) {
    require(a.cols >= 1 && b.cols >= 1, "empty_input", "empty sequence");
    require(a.rows == b.rows, "dimension_mismatch", "DTW operands differ in dimension");
    const std::size_t m = a.cols, n = b.cols, d = a.rows;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= m; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= n; ++j) {
            double cost = 0.0;
            for (std::size_t v = 0; v < d; ++v) cost += std::fabs(a(v, i - 1) - b(v, j - 1));
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

inline double calibrate_threshold(std::span<const double> validation_scores) {
    require(!validation_scores.empty(), "empty_input", "empty validation");
    double m = 0.0;
    for (double s : validation_scores) m = std::max(m, s);
    return m;
}

enum class ScoreMode { Point, Sequence };
// Sequence-model scoring: window DTW, or per-timestep residual (ablation).
enum class SequenceScoring { Dtw, Residual };

inline std::string to_string(ScoreMode m) { return m == ScoreMode::Point ? "point" : "sequence"; }

inline ScoreMode parse_mode(const std::string& s) {
    if (s == "point") return ScoreMode::Point;
    if (s == "sequence") return ScoreMode::Sequence;
    fail("bad_mode", "unknown mode '" + s + "' (expected point or sequence)");
}

struct ScoringConfig {
    std::size_t window = 64;   // omega; 0 means "the model's window"
    std::size_t stride = 8;    // mu
    std::size_t point_groups = 8;  // point mode: 1/groups of the timesteps are masked per pass
    std::size_t segments = 8;      // sequence mode: gaps per window reconstruction
    std::size_t refine_passes = 4; // point mode: re-imputations with flagged context replaced
    SequenceScoring sequence_scoring = SequenceScoring::Dtw;
    std::size_t workers = 1;
};

struct AnomalyScoreTrace {
    ScoreMode mode = ScoreMode::Point;
    std::vector<double> point_scores;  // per timestep
    std::vector<Window> windows;       // sequence mode
    std::vector<double> window_scores; // sequence mode
    double threshold = 0.0;
};

// Point-mode inference. Windows of the model's length overlap by half;
// inside a window, timesteps t with t % groups == r are masked on every
// variate in pass r, so each timestep is imputed from its neighbours. A
// timestep takes its imputation from the window where it sits farthest
// from an edge.
inline Tensor reconstruct_points(const Tensor& x, const ImputerModel& model, std::size_t groups,
                                 std::size_t workers = 1) {
    require(model.head() == Head::Reconstruction, "head_mismatch",
            "point scoring requires a reconstruction-head model");
    require(x.rows == model.config().variates, "dimension_mismatch", "series dimension does not match model");
    require(groups >= 1, "bad_config", "point groups must be >= 1");
    const std::size_t len = std::min(model.config().window, x.cols);
    const auto windows = slice_windows(x.cols, len, std::max<std::size_t>(1, len / 2));
    const std::size_t g = std::min(groups, len);

    std::vector<Tensor> preds(windows.size());
    parallel_for(windows.size(), workers, [&](std::size_t w) {
        const Tensor win = x.columns(windows[w].start, windows[w].length);
        Tensor out(win.rows, win.cols);
        for (std::size_t r = 0; r < g; ++r) {
            std::vector<ElementIndex> mask;
            for (std::size_t i = 0; i < win.rows; ++i)
                for (std::size_t t = r; t < win.cols; t += g) mask.push_back(i * win.cols + t);
            std::sort(mask.begin(), mask.end());
            const auto res = impute_points(mask_elements(win, mask), model);
            for (ElementIndex e : mask) out.data[e] = res.imputed.data[e];
        }
        preds[w] = std::move(out);
    });

    Tensor xhat(x.rows, x.cols);
    std::vector<std::ptrdiff_t> best(x.cols, -1);
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& win = windows[w];
        for (std::size_t t = win.start; t <= win.end(); ++t) {
            const auto central = static_cast<std::ptrdiff_t>(std::min(t - win.start, win.end() - t));
            if (central <= best[t]) continue;
            best[t] = central;
            for (std::size_t i = 0; i < x.rows; ++i) xhat(i, t) = preds[w](i, t - win.start);
        }
    }
    return xhat;
}

// With a threshold, timesteps scoring above it are replaced by their
// latest imputations and the series is imputed again, until the flagged set
// settles or the pass budget runs out. A large point anomaly then stops
// distorting its neighbours, while its own score is unaffected because it
// is masked whenever it is imputed.
inline std::vector<double> point_scores(const TimeSeries& x, const ImputerModel& model, const ScoringConfig& cfg,
                                        std::optional<double> threshold = std::nullopt) {
    Tensor xhat = reconstruct_points(x.values(), model, cfg.point_groups, cfg.workers);
    auto e = residual_scores(x.values(), xhat);
    if (!threshold) return e;
    auto flags = [&] {
        std::vector<bool> f(e.size());
        for (std::size_t t = 0; t < e.size(); ++t) f[t] = e[t] > *threshold;
        return f;
    };
    auto flagged = flags();
    for (std::size_t pass = 0; pass < cfg.refine_passes; ++pass) {
        if (std::none_of(flagged.begin(), flagged.end(), [](bool b) { return b; })) break;
        Tensor context = x.values();
        for (std::size_t t = 0; t < x.length(); ++t)
            if (flagged[t])
                for (std::size_t i = 0; i < x.variates(); ++i) context(i, t) = xhat(i, t);
        xhat = reconstruct_points(context, model, cfg.point_groups, cfg.workers);
        e = residual_scores(x.values(), xhat);
        auto next = flags();
        if (next == flagged) break;
        flagged = std::move(next);
    }
    return e;
}

// Sequence-mode reconstruction of one window: it is cut into `segments`
// gaps and each gap is imputed bidirectionally from the rest.
inline Tensor reconstruct_window(const Tensor& window, const ImputerModel& model, std::size_t segments) {
    require(model.head() == Head::Bidirectional, "head_mismatch",
            "sequence scoring requires a bidirectional-head model");
    require(window.rows == model.config().variates, "dimension_mismatch", "series dimension does not match model");
    const std::size_t n = std::min(std::max<std::size_t>(segments, 2), window.cols);
    require(n >= 2, "no_context", "no context");
    Tensor xhat = window;
    for (const auto& s : materialize_samples(window, make_sequence_masks(window.cols, n))) {
        const auto res = impute_sequence(s, model);
        for (ElementIndex e : s.mask) xhat.data[e] = res.imputed.data[e];
    }
    return xhat;
}

// Caches window reconstructions of one series by window start.
class WindowScorer {
public:
    WindowScorer(const TimeSeries& x, const ImputerModel& model, const ScoringConfig& cfg)
        : x_(x), model_(model), cfg_(cfg), length_(std::min(effective_window(model, cfg), x.length())) {}

    static std::size_t effective_window(const ImputerModel& model, const ScoringConfig& cfg) {
        return cfg.window == 0 ? model.config().window : cfg.window;
    }

    std::size_t window_length() const noexcept { return length_; }

    const Tensor& reconstruction(std::size_t start) {
        auto it = cache_.find(start);
        if (it != cache_.end()) return it->second;
        const Tensor win = x_.values().columns(start, length_);
        return cache_.emplace(start, reconstruct_window(win, model_, cfg_.segments)).first->second;
    }

    // Fills the cache for many windows at once.
    void prefetch(const std::vector<std::size_t>& starts) {
        std::vector<std::size_t> todo;
        for (auto s : starts)
            if (!cache_.count(s)) todo.push_back(s);
        std::vector<Tensor> out(todo.size());
        parallel_for(todo.size(), cfg_.workers, [&](std::size_t i) {
            out[i] = reconstruct_window(x_.values().columns(todo[i], length_), model_, cfg_.segments);
        });
        for (std::size_t i = 0; i < todo.size(); ++i) cache_.emplace(todo[i], std::move(out[i]));
    }

    double dtw(std::size_t start) {
        return dtw_distance(x_.values().columns(start, length_), reconstruction(start));
    }

    // Per-timestep residual where every timestep uses the window (among
    // `starts`) in which it is most central.
    std::vector<double> residuals(const std::vector<std::size_t>& starts) {
        prefetch(starts);
        std::vector<double> e(x_.length(), 0.0);
        std::vector<std::ptrdiff_t> best(x_.length(), -1);
        for (auto s : starts) {
            const Tensor& rec = reconstruction(s);
            for (std::size_t t = s; t < s + length_; ++t) {
                const auto central = static_cast<std::ptrdiff_t>(std::min(t - s, s + length_ - 1 - t));
                if (central <= best[t]) continue;
                best[t] = central;
                double r = 0.0;
                for (std::size_t i = 0; i < x_.variates(); ++i) r += std::fabs(rec(i, t - s) - x_(i, t));
                e[t] = r;
            }
        }
        return e;
    }

private:
    const TimeSeries& x_;
    const ImputerModel& model_;
    ScoringConfig cfg_;
    std::size_t length_;
    std::map<std::size_t, Tensor> cache_;
};

inline std::vector<std::size_t> window_starts(const std::vector<Window>& windows) {
    std::vector<std::size_t> s;
    for (const auto& w : windows) s.push_back(w.start);
    return s;
}

// Scores used for threshold calibration on one (anomaly-free) series.
inline std::vector<double> calibration_scores(const TimeSeries& x, const ImputerModel& model,
                                              const ScoringConfig& cfg) {
    if (model.head() == Head::Reconstruction) return point_scores(x, model, cfg);
    WindowScorer scorer(x, model, cfg);
    const auto windows = slice_windows(x.length(), scorer.window_length(),
                                       std::min(cfg.stride, scorer.window_length()));
    const auto starts = window_starts(windows);
    if (cfg.sequence_scoring == SequenceScoring::Residual) return scorer.residuals(starts);
    scorer.prefetch(starts);
    std::vector<double> scores;
    for (auto s : starts) scores.push_back(scorer.dtw(s));
    return scores;
}

// Threshold = largest anomaly score over the validation series.
inline double calibrate_threshold(const ImputerModel& model, const std::vector<TimeSeries>& validation,
                                  const ScoringConfig& cfg) {
    require(!validation.empty(), "empty_input", "empty validation");
    std::vector<double> all;
    for (const auto& v : validation) {
        auto s = calibration_scores(v, model, cfg);
        all.insert(all.end(), s.begin(), s.end());
    }
    return calibrate_threshold(all);
}

}  // namespace imputad
