#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "imputad/error.hpp"
#include "imputad/tensor.hpp"

namespace imputad {

using Labels = std::vector<std::uint8_t>;

// A d-variate series of length T. Values are stored as a d x T tensor.
class TimeSeries {
public:
    TimeSeries() = default;

    TimeSeries(Tensor values, std::optional<Labels> labels = std::nullopt, std::string id = {})
        : values_(std::move(values)), labels_(std::move(labels)), id_(std::move(id)) {
        require(values_.rows >= 1 && values_.cols >= 1, "empty_input", "empty input");
        for (double v : values_.data)
            require(std::isfinite(v), "non_finite", "time series contains a non-finite value");
        if (labels_) {
            require(labels_->size() == values_.cols, "shape_mismatch",
                    "label count does not match series length");
            for (auto l : *labels_) require(l <= 1, "bad_label", "labels must be 0 or 1");
        }
    }

    std::size_t variates() const noexcept { return values_.rows; }
    std::size_t length() const noexcept { return values_.cols; }
    const Tensor& values() const noexcept { return values_; }
    const std::optional<Labels>& labels() const noexcept { return labels_; }
    const std::string& id() const noexcept { return id_; }
    double operator()(std::size_t variate, std::size_t t) const { return values_(variate, t); }

    // Contiguous sub-series [start, start + count), labels included.
    TimeSeries slice(std::size_t start, std::size_t count) const {
        require(start + count <= length() && count >= 1, "out_of_range", "slice exceeds series");
        std::optional<Labels> l;
        if (labels_) l = Labels(labels_->begin() + start, labels_->begin() + start + count);
        return TimeSeries(values_.columns(start, count), std::move(l), id_);
    }

private:
    Tensor values_;
    std::optional<Labels> labels_;
    std::string id_;
};

// Inclusive [start, end] span of timesteps.
struct AnomalyInterval {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - start + 1; }
    bool contains(std::size_t t) const noexcept { return t >= start && t <= end; }
    bool overlaps(const AnomalyInterval& o) const noexcept { return start <= o.end && o.start <= end; }
    friend bool operator==(const AnomalyInterval&, const AnomalyInterval&) = default;
};

inline Labels intervals_to_labels(const std::vector<AnomalyInterval>& intervals, std::size_t length) {
    Labels out(length, 0);
    for (const auto& iv : intervals) {
        require(iv.start <= iv.end && iv.end < length, "out_of_range", "interval outside series");
        for (std::size_t t = iv.start; t <= iv.end; ++t) out[t] = 1;
    }
    return out;
}

// Maximal runs of ones.
inline std::vector<AnomalyInterval> labels_to_intervals(const Labels& labels) {
    std::vector<AnomalyInterval> out;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (!labels[t]) continue;
        if (!out.empty() && out.back().end + 1 == t)
            out.back().end = t;
        else
            out.push_back({t, t});
    }
    return out;
}

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    std::size_t variates() const noexcept { return mean.size(); }
};

inline constexpr double kMinStddev = 1e-8;

inline NormalizationStats fit_normalizer(const TimeSeries& train) {
    require(train.length() >= 1 && train.variates() >= 1, "empty_input", "empty input");
    const auto d = train.variates();
    const auto n = static_cast<double>(train.length());
    NormalizationStats stats{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (std::size_t i = 0; i < d; ++i) {
        double sum = 0.0;
        for (double v : train.values().row(i)) sum += v;
        const double mean = sum / n;
        double ss = 0.0;
        for (double v : train.values().row(i)) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / n);
        stats.mean[i] = mean;
        stats.stddev[i] = sd < kMinStddev ? 1.0 : sd;
    }
    return stats;
}

namespace detail {
template <typename F>
TimeSeries map_variates(const TimeSeries& x, const NormalizationStats& stats, F&& f) {
    require(x.variates() == stats.variates(), "dimension_mismatch",
            "normalization stats do not match series dimension");
    Tensor v = x.values();
    for (std::size_t i = 0; i < v.rows; ++i)
        for (double& e : v.row(i)) e = f(e, stats.mean[i], stats.stddev[i]);
    return TimeSeries(std::move(v), x.labels(), x.id());
}
}  // namespace detail

inline TimeSeries normalize(const TimeSeries& x, const NormalizationStats& stats) {
    return detail::map_variates(x, stats, [](double v, double m, double s) { return (v - m) / s; });
}

inline TimeSeries denormalize(const TimeSeries& x, const NormalizationStats& stats) {
    return detail::map_variates(x, stats, [](double v, double m, double s) { return v * s + m; });
}

struct Window {
    std::size_t start = 0;
    std::size_t length = 0;

    std::size_t end() const noexcept { return start + length - 1; }
    friend bool operator==(const Window&, const Window&) = default;
};

// Windows start at 0, stride, 2*stride, ...; a final window is right-aligned
// to the series end when the regular grid leaves a tail uncovered. A window
// longer than the series degrades to one window spanning everything.
inline std::vector<Window> slice_windows(std::size_t series_length, std::size_t length,
                                         std::size_t stride) {
    require(series_length >= 1, "empty_input", "empty input");
    require(length >= 1 && stride >= 1, "bad_window", "window length and stride must be >= 1");
    if (length > series_length) return {Window{0, series_length}};
    require(stride <= length, "bad_window", "stride must not exceed window length");
    std::vector<Window> out;
    std::size_t start = 0;
    for (; start + length <= series_length; start += stride) out.push_back({start, length});
    if (out.back().end() + 1 < series_length) out.push_back({series_length - length, length});
    return out;
}

inline std::vector<Window> slice_windows(const TimeSeries& x, std::size_t length, std::size_t stride) {
    return slice_windows(x.length(), length, stride);
}

}  // namespace imputad
