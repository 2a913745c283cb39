#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "imputad/core.hpp"
#include "imputad/imputer.hpp"
#include "imputad/masking.hpp"
#include "imputad/parallel.hpp"

namespace imputad {

// Mean over timesteps of the L1 norm across variates.
inline double loss(const Tensor& x, const Tensor& xhat) {
    require(x.same_shape(xhat), "shape_mismatch", "loss operands differ in shape");
    require(x.cols >= 1, "empty_input", "empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x.data[i] - xhat.data[i]);
    return s / static_cast<double>(x.cols);
}

inline double loss(const TimeSeries& x, const TimeSeries& xhat) { return loss(x.values(), xhat.values()); }

struct TrainConfig {
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 5.0;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
    Head head = Head::Reconstruction;
    std::size_t mask_count = 8;  // M (point) or N (sequence) per window
    std::size_t window = 64;
    std::size_t stride = 32;  // spacing of training windows
    std::size_t levels = 2;
    std::size_t kernel = 5;
    std::size_t hidden = 4;
    double validation_fraction = 0.2;
    std::size_t workers = 1;
};

struct EpochStats {
    std::size_t epoch = 0;  // 0 is the untrained model
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;

    double initial_train_loss() const { return history.front().train_loss; }
    double final_train_loss() const { return history.back().train_loss; }
};

struct TrainResult {
    ImputerModel model;
    TrainReport report;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Trailing `fraction` of the series is held out; the rest is for fitting.
inline std::pair<TimeSeries, std::optional<TimeSeries>> split_validation(const TimeSeries& x,
                                                                         double fraction) {
    const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(x.length())));
    if (held == 0 || held >= x.length()) return {x, std::nullopt};
    const std::size_t fit = x.length() - held;
    return {x.slice(0, fit), x.slice(fit, held)};
}

// Self-supervised samples of one window for the model's head.
inline std::vector<MaskedSample> window_samples(const Tensor& window, Head head, std::size_t mask_count,
                                                std::uint64_t seed) {
    if (head == Head::Reconstruction) {
        const std::size_t m = std::min(mask_count, window.size());
        return materialize_samples(window, make_point_masks(window.rows, window.cols, m, seed));
    }
    const std::size_t n = std::min(mask_count, window.cols);
    require(n >= 2, "bad_mask_count", "sequence masking needs at least two segments per window");
    return materialize_samples(window, make_sequence_masks(window.cols, n));
}

// Records the imputation objective of one window: every element is
// imputed by exactly one sample, the imputations together form the
// reconstructed window, and the result is its mean per-timestep L1 error.
inline Var window_objective(Tape& tape, const std::vector<Var>& vars, const ImputerModel& model,
                            const std::vector<MaskedSample>& samples, std::size_t length) {
    std::optional<Var> total;
    for (const auto& s : samples) {
        if (s.mask.empty()) continue;
        Var pred = model.head() == Head::Reconstruction ? model.impute_masked(tape, vars, s)
                                                        : model.impute_gap(tape, vars, s);
        Var err = tape.sum(tape.abs(tape.sub(pred, tape.constant(Tensor(1, s.target.size(), s.target)))));
        total = total ? tape.add(*total, err) : err;
    }
    require(total.has_value(), "empty_input", "window has no masked elements");
    return tape.scale(*total, 1.0 / static_cast<double>(length));
}

class Adam {
public:
    Adam(const Parameters& like, double lr, double beta1, double beta2, double eps)
        : m_(like.zeros_like()), v_(like.zeros_like()), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(Parameters& params, const Gradients& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.tensors.size(); ++k) {
            auto& p = params.tensors[k].data;
            auto& m = m_.tensors[k].data;
            auto& v = v_.tensors[k].data;
            const auto& g = grads.tensors[k].data;
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
                v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
                p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            }
        }
    }

private:
    Parameters m_, v_;
    double lr_, b1_, b2_, eps_;
    std::uint64_t t_ = 0;
};

inline double global_norm(const Gradients& g) {
    double s = 0.0;
    for (const auto& t : g.tensors)
        for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

namespace detail {

struct WindowRef {
    std::size_t series;
    Window window;
};

inline std::vector<WindowRef> collect_windows(const std::vector<TimeSeries>& parts, std::size_t length,
                                              std::size_t stride) {
    std::vector<WindowRef> out;
    for (std::size_t s = 0; s < parts.size(); ++s)
        for (const auto& w : slice_windows(parts[s], length, std::min(stride, length)))
            out.push_back({s, w});
    return out;
}

}  // namespace detail

// Mean window objective over `windows` with masks drawn from `seed`.
inline double evaluate_objective(const ImputerModel& model, const std::vector<TimeSeries>& parts,
                                 const std::vector<detail::WindowRef>& windows, std::size_t mask_count,
                                 std::uint64_t seed, std::size_t workers) {
    std::vector<double> losses(windows.size());
    parallel_for(windows.size(), workers, [&](std::size_t i) {
        const auto& ref = windows[i];
        const Tensor x = parts[ref.series].values().columns(ref.window.start, ref.window.length);
        Tape tape;
        auto vars = tape.bind(model.parameters());
        auto samples = window_samples(x, model.head(), mask_count, mix_seed(seed, i));
        losses[i] = tape.value(window_objective(tape, vars, model, samples, x.cols)).data[0];
    });
    double s = 0.0;
    for (double l : losses) s += l;
    return windows.empty() ? 0.0 : s / static_cast<double>(windows.size());
}

// Fits an imputer to `dataset` (already normalized). The trailing
// validation fraction of every series is held out for model selection.
inline TrainResult train(const std::vector<TimeSeries>& dataset, const TrainConfig& cfg,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
    require(!dataset.empty(), "empty_input", "empty dataset");
    const std::size_t d = dataset.front().variates();
    for (const auto& s : dataset)
        require(s.variates() == d, "dimension_mismatch", "all training series must share dimension");
    require(cfg.batch_size >= 1 && cfg.window >= 2 && cfg.stride >= 1 && cfg.mask_count >= 1,
            "bad_config", "batch size, window, stride and mask count must be positive");
    require(cfg.learning_rate >= 0.0 && cfg.clip_norm > 0.0, "bad_config",
            "learning rate must be >= 0 and clip bound > 0");

    std::vector<TimeSeries> fit_parts, val_parts;
    for (const auto& s : dataset) {
        auto [fit, val] = split_validation(s, cfg.validation_fraction);
        fit_parts.push_back(std::move(fit));
        if (val) val_parts.push_back(std::move(*val));
    }
    const auto fit_windows = detail::collect_windows(fit_parts, cfg.window, cfg.stride);
    const auto val_windows = detail::collect_windows(val_parts, cfg.window, cfg.stride);

    ImputerConfig mc{d, cfg.window, cfg.levels, cfg.kernel, cfg.hidden, cfg.head};
    ImputerModel model(mc, mix_seed(cfg.seed, 0xC0FFEE));
    Adam adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);

    const std::uint64_t eval_seed = mix_seed(cfg.seed, 0xE7A1);
    auto measure = [&](std::size_t epoch) {
        EpochStats st{epoch, evaluate_objective(model, fit_parts, fit_windows, cfg.mask_count, eval_seed, cfg.workers),
                      std::numeric_limits<double>::quiet_NaN()};
        st.validation_loss = val_windows.empty()
                                 ? st.train_loss
                                 : evaluate_objective(model, val_parts, val_windows, cfg.mask_count,
                                                      mix_seed(eval_seed, 1), cfg.workers);
        if (!std::isfinite(st.train_loss) || !std::isfinite(st.validation_loss))
            fail("diverged", "training diverged at epoch " + std::to_string(epoch));
        if (on_epoch) on_epoch(st);
        return st;
    };

    TrainReport report;
    report.history.push_back(measure(0));
    Parameters best = model.parameters();
    double best_val = report.history.back().validation_loss;

    std::vector<std::size_t> order(fit_windows.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(mix_seed(cfg.seed, 1000 + epoch));
        shuffle_rng.shuffle(order);

        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
            std::vector<Gradients> grads(count);
            std::vector<double> losses(count);
            parallel_for(count, cfg.workers, [&](std::size_t j) {
                const std::size_t wi = order[begin + j];
                const auto& ref = fit_windows[wi];
                const Tensor x = fit_parts[ref.series].values().columns(ref.window.start, ref.window.length);
                Tape tape;
                auto vars = tape.bind(model.parameters());
                auto samples = window_samples(x, model.head(), cfg.mask_count,
                                              mix_seed(mix_seed(cfg.seed, epoch), wi));
                Var obj = window_objective(tape, vars, model, samples, x.cols);
                losses[j] = tape.value(obj).data[0];
                grads[j] = tape.backward(obj, model.parameters());
            });
            // Fixed-order reduction keeps runs reproducible.
            Gradients total = model.parameters().zeros_like();
            for (std::size_t j = 0; j < count; ++j) {
                if (!std::isfinite(losses[j]))
                    fail("diverged", "training diverged at epoch " + std::to_string(epoch));
                for (std::size_t k = 0; k < total.tensors.size(); ++k)
                    for (std::size_t e = 0; e < total.tensors[k].size(); ++e)
                        total.tensors[k].data[e] += grads[j].tensors[k].data[e] / static_cast<double>(count);
            }
            const double norm = global_norm(total);
            if (!std::isfinite(norm)) fail("diverged", "training diverged at epoch " + std::to_string(epoch));
            if (norm > cfg.clip_norm)
                for (auto& t : total.tensors)
                    for (double& v : t.data) v *= cfg.clip_norm / norm;
            adam.step(model.parameters(), total);
        }

        report.history.push_back(measure(epoch));
        if (report.history.back().validation_loss < best_val) {
            best_val = report.history.back().validation_loss;
            best = model.parameters();
            report.best_epoch = epoch;
        }
    }
    model.parameters() = best;
    return {std::move(model), std::move(report)};
}

}  // namespace imputad
