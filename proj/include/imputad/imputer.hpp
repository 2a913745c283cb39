#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "imputad/autodiff.hpp"
#include "imputad/masking.hpp"
#include "imputad/random.hpp"

namespace imputad {

// Reconstruction fills scattered cells from the whole window; the
// bidirectional head forecasts a gap from its left context (forward net)
// and from its reversed right context (backward net).
enum class Head { Reconstruction, Bidirectional };

inline std::string to_string(Head h) {
    return h == Head::Reconstruction ? "reconstruction" : "bidirectional";
}

inline Head parse_head(const std::string& s) {
    if (s == "reconstruction" || s == "point") return Head::Reconstruction;
    if (s == "bidirectional" || s == "sequence") return Head::Bidirectional;
    fail("bad_head", "unknown head type '" + s + "'");
}

struct ImputerConfig {
    std::size_t variates = 1;
    std::size_t window = 64;  // nominal input length
    std::size_t levels = 2;   // depth of the even/odd split tree
    std::size_t kernel = 5;   // odd
    std::size_t hidden = 4;   // hidden channels = hidden * variates
    Head head = Head::Reconstruction;

    friend bool operator==(const ImputerConfig&, const ImputerConfig&) = default;
};

// One convolutional transform: conv(k) -> SiLU -> conv(k) -> tanh.
struct ConvBank {
    Tensor w1, b1, w2, b2;
};

// The four transforms of one split-and-interact block, in the order
// {scale-odd-by-even, scale-even-by-odd, update-even, predict-odd}.
struct SciBlockParams {
    std::size_t kernel = 5;
    std::array<ConvBank, 4> banks;
};

struct BlockOutput {
    Tensor even;
    Tensor odd;
};

namespace detail {

inline Var conv_bank(Tape& tape, const Var* p, Var x, std::size_t kernel) {
    Var h = tape.silu(tape.conv1d(x, p[0], p[1], kernel));
    return tape.tanh(tape.conv1d(h, p[2], p[3], kernel));
}

// p points at 16 consecutive leaves: 4 banks x {w1, b1, w2, b2}.
inline std::pair<Var, Var> sci_block(Tape& tape, const Var* p, Var x, std::size_t kernel) {
    Var even = tape.even(x);
    Var odd = tape.odd(x);
    Var d = tape.mul(odd, tape.exp(conv_bank(tape, p + 0, even, kernel)));
    Var c = tape.mul(even, tape.exp(conv_bank(tape, p + 4, odd, kernel)));
    Var even_out = tape.add(c, conv_bank(tape, p + 8, d, kernel));
    Var odd_out = tape.sub(d, conv_bank(tape, p + 12, c, kernel));
    return {even_out, odd_out};
}

}  // namespace detail

inline BlockOutput sci_block_forward(const Tensor& x, const SciBlockParams& params) {
    require(x.cols % 2 == 0, "length_not_divisible", "length not divisible by 2");
    Tape tape;
    Var in = tape.constant(x);
    std::array<Var, 16> p;
    for (std::size_t b = 0; b < 4; ++b) {
        const auto& bank = params.banks[b];
        p[4 * b + 0] = tape.constant(bank.w1);
        p[4 * b + 1] = tape.constant(bank.b1);
        p[4 * b + 2] = tape.constant(bank.w2);
        p[4 * b + 3] = tape.constant(bank.b2);
    }
    auto [e, o] = detail::sci_block(tape, p.data(), in, params.kernel);
    return {tape.value(e), tape.value(o)};
}

// Index permutation of the split tree: position j of the result holds the
// original index that ends up at leaf-concatenated position j.
inline std::vector<std::size_t> split_order(std::size_t length, std::size_t levels) {
    std::vector<std::size_t> idx(length);
    for (std::size_t i = 0; i < length; ++i) idx[i] = i;
    for (std::size_t level = 0; level < levels; ++level) {
        const std::size_t groups = std::size_t{1} << level;
        require(length % (groups * 2) == 0, "length_not_divisible", "length not divisible");
        const std::size_t g = length / groups;
        std::vector<std::size_t> next;
        next.reserve(length);
        for (std::size_t k = 0; k < groups; ++k) {
            for (std::size_t j = 0; j < g; j += 2) next.push_back(idx[k * g + j]);
            for (std::size_t j = 1; j < g; j += 2) next.push_back(idx[k * g + j]);
        }
        idx = std::move(next);
    }
    return idx;
}

// Inverse of split_order: interleave leaves back bottom-up.
template <typename T>
std::vector<T> realign(const std::vector<T>& leaves, std::size_t levels) {
    std::vector<T> cur = leaves;
    for (std::size_t level = levels; level-- > 0;) {
        const std::size_t groups = std::size_t{1} << level;
        const std::size_t g = cur.size() / groups;
        std::vector<T> next(cur.size());
        for (std::size_t k = 0; k < groups; ++k)
            for (std::size_t j = 0; j < g / 2; ++j) {
                next[k * g + 2 * j] = cur[k * g + j];
                next[k * g + 2 * j + 1] = cur[k * g + g / 2 + j];
            }
        cur = std::move(next);
    }
    return cur;
}

// Per-element result of an imputation.
struct ImputationResult {
    Tensor imputed;
    std::vector<std::uint8_t> is_imputed;  // flat d x T, 1 where the value came from the model

    std::size_t imputed_count() const noexcept {
        std::size_t n = 0;
        for (auto f : is_imputed) n += f;
        return n;
    }
};

class ImputerModel {
public:
    static constexpr std::size_t kTensorsPerBlock = 16;

    ImputerModel() = default;

    // Random initialization, uniform in +-1/sqrt(fan_in).
    ImputerModel(const ImputerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        validate(cfg_);
        Rng rng(seed);
        auto uniform = [&](std::size_t r, std::size_t c, double fan_in) {
            const double a = 1.0 / std::sqrt(fan_in);
            Tensor t(r, c);
            for (double& v : t.data) v = rng.uniform(-a, a);
            return t;
        };
        const std::size_t d = cfg_.variates, hd = cfg_.hidden * d, k = cfg_.kernel;
        const std::size_t len = padded_length();
        static const char* bank_names[4] = {"scale_odd", "scale_even", "update", "predict"};
        for (std::size_t net = 0; net < net_count(); ++net) {
            const std::string prefix = "net" + std::to_string(net) + ".";
            for (std::size_t b = 0; b < block_count(); ++b) {
                for (std::size_t j = 0; j < 4; ++j) {
                    const std::string name = prefix + "block" + std::to_string(b) + "." + bank_names[j];
                    params_.add(name + ".w1", uniform(hd, d * k, static_cast<double>(d * k)));
                    params_.add(name + ".b1", uniform(hd, 1, static_cast<double>(d * k)));
                    params_.add(name + ".w2", uniform(d, hd * k, static_cast<double>(hd * k)));
                    params_.add(name + ".b2", uniform(d, 1, static_cast<double>(hd * k)));
                }
            }
            params_.add(prefix + "decoder.w", uniform(len, len, static_cast<double>(len)));
            params_.add(prefix + "decoder.b", uniform(1, len, static_cast<double>(len)));
        }
    }

    // Rebuild from stored tensors; shapes are checked against the config.
    ImputerModel(const ImputerConfig& cfg, Parameters params) : cfg_(cfg), params_(std::move(params)) {
        validate(cfg_);
        const ImputerModel reference(cfg_, 0);
        require(params_.tensors.size() == reference.params_.tensors.size(), "bad_checkpoint",
                "parameter count does not match model configuration");
        for (std::size_t i = 0; i < params_.tensors.size(); ++i)
            require(params_.tensors[i].same_shape(reference.params_.tensors[i]), "bad_checkpoint",
                    "parameter '" + reference.params_.names[i] + "' has the wrong shape");
        params_.names = reference.params_.names;
    }

    static void validate(const ImputerConfig& c) {
        require(c.variates >= 1, "bad_config", "variates must be >= 1");
        require(c.window >= 2, "bad_config", "window must be >= 2");
        require(c.kernel % 2 == 1, "bad_config", "kernel size must be odd");
        require(c.hidden >= 1, "bad_config", "hidden multiplier must be >= 1");
        require(c.levels <= 10, "bad_config", "too many levels");
    }

    const ImputerConfig& config() const noexcept { return cfg_; }
    Head head() const noexcept { return cfg_.head; }
    const Parameters& parameters() const noexcept { return params_; }
    Parameters& parameters() noexcept { return params_; }

    std::size_t net_count() const noexcept { return cfg_.head == Head::Bidirectional ? 2 : 1; }
    std::size_t block_count() const noexcept { return (std::size_t{1} << cfg_.levels) - 1; }
    std::size_t tensors_per_net() const noexcept { return block_count() * kTensorsPerBlock + 2; }
    std::size_t divisor() const noexcept { return std::size_t{1} << cfg_.levels; }

    // Model input length: window rounded up to a multiple of 2^levels.
    std::size_t padded_length() const noexcept {
        const std::size_t q = divisor();
        return (cfg_.window + q - 1) / q * q;
    }

    SciBlockParams block_params(std::size_t net, std::size_t block) const {
        SciBlockParams p{cfg_.kernel, {}};
        const std::size_t base = net * tensors_per_net() + block * kTensorsPerBlock;
        for (std::size_t j = 0; j < 4; ++j)
            p.banks[j] = {params_.tensors[base + 4 * j], params_.tensors[base + 4 * j + 1],
                          params_.tensors[base + 4 * j + 2], params_.tensors[base + 4 * j + 3]};
        return p;
    }

    // Taped forward pass of one sub-network. `vars` are this model's
    // parameters bound on `tape`; x must have exactly padded_length() columns.
    Var forward(Tape& tape, const std::vector<Var>& vars, std::size_t net, Var x) const {
        const Tensor& xv = tape.value(x);
        require(xv.rows == cfg_.variates, "dimension_mismatch", "input variates do not match model");
        require(xv.cols % divisor() == 0, "length_not_divisible", "length not divisible by 2^levels");
        require(xv.cols == padded_length(), "length_mismatch", "input length does not match model");
        require(net < net_count(), "out_of_range", "no such sub-network");
        const Var* p = vars.data() + net * tensors_per_net();
        Var features = tree(tape, p, x, 0, 0);
        Var decoded = tape.time_linear(features, p[block_count() * kTensorsPerBlock],
                                       p[block_count() * kTensorsPerBlock + 1]);
        return tape.add(x, decoded);
    }

    Tensor forward(const Tensor& x, std::size_t net = 0) const {
        Tape tape;
        auto vars = tape.bind(params_);
        return tape.value(forward(tape, vars, net, tape.constant(x)));
    }

    // Edge-replicate columns up to padded_length().
    Tensor pad(const Tensor& x) const {
        const std::size_t len = padded_length();
        require(x.cols >= 1 && x.cols <= len, "length_mismatch", "window longer than model input");
        if (x.cols == len) return x;
        Tensor out(x.rows, len);
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t t = 0; t < len; ++t) out(r, t) = x(r, std::min(t, x.cols - 1));
        return out;
    }

    // Taped imputation of the masked entries of `sample`. Returns a row
    // vector aligned with sample.mask.
    Var impute_masked(Tape& tape, const std::vector<Var>& vars, const MaskedSample& sample) const {
        require(cfg_.head == Head::Reconstruction, "head_mismatch",
                "point imputation requires a reconstruction head");
        const std::size_t n = sample.input.cols, len = padded_length();
        Var out = forward(tape, vars, 0, tape.constant(pad(sample.input)));
        std::vector<std::size_t> idx;
        idx.reserve(sample.mask.size());
        for (ElementIndex e : sample.mask) idx.push_back((e / n) * len + e % n);
        return tape.gather(out, std::move(idx));
    }

    // Taped gap imputation for a sequence-mode sample. Returns a row vector
    // aligned with sample.mask (variate-major over the gap).
    Var impute_gap(Tape& tape, const std::vector<Var>& vars, const MaskedSample& sample) const {
        require(cfg_.head == Head::Bidirectional, "head_mismatch",
                "sequence imputation requires a bidirectional head");
        require(sample.segment.has_value(), "bad_sample", "sequence imputation needs a contiguous gap");
        const Tensor& x = sample.input;
        const std::size_t n = x.cols, d = x.rows, len = padded_length();
        const Window gap = *sample.segment;
        require(gap.end() < n, "shape_mismatch", "gap outside window");
        const bool has_left = gap.start > 0, has_right = gap.end() + 1 < n;
        require(has_left || has_right, "no_context", "no context");

        const std::size_t g = gap.length;
        auto gather_idx = [&](bool reversed) {
            std::vector<std::size_t> idx;
            idx.reserve(d * g);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t t = gap.start; t <= gap.end(); ++t)
                    idx.push_back(i * len + (reversed ? n - 1 - t : t));
            return idx;
        };

        std::optional<Var> fwd, bwd;
        if (has_left) {
            Tensor in = x;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t t = gap.start; t < n; ++t) in(i, t) = kMaskFill;
            fwd = tape.gather(forward(tape, vars, 0, tape.constant(pad(in))), gather_idx(false));
        }
        if (has_right) {
            // Reverse the right context so the backward net also forecasts forward in its own time.
            Tensor rev(d, n);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t t = 0; t < n; ++t) rev(i, t) = n - 1 - t > gap.end() ? x(i, n - 1 - t) : kMaskFill;
            bwd = tape.gather(forward(tape, vars, 1, tape.constant(pad(rev))), gather_idx(true));
        }
        if (!bwd) return *fwd;
        if (!fwd) return *bwd;

        Tensor wf(1, d * g), wb(1, d * g);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < g; ++j) {
                wf.data[i * g + j] = static_cast<double>(g - j) / static_cast<double>(g + 1);
                wb.data[i * g + j] = static_cast<double>(j + 1) / static_cast<double>(g + 1);
            }
        return tape.add(tape.mul_const(*fwd, std::move(wf)), tape.mul_const(*bwd, std::move(wb)));
    }

private:
    ImputerConfig cfg_;
    Parameters params_;

    Var tree(Tape& tape, const Var* p, Var x, std::size_t node, std::size_t level) const {
        if (level == cfg_.levels) return x;
        auto [e, o] = detail::sci_block(tape, p + node * kTensorsPerBlock, x, cfg_.kernel);
        Var left = tree(tape, p, e, 2 * node + 1, level + 1);
        Var right = tree(tape, p, o, 2 * node + 2, level + 1);
        return tape.interleave(left, right);
    }
};

inline ImputationResult assemble(const MaskedSample& sample, const Tensor& predictions) {
    ImputationResult r{sample.input, std::vector<std::uint8_t>(sample.input.size(), 0)};
    for (std::size_t j = 0; j < sample.mask.size(); ++j) {
        r.imputed.data[sample.mask[j]] = predictions.data[j];
        r.is_imputed[sample.mask[j]] = 1;
    }
    return r;
}

inline ImputationResult impute_points(const MaskedSample& sample, const ImputerModel& model) {
    require(model.head() == Head::Reconstruction, "head_mismatch",
            "point imputation requires a reconstruction head");
    if (sample.mask.empty()) return assemble(sample, Tensor(1, 0));
    Tape tape;
    auto vars = tape.bind(model.parameters());
    return assemble(sample, tape.value(model.impute_masked(tape, vars, sample)));
}

inline ImputationResult impute_sequence(const MaskedSample& sample, const ImputerModel& model) {
    require(model.head() == Head::Bidirectional, "head_mismatch",
            "sequence imputation requires a bidirectional head");
    Tape tape;
    auto vars = tape.bind(model.parameters());
    return assemble(sample, tape.value(model.impute_gap(tape, vars, sample)));
}

}  // namespace imputad
