#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include <json.hpp>

#include "imputad/core.hpp"
#include "imputad/random.hpp"

namespace imputad {

// Masked entries are replaced by the normalized mean.
inline constexpr double kMaskFill = 0.0;

// Element index over the d x T grid: variate * T + t.
using ElementIndex = std::size_t;

struct PointMaskSet {
    std::size_t variates = 0;
    std::size_t length = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<ElementIndex>> masks;
};

struct SequenceMaskSet {
    std::size_t length = 0;
    std::vector<Window> segments;
};

struct MaskedSample {
    Tensor input;
    std::vector<ElementIndex> mask;  // sorted
    std::vector<double> target;      // original values at `mask`, same order
    std::optional<Window> segment;   // set in sequence mode
};

// Balanced sizes: the first n % parts chunks get one extra element.
inline std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t parts) {
    std::vector<std::size_t> sizes(parts, n / parts);
    for (std::size_t i = 0; i < n % parts; ++i) ++sizes[i];
    return sizes;
}

inline PointMaskSet make_point_masks(std::size_t variates, std::size_t length, std::size_t count,
                                     std::uint64_t seed) {
    const std::size_t elements = variates * length;
    require(elements >= 1, "empty_input", "empty input");
    require(count >= 1, "bad_mask_count", "mask count must be >= 1");
    require(count <= elements, "bad_mask_count", "mask count exceeds element count");

    std::vector<ElementIndex> order(elements);
    std::iota(order.begin(), order.end(), ElementIndex{0});
    Rng rng(seed);
    rng.shuffle(order);

    PointMaskSet set{variates, length, seed, {}};
    set.masks.reserve(count);
    auto it = order.begin();
    for (std::size_t size : balanced_sizes(elements, count)) {
        std::vector<ElementIndex> mask(it, it + static_cast<std::ptrdiff_t>(size));
        std::sort(mask.begin(), mask.end());
        set.masks.push_back(std::move(mask));
        it += static_cast<std::ptrdiff_t>(size);
    }
    return set;
}

inline SequenceMaskSet make_sequence_masks(std::size_t length, std::size_t count) {
    require(length >= 1, "empty_input", "empty input");
    require(count >= 1, "bad_mask_count", "segment count must be >= 1");
    require(count <= length, "bad_mask_count", "segment count exceeds series length");
    SequenceMaskSet set{length, {}};
    std::size_t start = 0;
    for (std::size_t size : balanced_sizes(length, count)) {
        set.segments.push_back({start, size});
        start += size;
    }
    return set;
}

inline MaskedSample mask_elements(const Tensor& x, std::vector<ElementIndex> mask) {
    MaskedSample s{x, std::move(mask), {}, std::nullopt};
    s.target.reserve(s.mask.size());
    for (ElementIndex e : s.mask) {
        require(e < x.size(), "shape_mismatch", "mask index outside series");
        s.target.push_back(x.data[e]);
        s.input.data[e] = kMaskFill;
    }
    return s;
}

// Masks every variate over `segment`.
inline MaskedSample mask_segment(const Tensor& x, Window segment) {
    require(segment.length >= 1 && segment.end() < x.cols, "shape_mismatch",
            "segment outside series");
    std::vector<ElementIndex> mask;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t t = segment.start; t <= segment.end(); ++t) mask.push_back(i * x.cols + t);
    auto s = mask_elements(x, std::move(mask));
    s.segment = segment;
    return s;
}

inline std::vector<MaskedSample> materialize_samples(const Tensor& x, const PointMaskSet& set) {
    require(x.rows == set.variates && x.cols == set.length, "shape_mismatch",
            "mask set does not match series shape");
    std::vector<MaskedSample> out;
    out.reserve(set.masks.size());
    for (const auto& m : set.masks) out.push_back(mask_elements(x, m));
    return out;
}

inline std::vector<MaskedSample> materialize_samples(const Tensor& x, const SequenceMaskSet& set) {
    require(x.cols == set.length, "shape_mismatch", "mask set does not match series shape");
    std::vector<MaskedSample> out;
    out.reserve(set.segments.size());
    for (const auto& seg : set.segments) out.push_back(mask_segment(x, seg));
    return out;
}

inline std::vector<MaskedSample> materialize_samples(const TimeSeries& x, const PointMaskSet& set) {
    return materialize_samples(x.values(), set);
}

inline std::vector<MaskedSample> materialize_samples(const TimeSeries& x, const SequenceMaskSet& set) {
    return materialize_samples(x.values(), set);
}

inline void to_json(nlohmann::json& j, const PointMaskSet& s) {
    j = {{"kind", "point"}, {"variates", s.variates}, {"length", s.length}, {"seed", s.seed},
         {"masks", s.masks}};
}

inline void from_json(const nlohmann::json& j, PointMaskSet& s) {
    require(j.value("kind", "") == "point", "bad_format", "not a point mask set");
    j.at("variates").get_to(s.variates);
    j.at("length").get_to(s.length);
    j.at("seed").get_to(s.seed);
    j.at("masks").get_to(s.masks);
}

inline void to_json(nlohmann::json& j, const SequenceMaskSet& s) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& w : s.segments) segs.push_back({w.start, w.end()});
    j = {{"kind", "sequence"}, {"length", s.length}, {"segments", segs}};
}

inline void from_json(const nlohmann::json& j, SequenceMaskSet& s) {
    require(j.value("kind", "") == "sequence", "bad_format", "not a sequence mask set");
    j.at("length").get_to(s.length);
    s.segments.clear();
    for (const auto& seg : j.at("segments")) {
        const auto a = seg.at(0).get<std::size_t>(), b = seg.at(1).get<std::size_t>();
        require(a <= b, "bad_format", "segment end precedes start");
        s.segments.push_back({a, b - a + 1});
    }
}

}  // namespace imputad
