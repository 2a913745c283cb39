#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "imputad/core.hpp"
#include "imputad/detection.hpp"
#include "imputad/imputer.hpp"
#include "imputad/metrics.hpp"
#include "imputad/random.hpp"
#include "imputad/scoring.hpp"

namespace imputad {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV ingestion
//
// One header row, one row per timestep, one numeric column per variate. An
// optional label column holds 0/1 anomaly flags and is not a variate.

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    const std::string where = "row " + std::to_string(row) + ", column '" + column + "'";
    if (cell.empty()) fail("bad_csv", "empty cell at " + where);
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size()) fail("bad_csv", "non-numeric value '" + cell + "' at " + where);
    if (!std::isfinite(v)) fail("bad_csv", "non-finite value '" + cell + "' at " + where);
    return v;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("io_error", "cannot open '" + path + "'");
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("io_error", "cannot write '" + path + "'");
    out << std::setprecision(17);
    return out;
}

}  // namespace detail

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv_table(std::istream& in) {
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        if (t.header.empty()) {
            t.header = detail::split_csv_line(line);
            continue;
        }
        auto cells = detail::split_csv_line(line);
        if (cells.size() != t.header.size())
            fail("bad_csv", "row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                                " cells, expected " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) fail("empty_dataset", "empty dataset");
    return t;
}

// Rows are 1-based data rows in error messages.
inline TimeSeries series_from_table(const CsvTable& t, const std::optional<std::string>& label_column,
                                    const std::string& id = {}) {
    if (t.rows.empty()) fail("empty_dataset", "empty dataset");
    std::optional<std::size_t> label_idx;
    if (label_column) {
        auto it = std::find(t.header.begin(), t.header.end(), *label_column);
        if (it == t.header.end()) fail("missing_label", "label column '" + *label_column + "' not found");
        label_idx = static_cast<std::size_t>(it - t.header.begin());
    }
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (!label_idx || c != *label_idx) cols.push_back(c);
    if (cols.empty()) fail("bad_csv", "no variate columns");

    Tensor values(cols.size(), t.rows.size());
    std::optional<Labels> labels;
    if (label_idx) labels = Labels(t.rows.size(), 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            values(i, r) = detail::parse_number(t.rows[r][cols[i]], r + 1, t.header[cols[i]]);
        if (label_idx) {
            const double l = detail::parse_number(t.rows[r][*label_idx], r + 1, *label_column);
            if (l != 0.0 && l != 1.0)
                fail("bad_csv", "label at row " + std::to_string(r + 1) + " must be 0 or 1");
            (*labels)[r] = static_cast<std::uint8_t>(l);
        }
    }
    return TimeSeries(std::move(values), std::move(labels), id);
}

inline TimeSeries read_series_csv(const std::string& path, const std::optional<std::string>& label_column) {
    auto in = detail::open_in(path);
    return series_from_table(read_csv_table(in), label_column, path);
}

// Uses "label" as the label column when the header has one.
inline TimeSeries read_series_csv_auto(const std::string& path) {
    auto in = detail::open_in(path);
    const auto t = read_csv_table(in);
    const bool has = std::find(t.header.begin(), t.header.end(), "label") != t.header.end();
    return series_from_table(t, has ? std::optional<std::string>("label") : std::nullopt, path);
}

inline void write_series_csv(std::ostream& out, const TimeSeries& x) {
    for (std::size_t i = 0; i < x.variates(); ++i) out << (i ? "," : "") << "v" << i;
    if (x.labels()) out << ",label";
    out << '\n';
    for (std::size_t t = 0; t < x.length(); ++t) {
        for (std::size_t i = 0; i < x.variates(); ++i) out << (i ? "," : "") << x(i, t);
        if (x.labels()) out << ',' << int((*x.labels())[t]);
        out << '\n';
    }
}

inline void write_series_csv(const std::string& path, const TimeSeries& x) {
    auto out = detail::open_out(path);
    write_series_csv(out, x);
}

struct DatasetSpec {
    std::string path;
    std::optional<std::string> label_column;
    double train_fraction = 0.6;
    double validation_fraction = 0.2;
    double test_fraction = 0.2;
    bool normalize = true;
};

struct Dataset {
    TimeSeries train, validation, test;
    std::optional<NormalizationStats> normalization;
    std::vector<std::string> warnings;
};

// Contiguous temporal split; normalization statistics come from train only.
inline Dataset split_dataset(const TimeSeries& x, const DatasetSpec& spec) {
    require(spec.train_fraction > 0 && spec.validation_fraction > 0 && spec.test_fraction > 0, "bad_split",
            "split fractions must be positive");
    require(std::fabs(spec.train_fraction + spec.validation_fraction + spec.test_fraction - 1.0) < 1e-9,
            "bad_split", "split fractions must sum to 1");
    const double n = static_cast<double>(x.length());
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
    const auto n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * n));
    require(n_train >= 1 && n_val >= 1 && n_train + n_val < x.length(), "bad_split",
            "series too short for the requested split");
    Dataset ds{x.slice(0, n_train), x.slice(n_train, n_val), x.slice(n_train + n_val, x.length() - n_train - n_val),
               std::nullopt, {}};
    if (spec.normalize) {
        auto stats = fit_normalizer(ds.train);
        ds.train = normalize(ds.train, stats);
        ds.validation = normalize(ds.validation, stats);
        ds.test = normalize(ds.test, stats);
        ds.normalization = std::move(stats);
    }
    if (const auto& l = ds.validation.labels(); l && std::any_of(l->begin(), l->end(), [](auto v) { return v != 0; }))
        ds.warnings.push_back("validation split contains labeled anomalies; the calibrated threshold will be inflated");
    return ds;
}

inline Dataset load_csv(const DatasetSpec& spec) { return split_dataset(read_series_csv(spec.path, spec.label_column), spec); }

// ---------------------------------------------------------------------------
// Synthetic benchmarks

enum class BaseSignal { Sine, Ramp, Composite };
enum class SequenceAnomaly { Flatline, FrequencyShift, LevelShift };

struct SyntheticSpec {
    BaseSignal base = BaseSignal::Sine;
    std::size_t length = 1024;
    std::size_t variates = 1;
    double period = 50.0;
    double amplitude = 1.0;
    double noise = 0.0;  // std of additive Gaussian noise, absolute units
    std::size_t point_count = 0;
    double point_amplitude = 6.0;  // in standard deviations of the clean signal
    std::size_t sequence_count = 0;
    std::size_t sequence_min_length = 20;
    std::size_t sequence_max_length = 60;
    std::vector<std::size_t> sequence_lengths;  // explicit lengths; overrides the range when set
    std::vector<SequenceAnomaly> sequence_types{SequenceAnomaly::Flatline};
    std::size_t margin = 0;          // no anomaly within this many steps of either end
    std::size_t min_separation = 1;  // clean steps required between anomalies
    std::uint64_t seed = 0;
    std::string id = "synthetic";
};

struct SyntheticSeries {
    TimeSeries series;
    std::vector<AnomalyInterval> truth;  // sorted by start
};

inline BaseSignal parse_base_signal(const std::string& s) {
    if (s == "sine") return BaseSignal::Sine;
    if (s == "ramp") return BaseSignal::Ramp;
    if (s == "composite") return BaseSignal::Composite;
    fail("bad_spec", "unknown base signal '" + s + "'");
}

inline SequenceAnomaly parse_sequence_anomaly(const std::string& s) {
    if (s == "flatline") return SequenceAnomaly::Flatline;
    if (s == "frequency-shift" || s == "frequency_shift") return SequenceAnomaly::FrequencyShift;
    if (s == "level-shift" || s == "level_shift") return SequenceAnomaly::LevelShift;
    fail("bad_spec", "unknown sequence anomaly type '" + s + "'");
}

inline double base_value(const SyntheticSpec& s, std::size_t variate, double t, double freq_scale = 1.0) {
    const double phase = static_cast<double>(variate) * std::numbers::pi / 3.0;
    const double w = 2.0 * std::numbers::pi / s.period * freq_scale;
    switch (s.base) {
        case BaseSignal::Sine: return s.amplitude * std::sin(w * t + phase);
        case BaseSignal::Composite:
            return s.amplitude * (std::sin(w * t + phase) + 0.5 * std::sin(2.7 * w * t + 2.0 * phase));
        case BaseSignal::Ramp: {
            const double u = t * freq_scale / s.period + static_cast<double>(variate) / 3.0;
            return s.amplitude * (2.0 * (u - std::floor(u)) - 1.0);
        }
    }
    return 0.0;
}

// Deterministic given the seed. Sequence anomalies are placed first, then
// point anomalies, all at least `min_separation` steps apart.
inline SyntheticSeries generate_synthetic(const SyntheticSpec& s) {
    require(s.length >= 1 && s.variates >= 1, "bad_spec", "length and variates must be >= 1");
    require(s.period > 0.0, "bad_spec", "period must be positive");
    require(s.sequence_count == 0 || !s.sequence_types.empty(), "bad_spec", "no sequence anomaly types given");
    require(s.sequence_count == 0 || !s.sequence_lengths.empty() ||
                (s.sequence_min_length >= 1 && s.sequence_min_length <= s.sequence_max_length),
            "bad_spec", "invalid sequence anomaly length range");
    const std::size_t usable = s.length > 2 * s.margin ? s.length - 2 * s.margin : 0;
    require(s.sequence_lengths.empty() || s.sequence_lengths.size() == s.sequence_count, "bad_spec",
            "sequence_lengths must list one length per sequence anomaly");
    for (auto l : s.sequence_lengths) require(l >= 1, "bad_spec", "sequence anomaly length must be >= 1");
    std::size_t budget = s.point_count * (1 + s.min_separation);
    for (std::size_t k = 0; k < s.sequence_count; ++k)
        budget += (s.sequence_lengths.empty() ? s.sequence_max_length : s.sequence_lengths[k]) + s.min_separation;
    if (budget > usable) fail("over_budget", "planted anomalies do not fit in the series");

    Rng rng(s.seed);
    Tensor clean(s.variates, s.length);
    for (std::size_t i = 0; i < s.variates; ++i)
        for (std::size_t t = 0; t < s.length; ++t) clean(i, t) = base_value(s, i, static_cast<double>(t));
    std::vector<double> sigma(s.variates, 1.0);
    for (std::size_t i = 0; i < s.variates; ++i) {
        double m = 0.0, v = 0.0;
        for (double x : clean.row(i)) m += x;
        m /= static_cast<double>(s.length);
        for (double x : clean.row(i)) v += (x - m) * (x - m);
        sigma[i] = std::max(std::sqrt(v / static_cast<double>(s.length)), 1e-12);
    }
    Tensor x = clean;
    if (s.noise > 0.0)
        for (double& v : x.data) v += s.noise * rng.normal();

    std::vector<AnomalyInterval> placed;
    auto free_at = [&](std::size_t a, std::size_t b) {
        for (const auto& p : placed)
            if (a <= p.end + s.min_separation && p.start <= b + s.min_separation) return false;
        return true;
    };
    auto place = [&](std::size_t len) -> AnomalyInterval {
        const std::size_t lo = s.margin, hi = s.length - s.margin - len;  // inclusive start range
        for (int attempt = 0; attempt < 100000; ++attempt) {
            const std::size_t a = lo + rng.index(hi - lo + 1);
            if (free_at(a, a + len - 1)) return {a, a + len - 1};
        }
        fail("over_budget", "could not place all anomalies without overlap");
    };

    for (std::size_t k = 0; k < s.sequence_count; ++k) {
        const std::size_t len = s.sequence_lengths.empty()
                                    ? s.sequence_min_length + rng.index(s.sequence_max_length - s.sequence_min_length + 1)
                                    : s.sequence_lengths[k];
        const auto iv = place(len);
        placed.push_back(iv);
        const auto type = s.sequence_types[k % s.sequence_types.size()];
        for (std::size_t i = 0; i < s.variates; ++i) {
            const double onset = x(i, iv.start);
            for (std::size_t t = iv.start; t <= iv.end; ++t) {
                switch (type) {
                    case SequenceAnomaly::Flatline: x(i, t) = onset; break;
                    case SequenceAnomaly::LevelShift: x(i, t) += 3.0 * sigma[i]; break;
                    case SequenceAnomaly::FrequencyShift: {
                        // Three times faster, phase-continuous at the onset.
                        const double t0 = static_cast<double>(iv.start);
                        const double tt = t0 / 3.0 + (static_cast<double>(t) - t0);
                        x(i, t) += base_value(s, i, tt, 3.0) - clean(i, t);
                        break;
                    }
                }
            }
        }
    }
    for (std::size_t k = 0; k < s.point_count; ++k) {
        const auto iv = place(1);
        placed.push_back(iv);
        const std::size_t i = rng.index(s.variates);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        x(i, iv.start) += sign * s.point_amplitude * sigma[i];
    }
    std::sort(placed.begin(), placed.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    auto labels = intervals_to_labels(placed, s.length);
    return {TimeSeries(std::move(x), std::move(labels), s.id), std::move(placed)};
}

inline SyntheticSpec synthetic_spec_from_json(const json& j) {
    SyntheticSpec s;
    if (j.contains("base")) s.base = parse_base_signal(j.at("base").get<std::string>());
    s.length = j.value("length", s.length);
    s.variates = j.value("variates", s.variates);
    s.period = j.value("period", s.period);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.noise = j.value("noise", s.noise);
    s.point_count = j.value("point_count", s.point_count);
    s.point_amplitude = j.value("point_amplitude", s.point_amplitude);
    s.sequence_count = j.value("sequence_count", s.sequence_count);
    s.sequence_min_length = j.value("sequence_min_length", s.sequence_min_length);
    s.sequence_max_length = j.value("sequence_max_length", s.sequence_max_length);
    s.sequence_lengths = j.value("sequence_lengths", s.sequence_lengths);
    if (j.contains("sequence_types")) {
        s.sequence_types.clear();
        for (const auto& t : j.at("sequence_types")) s.sequence_types.push_back(parse_sequence_anomaly(t.get<std::string>()));
    }
    s.margin = j.value("margin", s.margin);
    s.min_separation = j.value("min_separation", s.min_separation);
    s.seed = j.value("seed", s.seed);
    s.id = j.value("id", s.id);
    return s;
}

// ---------------------------------------------------------------------------
// Model checkpoints
//
// JSON document:
//   { "format": "imputad-checkpoint", "version": 1,
//     "config": {variates, window, levels, kernel, hidden, head},
//     "tensors": [{"name", "shape": [rows, cols], "data": [...]}, ...],
//     "normalization": {"mean": [...], "stddev": [...]}   (optional)
//     "threshold": number                                  (optional)
//     "scoring": {window, stride, point_groups, segments}  (optional) }
// Doubles are written with round-trip precision, so a reloaded model
// reproduces forward passes bit for bit.

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "imputad-checkpoint";

struct Checkpoint {
    ImputerModel model;
    std::optional<NormalizationStats> normalization;
    std::optional<double> threshold;
    std::optional<ScoringConfig> scoring;
};

inline json checkpoint_to_json(const Checkpoint& c) {
    const auto& cfg = c.model.config();
    json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["config"] = {{"variates", cfg.variates}, {"window", cfg.window},  {"levels", cfg.levels},
                   {"kernel", cfg.kernel},     {"hidden", cfg.hidden}, {"head", to_string(cfg.head)}};
    json tensors = json::array();
    const auto& p = c.model.parameters();
    for (std::size_t i = 0; i < p.tensors.size(); ++i)
        tensors.push_back({{"name", p.names[i]}, {"shape", {p.tensors[i].rows, p.tensors[i].cols}}, {"data", p.tensors[i].data}});
    j["tensors"] = std::move(tensors);
    if (c.normalization) j["normalization"] = {{"mean", c.normalization->mean}, {"stddev", c.normalization->stddev}};
    if (c.threshold) j["threshold"] = *c.threshold;
    if (c.scoring)
        j["scoring"] = {{"window", c.scoring->window},
                        {"stride", c.scoring->stride},
                        {"point_groups", c.scoring->point_groups},
                        {"segments", c.scoring->segments},
                        {"sequence_scoring", c.scoring->sequence_scoring == SequenceScoring::Dtw ? "dtw" : "residual"}};
    return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    try {
        if (j.value("format", "") != kCheckpointFormat) fail("bad_checkpoint", "not an imputad checkpoint");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion)
            fail("version_mismatch", "checkpoint version " + std::to_string(version) +
                                         " is not supported (this build reads version " +
                                         std::to_string(kCheckpointVersion) + ")");
        const auto& c = j.at("config");
        ImputerConfig cfg{c.at("variates").get<std::size_t>(), c.at("window").get<std::size_t>(),
                          c.at("levels").get<std::size_t>(),   c.at("kernel").get<std::size_t>(),
                          c.at("hidden").get<std::size_t>(),   parse_head(c.at("head").get<std::string>())};
        Parameters params;
        for (const auto& t : j.at("tensors")) {
            const auto rows = t.at("shape").at(0).get<std::size_t>(), cols = t.at("shape").at(1).get<std::size_t>();
            params.add(t.at("name").get<std::string>(), Tensor(rows, cols, t.at("data").get<std::vector<double>>()));
        }
        Checkpoint out{ImputerModel(cfg, std::move(params)), std::nullopt, std::nullopt, std::nullopt};
        if (j.contains("normalization")) {
            NormalizationStats st{j["normalization"].at("mean").get<std::vector<double>>(),
                                  j["normalization"].at("stddev").get<std::vector<double>>()};
            require(st.mean.size() == cfg.variates && st.stddev.size() == cfg.variates, "bad_checkpoint",
                    "normalization statistics do not match model dimension");
            out.normalization = std::move(st);
        }
        if (j.contains("threshold")) out.threshold = j["threshold"].get<double>();
        if (j.contains("scoring")) {
            const auto& s = j["scoring"];
            ScoringConfig sc;
            sc.window = s.value("window", sc.window);
            sc.stride = s.value("stride", sc.stride);
            sc.point_groups = s.value("point_groups", sc.point_groups);
            sc.segments = s.value("segments", sc.segments);
            sc.sequence_scoring = s.value("sequence_scoring", "dtw") == "residual" ? SequenceScoring::Residual
                                                                                  : SequenceScoring::Dtw;
            out.scoring = sc;
        }
        return out;
    } catch (const json::exception& e) {
        fail("bad_checkpoint", std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    auto out = detail::open_out(path);
    out << checkpoint_to_json(c).dump() << '\n';
    if (!out) fail("io_error", "failed writing '" + path + "'");
}

inline Checkpoint load_checkpoint(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail("bad_checkpoint", std::string("truncated or malformed checkpoint: ") + e.what());
    }
    return checkpoint_from_json(j);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    auto in = detail::open_in(path);
    return load_checkpoint(in);
}

// ---------------------------------------------------------------------------
// Result exports

inline void write_score_trace_csv(std::ostream& out, const AnomalyScoreTrace& tr) {
    out << std::setprecision(17);
    if (tr.mode == ScoreMode::Point || tr.windows.empty()) {
        out << "t,score,threshold,flag\n";
        for (std::size_t t = 0; t < tr.point_scores.size(); ++t)
            out << t << ',' << tr.point_scores[t] << ',' << tr.threshold << ','
                << (tr.point_scores[t] > tr.threshold ? 1 : 0) << '\n';
        return;
    }
    out << "window_start,window_end,dtw,threshold,flag\n";
    for (std::size_t k = 0; k < tr.windows.size(); ++k)
        out << tr.windows[k].start << ',' << tr.windows[k].end() << ',' << tr.window_scores[k] << ','
            << tr.threshold << ',' << (tr.window_scores[k] > tr.threshold ? 1 : 0) << '\n';
}

inline void write_score_trace_csv(const std::string& path, const AnomalyScoreTrace& tr) {
    auto out = detail::open_out(path);
    write_score_trace_csv(out, tr);
}

inline AnomalyScoreTrace read_score_trace_csv(const std::string& path) {
    auto in = detail::open_in(path);
    const auto t = read_csv_table(in);
    AnomalyScoreTrace tr;
    auto num = [&](std::size_t r, std::size_t c) { return detail::parse_number(t.rows[r][c], r + 1, t.header[c]); };
    if (t.header == std::vector<std::string>{"t", "score", "threshold", "flag"}) {
        tr.mode = ScoreMode::Point;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            tr.point_scores.push_back(num(r, 1));
            tr.threshold = num(r, 2);
        }
    } else if (t.header == std::vector<std::string>{"window_start", "window_end", "dtw", "threshold", "flag"}) {
        tr.mode = ScoreMode::Sequence;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto a = static_cast<std::size_t>(num(r, 0)), b = static_cast<std::size_t>(num(r, 1));
            require(a <= b, "bad_csv", "window end precedes start at row " + std::to_string(r + 1));
            tr.windows.push_back({a, b - a + 1});
            tr.window_scores.push_back(num(r, 2));
            tr.threshold = num(r, 3);
        }
    } else {
        fail("bad_csv", "'" + path + "' is not a score trace");
    }
    return tr;
}

// Per-timestep anomaly score from a trace: point scores directly, window
// scores as the maximum over the windows covering each step.
inline std::vector<double> per_timestep_scores(const AnomalyScoreTrace& tr, std::size_t length) {
    if (tr.mode == ScoreMode::Point || tr.windows.empty()) {
        require(tr.point_scores.size() == length, "length_mismatch", "score trace length does not match series");
        return tr.point_scores;
    }
    std::vector<double> s(length, 0.0);
    for (std::size_t k = 0; k < tr.windows.size(); ++k)
        for (std::size_t t = tr.windows[k].start; t <= tr.windows[k].end() && t < length; ++t)
            s[t] = std::max(s[t], tr.window_scores[k]);
    return s;
}

inline void write_intervals_csv(std::ostream& out, const std::string& series_id,
                                const std::vector<AnomalyInterval>& intervals, const std::vector<double>& peaks) {
    out << std::setprecision(17) << "series_id,start,end,peak_score\n";
    for (std::size_t i = 0; i < intervals.size(); ++i)
        out << series_id << ',' << intervals[i].start << ',' << intervals[i].end << ','
            << (i < peaks.size() ? peaks[i] : 0.0) << '\n';
}

inline void write_intervals_csv(const std::string& path, const std::string& series_id,
                                const std::vector<AnomalyInterval>& intervals, const std::vector<double>& peaks) {
    auto out = detail::open_out(path);
    write_intervals_csv(out, series_id, intervals, peaks);
}

struct IntervalRecord {
    std::string series_id;
    AnomalyInterval interval;
    double peak_score = 0.0;
};

inline std::vector<IntervalRecord> read_intervals_csv(const std::string& path) {
    auto in = detail::open_in(path);
    const auto t = read_csv_table(in);
    if (t.header != std::vector<std::string>{"series_id", "start", "end", "peak_score"})
        fail("bad_csv", "'" + path + "' is not an interval file");
    std::vector<IntervalRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto a = detail::parse_number(t.rows[r][1], r + 1, "start");
        const auto b = detail::parse_number(t.rows[r][2], r + 1, "end");
        require(a >= 0 && b >= a, "bad_csv", "invalid interval at row " + std::to_string(r + 1));
        out.push_back({t.rows[r][0], {static_cast<std::size_t>(a), static_cast<std::size_t>(b)},
                       detail::parse_number(t.rows[r][3], r + 1, "peak_score")});
    }
    return out;
}

struct MetricsReport {
    ConfusionCounts counts;
    PrecisionRecall point;
    std::optional<double> auroc_value, auprc_value;
    IntervalMatch intervals;
    bool point_adjusted = false;
};

inline MetricsReport evaluate(const std::vector<AnomalyInterval>& detected, const Labels& truth,
                              const std::optional<std::vector<double>>& scores = std::nullopt,
                              bool use_point_adjust = false) {
    MetricsReport m;
    Labels pred = intervals_to_labels(detected, truth.size());
    if (use_point_adjust) pred = point_adjust(pred, truth);
    m.point_adjusted = use_point_adjust;
    m.counts = confusion(pred, truth);
    m.point = prf(m.counts);
    m.intervals = match_intervals(detected, labels_to_intervals(truth));
    if (scores) {
        const auto pos = std::count(truth.begin(), truth.end(), 1);
        if (pos > 0 && static_cast<std::size_t>(pos) < truth.size()) {
            m.auroc_value = auroc(*scores, truth);
            m.auprc_value = auprc(*scores, truth);
        }
    }
    return m;
}

inline json metrics_to_json(const MetricsReport& m) {
    json j = {{"precision", m.point.precision},
              {"recall", m.point.recall},
              {"f1", m.point.f1},
              {"auroc", m.auroc_value ? json(*m.auroc_value) : json(nullptr)},
              {"auprc", m.auprc_value ? json(*m.auprc_value) : json(nullptr)},
              {"tp", m.counts.tp},
              {"fp", m.counts.fp},
              {"fn", m.counts.fn},
              {"tn", m.counts.tn},
              {"point_adjust", m.point_adjusted},
              {"interval_precision", m.intervals.precision()},
              {"interval_recall", m.intervals.recall()},
              {"interval_f1", m.intervals.f1()}};
    return j;
}

// Long-form rows (x, series, value) for plotting a score trace.
inline void write_plotdata_csv(std::ostream& out, const AnomalyScoreTrace& tr) {
    out << std::setprecision(17) << "x,series,value\n";
    if (tr.mode == ScoreMode::Point || tr.windows.empty()) {
        for (std::size_t t = 0; t < tr.point_scores.size(); ++t) {
            out << t << ",score," << tr.point_scores[t] << '\n';
            out << t << ",threshold," << tr.threshold << '\n';
            out << t << ",flag," << (tr.point_scores[t] > tr.threshold ? 1 : 0) << '\n';
        }
        return;
    }
    for (std::size_t k = 0; k < tr.windows.size(); ++k) {
        const auto x = tr.windows[k].end();
        out << x << ",dtw," << tr.window_scores[k] << '\n';
        out << x << ",threshold," << tr.threshold << '\n';
        out << x << ",flag," << (tr.window_scores[k] > tr.threshold ? 1 : 0) << '\n';
    }
}

}  // namespace imputad
