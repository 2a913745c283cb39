// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass criterion numbers to run a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "imputad/imputad.hpp"
#include "oracles.hpp"

using namespace imputad;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

std::vector<Tensor> all_sequences(std::size_t n) {
    std::vector<Tensor> out;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
        Tensor t(1, n);
        for (std::size_t i = 0, c = code; i < n; ++i, c /= 3) t.data[i] = static_cast<double>(c % 3);
        out.push_back(std::move(t));
    }
    return out;
}

// ---- 1. gradient oracle ----------------------------------------------------

Outcome gradient_oracle() {
    Rng rng(101);
    oracle::GradientCheck worst;
    for (int inst = 0; inst < 5; ++inst) {
        const std::size_t d = 1 + inst % 2;
        const Head head = inst % 2 == 0 ? Head::Reconstruction : Head::Bidirectional;
        ImputerModel model({d, 32, 2, 3, 2, head}, 500 + inst);
        // Perturb every tensor so biases and the decoder are not at their
        // initial values.
        for (auto& t : model.parameters().tensors)
            for (double& v : t.data) v += 0.1 * rng.normal();
        const Tensor x = oracle::random_tensor(rng, d, 32);
        const Tensor c = oracle::random_tensor(rng, d, 32);
        const auto r = oracle::check_gradients(model, x, c, 1e-4, [&](std::size_t, std::size_t e) { return e % 3 == 0; });
        worst.checked += r.checked;
        if (r.worst >= worst.worst) {
            worst.worst = r.worst;
            worst.worst_name = r.worst_name;
        }
    }
    return {worst.worst < 1e-4, std::to_string(worst.checked) + " entries, worst relative error " + fmt(worst.worst) +
                                    " at " + worst.worst_name};
}

// ---- 2. DTW oracle -----------------------------------------------------------

Outcome dtw_oracle() {
    std::vector<Tensor> seqs;
    for (std::size_t n = 1; n <= 6; ++n)
        for (auto& s : all_sequences(n)) seqs.push_back(std::move(s));
    std::size_t pairs = 0, mismatches = 0;
    for (const auto& a : seqs)
        for (const auto& b : seqs) {
            ++pairs;
            if (dtw_distance(a, b) != oracle::dtw_by_paths(a, b)) ++mismatches;
        }
    return {mismatches == 0, std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches"};
}

// ---- 3. masking partition ----------------------------------------------------

Outcome masking_partition() {
    Rng rng(303);
    std::size_t failures = 0;
    std::string first;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t d = 1 + rng.index(4), T = 1 + rng.index(256);
        const std::size_t M = 1 + rng.index(std::min<std::size_t>(d * T, 64));
        const std::size_t N = 1 + rng.index(std::min<std::size_t>(T, 32));
        auto e1 = oracle::point_partition_error(make_point_masks(d, T, M, rng.next()), M);
        auto e2 = oracle::sequence_partition_error(make_sequence_masks(T, N), N);
        if (!e1.empty() || !e2.empty()) {
            ++failures;
            if (first.empty()) first = e1.empty() ? e2 : e1;
        }
    }
    return {failures == 0, "1000 configurations, " + std::to_string(failures) + " failures" +
                               (first.empty() ? "" : " (" + first + ")")};
}

// ---- 4 and 7. point benchmark and training sanity ---------------------------

SyntheticSpec point_base(std::uint64_t seed) {
    SyntheticSpec s;
    s.length = 4096;
    s.variates = 2;
    s.period = 50;
    s.noise = 0.02;
    s.seed = seed;
    return s;
}

TrainConfig point_train_config(std::size_t epochs) {
    TrainConfig tc;
    tc.head = Head::Reconstruction;
    tc.epochs = epochs;
    tc.window = 64;
    tc.stride = 32;
    tc.mask_count = 8;
    tc.seed = 1;
    return tc;
}

struct PointBenchmark {
    NormalizationStats stats;
    TimeSeries train;
    TrainResult result{ImputerModel({}, 0), {}};
};

PointBenchmark& point_benchmark() {
    static PointBenchmark* b = [] {
        auto* p = new PointBenchmark;
        auto raw = generate_synthetic(point_base(11)).series;
        p->stats = fit_normalizer(raw);
        p->train = normalize(raw, p->stats);
        p->result = train({p->train}, point_train_config(100));
        return p;
    }();
    return *b;
}

Outcome point_detection() {
    auto& b = point_benchmark();
    const auto calibration = normalize(generate_synthetic(point_base(12)).series, b.stats);
    auto spec = point_base(13);
    spec.point_count = 20;
    spec.point_amplitude = 6.0;
    spec.margin = 32;
    spec.min_separation = 16;
    const auto test = normalize(generate_synthetic(spec).series, b.stats);

    ScoringConfig sc;
    const double lambda = calibrate_threshold(b.result.model, {calibration}, sc);
    const auto det = detect_points(test, b.result.model, lambda, sc);
    const auto m = evaluate(det.intervals, *test.labels());
    return {m.point.f1 >= 0.90, "F1 " + fmt(m.point.f1) + " (P " + fmt(m.point.precision) + ", R " +
                                    fmt(m.point.recall) + "), lambda " + fmt(lambda)};
}

Outcome training_sanity() {
    auto& b = point_benchmark();
    const auto& h = b.result.report.history;
    const double initial = h.at(0).train_loss, at50 = h.at(50).train_loss;
    const bool halved = at50 < 0.5 * initial;

    const auto tc = point_train_config(2);
    const auto first = checkpoint_to_json({train({b.train}, tc).model, b.stats, {}, {}}).dump();
    const auto second = checkpoint_to_json({train({b.train}, tc).model, b.stats, {}, {}}).dump();
    const bool identical = first == second;
    return {halved && identical, "loss " + fmt(initial) + " -> " + fmt(at50) + " at epoch 50; identical seeds " +
                                     (identical ? "give identical" : "give DIFFERENT") + " checkpoints"};
}

// ---- 5 and 6. sequence benchmark and ablations ------------------------------

struct SequenceBenchmark {
    TimeSeries calibration, test;
    std::vector<AnomalyInterval> truth;
    TrainResult result{ImputerModel({}, 0), {}};
};

SequenceBenchmark& sequence_benchmark() {
    static SequenceBenchmark* b = [] {
        auto* p = new SequenceBenchmark;
        SyntheticSpec s;
        s.length = 4096;
        s.variates = 1;
        s.period = 50;
        s.noise = 0.02;
        s.seed = 21;
        auto raw = generate_synthetic(s).series;
        const auto stats = fit_normalizer(raw);

        s.seed = 22;
        s.length = 8192;
        p->calibration = normalize(generate_synthetic(s).series, stats);

        s.seed = 23;
        s.length = 4096;
        s.sequence_count = 6;
        s.sequence_min_length = 20;
        s.sequence_max_length = 60;
        s.sequence_types = {SequenceAnomaly::Flatline, SequenceAnomaly::FrequencyShift};
        s.margin = 64;
        s.min_separation = 128;
        auto planted = generate_synthetic(s);
        p->test = normalize(planted.series, stats);
        p->truth = planted.truth;

        TrainConfig tc;
        tc.head = Head::Bidirectional;
        tc.epochs = 50;
        tc.window = 64;
        tc.stride = 32;
        tc.mask_count = 8;
        p->result = train({normalize(raw, stats)}, tc);
        return p;
    }();
    return *b;
}

DetectionConfig sequence_config() {
    DetectionConfig dc;
    dc.scoring.window = 64;
    dc.scoring.stride = 8;
    dc.scoring.segments = 8;
    return dc;
}

DetectionResult run_sequence(const DetectionConfig& dc) {
    auto& b = sequence_benchmark();
    const double lambda = calibrate_threshold(b.result.model, {b.calibration}, dc.scoring);
    return detect_sequences(b.test, b.result.model, lambda, dc);
}

Outcome sequence_detection() {
    auto& b = sequence_benchmark();
    const auto dc = sequence_config();
    const auto det = run_sequence(dc);
    const auto match = match_intervals(det.intervals, b.truth);
    std::size_t worst = 0;
    bool all_matched = true;
    for (const auto& t : b.truth) {
        const AnomalyInterval* hit = nullptr;
        for (const auto& d : det.intervals)
            if (d.start <= t.end && t.start <= d.end) {
                hit = &d;
                break;
            }
        if (!hit) {
            all_matched = false;
            continue;
        }
        auto dev = [](std::size_t a, std::size_t c) { return a > c ? a - c : c - a; };
        worst = std::max({worst, dev(hit->start, t.start), dev(hit->end, t.end)});
    }
    const bool pass = match.recall() == 1.0 && match.precision() >= 0.8 && all_matched && worst <= dc.scoring.stride;
    return {pass, "interval recall " + fmt(match.recall()) + ", interval precision " + fmt(match.precision()) +
                      ", worst boundary deviation " + std::to_string(worst) + " (" +
                      std::to_string(det.intervals.size()) + " intervals)"};
}

Outcome ablation_direction() {
    auto& b = sequence_benchmark();
    const Labels& truth = *b.test.labels();
    auto f1_of = [&](const DetectionConfig& dc) { return evaluate(run_sequence(dc).intervals, truth).point.f1; };
    auto full = sequence_config();
    auto no_loc = full;
    no_loc.localization = false;
    auto residual = full;
    residual.scoring.sequence_scoring = SequenceScoring::Residual;
    const double f_full = f1_of(full), f_noloc = f1_of(no_loc), f_res = f1_of(residual);
    return {f_full >= f_res && f_full >= f_noloc, "F1 DTW+localization " + fmt(f_full) + ", residual-only " +
                                                      fmt(f_res) + ", without localization " + fmt(f_noloc)};
}

// ---- 8. metric oracles -------------------------------------------------------

Outcome metric_oracles() {
    Rng rng(808);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        std::vector<double> s(50);
        Labels y(50);
        for (std::size_t i = 0; i < 50; ++i) {
            s[i] = k % 2 ? static_cast<double>(rng.index(5)) : rng.uniform();
            y[i] = rng.uniform() < 0.3;
        }
        y[0] = 1;
        y[1] = 0;
        worst = std::max({worst, std::fabs(auroc(s, y) - oracle::auroc_by_pairs(s, y)),
                          std::fabs(auprc(s, y) - oracle::auprc_by_thresholds(s, y))});
    }
    // Fixed tables: (tp, fp, fn) -> P, R, F1 by hand.
    struct Row {
        std::size_t tp, fp, fn;
        double p, r, f;
    };
    const Row rows[] = {{2, 1, 1, 2.0 / 3, 2.0 / 3, 2.0 / 3},
                        {3, 1, 2, 0.75, 0.6, 2.0 / 3},
                        {0, 4, 4, 0.0, 0.0, 0.0},
                        {5, 0, 0, 1.0, 1.0, 1.0}};
    bool hand = true;
    for (const auto& r : rows) {
        const auto m = prf(r.tp, r.fp, r.fn);
        hand &= std::fabs(m.precision - r.p) < 1e-15 && std::fabs(m.recall - r.r) < 1e-15 &&
                std::fabs(m.f1 - r.f) < 1e-15;
    }
    return {worst <= 1e-12 && hand, "worst AUROC/AUPRC deviation " + fmt(worst) + ", hand P/R/F1 " +
                                        (hand ? "match" : "MISMATCH")};
}

// ---- 9. persistence ----------------------------------------------------------

Outcome persistence() {
    const auto path = (std::filesystem::temp_directory_path() / "imputad_acceptance_ckpt.json").string();
    Rng rng(909);
    bool same = true;
    for (Head h : {Head::Reconstruction, Head::Bidirectional}) {
        ImputerModel m({2, 64, 2, 5, 4, h}, 4242);
        for (auto& t : m.parameters().tensors)
            for (double& v : t.data) v += 0.05 * rng.normal();
        save_checkpoint(path, {m, {}, 0.5, {}});
        const auto back = load_checkpoint(path);
        const Tensor probe = oracle::random_tensor(rng, 2, m.padded_length());
        for (std::size_t net = 0; net < m.net_count(); ++net) same &= back.model.forward(probe, net) == m.forward(probe, net);
    }
    std::filesystem::remove(path);
    return {same, same ? "forward passes bit-identical for both heads" : "forward passes differ"};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    // Benchmark budgets include the shared training run they trigger.
    const std::vector<Criterion> criteria = {
        {1, "gradient oracle", 60, gradient_oracle},
        {2, "DTW oracle", 60, dtw_oracle},
        {3, "masking partition", 10, masking_partition},
        {4, "point benchmark", 600, point_detection},
        {5, "sequence benchmark", 900, sequence_detection},
        {6, "ablation direction", 900, ablation_direction},
        {7, "training sanity", 600, training_sanity},
        {8, "metric oracles", 60, metric_oracles},
        {9, "persistence", 60, persistence},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed = seconds_since(t0);
        const bool in_time = elapsed < c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << "; "
                  << fmt(elapsed) << " s (limit " << c.budget_s << " s)" << (in_time ? "" : " OVER TIME") << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
    return failed ? 1 : 0;
}
