// imputad command-line interface.
//
//   imputad train    --config c.json
//   imputad detect   --model m.json --input x.csv --mode point|sequence
//   imputad localize --model m.json --input x.csv
//   imputad eval     --pred p.csv --truth x.csv
//   imputad synth    --spec s.json --output x.csv
//   imputad plotdata --scores s.csv
//
// Errors are reported on stderr as {"error": code, "message": text} with a
// nonzero exit status.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "imputad/imputad.hpp"

using namespace imputad;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    auto in = detail::open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail("bad_config", "cannot parse '" + path + "': " + e.what());
    }
}

void write_json(const json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("head")) c.head = parse_head(j["head"].get<std::string>());
    c.mask_count = j.value("mask_count", c.mask_count);
    c.window = j.value("window", c.window);
    c.stride = j.value("stride", c.stride);
    c.levels = j.value("levels", c.levels);
    c.kernel = j.value("kernel", c.kernel);
    c.hidden = j.value("hidden", c.hidden);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.workers = j.value("workers", c.workers);
    return c;
}

ScoringConfig scoring_from_json(const json& j, const TrainConfig& tc) {
    ScoringConfig s;
    s.window = j.value("window", tc.window);
    s.stride = j.value("stride", s.stride);
    s.point_groups = j.value("point_groups", s.point_groups);
    s.segments = j.value("segments", tc.head == Head::Bidirectional ? tc.mask_count : s.segments);
    s.refine_passes = j.value("refine_passes", s.refine_passes);
    s.workers = tc.workers;
    if (j.contains("sequence_scoring"))
        s.sequence_scoring = j["sequence_scoring"] == "residual" ? SequenceScoring::Residual : SequenceScoring::Dtw;
    return s;
}

// Loads the training data named by a train config: a CSV file or a
// synthetic spec, split chronologically into train/validation/test.
Dataset dataset_from_json(const json& j) {
    DatasetSpec spec;
    spec.train_fraction = j.value("train_fraction", spec.train_fraction);
    spec.validation_fraction = j.value("validation_fraction", spec.validation_fraction);
    spec.test_fraction = j.value("test_fraction", spec.test_fraction);
    spec.normalize = j.value("normalize", spec.normalize);
    if (j.contains("synthetic")) return split_dataset(generate_synthetic(synthetic_spec_from_json(j["synthetic"])).series, spec);
    require(j.contains("path"), "bad_config", "data section needs 'path' or 'synthetic'");
    spec.path = j["path"].get<std::string>();
    if (j.contains("label_column")) spec.label_column = j["label_column"].get<std::string>();
    return load_csv(spec);
}

int run_train(const std::string& config_path, const std::string& output_override, bool quiet) {
    const json cfg = read_json_file(config_path);
    require(cfg.contains("data"), "bad_config", "config needs a 'data' section");
    const TrainConfig tc = train_config_from_json(cfg.value("train", json::object()));
    const ScoringConfig sc = scoring_from_json(cfg.value("scoring", json::object()), tc);
    const std::string output = output_override.empty() ? cfg.value("output", std::string("model.json")) : output_override;

    const Dataset ds = dataset_from_json(cfg["data"]);
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';

    auto result = train({ds.train}, tc, [&](const EpochStats& e) {
        if (!quiet)
            std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " validation " << e.validation_loss << '\n';
    });
    const double lambda = calibrate_threshold(result.model, {ds.validation}, sc);
    save_checkpoint(output, {result.model, ds.normalization, lambda, sc});

    json summary = {{"model", output},
                    {"head", to_string(tc.head)},
                    {"epochs", tc.epochs},
                    {"best_epoch", result.report.best_epoch},
                    {"initial_train_loss", result.report.initial_train_loss()},
                    {"final_train_loss", result.report.final_train_loss()},
                    {"threshold", lambda}};
    json history = json::array();
    for (const auto& e : result.report.history)
        history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_loss", e.validation_loss}});
    summary["history"] = std::move(history);
    write_json(summary, cfg.value("report", std::string("-")));
    return 0;
}

struct DetectOptions {
    std::string model, input, mode, label_column, scores_out, intervals_out, metrics_out, series_id = "series";
    std::optional<double> threshold;
    std::optional<std::size_t> window, stride;
    bool no_localization = false;
    std::string scoring;  // dtw | residual; empty keeps the checkpoint's choice
};

int run_detect(const DetectOptions& o) {
    const Checkpoint ckpt = load_checkpoint(o.model);
    const ScoreMode mode = o.mode.empty() ? (ckpt.model.head() == Head::Bidirectional ? ScoreMode::Sequence
                                                                                      : ScoreMode::Point)
                                          : parse_mode(o.mode);
    TimeSeries x = o.label_column.empty() ? read_series_csv_auto(o.input) : read_series_csv(o.input, o.label_column);
    if (ckpt.normalization) x = normalize(x, *ckpt.normalization);

    ScoringConfig sc = ckpt.scoring.value_or(ScoringConfig{});
    if (o.window) sc.window = *o.window;
    if (o.stride) sc.stride = *o.stride;
    if (o.scoring == "residual") sc.sequence_scoring = SequenceScoring::Residual;
    else if (o.scoring == "dtw") sc.sequence_scoring = SequenceScoring::Dtw;
    else if (!o.scoring.empty()) fail("bad_option", "unknown scoring '" + o.scoring + "' (expected dtw or residual)");

    require(o.threshold || ckpt.threshold, "no_threshold", "checkpoint has no calibrated threshold; pass --threshold");
    const double lambda = o.threshold ? *o.threshold : *ckpt.threshold;

    DetectionResult det;
    if (mode == ScoreMode::Point) {
        det = detect_points(x, ckpt.model, lambda, sc);
    } else {
        DetectionConfig dc;
        dc.scoring = sc;
        dc.localization = !o.no_localization;
        det = detect_sequences(x, ckpt.model, lambda, dc);
    }

    if (!o.scores_out.empty()) write_score_trace_csv(o.scores_out, det.trace);
    if (!o.intervals_out.empty()) write_intervals_csv(o.intervals_out, o.series_id, det.intervals, det.peak_scores);

    json intervals = json::array();
    for (std::size_t k = 0; k < det.intervals.size(); ++k)
        intervals.push_back({{"start", det.intervals[k].start},
                             {"end", det.intervals[k].end},
                             {"peak_score", det.peak_scores[k]}});
    json out = {{"mode", to_string(mode)}, {"threshold", lambda}, {"intervals", std::move(intervals)}};
    if (x.labels()) {
        const auto scores = mode == ScoreMode::Point ? det.trace.point_scores
                                                     : per_timestep_scores(det.trace, x.length());
        const auto m = evaluate(det.intervals, *x.labels(), scores);
        out["metrics"] = metrics_to_json(m);
        if (!o.metrics_out.empty()) write_json(metrics_to_json(m), o.metrics_out);
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int run_eval(const std::string& pred, const std::string& truth_path, const std::string& label_column,
             const std::string& scores_path, bool use_point_adjust, const std::string& output) {
    const TimeSeries truth = read_series_csv(truth_path, label_column);
    std::vector<AnomalyInterval> detected;
    for (const auto& r : read_intervals_csv(pred)) {
        require(r.interval.end < truth.length(), "out_of_range",
                "predicted interval " + std::to_string(r.interval.start) + ".." + std::to_string(r.interval.end) +
                    " exceeds series length " + std::to_string(truth.length()));
        detected.push_back(r.interval);
    }
    std::optional<std::vector<double>> scores;
    if (!scores_path.empty()) {
        scores = per_timestep_scores(read_score_trace_csv(scores_path), truth.length());
        require(scores->size() == truth.length(), "length_mismatch", "score trace length differs from series length");
    }
    write_json(metrics_to_json(evaluate(detected, *truth.labels(), scores, use_point_adjust)), output);
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& output, const std::string& truth_out) {
    const auto s = generate_synthetic(synthetic_spec_from_json(read_json_file(spec_path)));
    write_series_csv(output, s.series);
    if (!truth_out.empty()) write_intervals_csv(truth_out, s.series.id(), s.truth, std::vector<double>(s.truth.size(), 0.0));
    std::cout << json{{"output", output}, {"length", s.series.length()}, {"anomalies", s.truth.size()}}.dump() << '\n';
    return 0;
}

int run_plotdata(const std::string& scores_path, const std::string& output) {
    const auto trace = read_score_trace_csv(scores_path);
    if (output.empty() || output == "-") {
        write_plotdata_csv(std::cout, trace);
    } else {
        auto out = detail::open_out(output);
        write_plotdata_csv(out, trace);
    }
    return 0;
}

void report_error(const std::string& code, const std::string& message) {
    std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"imputad: self-imputation anomaly detection for time series"};
    app.require_subcommand(1);

    std::string config, train_output;
    bool quiet = false;
    auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
    train_cmd->add_option("--config", config, "training config (JSON)")->required();
    train_cmd->add_option("--output", train_output, "checkpoint path (overrides the config)");
    train_cmd->add_flag("--quiet", quiet, "suppress per-epoch progress");

    DetectOptions det;
    auto add_detect_options = [&](CLI::App* cmd) {
        cmd->add_option("--model", det.model, "checkpoint path")->required();
        cmd->add_option("--input", det.input, "series CSV")->required();
        cmd->add_option("--label-column", det.label_column, "label column (default: 'label' if present)");
        cmd->add_option("--threshold", det.threshold, "override the calibrated threshold");
        cmd->add_option("--window", det.window, "scoring window length");
        cmd->add_option("--stride", det.stride, "scoring stride");
        cmd->add_option("--scores", det.scores_out, "write the score trace CSV");
        cmd->add_option("--intervals", det.intervals_out, "write detected intervals CSV");
        cmd->add_option("--metrics", det.metrics_out, "write metrics JSON (labeled input only)");
        cmd->add_option("--series-id", det.series_id, "series id for the intervals CSV");
        cmd->add_flag("--no-localization", det.no_localization, "report flagged windows whole (sequence mode)");
        cmd->add_option("--scoring", det.scoring, "sequence scoring: dtw or residual");
    };
    auto* detect_cmd = app.add_subcommand("detect", "score a series and report anomalies");
    add_detect_options(detect_cmd);
    detect_cmd->add_option("--mode", det.mode, "point or sequence (default: from the model head)");
    auto* localize_cmd = app.add_subcommand("localize", "sequence detection with boundary localization");
    add_detect_options(localize_cmd);

    std::string pred, truth, truth_label = "label", eval_scores, eval_output;
    bool use_point_adjust = false;
    auto* eval_cmd = app.add_subcommand("eval", "compare predicted intervals with labels");
    eval_cmd->add_option("--pred", pred, "intervals CSV")->required();
    eval_cmd->add_option("--truth", truth, "labeled series CSV")->required();
    eval_cmd->add_option("--label-column", truth_label, "label column");
    eval_cmd->add_option("--scores", eval_scores, "score trace CSV for AUROC/AUPRC");
    eval_cmd->add_flag("--point-adjust", use_point_adjust, "apply point adjustment before counting");
    eval_cmd->add_option("--output", eval_output, "metrics JSON path (default stdout)");

    std::string spec, synth_output, synth_truth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic series with planted anomalies");
    synth_cmd->add_option("--spec", spec, "synthetic spec (JSON)")->required();
    synth_cmd->add_option("--output", synth_output, "series CSV path")->required();
    synth_cmd->add_option("--truth", synth_truth, "ground-truth intervals CSV path");

    std::string plot_scores, plot_output;
    auto* plot_cmd = app.add_subcommand("plotdata", "long-form CSV of a score trace for plotting");
    plot_cmd->add_option("--scores", plot_scores, "score trace CSV")->required();
    plot_cmd->add_option("--output", plot_output, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("usage", e.what());
        return 2;
    }

    try {
        if (*train_cmd) return run_train(config, train_output, quiet);
        if (*detect_cmd) return run_detect(det);
        if (*localize_cmd) {
            det.mode = "sequence";
            return run_detect(det);
        }
        if (*eval_cmd) return run_eval(pred, truth, truth_label, eval_scores, use_point_adjust, eval_output);
        if (*synth_cmd) return run_synth(spec, synth_output, synth_truth);
        if (*plot_cmd) return run_plotdata(plot_scores, plot_output);
    } catch (const Error& e) {
        report_error(e.code(), e.what());
        return 1;
    } catch (const std::exception& e) {
        report_error("internal", e.what());
        return 1;
    }
    return 1;
}
