// wsipat: whole-slide histologic pattern toolkit.
//
// Subcommands wire the library into the slide pipeline: tile, stats,
// calibrate, infer, evaluate, visualize, synth. Exit codes: 0 success,
// 2 unreadable input, 3 malformed input or configuration, 4 worker failure.

#include "wsipat/calibration.hpp"
#include "wsipat/classifier.hpp"
#include "wsipat/core.hpp"
#include "wsipat/formats.hpp"
#include "wsipat/image.hpp"
#include "wsipat/inference.hpp"
#include "wsipat/log.hpp"
#include "wsipat/metrics.hpp"
#include "wsipat/preprocess.hpp"
#include "wsipat/synth.hpp"
#include "wsipat/tiler.hpp"
#include "wsipat/visualizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

namespace fs = std::filesystem;
using namespace wsipat;

namespace {

constexpr int kExitUnreadable = 2;
constexpr int kExitBadInput = 3;
constexpr int kExitWorker = 4;

struct RunConfig {
    TilerConfig tiler = TilerConfig::with_overlap(224, 0.2);
    AggregationConfig aggregation;
    ClassifierHandle classifier{OracleConfig{}};
    GridSpec grid = GridSpec::with_step();
    Palette palette;
    double visualize_scale = 0.25;
};

RunConfig parse_run_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad --config JSON: " + std::string(e.what()));
    }
    RunConfig cfg;
    try {
        if (j.contains("tiler")) {
            const auto& t = j["tiler"];
            const int window = t.value("window", 224);
            if (t.contains("stride") && !t["stride"].is_null()) {
                cfg.tiler = TilerConfig::with_stride(window, t["stride"].get<int>(),
                                                     t.value("clamp_final", true));
            } else {
                cfg.tiler = TilerConfig::with_overlap(window, t.value("overlap_fraction", 0.2),
                                                      t.value("clamp_final", true));
            }
            if (t.contains("bright_skip_luminance") && !t["bright_skip_luminance"].is_null()) {
                cfg.tiler.bright_skip_luminance = t["bright_skip_luminance"].get<double>();
            }
        }
        if (j.contains("aggregation")) {
            const auto& a = j["aggregation"];
            cfg.aggregation.minor_floor = a.value("minor_floor", 0.05);
            cfg.aggregation.drop_benign = a.value("drop_benign", true);
            cfg.aggregation.benign_in_denominator = a.value("benign_in_denominator", true);
            if (!(cfg.aggregation.minor_floor >= 0.0 && cfg.aggregation.minor_floor < 1.0)) {
                throw FormatError("minor_floor must lie in [0,1)");
            }
        }
        if (j.contains("classifier")) {
            const auto& c = j["classifier"];
            const std::string kind = c.value("kind", "oracle");
            if (kind == "oracle") {
                OracleConfig oc;
                oc.noise_rate = c.value("noise_rate", 0.0);
                oc.confidence = c.value("confidence", 0.9);
                oc.low_conf_max = c.value("low_conf_max", 0.3);
                oc.low_conf_levels = c.value("low_conf_levels", 8);
                oc.seed = c.value("seed", std::uint64_t{0});
                oc.batch_size = c.value("batch_size", 256);
                cfg.classifier = ClassifierHandle{oc};
            } else if (kind == "worker") {
                WorkerConfig wc;
                if (!c.contains("command") || !c["command"].is_array() || c["command"].empty()) {
                    throw FormatError("worker classifier needs a non-empty command array");
                }
                for (const auto& a : c["command"]) {
                    wc.command.push_back(a.get<std::string>());
                }
                wc.batch_size = c.value("batch_size", 32);
                wc.timeout_seconds = c.value("timeout_seconds", 30.0);
                cfg.classifier = ClassifierHandle{wc};
            } else {
                throw FormatError("classifier kind must be \"oracle\" or \"worker\"");
            }
        }
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            if (g.contains("values") && !g["values"].is_null()) {
                cfg.grid.values = g["values"].get<std::vector<double>>();
            } else {
                cfg.grid = GridSpec::with_step(g.value("step", 0.05), g.value("max_value", 0.95));
            }
            cfg.grid.passes = g.value("passes", 2);
        }
        if (j.contains("visualizer")) {
            const auto& v = j["visualizer"];
            cfg.visualize_scale = v.value("scale", 0.25);
            cfg.palette.dot_radius_fraction = v.value("dot_radius_fraction", 0.3);
            cfg.palette.draw_benign = v.value("draw_benign", false);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad --config JSON: " + std::string(e.what()));
    }
    return cfg;
}

struct GlobalOptions {
    std::string config_path;
    std::string output_dir = ".";
    int parallelism = 1;
    std::uint64_t seed = 0;
    bool seed_set = false;

    RunConfig load() const {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg = parse_run_config(read_text_file(config_path));
        }
        if (seed_set) {
            if (auto* oc = std::get_if<OracleConfig>(&cfg.classifier.config)) {
                oc->seed = seed;
            }
        }
        return cfg;
    }
};

std::string out_path(const GlobalOptions& g, const std::string& name) {
    return (fs::path(g.output_dir) / name).string();
}

// ---------------------------------------------------------------------------
// tile
// ---------------------------------------------------------------------------

int cmd_tile(const GlobalOptions& g, const std::string& manifest_path) {
    const RunConfig cfg = g.load();
    const std::vector<ManifestEntry> manifest = read_manifest(manifest_path);
    if (manifest.empty()) {
        throw FormatError(manifest_path + ": manifest has no rows");
    }

    std::vector<std::string> written;
    std::vector<double> counts;
    try {
        for (const ManifestEntry& e : manifest) {
            const Image slide = load_image(e.path);
            const std::vector<PatchGeometry> grid =
                tile_region(slide.width(), slide.height(), cfg.tiler);
            const std::string path = out_path(g, e.slide_id + "_patches.csv");
            atomic_write_file(path, patch_coords_csv(e.slide_id, grid));
            written.push_back(path);
            counts.push_back(static_cast<double>(grid.size()));
            log_debug("tiled " + e.slide_id + ": " + std::to_string(grid.size()) + " patches");
        }
    } catch (...) {
        for (const std::string& path : written) {
            std::error_code ec;
            fs::remove(path, ec);
        }
        throw;
    }

    double mean = 0.0;
    for (double c : counts) {
        mean += c;
    }
    mean /= static_cast<double>(counts.size());
    double var = 0.0;
    for (double c : counts) {
        var += (c - mean) * (c - mean);
    }
    var /= static_cast<double>(counts.size());
    std::vector<double> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 == 1
                              ? sorted[sorted.size() / 2]
                              : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    std::cout << "tiled " << counts.size() << " slide(s): patches mean=" << format_double(mean)
              << " median=" << format_double(median) << " std=" << format_double(std::sqrt(var))
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int cmd_stats(const GlobalOptions& g, const std::string& manifest_path,
              const std::string& annotations_path, const std::string& dataset_id) {
    const std::vector<ManifestEntry> manifest = read_manifest(manifest_path);
    const std::vector<AnnotationCrop> crops = read_annotations(annotations_path);
    if (crops.empty()) {
        throw EmptyDataset(annotations_path + ": no crops to accumulate");
    }

    std::map<std::string, std::string> path_by_slide;
    for (const ManifestEntry& e : manifest) {
        path_by_slide[e.slide_id] = e.path;
    }

    ChannelStatsAccumulator acc;
    std::string loaded_id;
    Image slide;
    for (const AnnotationCrop& crop : crops) {
        const auto it = path_by_slide.find(crop.slide_id);
        if (it == path_by_slide.end()) {
            throw FormatError("annotations reference slide \"" + crop.slide_id +
                              "\" missing from the manifest");
        }
        if (loaded_id != crop.slide_id) {
            slide = load_image(it->second);
            loaded_id = crop.slide_id;
        }
        acc.add(slide.crop(crop.x, crop.y, crop.width, crop.height));
    }
    const ChannelStats stats = acc.finish(dataset_id.empty() ? manifest_path : dataset_id);
    const std::string path = out_path(g, "channel_stats.json");
    atomic_write_file(path, channel_stats_to_json(stats));
    std::cout << "wrote " << path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct SlideRun {
    std::string slide_id;
    SlideLabel label;
    bool done = false;
};

int cmd_infer(const GlobalOptions& g, const std::string& manifest_path,
              const std::string& thresholds_path, bool baseline) {
    const RunConfig cfg = g.load();
    const std::vector<ManifestEntry> manifest = read_manifest(manifest_path);
    if (manifest.empty()) {
        throw FormatError(manifest_path + ": manifest has no rows");
    }
    const ThresholdVector tau = thresholds_from_json(read_text_file(thresholds_path));

    std::vector<SlideRun> runs(manifest.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::string failed_slide;

    auto work = [&]() {
        Classifier classifier(cfg.classifier);
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.size()) {
                return;
            }
            const ManifestEntry& e = manifest[i];
            try {
                const auto started = std::chrono::steady_clock::now();
                const Image slide = load_image(e.path);
                SlideInference inf =
                    infer_slide(slide, classifier, cfg.tiler, tau, cfg.aggregation);
                SlideLabel label = inf.label;
                if (baseline) {
                    label = baseline_aggregate(inf.all_predictions, tau);
                }
                atomic_write_file(out_path(g, e.slide_id + "_predictions.csv"),
                                  predictions_csv(e.slide_id, inf.all_predictions));
                runs[i] = SlideRun{e.slide_id, label, true};
                const auto elapsed = std::chrono::duration<double>(
                                         std::chrono::steady_clock::now() - started)
                                         .count();
                log_info("slide " + e.slide_id + ": " +
                         std::to_string(inf.all_predictions.size()) + " patches in " +
                         format_double(elapsed) + " s");
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                    failed_slide = e.slide_id;
                }
                return;
            }
        }
    };

    const int threads = std::max(1, g.parallelism);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back(work);
    }
    for (std::thread& t : pool) {
        t.join();
    }

    SlideLabelFile out;
    out.annotator_id = baseline ? "baseline" : "model";
    for (const SlideRun& r : runs) {
        if (r.done) {
            out.labels[r.slide_id] = r.label;
        }
    }
    atomic_write_file(out_path(g, "slide_labels.json"), slide_labels_to_json(out));

    if (first_error) {
        // Completed slides keep their outputs; the error keeps its class so
        // the exit code distinguishes worker failures from unreadable input.
        try {
            std::rethrow_exception(first_error);
        } catch (const WorkerFailed& e) {
            throw WorkerFailed("slide " + failed_slide + ": " + e.what());
        } catch (const ProtocolViolation& e) {
            throw ProtocolViolation("slide " + failed_slide + ": " + e.what());
        } catch (const IoError& e) {
            throw IoError("slide " + failed_slide + ": " + e.what());
        } catch (const Error& e) {
            throw FormatError("slide " + failed_slide + ": " + e.what());
        }
    }
    std::cout << "wrote " << out_path(g, "slide_labels.json") << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

int cmd_calibrate(const GlobalOptions& g, const std::string& manifest_path,
                  const std::string& labels_path) {
    const RunConfig cfg = g.load();
    const std::vector<ManifestEntry> manifest = read_manifest(manifest_path);
    if (manifest.empty()) {
        throw EmptyDevSet(manifest_path + ": development manifest has no rows");
    }
    const SlideLabelFile references = slide_labels_from_json(read_text_file(labels_path));

    std::vector<DevSlide> dev(manifest.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto work = [&]() {
        Classifier classifier(cfg.classifier);
        ThresholdVector zero;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.size()) {
                return;
            }
            const ManifestEntry& e = manifest[i];
            try {
                const auto ref = references.labels.find(e.slide_id);
                if (ref == references.labels.end()) {
                    throw FormatError("dev slide \"" + e.slide_id +
                                      "\" has no reference label in " + labels_path);
                }
                const Image slide = load_image(e.path);
                SlideInference inf =
                    infer_slide(slide, classifier, cfg.tiler, zero, cfg.aggregation);
                dev[i] = DevSlide{e.slide_id, std::move(inf.all_predictions), ref->second};
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };

    const int threads = std::max(1, g.parallelism);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back(work);
    }
    for (std::thread& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    const CalibrationResult result = grid_search_thresholds(dev, cfg.grid, cfg.aggregation);

    atomic_write_file(out_path(g, "thresholds.json"), thresholds_to_json(result.thresholds));
    std::string trace = "pass,class,value,objective\n";
    for (const CalibrationTraceEntry& t : result.trace) {
        trace += std::to_string(t.pass);
        trace += ",";
        trace += pattern_name(t.pattern);
        trace += ",";
        trace += format_double(t.value);
        trace += ",";
        trace += format_double(t.objective);
        trace += "\n";
    }
    atomic_write_file(out_path(g, "calibration_trace.csv"), trace);
    std::cout << "objective " << format_double(result.objective) << "; wrote "
              << out_path(g, "thresholds.json") << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const GlobalOptions& g, const std::vector<std::string>& label_paths) {
    if (label_paths.size() != 4) {
        throw FormatError("evaluate needs exactly four label files");
    }
    std::vector<SlideLabelFile> files;
    for (const std::string& path : label_paths) {
        files.push_back(slide_labels_from_json(read_text_file(path)));
        if (files.back().annotator_id.empty()) {
            files.back().annotator_id = fs::path(path).stem().string();
        }
    }

    // All files must label the same slides.
    std::set<std::string> ids;
    for (const auto& [id, label] : files.front().labels) {
        ids.insert(id);
    }
    for (std::size_t i = 1; i < files.size(); ++i) {
        std::set<std::string> other;
        for (const auto& [id, label] : files[i].labels) {
            other.insert(id);
        }
        if (other != ids) {
            std::string diff;
            for (const std::string& id : ids) {
                if (!other.count(id)) {
                    diff += " -" + id;
                }
            }
            for (const std::string& id : other) {
                if (!ids.count(id)) {
                    diff += " +" + id;
                }
            }
            throw FormatError("slide ids differ between " + label_paths.front() + " and " +
                              label_paths[i] + ":" + diff);
        }
    }
    if (ids.empty()) {
        throw FormatError("label files contain no slides");
    }

    std::vector<LabeledSeries> series;
    for (const SlideLabelFile& f : files) {
        LabeledSeries s;
        s.annotator_id = f.annotator_id;
        for (const std::string& id : ids) { // std::set iterates sorted: shared order
            s.labels.push_back(f.labels.at(id));
        }
        series.push_back(std::move(s));
    }

    const AgreementReport report = agreement_report(series);
    atomic_write_file(out_path(g, "agreement_report.json"), agreement_report_json(report));
    atomic_write_file(out_path(g, "agreement_report.txt"), agreement_report_table(report));
    atomic_write_file(out_path(g, "per_class_kappa.csv"), per_class_kappa_csv(report));
    std::cout << agreement_report_table(report);
    return 0;
}

// ---------------------------------------------------------------------------
// visualize
// ---------------------------------------------------------------------------

int cmd_visualize(const GlobalOptions& g, const std::string& slide_path,
                  const std::string& predictions_path, const std::string& thresholds_path,
                  double scale_override) {
    const RunConfig cfg = g.load();
    const Image slide = load_image(slide_path);
    std::string slide_id;
    const std::vector<PatchPrediction> preds =
        read_predictions_csv(predictions_path, cfg.tiler.window, &slide_id);
    ThresholdVector tau;
    if (!thresholds_path.empty()) {
        tau = thresholds_from_json(read_text_file(thresholds_path));
    }
    auto [retained, counts] = filter_predictions(preds, tau);

    const double scale = scale_override > 0.0 ? scale_override : cfg.visualize_scale;
    Overlay overlay;
    try {
        overlay = render_overlay(slide, retained, cfg.palette, scale);
    } catch (const OutOfBounds& e) {
        throw FormatError(predictions_path + " does not match " + slide_path + ": " + e.what());
    }

    const std::string base = slide_id.empty() ? fs::path(slide_path).stem().string() : slide_id;
    const std::vector<std::uint8_t> png = encode_png(overlay.image);
    atomic_write_file(out_path(g, base + "_overlay.png"),
                      std::string(png.begin(), png.end()));

    nlohmann::json dots = nlohmann::json::array();
    for (const OverlayDot& d : overlay.dots) {
        nlohmann::json dj;
        dj["x"] = d.x;
        dj["y"] = d.y;
        dj["class"] = std::string(pattern_name(d.pattern));
        dots.push_back(dj);
    }
    atomic_write_file(out_path(g, base + "_overlay_dots.json"), dots.dump(2));
    std::cout << "wrote " << out_path(g, base + "_overlay.png") << " (" << overlay.dots.size()
              << " dots)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const GlobalOptions& g, const std::string& spec_path, const std::string& name) {
    const RunConfig cfg = g.load();
    SyntheticSpec spec = synth_spec_from_json(read_text_file(spec_path));
    if (g.seed_set) {
        spec.seed = g.seed;
    }
    const SyntheticSlide slide = generate_slide(spec);

    const std::vector<std::uint8_t> png = encode_png(slide.image);
    atomic_write_file(out_path(g, name + ".png"), std::string(png.begin(), png.end()));

    std::string truth = "x,y,side,label\n";
    for (const PatchGeometry& p : tile_region(spec.width, spec.height, cfg.tiler)) {
        truth += std::to_string(p.x) + "," + std::to_string(p.y) + "," + std::to_string(p.side) +
                 "," + std::string(pattern_name(slide.truth.patch_label(p))) + "\n";
    }
    atomic_write_file(out_path(g, name + "_truth.csv"), truth);

    const SlideLabel expected = expected_slide_label(spec, cfg.tiler, cfg.aggregation);
    atomic_write_file(out_path(g, name + "_expected.json"), slide_label_to_json(expected));
    std::cout << "wrote " << out_path(g, name + ".png") << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"whole-slide histologic pattern toolkit"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "run configuration JSON");
    app.add_option("--output", g.output_dir, "output directory (default .)");
    app.add_option("--parallelism", g.parallelism, "worker threads for slide-level commands")
        ->check(CLI::PositiveNumber);
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { g.seed = v; g.seed_set = true; },
        "override the classifier / synth seed");

    std::string manifest_path, annotations_path, thresholds_path, labels_path;
    std::string slide_path, predictions_path, spec_path;
    std::string dataset_id, synth_name = "synthetic";
    std::vector<std::string> eval_labels;
    bool baseline = false;
    double scale_override = 0.0;

    CLI::App* tile = app.add_subcommand("tile", "emit patch coordinate CSVs per slide");
    tile->add_option("--manifest", manifest_path, "slide manifest CSV")->required();

    CLI::App* stats = app.add_subcommand("stats", "dataset channel statistics over crops");
    stats->add_option("--manifest", manifest_path, "slide manifest CSV")->required();
    stats->add_option("--annotations", annotations_path, "annotation crops CSV")->required();
    stats->add_option("--dataset-id", dataset_id, "identifier stored with the stats");

    CLI::App* calibrate = app.add_subcommand("calibrate", "grid-search confidence thresholds");
    calibrate->add_option("--manifest", manifest_path, "development slide manifest")->required();
    calibrate->add_option("--labels", labels_path, "reference slide labels JSON")->required();

    CLI::App* infer = app.add_subcommand("infer", "classify slides and aggregate labels");
    infer->add_option("--manifest", manifest_path, "slide manifest CSV")->required();
    infer->add_option("--thresholds", thresholds_path, "thresholds JSON")->required();
    infer->add_flag("--baseline", baseline, "use the probability-averaging baseline");

    CLI::App* evaluate = app.add_subcommand("evaluate", "four-annotator agreement report");
    evaluate->add_option("--labels", eval_labels, "four slide-label JSON files")
        ->required()
        ->expected(4);

    CLI::App* visualize = app.add_subcommand("visualize", "overlay dots on a slide");
    visualize->add_option("--slide", slide_path, "slide image (PNG or TIFF)")->required();
    visualize->add_option("--predictions", predictions_path, "patch predictions CSV")->required();
    visualize->add_option("--thresholds", thresholds_path, "thresholds JSON (optional)");
    visualize->add_option("--scale", scale_override, "render scale in (0,1]");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic slide");
    synth->add_option("--spec", spec_path, "synthetic spec JSON")->required();
    synth->add_option("--name", synth_name, "output basename (default synthetic)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tile->parsed()) {
            return cmd_tile(g, manifest_path);
        }
        if (stats->parsed()) {
            return cmd_stats(g, manifest_path, annotations_path, dataset_id);
        }
        if (calibrate->parsed()) {
            return cmd_calibrate(g, manifest_path, labels_path);
        }
        if (infer->parsed()) {
            return cmd_infer(g, manifest_path, thresholds_path, baseline);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(g, eval_labels);
        }
        if (visualize->parsed()) {
            return cmd_visualize(g, slide_path, predictions_path, thresholds_path, scale_override);
        }
        if (synth->parsed()) {
            return cmd_synth(g, spec_path, synth_name);
        }
    } catch (const WorkerFailed& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitWorker;
    } catch (const ProtocolViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitWorker;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnreadable;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    return 0;
}
