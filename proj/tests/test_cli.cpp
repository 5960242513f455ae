#include "wsipat/core.hpp"
#include "wsipat/formats.hpp"
#include "wsipat/image.hpp"
#include "wsipat/synth.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace wsipat;
namespace fs = std::filesystem;

namespace {

int run(const std::string& command) {
    const int rc = std::system((command + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("wsipat_cli_" + name);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    REQUIRE(out.good());
    out << content;
}

const std::string kCli = WSIPAT_CLI_PATH;
const std::string kWorker = WSIPAT_WORKER_PATH;

// 640x320, 70% acinar / 30% solid.
std::string write_split_spec(const TempDir& dir) {
    SyntheticSpec spec;
    spec.width = 640;
    spec.height = 320;
    spec.seed = 5;
    spec.regions = {PaintRegion{0, 0, 448, 320, HistologicPattern::Acinar},
                    PaintRegion{448, 0, 192, 320, HistologicPattern::Solid}};
    const std::string path = dir.file("spec.json");
    write_file(path, synth_spec_to_json(spec));
    return path;
}

const std::string kSmallTilerConfig =
    R"({"tiler":{"window":32,"overlap_fraction":0.2}})";

std::string zero_thresholds() {
    return thresholds_to_json(ThresholdVector{});
}

} // namespace

TEST_CASE("cli synth") {
    TempDir dir("synth");
    const std::string spec = write_split_spec(dir);
    const std::string cfg = dir.file("config.json");
    write_file(cfg, kSmallTilerConfig);

    CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg + " synth --spec " +
              spec + " --name slide1") == 0);
    CHECK(fs::exists(dir.file("slide1.png")));
    CHECK(fs::exists(dir.file("slide1_truth.csv")));
    CHECK(fs::exists(dir.file("slide1_expected.json")));

    const SlideLabel expected = slide_label_from_json(read_text_file(dir.file("slide1_expected.json")));
    CHECK(expected.predominant == HistologicPattern::Acinar);
    REQUIRE(expected.minors.size() == 1);
    CHECK(expected.minors[0] == HistologicPattern::Solid);

    SUBCASE("invalid spec exits 3") {
        const std::string bad = dir.file("bad.json");
        write_file(bad, R"({"width":10,"height":10,
            "regions":[{"x":0,"y":0,"width":99,"height":99,"pattern":"solid"}]})");
        CHECK(run(kCli + " --output " + dir.path.string() + " synth --spec " + bad) == 3);
    }
}

TEST_CASE("cli tile") {
    TempDir dir("tile");
    // A 224x224 image -> 1 patch; a 403x224 image -> 2 patches.
    save_png(Image(224, 224, Rgb{200, 180, 180}), dir.file("a.png"));
    save_png(Image(403, 224, Rgb{200, 180, 180}), dir.file("b.png"));
    write_file(dir.file("manifest.csv"),
               "slide_id,path\na," + dir.file("a.png") + "\nb," + dir.file("b.png") + "\n");

    CHECK(run(kCli + " --output " + dir.path.string() + " tile --manifest " +
              dir.file("manifest.csv")) == 0);
    const CsvTable a = read_csv(dir.file("a_patches.csv"), 4);
    CHECK(a.rows.size() == 1);
    const CsvTable b = read_csv(dir.file("b_patches.csv"), 4);
    CHECK(b.rows.size() == 2);

    SUBCASE("missing image exits 2 and removes partial outputs") {
        write_file(dir.file("manifest2.csv"),
                   "slide_id,path\na," + dir.file("a.png") + "\nmissing,/nope/missing.png\n");
        CHECK(run(kCli + " --output " + dir.file("out2") + " tile --manifest " +
                  dir.file("manifest2.csv")) == 2);
        CHECK_FALSE(fs::exists(dir.file("out2") + "/a_patches.csv"));
    }
    SUBCASE("malformed manifest exits 3") {
        write_file(dir.file("manifest3.csv"), "slide_id,path\nonly_one_field\n");
        CHECK(run(kCli + " --output " + dir.path.string() + " tile --manifest " +
                  dir.file("manifest3.csv")) == 3);
    }
}

TEST_CASE("cli stats") {
    TempDir dir("stats");
    save_png(Image(64, 64, Rgb{128, 128, 128}), dir.file("gray.png"));
    write_file(dir.file("manifest.csv"), "slide_id,path\ng," + dir.file("gray.png") + "\n");
    write_file(dir.file("ann.csv"),
               "slide_id,x,y,width,height,label\ng,0,0,32,32,benign\ng,32,0,32,32,benign\n");

    CHECK(run(kCli + " --output " + dir.path.string() + " stats --manifest " +
              dir.file("manifest.csv") + " --annotations " + dir.file("ann.csv")) == 0);
    const ChannelStats stats = channel_stats_from_json(read_text_file(dir.file("channel_stats.json")));
    for (int c = 0; c < 3; ++c) {
        CHECK(stats.mean[c] == doctest::Approx(128.0 / 255.0).epsilon(1e-9));
        CHECK(stats.std[c] == doctest::Approx(0.0));
    }

    SUBCASE("zero crops exit 3") {
        write_file(dir.file("empty.csv"), "slide_id,x,y,width,height,label\n");
        CHECK(run(kCli + " --output " + dir.path.string() + " stats --manifest " +
                  dir.file("manifest.csv") + " --annotations " + dir.file("empty.csv")) == 3);
    }
}

TEST_CASE("cli infer with the oracle classifier") {
    TempDir dir("infer");
    const std::string spec = write_split_spec(dir);
    const std::string cfg = dir.file("config.json");
    write_file(cfg, kSmallTilerConfig);
    REQUIRE(run(kCli + " --output " + dir.path.string() + " --config " + cfg + " synth --spec " +
                spec + " --name s1") == 0);
    write_file(dir.file("manifest.csv"), "slide_id,path\ns1," + dir.file("s1.png") + "\n");
    write_file(dir.file("tau.json"), zero_thresholds());

    CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
              " infer --manifest " + dir.file("manifest.csv") + " --thresholds " +
              dir.file("tau.json")) == 0);

    const SlideLabelFile labels = slide_labels_from_json(read_text_file(dir.file("slide_labels.json")));
    REQUIRE(labels.labels.count("s1"));
    const SlideLabel expected =
        slide_label_from_json(read_text_file(dir.file("s1_expected.json")));
    CHECK(labels.labels.at("s1") == expected);
    CHECK(fs::exists(dir.file("s1_predictions.csv")));

    SUBCASE("thresholds with a missing key exit 3") {
        write_file(dir.file("tau_bad.json"), R"({"lepidic":0.1})");
        CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
                  " infer --manifest " + dir.file("manifest.csv") + " --thresholds " +
                  dir.file("tau_bad.json")) == 3);
    }
    SUBCASE("reruns are byte-identical") {
        const std::string first = read_text_file(dir.file("slide_labels.json"));
        const std::string first_preds = read_text_file(dir.file("s1_predictions.csv"));
        CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
                  " infer --manifest " + dir.file("manifest.csv") + " --thresholds " +
                  dir.file("tau.json")) == 0);
        CHECK(read_text_file(dir.file("slide_labels.json")) == first);
        CHECK(read_text_file(dir.file("s1_predictions.csv")) == first_preds);
    }
    SUBCASE("baseline flag emits baseline labels") {
        CHECK(run(kCli + " --output " + dir.file("base") + " --config " + cfg +
                  " infer --baseline --manifest " + dir.file("manifest.csv") + " --thresholds " +
                  dir.file("tau.json")) == 0);
        const SlideLabelFile base =
            slide_labels_from_json(read_text_file(dir.file("base") + "/slide_labels.json"));
        CHECK(base.annotator_id == "baseline");
        CHECK(base.labels.at("s1").predominant == HistologicPattern::Acinar);
    }
}

TEST_CASE("cli infer through the worker protocol") {
    TempDir dir("infer_worker");
    const std::string spec = write_split_spec(dir);
    const std::string cfg_oracle = dir.file("oracle.json");
    write_file(cfg_oracle, kSmallTilerConfig);
    REQUIRE(run(kCli + " --output " + dir.path.string() + " --config " + cfg_oracle +
                " synth --spec " + spec + " --name s1") == 0);
    write_file(dir.file("manifest.csv"), "slide_id,path\ns1," + dir.file("s1.png") + "\n");
    write_file(dir.file("tau.json"), zero_thresholds());

    const std::string cfg_worker = dir.file("worker.json");
    write_file(cfg_worker,
               R"({"tiler":{"window":32,"overlap_fraction":0.2},
                   "classifier":{"kind":"worker","command":[")" +
                   kWorker + R"("],"batch_size":64,"timeout_seconds":30}})");

    CHECK(run(kCli + " --output " + dir.file("via_worker") + " --config " + cfg_worker +
              " infer --manifest " + dir.file("manifest.csv") + " --thresholds " +
              dir.file("tau.json")) == 0);
    CHECK(run(kCli + " --output " + dir.file("in_process") + " --config " + cfg_oracle +
              " infer --manifest " + dir.file("manifest.csv") + " --thresholds " +
              dir.file("tau.json")) == 0);

    // Same oracle behind both paths: identical labels and predictions.
    CHECK(read_text_file(dir.file("via_worker") + "/slide_labels.json") ==
          read_text_file(dir.file("in_process") + "/slide_labels.json"));
    CHECK(read_text_file(dir.file("via_worker") + "/s1_predictions.csv") ==
          read_text_file(dir.file("in_process") + "/s1_predictions.csv"));

    SUBCASE("worker failure exits 4") {
        const std::string cfg_dying = dir.file("dying.json");
        write_file(cfg_dying,
                   R"({"tiler":{"window":32,"overlap_fraction":0.2},
                       "classifier":{"kind":"worker","command":[")" +
                       kWorker + R"(","--die-after","10"],"batch_size":64,"timeout_seconds":30}})");
        CHECK(run(kCli + " --output " + dir.file("dead") + " --config " + cfg_dying +
                  " infer --manifest " + dir.file("manifest.csv") + " --thresholds " +
                  dir.file("tau.json")) == 4);
    }
}

TEST_CASE("cli calibrate") {
    TempDir dir("calibrate");
    const std::string spec = write_split_spec(dir);
    const std::string cfg = dir.file("config.json");
    write_file(cfg, kSmallTilerConfig);
    REQUIRE(run(kCli + " --output " + dir.path.string() + " --config " + cfg + " synth --spec " +
                spec + " --name dev1") == 0);
    write_file(dir.file("manifest.csv"), "slide_id,path\ndev1," + dir.file("dev1.png") + "\n");

    SlideLabelFile refs;
    refs.annotator_id = "reference";
    refs.labels["dev1"] =
        slide_label_from_json(read_text_file(dir.file("dev1_expected.json")));
    write_file(dir.file("refs.json"), slide_labels_to_json(refs));

    CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
              " calibrate --manifest " + dir.file("manifest.csv") + " --labels " +
              dir.file("refs.json")) == 0);

    // Noise-free predictions: all-zero thresholds win on the smallest-value
    // tie-break.
    const ThresholdVector tau =
        thresholds_from_json(read_text_file(dir.file("thresholds.json")));
    for (HistologicPattern p : kAllPatterns) {
        CHECK(tau[p] == doctest::Approx(0.0));
    }
    CHECK(fs::exists(dir.file("calibration_trace.csv")));
    const CsvTable trace = read_csv(dir.file("calibration_trace.csv"), 4);
    CHECK(trace.rows.size() == 2 * kPatternCount * 20); // passes x classes x grid

    SUBCASE("missing reference label exits 3") {
        SlideLabelFile empty;
        empty.annotator_id = "reference";
        write_file(dir.file("empty_refs.json"), slide_labels_to_json(empty));
        CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
                  " calibrate --manifest " + dir.file("manifest.csv") + " --labels " +
                  dir.file("empty_refs.json")) == 3);
    }
    SUBCASE("reruns are byte-identical") {
        const std::string first = read_text_file(dir.file("thresholds.json"));
        const std::string first_trace = read_text_file(dir.file("calibration_trace.csv"));
        CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
                  " calibrate --manifest " + dir.file("manifest.csv") + " --labels " +
                  dir.file("refs.json")) == 0);
        CHECK(read_text_file(dir.file("thresholds.json")) == first);
        CHECK(read_text_file(dir.file("calibration_trace.csv")) == first_trace);
    }
}

TEST_CASE("cli evaluate") {
    TempDir dir("evaluate");

    auto write_labels = [&](const std::string& name, const std::string& annotator,
                            HistologicPattern slide2) {
        SlideLabelFile f;
        f.annotator_id = annotator;
        f.labels["s1"] = normalize_slide_label(HistologicPattern::Acinar, {});
        f.labels["s2"] = normalize_slide_label(slide2, {});
        write_file(dir.file(name), slide_labels_to_json(f));
        return dir.file(name);
    };
    const std::string p1 = write_labels("p1.json", "P1", HistologicPattern::Solid);
    const std::string p2 = write_labels("p2.json", "P2", HistologicPattern::Solid);
    const std::string p3 = write_labels("p3.json", "P3", HistologicPattern::Lepidic);
    const std::string model = write_labels("model.json", "model", HistologicPattern::Solid);

    CHECK(run(kCli + " --output " + dir.path.string() + " evaluate --labels " + p1 + " " + p2 +
              " " + p3 + " " + model) == 0);
    CHECK(fs::exists(dir.file("agreement_report.json")));
    CHECK(fs::exists(dir.file("agreement_report.txt")));
    CHECK(fs::exists(dir.file("per_class_kappa.csv")));

    SUBCASE("disjoint slide ids exit 3") {
        SlideLabelFile other;
        other.annotator_id = "P3";
        other.labels["sX"] = normalize_slide_label(HistologicPattern::Acinar, {});
        other.labels["sY"] = normalize_slide_label(HistologicPattern::Solid, {});
        write_file(dir.file("p3_bad.json"), slide_labels_to_json(other));
        CHECK(run(kCli + " --output " + dir.path.string() + " evaluate --labels " + p1 + " " +
                  p2 + " " + dir.file("p3_bad.json") + " " + model) == 3);
    }
}

TEST_CASE("cli visualize") {
    TempDir dir("visualize");
    const std::string spec = write_split_spec(dir);
    const std::string cfg = dir.file("config.json");
    write_file(cfg, kSmallTilerConfig);
    REQUIRE(run(kCli + " --output " + dir.path.string() + " --config " + cfg + " synth --spec " +
                spec + " --name s1") == 0);
    write_file(dir.file("manifest.csv"), "slide_id,path\ns1," + dir.file("s1.png") + "\n");
    write_file(dir.file("tau.json"), zero_thresholds());
    REQUIRE(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
                " infer --manifest " + dir.file("manifest.csv") + " --thresholds " +
                dir.file("tau.json")) == 0);

    CHECK(run(kCli + " --output " + dir.path.string() + " --config " + cfg +
              " visualize --slide " + dir.file("s1.png") + " --predictions " +
              dir.file("s1_predictions.csv") + " --thresholds " + dir.file("tau.json") +
              " --scale 0.5") == 0);
    CHECK(fs::exists(dir.file("s1_overlay.png")));
    CHECK(fs::exists(dir.file("s1_overlay_dots.json")));

    SUBCASE("empty predictions give a legend-only overlay") {
        write_file(dir.file("none.csv"),
                   "slide_id,x,y,p_lepidic,p_acinar,p_papillary,p_micropapillary,p_solid,"
                   "p_benign\n");
        CHECK(run(kCli + " --output " + dir.file("empty") + " --config " + cfg +
                  " visualize --slide " + dir.file("s1.png") + " --predictions " +
                  dir.file("none.csv") + " --scale 0.5") == 0);
    }
    SUBCASE("prediction outside the slide exits 3") {
        write_file(dir.file("oob.csv"),
                   "slide_id,x,y,p_lepidic,p_acinar,p_papillary,p_micropapillary,p_solid,"
                   "p_benign\ns1,9999,0,1,0,0,0,0,0\n");
        CHECK(run(kCli + " --output " + dir.file("oob") + " --config " + cfg +
                  " visualize --slide " + dir.file("s1.png") + " --predictions " +
                  dir.file("oob.csv") + " --scale 0.5") == 3);
    }
}
