#include "wsipat/formats.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace wsipat {

namespace fs = std::filesystem;

void atomic_write_file(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open for writing: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw IoError("short write: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        throw IoError("rename failed for " + target.string() + ": " + ec.message());
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw FormatError("bad integer for " + what + ": \"" + s + "\"");
    }
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw FormatError("bad number for " + what + ": \"" + s + "\"");
    }
}

} // namespace

CsvTable read_csv(const std::string& path, std::size_t expected_columns) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != expected_columns) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(expected_columns) + " columns, found " +
                              std::to_string(fields.size()));
        }
        if (line_no == 1) {
            table.header = std::move(fields);
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) {
        throw FormatError(path + ": missing header row");
    }
    return table;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    const CsvTable table = read_csv(path, 2);
    if (table.header[0] != "slide_id" || table.header[1] != "path") {
        throw FormatError(path + ": manifest header must be slide_id,path");
    }
    std::vector<ManifestEntry> out;
    for (const auto& row : table.rows) {
        out.push_back(ManifestEntry{row[0], row[1]});
    }
    return out;
}

std::vector<AnnotationCrop> read_annotations(const std::string& path) {
    const CsvTable table = read_csv(path, 6);
    const std::vector<std::string> expected = {"slide_id", "x", "y", "width", "height", "label"};
    if (table.header != expected) {
        throw FormatError(path + ": annotations header must be slide_id,x,y,width,height,label");
    }
    std::vector<AnnotationCrop> out;
    for (const auto& row : table.rows) {
        AnnotationCrop crop;
        crop.slide_id = row[0];
        crop.x = parse_int(row[1], "x");
        crop.y = parse_int(row[2], "y");
        crop.width = parse_int(row[3], "width");
        crop.height = parse_int(row[4], "height");
        crop.label = parse_pattern(row[5]);
        if (crop.width < 1 || crop.height < 1) {
            throw FormatError(path + ": crop dimensions must be positive");
        }
        out.push_back(crop);
    }
    return out;
}

std::string patch_coords_csv(const std::string& slide_id, std::span<const PatchGeometry> patches) {
    std::ostringstream out;
    out << "slide_id,x,y,side\n";
    for (const PatchGeometry& g : patches) {
        out << slide_id << "," << g.x << "," << g.y << "," << g.side << "\n";
    }
    return out.str();
}

std::string predictions_csv(const std::string& slide_id,
                            std::span<const PatchPrediction> predictions) {
    std::ostringstream out;
    out << "slide_id,x,y,p_lepidic,p_acinar,p_papillary,p_micropapillary,p_solid,p_benign\n";
    for (const PatchPrediction& p : predictions) {
        out << slide_id << "," << p.geometry.x << "," << p.geometry.y;
        for (std::size_t i = 0; i < kPatternCount; ++i) {
            out << "," << format_double(p.probs.at_index(i));
        }
        out << "\n";
    }
    return out.str();
}

std::vector<PatchPrediction> read_predictions_csv(const std::string& path, int side,
                                                  std::string* slide_id_out) {
    const CsvTable table = read_csv(path, 9);
    const std::vector<std::string> expected = {
        "slide_id", "x", "y", "p_lepidic", "p_acinar", "p_papillary", "p_micropapillary",
        "p_solid", "p_benign"};
    if (table.header != expected) {
        throw FormatError(path + ": unexpected predictions header");
    }
    std::vector<PatchPrediction> out;
    for (const auto& row : table.rows) {
        if (slide_id_out && slide_id_out->empty()) {
            *slide_id_out = row[0];
        }
        PatchGeometry g;
        g.x = parse_int(row[1], "x");
        g.y = parse_int(row[2], "y");
        g.side = side;
        std::array<double, kPatternCount> p{};
        for (std::size_t i = 0; i < kPatternCount; ++i) {
            p[i] = parse_double(row[3 + i], "probability");
        }
        out.emplace_back(g, ProbabilityVector::renormalized(p));
    }
    return out;
}

std::string thresholds_to_json(const ThresholdVector& tau) {
    nlohmann::json j;
    for (HistologicPattern p : kAllPatterns) {
        j[std::string(pattern_name(p))] = tau[p];
    }
    return j.dump(2);
}

ThresholdVector thresholds_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad thresholds JSON: " + std::string(e.what()));
    }
    std::array<double, kPatternCount> tau{};
    for (HistologicPattern p : kAllPatterns) {
        const std::string key(pattern_name(p));
        if (!j.contains(key) || !j[key].is_number()) {
            throw FormatError("thresholds JSON is missing key \"" + key + "\"");
        }
        tau[pattern_index(p)] = j[key].get<double>();
    }
    return ThresholdVector(tau);
}

std::string channel_stats_to_json(const ChannelStats& stats) {
    nlohmann::json j;
    j["mean"] = stats.mean;
    j["std"] = stats.std;
    j["dataset_id"] = stats.dataset_id;
    return j.dump(2);
}

ChannelStats channel_stats_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad channel stats JSON: " + std::string(e.what()));
    }
    ChannelStats stats;
    try {
        stats.mean = j.at("mean").get<std::array<double, 3>>();
        stats.std = j.at("std").get<std::array<double, 3>>();
        stats.dataset_id = j.value("dataset_id", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad channel stats JSON: " + std::string(e.what()));
    }
    return stats;
}

std::string slide_labels_to_json(const SlideLabelFile& file) {
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [slide_id, label] : file.labels) {
        nlohmann::json l;
        if (label.predominant) {
            l["predominant"] = std::string(pattern_name(*label.predominant));
        } else {
            l["predominant"] = nullptr;
        }
        nlohmann::json minors = nlohmann::json::array();
        for (HistologicPattern m : label.minors) {
            minors.push_back(std::string(pattern_name(m)));
        }
        l["minors"] = minors;
        labels[slide_id] = l;
    }
    nlohmann::json j;
    j["annotator_id"] = file.annotator_id;
    j["labels"] = labels;
    return j.dump(2);
}

SlideLabelFile slide_labels_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad slide labels JSON: " + std::string(e.what()));
    }
    SlideLabelFile file;
    file.annotator_id = j.value("annotator_id", std::string{});
    if (!j.contains("labels") || !j["labels"].is_object()) {
        throw FormatError("slide labels JSON lacks a \"labels\" object");
    }
    for (const auto& [slide_id, l] : j["labels"].items()) {
        std::optional<HistologicPattern> predominant;
        if (l.contains("predominant") && !l["predominant"].is_null()) {
            predominant = parse_pattern(l["predominant"].get<std::string>());
        }
        std::vector<HistologicPattern> minors;
        if (l.contains("minors")) {
            for (const auto& m : l["minors"]) {
                minors.push_back(parse_pattern(m.get<std::string>()));
            }
        }
        file.labels[slide_id] = normalize_slide_label(predominant, minors);
    }
    return file;
}

std::string training_manifest_csv(std::span<const TrainingManifestEntry> entries) {
    std::ostringstream out;
    out << "class,crop_id,x,y,side,draw_index\n";
    for (const TrainingManifestEntry& e : entries) {
        out << pattern_name(e.label) << "," << e.crop_id << "," << e.geometry.x << ","
            << e.geometry.y << "," << e.geometry.side << "," << e.draw_index << "\n";
    }
    return out.str();
}

} // namespace wsipat
