#pragma once

#include "wsipat/core.hpp"
#include "wsipat/inference.hpp"
#include "wsipat/preprocess.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

// =============================================================================
// File formats: the CSV schemas and JSON shapes every command reads and
// writes. All writers are deterministic; all writes go through a temp file
// and rename.
// =============================================================================

namespace wsipat {

// Writes content to path atomically (temp file in the same directory, then
// rename). Creates missing parent directories.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);

// Fixed decimal-ish formatting used by every CSV/JSON writer ("%.9g").
std::string format_double(double v);

// ---------------------------------------------------------------------------
// CSV primitives. Fields are split on plain commas; none of the schemas here
// quote or embed commas.
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path, std::size_t expected_columns);

// ---------------------------------------------------------------------------
// Manifest (slide_id,path) and annotations (slide_id,x,y,width,height,label)
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string slide_id;
    std::string path;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
std::vector<AnnotationCrop> read_annotations(const std::string& path);

// ---------------------------------------------------------------------------
// Patch coordinates (slide_id,x,y,side)
// ---------------------------------------------------------------------------

std::string patch_coords_csv(const std::string& slide_id, std::span<const PatchGeometry> patches);

// ---------------------------------------------------------------------------
// Patch predictions
// (slide_id,x,y,p_lepidic,p_acinar,p_papillary,p_micropapillary,p_solid,p_benign)
// ---------------------------------------------------------------------------

std::string predictions_csv(const std::string& slide_id,
                            std::span<const PatchPrediction> predictions);

// Reads predictions back; the patch side is not part of the schema, so the
// caller supplies the window it was tiled with.
std::vector<PatchPrediction> read_predictions_csv(const std::string& path, int side,
                                                  std::string* slide_id_out = nullptr);

// ---------------------------------------------------------------------------
// Thresholds JSON: {"lepidic":0.0,...,"benign":0.0}
// ---------------------------------------------------------------------------

std::string thresholds_to_json(const ThresholdVector& tau);
ThresholdVector thresholds_from_json(const std::string& json_text);

// ---------------------------------------------------------------------------
// Channel stats JSON: {"mean":[...],"std":[...],"dataset_id":...}
// ---------------------------------------------------------------------------

std::string channel_stats_to_json(const ChannelStats& stats);
ChannelStats channel_stats_from_json(const std::string& json_text);

// ---------------------------------------------------------------------------
// Slide label files: {"annotator_id":...,"labels":{"<slide_id>":{...}}}
// ---------------------------------------------------------------------------

struct SlideLabelFile {
    std::string annotator_id;
    std::map<std::string, SlideLabel> labels; // keyed by slide id
};

std::string slide_labels_to_json(const SlideLabelFile& file);
SlideLabelFile slide_labels_from_json(const std::string& json_text);

// ---------------------------------------------------------------------------
// Training manifest CSV (class,crop_id,x,y,side,draw_index)
// ---------------------------------------------------------------------------

std::string training_manifest_csv(std::span<const TrainingManifestEntry> entries);

} // namespace wsipat
