#pragma once

#include "wsipat/core.hpp"
#include "wsipat/image.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

// =============================================================================
// Dataset channel statistics, per-patch normalization, and the training-time
// augmentation pipeline (color jitter, right-angle rotation, random flips).
// =============================================================================

namespace wsipat {

struct EmptyDataset : Error {
    using Error::Error;
};

// Per-channel mean / population standard deviation of a dataset, in the
// [0,1] pixel scale.
struct ChannelStats {
    std::array<double, 3> mean{};
    std::array<double, 3> std{};
    std::string dataset_id;
};

// Streaming accumulator. Partial accumulators merge associatively, so stats
// can be computed over shards in any order.
class ChannelStatsAccumulator {
public:
    void add(const Image& patch);
    void merge(const ChannelStatsAccumulator& other);
    bool empty() const { return count_ == 0; }
    ChannelStats finish(std::string dataset_id) const;

private:
    std::array<double, 3> sum_{};
    std::array<double, 3> sum_sq_{};
    std::uint64_t count_ = 0;
};

// Single pass over a stream of patches. Throws EmptyDataset when the stream
// yields nothing. Pixel counts are per image, so images of unequal size are
// weighted by their pixel count.
ChannelStats dataset_channel_stats(const std::function<bool(Image&)>& next_patch,
                                   std::string dataset_id);

// Planar float image produced by normalization.
struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> values; // 3 channels, interleaved like Image

    float at(int x, int y, int c) const {
        return values[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

inline constexpr double kNormalizeEpsilon = 1e-6;

// (v/255 - mean) / max(std, epsilon), per channel.
FloatImage normalize(const Image& patch, const ChannelStats& stats);

// Inverse affine map of normalize; recovers [0,1]-scale values.
FloatImage denormalize(const FloatImage& patch, const ChannelStats& stats);

// -----------------------------------------------------------------------------
// Augmentation
// -----------------------------------------------------------------------------

// All draws come from (seed, draw_index); the same pair always replays the
// same jitter, rotation, and flips.
struct AugmentSpec {
    double brightness_delta = 0.2;
    double contrast_delta = 0.2;
    double saturation_delta = 0.2;
    double hue_delta = 0.05; // fraction of the hue circle

    // Which right-angle rotations may be drawn (uniformly among the enabled
    // ones), indexed by quarter turns 0..3.
    std::array<bool, 4> rotations = {true, true, true, true};

    // When enabled, the axis flip is applied with probability 1/2.
    bool flip_horizontal = true;
    bool flip_vertical = true;

    std::uint64_t seed = 0;
};

// Jitter order: brightness, contrast, saturation, hue; then rotation, then
// horizontal / vertical flips. Square patches only.
Image augment(const Image& patch, const AugmentSpec& spec, std::uint64_t draw_index);

// Quarter-turn rotation helper: (row r, col c) of an n x n patch moves to
// (c, n-1-r) per turn.
Image rotate_quarter_turns(const Image& patch, int turns);

// -----------------------------------------------------------------------------
// Balanced training manifest
// -----------------------------------------------------------------------------

// One row of the training manifest; pixel data is materialized elsewhere.
struct TrainingManifestEntry {
    HistologicPattern label;
    std::string crop_id;
    PatchGeometry geometry;
    std::uint64_t draw_index = 0; // 0 = raw patch, >0 = augmented duplicate
};

// Per class: picks a stride with balanced_stride, tiles every crop large
// enough for the window (smaller crops are skipped), truncates to the target
// when over, and tops up with augmented duplicates (draw_index 1, 2, ...)
// cycling the raw patches in order when under. Each class ends with exactly
// target_per_class entries. Throws NoTilableCrops naming the class whose
// crops are all too small.
std::vector<TrainingManifestEntry> build_balanced_training_set(
    const std::map<HistologicPattern, std::vector<AnnotationCrop>>& crops_by_class, int window,
    std::int64_t target_per_class);

} // namespace wsipat
