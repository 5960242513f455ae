#pragma once

#include "wsipat/classifier.hpp"
#include "wsipat/core.hpp"
#include "wsipat/image.hpp"
#include "wsipat/inference.hpp"
#include "wsipat/tiler.hpp"

#include <cstdint>
#include <string>
#include <vector>

// =============================================================================
// Synthetic slides with known composition: flat class colors (shared with the
// oracle classifier) plus mild seeded pixel noise, and an exact per-patch
// ground truth. This is the desk-scale stand-in for scanner output.
// =============================================================================

namespace wsipat {

struct RegionOutOfBounds : Error {
    using Error::Error;
};

struct PaintRegion {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
    HistologicPattern pattern = HistologicPattern::Benign;
};

struct SyntheticSpec {
    int width = 0;
    int height = 0;
    std::vector<PaintRegion> regions; // painted in order; later wins
    std::uint64_t seed = 0;
};

// Per-pixel painted class, kept alongside the rendered image. A patch's
// ground truth is the class covering the majority of its pixels, ties toward
// the lower canonical index.
class GroundTruth {
public:
    GroundTruth(int width, int height, std::vector<std::uint8_t> class_map);

    HistologicPattern patch_label(const PatchGeometry& g) const;
    HistologicPattern pixel_class(int x, int y) const {
        return kAllPatterns[map_[static_cast<std::size_t>(y) * width_ + x]];
    }

    int width() const { return width_; }
    int height() const { return height_; }

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> map_;
};

struct SyntheticSlide {
    Image image;
    GroundTruth truth;
};

// Benign background, regions painted in spec order with the oracle's class
// colors, then +-2 intensity noise per channel from the spec seed.
SyntheticSlide generate_slide(const SyntheticSpec& spec);

// Ground-truth patch labels for the tiling, tallied and run through the
// aggregation heuristic: what a perfect classifier would conclude.
SlideLabel expected_slide_label(const SyntheticSpec& spec, const TilerConfig& tiler_config,
                                const AggregationConfig& agg_config);

// Spec JSON: {"width":..,"height":..,"seed":..,
//             "regions":[{"x":..,"y":..,"width":..,"height":..,"pattern":"acinar"},...]}
SyntheticSpec synth_spec_from_json(const std::string& json_text);
std::string synth_spec_to_json(const SyntheticSpec& spec);

} // namespace wsipat
