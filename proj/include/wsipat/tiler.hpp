#pragma once

#include "wsipat/core.hpp"
#include "wsipat/errors.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

// =============================================================================
// Sliding-window patch coordinate generation for crops and whole slides.
// Pure geometry; no pixels are touched here.
// =============================================================================

namespace wsipat {

struct RegionTooSmall : Error {
    using Error::Error;
};

struct NoTilableCrops : Error {
    using Error::Error;
};

struct TilerConfig {
    int window = 224;
    int stride = 179; // = stride_for_overlap(224, 1/5)
    bool clamp_final = true;

    // Inference-time speed knob: skip patches whose mean luminance (0..255)
    // exceeds the cutoff, i.e. near-white glass. Off by default; tiling
    // itself never consults pixels, the inference stage applies this.
    std::optional<double> bright_skip_luminance;

    // Window with the given overlap fraction (default one-fifth).
    static TilerConfig with_overlap(int window, double overlap_fraction = 0.2,
                                    bool clamp_final = true);
    static TilerConfig with_stride(int window, int stride, bool clamp_final = true);
};

// round(window * (1 - overlap_fraction)), floored at 1.
int stride_for_overlap(int window, double overlap_fraction);

// Row-major patch grid over a width x height region. Positions along each
// axis run 0, s, 2s, ... while they fit; with clamp_final the last position
// is forced to extent - window whenever the regular grid stops short of the
// far edge. Throws RegionTooSmall when either dimension is below the window.
std::vector<PatchGeometry> tile_region(int width, int height, const TilerConfig& config);

// Number of patches tile_region would emit, without materializing them.
std::int64_t expected_patch_count(int width, int height, const TilerConfig& config);

// Largest stride in [1, window] whose total patch count over all crops
// reaches target_count; 1 when even the densest tiling falls short. Crops
// smaller than the window in either dimension are skipped; if that skips
// everything, throws NoTilableCrops.
int balanced_stride(std::span<const std::pair<int, int>> crop_dims, int window,
                    std::int64_t target_count);

} // namespace wsipat
