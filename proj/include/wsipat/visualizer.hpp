#pragma once

#include "wsipat/core.hpp"
#include "wsipat/image.hpp"

#include <array>
#include <span>
#include <vector>

// =============================================================================
// Overlay rendering: color-coded dots at retained patch centers on a scaled
// copy of the slide, plus a legend strip.
// =============================================================================

namespace wsipat {

struct OutOfBounds : Error {
    using Error::Error;
};

struct BadScale : Error {
    using Error::Error;
};

struct Palette {
    // Display colors per class; distinct for the five cancerous patterns.
    std::array<Rgb, kPatternCount> color = {
        Rgb{0, 158, 115},   // lepidic, green
        Rgb{0, 114, 178},   // acinar, blue
        Rgb{230, 159, 0},   // papillary, orange
        Rgb{213, 94, 0},    // micropapillary, red
        Rgb{204, 121, 167}, // solid, purple
        Rgb{153, 153, 153}, // benign, gray
    };
    double dot_radius_fraction = 0.3; // of the window side, at render scale
    bool draw_benign = false;
};

struct OverlayDot {
    int x = 0; // center in overlay pixels
    int y = 0;
    HistologicPattern pattern;
};

struct Overlay {
    Image image;
    std::vector<OverlayDot> dots; // side-car record, one per rendered dot
};

// Scales the slide by `scale` (in (0,1]), stamps one anti-aliased dot per
// retained prediction at the patch center (benign skipped unless draw_benign)
// and appends a legend strip. Deterministic: the same inputs produce the same
// bytes. Throws OutOfBounds when a prediction does not fit the slide and
// BadScale for a scale outside (0,1].
Overlay render_overlay(const Image& slide, std::span<const PatchPrediction> retained,
                       const Palette& palette, double scale);

} // namespace wsipat
