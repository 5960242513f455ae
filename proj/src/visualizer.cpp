#include "wsipat/visualizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wsipat {

namespace {

// Column-major 5x7 glyphs for A-Z, LSB at the top row.
constexpr std::uint8_t kFont5x7[26][5] = {
    {0x7C, 0x12, 0x11, 0x12, 0x7C}, // A
    {0x7F, 0x49, 0x49, 0x49, 0x36}, // B
    {0x3E, 0x41, 0x41, 0x41, 0x22}, // C
    {0x7F, 0x41, 0x41, 0x22, 0x1C}, // D
    {0x7F, 0x49, 0x49, 0x49, 0x41}, // E
    {0x7F, 0x09, 0x09, 0x09, 0x01}, // F
    {0x3E, 0x41, 0x49, 0x49, 0x7A}, // G
    {0x7F, 0x08, 0x08, 0x08, 0x7F}, // H
    {0x00, 0x41, 0x7F, 0x41, 0x00}, // I
    {0x20, 0x40, 0x41, 0x3F, 0x01}, // J
    {0x7F, 0x08, 0x14, 0x22, 0x41}, // K
    {0x7F, 0x40, 0x40, 0x40, 0x40}, // L
    {0x7F, 0x02, 0x0C, 0x02, 0x7F}, // M
    {0x7F, 0x04, 0x08, 0x10, 0x7F}, // N
    {0x3E, 0x41, 0x41, 0x41, 0x3E}, // O
    {0x7F, 0x09, 0x09, 0x09, 0x06}, // P
    {0x3E, 0x41, 0x51, 0x21, 0x5E}, // Q
    {0x7F, 0x09, 0x19, 0x29, 0x46}, // R
    {0x46, 0x49, 0x49, 0x49, 0x31}, // S
    {0x01, 0x01, 0x7F, 0x01, 0x01}, // T
    {0x3F, 0x40, 0x40, 0x40, 0x3F}, // U
    {0x1F, 0x20, 0x40, 0x20, 0x1F}, // V
    {0x3F, 0x40, 0x38, 0x40, 0x3F}, // W
    {0x63, 0x14, 0x08, 0x14, 0x63}, // X
    {0x07, 0x08, 0x70, 0x08, 0x07}, // Y
    {0x61, 0x51, 0x49, 0x45, 0x43}, // Z
};

void draw_text(Image& img, int x, int y, const std::string& text, Rgb color) {
    int cx = x;
    for (char raw : text) {
        const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        if (ch >= 'A' && ch <= 'Z') {
            const std::uint8_t* glyph = kFont5x7[ch - 'A'];
            for (int col = 0; col < 5; ++col) {
                for (int row = 0; row < 7; ++row) {
                    if ((glyph[col] >> row) & 1) {
                        const int px = cx + col;
                        const int py = y + row;
                        if (px >= 0 && px < img.width() && py >= 0 && py < img.height()) {
                            img.set_pixel(px, py, color);
                        }
                    }
                }
            }
        }
        cx += 6; // 5 px glyph + 1 px gap
    }
}

Rgb blend(Rgb under, Rgb over, double alpha) {
    auto mix = [&](std::uint8_t u, std::uint8_t o) {
        return static_cast<std::uint8_t>(std::lround(u + (o - u) * alpha));
    };
    return Rgb{mix(under.r, over.r), mix(under.g, over.g), mix(under.b, over.b)};
}

// Coverage-alpha filled circle; ~1 px soft edge.
void draw_dot(Image& img, double cx, double cy, double radius, Rgb color) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + radius + 1)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x - cx, y - cy);
            const double alpha = std::clamp(radius + 0.5 - d, 0.0, 1.0);
            if (alpha > 0.0) {
                img.set_pixel(x, y, blend(img.pixel(x, y), color, alpha));
            }
        }
    }
}

constexpr int kLegendRowHeight = 14;
constexpr int kLegendPad = 4;

} // namespace

Overlay render_overlay(const Image& slide, std::span<const PatchPrediction> retained,
                       const Palette& palette, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw BadScale("overlay scale must lie in (0, 1]; got " + std::to_string(scale));
    }
    for (const PatchPrediction& p : retained) {
        const PatchGeometry& g = p.geometry;
        if (g.x < 0 || g.y < 0 || g.side < 1 || g.x + g.side > slide.width() ||
            g.y + g.side > slide.height()) {
            throw OutOfBounds("prediction at (" + std::to_string(g.x) + "," + std::to_string(g.y) +
                              ") side " + std::to_string(g.side) + " leaves the " +
                              std::to_string(slide.width()) + "x" + std::to_string(slide.height()) +
                              " slide");
        }
    }

    const Image scaled = scale_image(slide, scale);

    // Legend below the slide: one swatch + name per drawn class.
    std::vector<HistologicPattern> legend_classes;
    for (std::size_t i = 0; i < kCancerousCount; ++i) {
        legend_classes.push_back(kAllPatterns[i]);
    }
    if (palette.draw_benign) {
        legend_classes.push_back(HistologicPattern::Benign);
    }
    const int legend_height = kLegendPad * 2 + kLegendRowHeight;

    Overlay out;
    out.image = Image(scaled.width(), scaled.height() + legend_height, Rgb{255, 255, 255});
    for (int y = 0; y < scaled.height(); ++y) {
        for (int x = 0; x < scaled.width(); ++x) {
            out.image.set_pixel(x, y, scaled.pixel(x, y));
        }
    }

    for (const PatchPrediction& p : retained) {
        if (p.top_class == HistologicPattern::Benign && !palette.draw_benign) {
            continue;
        }
        const PatchGeometry& g = p.geometry;
        const double cx = (g.x + g.side / 2.0) * scale;
        const double cy = (g.y + g.side / 2.0) * scale;
        const double radius = std::max(1.0, palette.dot_radius_fraction * g.side * scale);
        draw_dot(out.image, cx, cy, radius, palette.color[pattern_index(p.top_class)]);
        OverlayDot dot;
        dot.x = std::clamp(static_cast<int>(std::lround(cx)), 0, scaled.width() - 1);
        dot.y = std::clamp(static_cast<int>(std::lround(cy)), 0, scaled.height() - 1);
        dot.pattern = p.top_class;
        out.dots.push_back(dot);
    }

    // Square swatches in the legend so dot-shaped marks only appear on tissue.
    int lx = kLegendPad;
    const int ly = scaled.height() + kLegendPad;
    for (HistologicPattern cls : legend_classes) {
        const Rgb color = palette.color[pattern_index(cls)];
        for (int y = 0; y < 10; ++y) {
            for (int x = 0; x < 10; ++x) {
                if (lx + x < out.image.width()) {
                    out.image.set_pixel(lx + x, ly + y, color);
                }
            }
        }
        const std::string name(pattern_name(cls));
        draw_text(out.image, lx + 13, ly + 2, name, Rgb{0, 0, 0});
        lx += 13 + static_cast<int>(name.size()) * 6 + 10;
    }
    return out;
}

} // namespace wsipat
