#include "wsipat/visualizer.hpp"

#include <doctest.h>

#include <set>
#include <vector>

using namespace wsipat;

namespace {

ProbabilityVector one_hot(HistologicPattern p, double confidence = 0.9) {
    std::array<double, kPatternCount> v{};
    v.fill((1.0 - confidence) / (kPatternCount - 1));
    v[pattern_index(p)] = confidence;
    return ProbabilityVector::renormalized(v);
}

// Connected components of pixels exactly matching one palette color inside
// the slide area (the legend uses square swatches which are excluded by the
// row bound).
int count_blobs(const Image& img, int slide_rows, Rgb color) {
    std::vector<char> seen(static_cast<std::size_t>(img.width()) * slide_rows, 0);
    auto at = [&](int x, int y) -> char& {
        return seen[static_cast<std::size_t>(y) * img.width() + x];
    };
    int blobs = 0;
    for (int y = 0; y < slide_rows; ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (at(x, y) || !(img.pixel(x, y) == color)) {
                continue;
            }
            ++blobs;
            std::vector<std::pair<int, int>> stack = {{x, y}};
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                if (cx < 0 || cy < 0 || cx >= img.width() || cy >= slide_rows || at(cx, cy) ||
                    !(img.pixel(cx, cy) == color)) {
                    continue;
                }
                at(cx, cy) = 1;
                stack.push_back({cx + 1, cy});
                stack.push_back({cx - 1, cy});
                stack.push_back({cx, cy + 1});
                stack.push_back({cx, cy - 1});
            }
        }
    }
    return blobs;
}

} // namespace

TEST_CASE("render_overlay") {
    const Palette palette;
    Image slide(448, 448, Rgb{240, 230, 230});

    SUBCASE("empty predictions give the scaled slide plus the legend, no dots") {
        const Overlay out = render_overlay(slide, {}, palette, 0.5);
        CHECK(out.dots.empty());
        CHECK(out.image.width() == 224);
        CHECK(out.image.height() > 224); // legend strip appended
    }
    SUBCASE("single dot lands at the scaled patch center") {
        std::vector<PatchPrediction> preds;
        preds.emplace_back(PatchGeometry{0, 0, 224}, one_hot(HistologicPattern::Solid));
        const Overlay out = render_overlay(slide, preds, palette, 1.0);
        REQUIRE(out.dots.size() == 1);
        CHECK(out.dots[0].x == 112);
        CHECK(out.dots[0].y == 112);
        CHECK(out.dots[0].pattern == HistologicPattern::Solid);
        // Dot core is the pure palette color.
        CHECK(out.image.pixel(112, 112) == palette.color[pattern_index(HistologicPattern::Solid)]);
    }
    SUBCASE("dot count equals retained non-benign prediction count") {
        // Disjoint grid placement so blobs stay separate.
        std::vector<PatchPrediction> preds;
        int n_cancerous = 0;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                const HistologicPattern cls = kAllPatterns[(i * 4 + j) % kPatternCount];
                preds.emplace_back(PatchGeometry{i * 112, j * 112, 112}, one_hot(cls));
                n_cancerous += is_cancerous(cls) ? 1 : 0;
            }
        }
        const Overlay out = render_overlay(slide, preds, palette, 1.0);
        CHECK(static_cast<int>(out.dots.size()) == n_cancerous);

        int blobs = 0;
        for (std::size_t c = 0; c < kCancerousCount; ++c) {
            blobs += count_blobs(out.image, 448, palette.color[c]);
        }
        CHECK(blobs == n_cancerous);
    }
    SUBCASE("benign is drawn only when asked") {
        std::vector<PatchPrediction> preds;
        preds.emplace_back(PatchGeometry{112, 112, 224}, one_hot(HistologicPattern::Benign));
        CHECK(render_overlay(slide, preds, palette, 0.5).dots.empty());
        Palette with_benign = palette;
        with_benign.draw_benign = true;
        CHECK(render_overlay(slide, preds, with_benign, 0.5).dots.size() == 1);
    }
    SUBCASE("rendering is deterministic") {
        std::vector<PatchPrediction> preds;
        preds.emplace_back(PatchGeometry{10, 20, 100}, one_hot(HistologicPattern::Acinar));
        preds.emplace_back(PatchGeometry{200, 250, 100}, one_hot(HistologicPattern::Lepidic));
        const Overlay a = render_overlay(slide, preds, palette, 0.7);
        const Overlay b = render_overlay(slide, preds, palette, 0.7);
        CHECK(a.image == b.image);
        CHECK(encode_png(a.image) == encode_png(b.image));
    }
    SUBCASE("no dot center leaves the scaled image") {
        std::vector<PatchPrediction> preds;
        preds.emplace_back(PatchGeometry{448 - 32, 448 - 32, 32},
                           one_hot(HistologicPattern::Micropapillary));
        const Overlay out = render_overlay(slide, preds, palette, 0.31);
        const int slide_rows = scale_image(slide, 0.31).height();
        for (const OverlayDot& d : out.dots) {
            CHECK(d.x >= 0);
            CHECK(d.x < out.image.width());
            CHECK(d.y >= 0);
            CHECK(d.y < slide_rows);
        }
    }
    SUBCASE("errors") {
        std::vector<PatchPrediction> outside;
        outside.emplace_back(PatchGeometry{400, 400, 224}, one_hot(HistologicPattern::Acinar));
        CHECK_THROWS_AS(render_overlay(slide, outside, palette, 0.5), OutOfBounds);
        CHECK_THROWS_AS(render_overlay(slide, {}, palette, 0.0), BadScale);
        CHECK_THROWS_AS(render_overlay(slide, {}, palette, 1.5), BadScale);
    }
}
