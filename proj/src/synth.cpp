#include "wsipat/synth.hpp"

#include "wsipat/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <string>

namespace wsipat {

GroundTruth::GroundTruth(int width, int height, std::vector<std::uint8_t> class_map)
    : width_(width), height_(height), map_(std::move(class_map)) {
    if (map_.size() != static_cast<std::size_t>(width) * height) {
        throw FormatError("ground-truth map size does not match dimensions");
    }
}

HistologicPattern GroundTruth::patch_label(const PatchGeometry& g) const {
    if (g.x < 0 || g.y < 0 || g.side < 1 || g.x + g.side > width_ || g.y + g.side > height_) {
        throw RegionOutOfBounds("patch outside the synthetic slide");
    }
    std::array<std::uint64_t, kPatternCount> tally{};
    for (int y = g.y; y < g.y + g.side; ++y) {
        const std::uint8_t* row = map_.data() + static_cast<std::size_t>(y) * width_;
        for (int x = g.x; x < g.x + g.side; ++x) {
            ++tally[row[x]];
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < kPatternCount; ++k) {
        if (tally[k] > tally[best]) {
            best = k;
        }
    }
    return kAllPatterns[best];
}

namespace {

void validate_spec(const SyntheticSpec& spec) {
    if (spec.width < 1 || spec.height < 1) {
        throw FormatError("synthetic slide dimensions must be positive");
    }
    for (const PaintRegion& r : spec.regions) {
        if (r.width < 1 || r.height < 1 || r.x < 0 || r.y < 0 || r.x + r.width > spec.width ||
            r.y + r.height > spec.height) {
            throw RegionOutOfBounds("region (" + std::to_string(r.x) + "," + std::to_string(r.y) +
                                    ")+" + std::to_string(r.width) + "x" +
                                    std::to_string(r.height) + " leaves the " +
                                    std::to_string(spec.width) + "x" +
                                    std::to_string(spec.height) + " slide");
        }
    }
}

std::vector<std::uint8_t> paint_class_map(const SyntheticSpec& spec) {
    std::vector<std::uint8_t> map(static_cast<std::size_t>(spec.width) * spec.height,
                                  static_cast<std::uint8_t>(pattern_index(HistologicPattern::Benign)));
    for (const PaintRegion& r : spec.regions) {
        const auto cls = static_cast<std::uint8_t>(pattern_index(r.pattern));
        for (int y = r.y; y < r.y + r.height; ++y) {
            std::uint8_t* row = map.data() + static_cast<std::size_t>(y) * spec.width;
            std::fill(row + r.x, row + r.x + r.width, cls);
        }
    }
    return map;
}

} // namespace

SyntheticSlide generate_slide(const SyntheticSpec& spec) {
    validate_spec(spec);
    std::vector<std::uint8_t> class_map = paint_class_map(spec);

    const auto& colors = default_class_colors();
    Image image(spec.width, spec.height);
    Rng rng(spec.seed);
    auto& bytes = image.bytes();
    for (std::size_t px = 0; px < class_map.size(); ++px) {
        const Rgb base = colors[class_map[px]];
        const std::array<int, 3> channel = {base.r, base.g, base.b};
        for (int c = 0; c < 3; ++c) {
            // +-2 intensity levels of seeded noise.
            const int jitter = static_cast<int>(rng.next_below(5)) - 2;
            bytes[px * 3 + c] = static_cast<std::uint8_t>(std::clamp(channel[c] + jitter, 0, 255));
        }
    }
    return SyntheticSlide{std::move(image), GroundTruth(spec.width, spec.height, std::move(class_map))};
}

SlideLabel expected_slide_label(const SyntheticSpec& spec, const TilerConfig& tiler_config,
                                const AggregationConfig& agg_config) {
    validate_spec(spec);
    const GroundTruth truth(spec.width, spec.height, paint_class_map(spec));
    ClassCounts counts;
    for (const PatchGeometry& g : tile_region(spec.width, spec.height, tiler_config)) {
        ++counts[truth.patch_label(g)];
    }
    return aggregate(counts, agg_config);
}

SyntheticSpec synth_spec_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad synthetic spec JSON: " + std::string(e.what()));
    }
    SyntheticSpec spec;
    try {
        spec.width = j.at("width").get<int>();
        spec.height = j.at("height").get<int>();
        spec.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("regions")) {
            for (const auto& r : j["regions"]) {
                PaintRegion region;
                region.x = r.at("x").get<int>();
                region.y = r.at("y").get<int>();
                region.width = r.at("width").get<int>();
                region.height = r.at("height").get<int>();
                region.pattern = parse_pattern(r.at("pattern").get<std::string>());
                spec.regions.push_back(region);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad synthetic spec JSON: " + std::string(e.what()));
    }
    validate_spec(spec);
    return spec;
}

std::string synth_spec_to_json(const SyntheticSpec& spec) {
    nlohmann::json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["seed"] = spec.seed;
    nlohmann::json regions = nlohmann::json::array();
    for (const PaintRegion& r : spec.regions) {
        nlohmann::json rj;
        rj["x"] = r.x;
        rj["y"] = r.y;
        rj["width"] = r.width;
        rj["height"] = r.height;
        rj["pattern"] = std::string(pattern_name(r.pattern));
        regions.push_back(rj);
    }
    j["regions"] = regions;
    return j.dump(2);
}

} // namespace wsipat
