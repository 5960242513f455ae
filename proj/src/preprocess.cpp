#include "wsipat/preprocess.hpp"

#include "wsipat/rng.hpp"
#include "wsipat/tiler.hpp"

#include <algorithm>
#include <cmath>

namespace wsipat {

void ChannelStatsAccumulator::add(const Image& patch) {
    // Per-image partial sums in double keep the merge order-insensitive.
    std::array<double, 3> s{};
    std::array<double, 3> s2{};
    const auto& bytes = patch.bytes();
    for (std::size_t i = 0; i + 2 < bytes.size(); i += 3) {
        for (int c = 0; c < 3; ++c) {
            const double v = bytes[i + c] / 255.0;
            s[c] += v;
            s2[c] += v * v;
        }
    }
    for (int c = 0; c < 3; ++c) {
        sum_[c] += s[c];
        sum_sq_[c] += s2[c];
    }
    count_ += static_cast<std::uint64_t>(patch.width()) * patch.height();
}

void ChannelStatsAccumulator::merge(const ChannelStatsAccumulator& other) {
    for (int c = 0; c < 3; ++c) {
        sum_[c] += other.sum_[c];
        sum_sq_[c] += other.sum_sq_[c];
    }
    count_ += other.count_;
}

ChannelStats ChannelStatsAccumulator::finish(std::string dataset_id) const {
    if (count_ == 0) {
        throw EmptyDataset("channel statistics requested over an empty dataset");
    }
    ChannelStats out;
    out.dataset_id = std::move(dataset_id);
    const double n = static_cast<double>(count_);
    for (int c = 0; c < 3; ++c) {
        out.mean[c] = sum_[c] / n;
        // Population variance; clamp tiny negative rounding to zero.
        const double var = std::max(0.0, sum_sq_[c] / n - out.mean[c] * out.mean[c]);
        out.std[c] = std::sqrt(var);
    }
    return out;
}

ChannelStats dataset_channel_stats(const std::function<bool(Image&)>& next_patch,
                                   std::string dataset_id) {
    ChannelStatsAccumulator acc;
    Image patch;
    while (next_patch(patch)) {
        acc.add(patch);
    }
    return acc.finish(std::move(dataset_id));
}

FloatImage normalize(const Image& patch, const ChannelStats& stats) {
    FloatImage out;
    out.width = patch.width();
    out.height = patch.height();
    out.values.resize(patch.bytes().size());
    const auto& bytes = patch.bytes();
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const int c = static_cast<int>(i % 3);
        const double denom = std::max(stats.std[c], kNormalizeEpsilon);
        out.values[i] = static_cast<float>((bytes[i] / 255.0 - stats.mean[c]) / denom);
    }
    return out;
}

FloatImage denormalize(const FloatImage& patch, const ChannelStats& stats) {
    FloatImage out = patch;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        const int c = static_cast<int>(i % 3);
        const double denom = std::max(stats.std[c], kNormalizeEpsilon);
        out.values[i] = static_cast<float>(patch.values[i] * denom + stats.mean[c]);
    }
    return out;
}

// =============================================================================
// Augmentation
// =============================================================================

namespace {

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

void apply_brightness(Image& img, double factor) {
    auto& bytes = img.bytes();
    for (auto& b : bytes) {
        b = clamp_byte(b * factor);
    }
}

void apply_contrast(Image& img, double factor) {
    const double gray = img.mean_luminance();
    auto& bytes = img.bytes();
    for (auto& b : bytes) {
        b = clamp_byte(gray + factor * (b - gray));
    }
}

void apply_saturation(Image& img, double factor) {
    auto& bytes = img.bytes();
    for (std::size_t i = 0; i + 2 < bytes.size(); i += 3) {
        const double luma = 0.299 * bytes[i] + 0.587 * bytes[i + 1] + 0.114 * bytes[i + 2];
        for (int c = 0; c < 3; ++c) {
            bytes[i + c] = clamp_byte(luma + factor * (bytes[i + c] - luma));
        }
    }
}

// Hue rotation through HSV; shift is a fraction of the hue circle.
void apply_hue(Image& img, double shift) {
    auto& bytes = img.bytes();
    for (std::size_t i = 0; i + 2 < bytes.size(); i += 3) {
        const double r = bytes[i] / 255.0;
        const double g = bytes[i + 1] / 255.0;
        const double b = bytes[i + 2] / 255.0;
        const double mx = std::max({r, g, b});
        const double mn = std::min({r, g, b});
        const double delta = mx - mn;

        double h = 0.0;
        if (delta > 0.0) {
            if (mx == r) {
                h = std::fmod((g - b) / delta, 6.0);
            } else if (mx == g) {
                h = (b - r) / delta + 2.0;
            } else {
                h = (r - g) / delta + 4.0;
            }
            h /= 6.0;
            if (h < 0.0) {
                h += 1.0;
            }
        }
        const double s = mx > 0.0 ? delta / mx : 0.0;
        const double v = mx;

        h = std::fmod(h + shift + 1.0, 1.0);

        const double hh = h * 6.0;
        const int sector = static_cast<int>(hh) % 6;
        const double f = hh - std::floor(hh);
        const double p = v * (1.0 - s);
        const double q = v * (1.0 - s * f);
        const double t = v * (1.0 - s * (1.0 - f));
        double nr = v, ng = v, nb = v;
        switch (sector) {
            case 0: nr = v; ng = t; nb = p; break;
            case 1: nr = q; ng = v; nb = p; break;
            case 2: nr = p; ng = v; nb = t; break;
            case 3: nr = p; ng = q; nb = v; break;
            case 4: nr = t; ng = p; nb = v; break;
            case 5: nr = v; ng = p; nb = q; break;
            default: break;
        }
        bytes[i] = clamp_byte(nr * 255.0);
        bytes[i + 1] = clamp_byte(ng * 255.0);
        bytes[i + 2] = clamp_byte(nb * 255.0);
    }
}

void flip_horizontal_inplace(Image& img) {
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width() / 2; ++x) {
            const Rgb a = img.pixel(x, y);
            const Rgb b = img.pixel(img.width() - 1 - x, y);
            img.set_pixel(x, y, b);
            img.set_pixel(img.width() - 1 - x, y, a);
        }
    }
}

void flip_vertical_inplace(Image& img) {
    for (int y = 0; y < img.height() / 2; ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb a = img.pixel(x, y);
            const Rgb b = img.pixel(x, img.height() - 1 - y);
            img.set_pixel(x, y, b);
            img.set_pixel(x, img.height() - 1 - y, a);
        }
    }
}

} // namespace

Image rotate_quarter_turns(const Image& patch, int turns) {
    if (patch.width() != patch.height()) {
        throw FormatError("quarter-turn rotation requires a square patch");
    }
    turns = ((turns % 4) + 4) % 4;
    if (turns == 0) {
        return patch;
    }
    const int n = patch.width();
    Image cur = patch;
    for (int t = 0; t < turns; ++t) {
        Image next(n, n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                next.set_pixel(n - 1 - r, c, cur.pixel(c, r));
            }
        }
        cur = std::move(next);
    }
    return cur;
}

Image augment(const Image& patch, const AugmentSpec& spec, std::uint64_t draw_index) {
    if (patch.width() != patch.height()) {
        throw FormatError("augment requires a square patch");
    }
    Rng rng = Rng::stream(spec.seed, draw_index);

    const double brightness = 1.0 + (2.0 * rng.next_unit() - 1.0) * spec.brightness_delta;
    const double contrast = 1.0 + (2.0 * rng.next_unit() - 1.0) * spec.contrast_delta;
    const double saturation = 1.0 + (2.0 * rng.next_unit() - 1.0) * spec.saturation_delta;
    const double hue = (2.0 * rng.next_unit() - 1.0) * spec.hue_delta;

    std::vector<int> enabled;
    for (int t = 0; t < 4; ++t) {
        if (spec.rotations[t]) {
            enabled.push_back(t);
        }
    }
    if (enabled.empty()) {
        throw FormatError("augment spec enables no rotations");
    }
    const int turns = enabled[rng.next_below(enabled.size())];
    const bool do_h = spec.flip_horizontal && rng.next_coin(0.5);
    const bool do_v = spec.flip_vertical && rng.next_coin(0.5);

    Image out = patch;
    if (brightness != 1.0) {
        apply_brightness(out, brightness);
    }
    if (contrast != 1.0) {
        apply_contrast(out, contrast);
    }
    if (saturation != 1.0) {
        apply_saturation(out, saturation);
    }
    if (hue != 0.0) {
        apply_hue(out, hue);
    }
    out = rotate_quarter_turns(out, turns);
    if (do_h) {
        flip_horizontal_inplace(out);
    }
    if (do_v) {
        flip_vertical_inplace(out);
    }
    return out;
}

// =============================================================================
// Balanced training manifest
// =============================================================================

std::vector<TrainingManifestEntry> build_balanced_training_set(
    const std::map<HistologicPattern, std::vector<AnnotationCrop>>& crops_by_class, int window,
    std::int64_t target_per_class) {
    if (target_per_class < 1) {
        throw FormatError("target_per_class must be >= 1");
    }
    std::vector<TrainingManifestEntry> out;

    for (const auto& [label, crops] : crops_by_class) {
        std::vector<std::pair<int, int>> dims;
        dims.reserve(crops.size());
        for (const AnnotationCrop& c : crops) {
            dims.emplace_back(c.width, c.height);
        }
        int stride;
        try {
            stride = balanced_stride(dims, window, target_per_class);
        } catch (const NoTilableCrops&) {
            throw NoTilableCrops("class " + std::string(pattern_name(label)) +
                                 " has no crop at least " + std::to_string(window) + " px wide and tall");
        }

        // No final clamping here, matching balanced_stride's counting.
        const TilerConfig cfg = TilerConfig::with_stride(window, stride, /*clamp_final=*/false);
        std::vector<TrainingManifestEntry> raw;
        for (const AnnotationCrop& c : crops) {
            if (c.width < window || c.height < window) {
                continue; // skipped, not padded
            }
            for (const PatchGeometry& g : tile_region(c.width, c.height, cfg)) {
                PatchGeometry absolute{c.x + g.x, c.y + g.y, g.side};
                raw.push_back(TrainingManifestEntry{label, c.slide_id, absolute, 0});
            }
        }

        if (static_cast<std::int64_t>(raw.size()) >= target_per_class) {
            raw.resize(static_cast<std::size_t>(target_per_class));
            out.insert(out.end(), raw.begin(), raw.end());
            continue;
        }

        // Top up with augmented duplicates, cycling the raw patches in order
        // and bumping draw_index each full cycle.
        out.insert(out.end(), raw.begin(), raw.end());
        std::int64_t remaining = target_per_class - static_cast<std::int64_t>(raw.size());
        std::uint64_t draw = 1;
        std::size_t cursor = 0;
        while (remaining > 0) {
            TrainingManifestEntry dup = raw[cursor];
            dup.draw_index = draw;
            out.push_back(dup);
            --remaining;
            ++cursor;
            if (cursor == raw.size()) {
                cursor = 0;
                ++draw;
            }
        }
    }
    return out;
}

} // namespace wsipat
