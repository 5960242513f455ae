#include "wsipat/tiler.hpp"

#include <cmath>
#include <string>

namespace wsipat {

namespace {

void validate_config(const TilerConfig& c) {
    if (c.window < 1) {
        throw FormatError("tiler window must be >= 1");
    }
    if (c.stride < 1 || c.stride > c.window) {
        throw FormatError("tiler stride must satisfy 1 <= stride <= window; got " +
                          std::to_string(c.stride) + " for window " + std::to_string(c.window));
    }
}

// Window positions along one axis.
std::vector<int> axis_positions(int extent, int window, int stride, bool clamp_final) {
    std::vector<int> pos;
    for (int p = 0; p + window <= extent; p += stride) {
        pos.push_back(p);
    }
    if (clamp_final && pos.back() + window < extent) {
        pos.push_back(extent - window);
    }
    return pos;
}

std::int64_t axis_count(int extent, int window, int stride, bool clamp_final) {
    const std::int64_t regular = (extent - window) / stride + 1;
    const std::int64_t last = (regular - 1) * static_cast<std::int64_t>(stride);
    if (clamp_final && last + window < extent) {
        return regular + 1;
    }
    return regular;
}

} // namespace

TilerConfig TilerConfig::with_overlap(int window, double overlap_fraction, bool clamp_final) {
    TilerConfig c;
    c.window = window;
    c.stride = stride_for_overlap(window, overlap_fraction);
    c.clamp_final = clamp_final;
    validate_config(c);
    return c;
}

TilerConfig TilerConfig::with_stride(int window, int stride, bool clamp_final) {
    TilerConfig c;
    c.window = window;
    c.stride = stride;
    c.clamp_final = clamp_final;
    validate_config(c);
    return c;
}

int stride_for_overlap(int window, double overlap_fraction) {
    if (window < 1) {
        throw FormatError("window must be >= 1");
    }
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
        throw FormatError("overlap fraction must lie in [0,1)");
    }
    const long s = std::lround(window * (1.0 - overlap_fraction));
    return static_cast<int>(std::max(1L, s));
}

std::vector<PatchGeometry> tile_region(int width, int height, const TilerConfig& config) {
    validate_config(config);
    if (width < config.window || height < config.window) {
        throw RegionTooSmall("region " + std::to_string(width) + "x" + std::to_string(height) +
                             " is smaller than the " + std::to_string(config.window) +
                             " px window");
    }
    const std::vector<int> xs = axis_positions(width, config.window, config.stride, config.clamp_final);
    const std::vector<int> ys = axis_positions(height, config.window, config.stride, config.clamp_final);
    std::vector<PatchGeometry> out;
    out.reserve(xs.size() * ys.size());
    for (int y : ys) {
        for (int x : xs) {
            out.push_back(PatchGeometry{x, y, config.window});
        }
    }
    return out;
}

std::int64_t expected_patch_count(int width, int height, const TilerConfig& config) {
    validate_config(config);
    if (width < config.window || height < config.window) {
        throw RegionTooSmall("region " + std::to_string(width) + "x" + std::to_string(height) +
                             " is smaller than the " + std::to_string(config.window) +
                             " px window");
    }
    return axis_count(width, config.window, config.stride, config.clamp_final) *
           axis_count(height, config.window, config.stride, config.clamp_final);
}

int balanced_stride(std::span<const std::pair<int, int>> crop_dims, int window,
                    std::int64_t target_count) {
    if (target_count < 1) {
        throw FormatError("target_count must be >= 1");
    }
    bool any_tilable = false;
    for (const auto& [w, h] : crop_dims) {
        if (w >= window && h >= window) {
            any_tilable = true;
            break;
        }
    }
    if (!any_tilable) {
        throw NoTilableCrops("every crop is smaller than the " + std::to_string(window) +
                             " px window");
    }

    // Training crops are counted without final clamping: the clamped window
    // would duplicate edge content rather than add an evenly spaced sample.
    auto total_at = [&](int stride) {
        const TilerConfig c = TilerConfig::with_stride(window, stride, /*clamp_final=*/false);
        std::int64_t total = 0;
        for (const auto& [w, h] : crop_dims) {
            if (w < window || h < window) {
                continue;
            }
            total += expected_patch_count(w, h, c);
        }
        return total;
    };

    // Patch count is monotone non-increasing in the stride, so the first
    // stride (scanning downward) that reaches the target is the largest one.
    for (int stride = window; stride >= 1; --stride) {
        if (total_at(stride) >= target_count) {
            return stride;
        }
    }
    return 1;
}

} // namespace wsipat
