#include "wsipat/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace wsipat {

ThresholdVector::ThresholdVector(const std::array<double, kPatternCount>& tau) : tau_(tau) {
    for (double v : tau_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw FormatError("threshold outside [0,1]: " + std::to_string(v));
        }
    }
}

void ThresholdVector::set(HistologicPattern p, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw FormatError("threshold outside [0,1]: " + std::to_string(v));
    }
    tau_[pattern_index(p)] = v;
}

std::uint64_t ClassCounts::retained_total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ClassCounts& ClassCounts::operator+=(const ClassCounts& o) {
    for (std::size_t i = 0; i < kPatternCount; ++i) {
        counts[i] += o.counts[i];
    }
    return *this;
}

std::pair<std::vector<PatchPrediction>, ClassCounts>
filter_predictions(std::span<const PatchPrediction> preds, const ThresholdVector& tau) {
    std::vector<PatchPrediction> retained;
    ClassCounts counts;
    for (const PatchPrediction& p : preds) {
        if (p.confidence >= tau[p.top_class]) {
            retained.push_back(p);
            ++counts[p.top_class];
        }
    }
    return {std::move(retained), counts};
}

ClassCounts count_filtered(std::span<const PatchPrediction> preds, const ThresholdVector& tau) {
    ClassCounts counts;
    for (const PatchPrediction& p : preds) {
        if (p.confidence >= tau[p.top_class]) {
            ++counts[p.top_class];
        }
    }
    return counts;
}

SlideLabel aggregate(const ClassCounts& counts, const AggregationConfig& config) {
    std::uint64_t denom = counts.retained_total();
    if (!config.benign_in_denominator) {
        denom -= counts[HistologicPattern::Benign];
    }
    if (denom == 0) {
        return SlideLabel::indeterminate();
    }

    // Step 1: drop benign and everything below the floor. The comparison is
    // strict, so a class sitting exactly on the floor survives.
    const double floor_count = config.minor_floor * static_cast<double>(denom);
    std::array<bool, kPatternCount> survives{};
    for (HistologicPattern c : kAllPatterns) {
        if (counts[c] == 0) {
            continue;
        }
        if (config.drop_benign && c == HistologicPattern::Benign) {
            continue;
        }
        if (static_cast<double>(counts[c]) < floor_count) {
            continue;
        }
        survives[pattern_index(c)] = true;
    }

    // Step 2: most frequent survivor wins; ties go to the lower index.
    std::optional<HistologicPattern> predominant;
    std::uint64_t best = 0;
    for (HistologicPattern c : kAllPatterns) {
        if (survives[pattern_index(c)] && counts[c] > best) {
            best = counts[c];
            predominant = c;
        }
    }
    if (!predominant) {
        return SlideLabel::indeterminate();
    }
    if (*predominant == HistologicPattern::Benign) {
        // Reachable only with drop_benign off: a predominantly benign slide
        // has no cancerous label to give.
        return SlideLabel::indeterminate();
    }

    // Step 3: remaining cancerous survivors become minors.
    SlideLabel out;
    out.predominant = predominant;
    for (HistologicPattern c : kAllPatterns) {
        if (c != *predominant && survives[pattern_index(c)] && is_cancerous(c)) {
            out.minors.push_back(c);
        }
    }
    return out;
}

SlideLabel baseline_aggregate(std::span<const PatchPrediction> preds, const ThresholdVector& tau) {
    if (preds.empty()) {
        throw EmptyPredictions("baseline aggregation requires at least one prediction");
    }
    std::array<double, kPatternCount> mean{};
    for (const PatchPrediction& p : preds) {
        for (std::size_t i = 0; i < kPatternCount; ++i) {
            mean[i] += p.probs.at_index(i);
        }
    }
    for (double& v : mean) {
        v /= static_cast<double>(preds.size());
    }

    std::size_t best_cancerous = 0;
    for (std::size_t i = 1; i < kCancerousCount; ++i) {
        if (mean[i] > mean[best_cancerous]) {
            best_cancerous = i;
        }
    }
    const double benign_mean = mean[pattern_index(HistologicPattern::Benign)];

    bool any_cancerous_reaches = false;
    for (std::size_t i = 0; i < kCancerousCount; ++i) {
        if (mean[i] >= tau[kAllPatterns[i]]) {
            any_cancerous_reaches = true;
            break;
        }
    }
    if (benign_mean > mean[best_cancerous] && !any_cancerous_reaches) {
        return SlideLabel::indeterminate();
    }

    SlideLabel out;
    out.predominant = kAllPatterns[best_cancerous];
    for (std::size_t i = 0; i < kCancerousCount; ++i) {
        if (i != best_cancerous && mean[i] >= tau[kAllPatterns[i]]) {
            out.minors.push_back(kAllPatterns[i]);
        }
    }
    return out;
}

SlideInference infer_slide(const Image& slide, Classifier& classifier,
                           const TilerConfig& tiler_config, const ThresholdVector& tau,
                           const AggregationConfig& agg_config) {
    const std::vector<PatchGeometry> grid = tile_region(slide.width(), slide.height(), tiler_config);

    std::vector<PatchGeometry> kept_geometry;
    kept_geometry.reserve(grid.size());
    if (tiler_config.bright_skip_luminance) {
        const double cutoff = *tiler_config.bright_skip_luminance;
        for (const PatchGeometry& g : grid) {
            if (slide.crop(g.x, g.y, g.side, g.side).mean_luminance() <= cutoff) {
                kept_geometry.push_back(g);
            }
        }
    } else {
        kept_geometry = grid;
    }

    SlideInference result;
    result.all_predictions.reserve(kept_geometry.size());

    const std::size_t batch = static_cast<std::size_t>(classifier.handle().batch_size());
    for (std::size_t at = 0; at < kept_geometry.size(); at += batch) {
        const std::size_t n = std::min(batch, kept_geometry.size() - at);
        std::vector<Image> patches;
        patches.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const PatchGeometry& g = kept_geometry[at + i];
            patches.push_back(slide.crop(g.x, g.y, g.side, g.side));
        }
        // Draw indices are the global patch positions, so results do not
        // depend on the batch size.
        const std::vector<ProbabilityVector> probs =
            classifier.classify_batch(patches, static_cast<std::uint64_t>(at));
        for (std::size_t i = 0; i < n; ++i) {
            result.all_predictions.emplace_back(kept_geometry[at + i], probs[i]);
        }
    }

    auto [retained, counts] = filter_predictions(result.all_predictions, tau);
    result.retained = std::move(retained);
    result.label = aggregate(counts, agg_config);
    return result;
}

} // namespace wsipat
