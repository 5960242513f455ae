#pragma once

#include "wsipat/classifier.hpp"
#include "wsipat/core.hpp"
#include "wsipat/tiler.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

// =============================================================================
// Whole-slide inference: confidence filtering of patch predictions, the
// three-step predominant/minor heuristic, and the probability-averaging
// baseline.
// =============================================================================

namespace wsipat {

struct EmptyPredictions : Error {
    using Error::Error;
};

// Per-class confidence cutoffs applied to the argmax confidence.
class ThresholdVector {
public:
    ThresholdVector() = default; // all zeros
    explicit ThresholdVector(const std::array<double, kPatternCount>& tau);

    double operator[](HistologicPattern p) const { return tau_[pattern_index(p)]; }
    const std::array<double, kPatternCount>& values() const { return tau_; }
    void set(HistologicPattern p, double v);

    bool operator==(const ThresholdVector&) const = default;

private:
    std::array<double, kPatternCount> tau_{};
};

// Tally of retained patch predictions by top class.
struct ClassCounts {
    std::array<std::uint64_t, kPatternCount> counts{};

    std::uint64_t operator[](HistologicPattern p) const { return counts[pattern_index(p)]; }
    std::uint64_t& operator[](HistologicPattern p) { return counts[pattern_index(p)]; }
    std::uint64_t retained_total() const;

    ClassCounts& operator+=(const ClassCounts& o);
};

struct AggregationConfig {
    double minor_floor = 0.05; // "less than five percent" cut, strict
    bool drop_benign = true;   // drop the benign class in step 1
    // Whether retained benign predictions count toward the floor's
    // denominator. Both readings of the five-percent rule are reachable;
    // the default keeps them in.
    bool benign_in_denominator = true;
};

// A prediction survives iff confidence >= tau[top_class] (boundary retained).
// Returns the survivors in input order plus their class tally.
std::pair<std::vector<PatchPrediction>, ClassCounts>
filter_predictions(std::span<const PatchPrediction> preds, const ThresholdVector& tau);

// Counts-only variant used by the calibration inner loop.
ClassCounts count_filtered(std::span<const PatchPrediction> preds, const ThresholdVector& tau);

// The three-step heuristic. Step 1 drops the benign class and every class
// whose share of the retained predictions is strictly below minor_floor;
// step 2 assigns the most frequent survivor to the predominant label (ties
// toward the lower canonical index); step 3 assigns the remaining cancerous
// survivors to minor labels. No survivors (or a benign winner when
// drop_benign is off) yields Indeterminate.
SlideLabel aggregate(const ClassCounts& counts, const AggregationConfig& config);

// Baseline: mean probability vector over all patches, no confidence filter.
// Predominant is the cancerous argmax of the mean; minors are the other
// cancerous classes whose mean reaches their threshold. Indeterminate only
// when benign outweighs every cancerous mean and no cancerous mean reaches
// its threshold.
SlideLabel baseline_aggregate(std::span<const PatchPrediction> preds, const ThresholdVector& tau);

struct SlideInference {
    SlideLabel label;
    std::vector<PatchPrediction> retained;
    std::vector<PatchPrediction> all_predictions;
};

// Tile - classify - filter - aggregate for one slide image. Results are
// independent of the classifier batch size. Patches may be skipped by the
// tiler's brightness cutoff before classification when configured.
SlideInference infer_slide(const Image& slide, Classifier& classifier,
                           const TilerConfig& tiler_config, const ThresholdVector& tau,
                           const AggregationConfig& agg_config);

} // namespace wsipat
