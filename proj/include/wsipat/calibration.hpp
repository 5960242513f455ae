#pragma once

#include "wsipat/core.hpp"
#include "wsipat/inference.hpp"

#include <span>
#include <string>
#include <vector>

// =============================================================================
// Per-class confidence threshold calibration on a labeled development set.
// =============================================================================

namespace wsipat {

struct EmptyDevSet : Error {
    using Error::Error;
};

struct GridSpec {
    // Candidate threshold values, strictly increasing. Default 0.00..0.95.
    std::vector<double> values;
    int passes = 2;
    std::array<HistologicPattern, kPatternCount> class_order = kAllPatterns;

    static GridSpec with_step(double step = 0.05, double max_value = 0.95);
};

// One development slide: threshold-free patch predictions plus the reference
// whole-slide label. Predictions are computed once; only filtering and
// aggregation re-run per grid point.
struct DevSlide {
    std::string slide_id;
    std::vector<PatchPrediction> predictions;
    SlideLabel reference;
};

// Mean over slides of 1/2 [predominant match] + 1/2 [Jaccard of the full
// label sets], where Indeterminate contributes an empty set and
// Jaccard(empty, empty) = 1.
double calibration_objective(std::span<const SlideLabel> model_labels,
                             std::span<const SlideLabel> references);

struct CalibrationTraceEntry {
    int pass = 0;
    HistologicPattern pattern;
    double value = 0.0;
    double objective = 0.0;
};

struct CalibrationResult {
    ThresholdVector thresholds;
    double objective = 0.0; // re-evaluated from scratch at the returned tau
    std::vector<CalibrationTraceEntry> trace;
};

// Coordinate descent from tau = 0: sweeps classes in class_order, trying
// every grid value for one class with the others held fixed and keeping the
// objective maximizer (ties toward the smallest value); repeats for the
// configured number of passes. The trace records every evaluation.
CalibrationResult grid_search_thresholds(std::span<const DevSlide> dev, const GridSpec& grid,
                                         const AggregationConfig& config);

} // namespace wsipat
