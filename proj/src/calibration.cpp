#include "wsipat/calibration.hpp"

#include <algorithm>
#include <cmath>

namespace wsipat {

GridSpec GridSpec::with_step(double step, double max_value) {
    GridSpec g;
    for (double v = 0.0; v <= max_value + 1e-12; v += step) {
        g.values.push_back(std::min(1.0, v));
    }
    return g;
}

namespace {

void validate_grid(const GridSpec& grid) {
    if (grid.values.empty()) {
        throw FormatError("grid has no candidate values");
    }
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        if (!(grid.values[i] >= 0.0 && grid.values[i] <= 1.0)) {
            throw FormatError("grid value outside [0,1]");
        }
        if (i > 0 && !(grid.values[i] > grid.values[i - 1])) {
            throw FormatError("grid values must be strictly increasing");
        }
    }
    if (grid.passes < 1) {
        throw FormatError("grid passes must be >= 1");
    }
}

double jaccard(const std::vector<HistologicPattern>& a, const std::vector<HistologicPattern>& b) {
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    std::size_t inter = 0;
    for (HistologicPattern x : a) {
        if (std::find(b.begin(), b.end(), x) != b.end()) {
            ++inter;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace

double calibration_objective(std::span<const SlideLabel> model_labels,
                             std::span<const SlideLabel> references) {
    if (model_labels.size() != references.size()) {
        throw LengthMismatch("label lists differ in length");
    }
    if (model_labels.empty()) {
        throw LengthMismatch("objective over zero slides");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < model_labels.size(); ++i) {
        const double match = model_labels[i].predominant == references[i].predominant ? 1.0 : 0.0;
        const double jac = jaccard(model_labels[i].label_set(), references[i].label_set());
        total += 0.5 * match + 0.5 * jac;
    }
    return total / static_cast<double>(model_labels.size());
}

CalibrationResult grid_search_thresholds(std::span<const DevSlide> dev, const GridSpec& grid,
                                         const AggregationConfig& config) {
    if (dev.empty()) {
        throw EmptyDevSet("grid search requires a non-empty development set");
    }
    for (const DevSlide& s : dev) {
        if (s.predictions.empty()) {
            throw EmptyDevSet("dev slide " + s.slide_id + " has no predictions");
        }
    }
    validate_grid(grid);

    std::vector<SlideLabel> references;
    references.reserve(dev.size());
    for (const DevSlide& s : dev) {
        references.push_back(s.reference);
    }

    auto evaluate = [&](const ThresholdVector& tau) {
        std::vector<SlideLabel> labels;
        labels.reserve(dev.size());
        for (const DevSlide& s : dev) {
            labels.push_back(aggregate(count_filtered(s.predictions, tau), config));
        }
        return calibration_objective(labels, references);
    };

    CalibrationResult result;
    ThresholdVector tau; // all zeros
    for (int pass = 1; pass <= grid.passes; ++pass) {
        for (HistologicPattern cls : grid.class_order) {
            double best_value = grid.values.front();
            double best_objective = -1.0;
            for (double v : grid.values) {
                ThresholdVector candidate = tau;
                candidate.set(cls, v);
                const double obj = evaluate(candidate);
                result.trace.push_back(CalibrationTraceEntry{pass, cls, v, obj});
                // Strict > keeps the smallest value on ties (values ascend).
                if (obj > best_objective) {
                    best_objective = obj;
                    best_value = v;
                }
            }
            tau.set(cls, best_value);
        }
    }

    result.thresholds = tau;
    result.objective = evaluate(tau); // from scratch, not a cached sweep value
    return result;
}

} // namespace wsipat
