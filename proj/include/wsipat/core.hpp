#pragma once

#include "wsipat/errors.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// =============================================================================
// Core domain types shared by every module: the six patch classes, probability
// vectors, patch geometry, and whole-slide labels.
// =============================================================================

namespace wsipat {

// The five cancerous growth patterns plus the benign class, in canonical
// index order. Every array indexed by class, every CSV column block and every
// tie-break in the toolkit uses this order.
enum class HistologicPattern : std::uint8_t {
    Lepidic = 0,
    Acinar = 1,
    Papillary = 2,
    Micropapillary = 3,
    Solid = 4,
    Benign = 5,
};

inline constexpr std::size_t kPatternCount = 6;
inline constexpr std::size_t kCancerousCount = 5;

inline constexpr std::array<HistologicPattern, kPatternCount> kAllPatterns = {
    HistologicPattern::Lepidic,        HistologicPattern::Acinar,
    HistologicPattern::Papillary,      HistologicPattern::Micropapillary,
    HistologicPattern::Solid,          HistologicPattern::Benign,
};

constexpr std::size_t pattern_index(HistologicPattern p) {
    return static_cast<std::size_t>(p);
}

constexpr bool is_cancerous(HistologicPattern p) {
    return pattern_index(p) < kCancerousCount;
}

// Lowercase canonical name, also the wire encoding.
std::string_view pattern_name(HistologicPattern p);

struct UnknownPattern : Error {
    using Error::Error;
};

// Case-insensitive lookup of a canonical class name.
HistologicPattern parse_pattern(std::string_view name);

// -----------------------------------------------------------------------------
// ProbabilityVector
// -----------------------------------------------------------------------------

struct InvalidProbability : Error {
    using Error::Error;
};

// Six-class probability distribution in canonical order. Construction
// validates components in [0,1] and sum within kSumTolerance of one.
class ProbabilityVector {
public:
    static constexpr double kSumTolerance = 1e-6;

    explicit ProbabilityVector(const std::array<double, kPatternCount>& p);

    // Accepts a vector whose sum deviates from 1 by at most kSumTolerance and
    // rescales it to sum exactly; rejects anything further off. This is the
    // entry point for values received from external classifiers.
    static ProbabilityVector renormalized(const std::array<double, kPatternCount>& p);

    double operator[](HistologicPattern p) const { return p_[pattern_index(p)]; }
    double at_index(std::size_t i) const { return p_[i]; }
    const std::array<double, kPatternCount>& values() const { return p_; }

    // Argmax with ties broken toward the lower canonical index.
    HistologicPattern top_class() const;
    double confidence() const { return p_[pattern_index(top_class())]; }

    bool operator==(const ProbabilityVector& o) const { return p_ == o.p_; }

private:
    ProbabilityVector() = default;
    std::array<double, kPatternCount> p_{};
};

// -----------------------------------------------------------------------------
// Patch geometry and predictions
// -----------------------------------------------------------------------------

// Square window inside a parent region. x/y are the left/top corner in pixels.
struct PatchGeometry {
    int x = 0;
    int y = 0;
    int side = 224;

    bool operator==(const PatchGeometry&) const = default;
};

// One patch together with the classifier's output for it. top_class and
// confidence are derived from probs at construction and never drift.
struct PatchPrediction {
    PatchGeometry geometry;
    ProbabilityVector probs;
    HistologicPattern top_class;
    double confidence;

    PatchPrediction(PatchGeometry g, ProbabilityVector p)
        : geometry(g),
          probs(std::move(p)),
          top_class(probs.top_class()),
          confidence(probs.confidence()) {}
};

// -----------------------------------------------------------------------------
// SlideLabel
// -----------------------------------------------------------------------------

struct InvalidLabel : Error {
    using Error::Error;
};

// Whole-slide outcome: one predominant cancerous pattern plus minor cancerous
// patterns, or Indeterminate (no predominant, no minors) when nothing
// cancerous survives aggregation. Benign never appears. minors is kept
// sorted in canonical order and never contains the predominant.
struct SlideLabel {
    std::optional<HistologicPattern> predominant; // nullopt = Indeterminate
    std::vector<HistologicPattern> minors;

    static SlideLabel indeterminate() { return SlideLabel{}; }

    bool is_indeterminate() const { return !predominant.has_value(); }

    // Full label set {predominant} ∪ minors; empty for Indeterminate.
    std::vector<HistologicPattern> label_set() const;

    bool operator==(const SlideLabel&) const = default;
};

// Validates and canonicalizes: drops the predominant and Benign from minors,
// sorts and dedups. Throws InvalidLabel when predominant is Benign or any
// minor is Benign-only-invalid (Benign minors are silently dropped; a Benign
// predominant is an error).
SlideLabel normalize_slide_label(std::optional<HistologicPattern> predominant,
                                 std::span<const HistologicPattern> minors);

// -----------------------------------------------------------------------------
// AnnotationCrop
// -----------------------------------------------------------------------------

// Pathologist-annotated rectangle on a training slide.
struct AnnotationCrop {
    std::string slide_id;
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
    HistologicPattern label = HistologicPattern::Benign;
};

// -----------------------------------------------------------------------------
// JSON encoding (lowercase pattern names; SlideLabel predominant null when
// Indeterminate). Round-trips exactly for every valid value.
// -----------------------------------------------------------------------------

std::string slide_label_to_json(const SlideLabel& label);
SlideLabel slide_label_from_json(const std::string& json_text);

} // namespace wsipat
