#include "wsipat/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace wsipat {

namespace {

constexpr std::array<std::string_view, kPatternCount> kNames = {
    "lepidic", "acinar", "papillary", "micropapillary", "solid", "benign",
};

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::string_view pattern_name(HistologicPattern p) {
    return kNames[pattern_index(p)];
}

HistologicPattern parse_pattern(std::string_view name) {
    const std::string folded = to_lower(name);
    for (std::size_t i = 0; i < kPatternCount; ++i) {
        if (folded == kNames[i]) {
            return kAllPatterns[i];
        }
    }
    throw UnknownPattern("unknown histologic pattern: \"" + std::string(name) + "\"");
}

ProbabilityVector::ProbabilityVector(const std::array<double, kPatternCount>& p) : p_(p) {
    double sum = 0.0;
    for (double v : p_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidProbability("probability component outside [0,1]: " + std::to_string(v));
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw InvalidProbability("probability vector sums to " + std::to_string(sum) +
                                 ", expected 1 within 1e-6");
    }
}

ProbabilityVector ProbabilityVector::renormalized(const std::array<double, kPatternCount>& p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) {
            throw InvalidProbability("negative probability component: " + std::to_string(v));
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw InvalidProbability("probability vector sums to " + std::to_string(sum) +
                                 ", beyond the 1e-6 renormalization window");
    }
    std::array<double, kPatternCount> scaled = p;
    for (double& v : scaled) {
        v /= sum;
    }
    ProbabilityVector out;
    out.p_ = scaled;
    return out;
}

HistologicPattern ProbabilityVector::top_class() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kPatternCount; ++i) {
        if (p_[i] > p_[best]) {
            best = i; // strict > keeps ties on the lower index
        }
    }
    return kAllPatterns[best];
}

std::vector<HistologicPattern> SlideLabel::label_set() const {
    std::vector<HistologicPattern> out;
    if (predominant) {
        out.push_back(*predominant);
    }
    out.insert(out.end(), minors.begin(), minors.end());
    std::sort(out.begin(), out.end());
    return out;
}

SlideLabel normalize_slide_label(std::optional<HistologicPattern> predominant,
                                 std::span<const HistologicPattern> minors) {
    if (!predominant) {
        if (!minors.empty()) {
            throw InvalidLabel("an indeterminate label cannot carry minor patterns");
        }
        return SlideLabel::indeterminate();
    }
    if (!is_cancerous(*predominant)) {
        throw InvalidLabel("predominant pattern must be cancerous");
    }
    SlideLabel out;
    out.predominant = predominant;
    for (HistologicPattern m : minors) {
        if (m == *predominant || !is_cancerous(m)) {
            continue;
        }
        out.minors.push_back(m);
    }
    std::sort(out.minors.begin(), out.minors.end());
    out.minors.erase(std::unique(out.minors.begin(), out.minors.end()), out.minors.end());
    return out;
}

std::string slide_label_to_json(const SlideLabel& label) {
    nlohmann::json j;
    if (label.predominant) {
        j["predominant"] = std::string(pattern_name(*label.predominant));
    } else {
        j["predominant"] = nullptr;
    }
    nlohmann::json minors = nlohmann::json::array();
    for (HistologicPattern m : label.minors) {
        minors.push_back(std::string(pattern_name(m)));
    }
    j["minors"] = minors;
    return j.dump();
}

SlideLabel slide_label_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    std::optional<HistologicPattern> predominant;
    if (j.contains("predominant") && !j["predominant"].is_null()) {
        predominant = parse_pattern(j["predominant"].get<std::string>());
    }
    std::vector<HistologicPattern> minors;
    if (j.contains("minors")) {
        for (const auto& m : j["minors"]) {
            minors.push_back(parse_pattern(m.get<std::string>()));
        }
    }
    return normalize_slide_label(predominant, minors);
}

} // namespace wsipat
