#include "wsipat/inference.hpp"
#include "wsipat/rng.hpp"
#include "wsipat/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <vector>

using namespace wsipat;

namespace {

ProbabilityVector one_hot(HistologicPattern p, double confidence = 0.9) {
    std::array<double, kPatternCount> v{};
    v.fill((1.0 - confidence) / (kPatternCount - 1));
    v[pattern_index(p)] = confidence;
    return ProbabilityVector::renormalized(v);
}

PatchPrediction pred(HistologicPattern p, double confidence, int x = 0) {
    return PatchPrediction(PatchGeometry{x, 0, 32}, one_hot(p, confidence));
}

ClassCounts counts_of(std::initializer_list<std::pair<HistologicPattern, std::uint64_t>> list) {
    ClassCounts c;
    for (const auto& [p, n] : list) {
        c[p] = n;
    }
    return c;
}

} // namespace

TEST_CASE("filter_predictions") {
    SUBCASE("zero thresholds retain everything") {
        std::vector<PatchPrediction> preds = {pred(HistologicPattern::Acinar, 0.5),
                                              pred(HistologicPattern::Benign, 0.2)};
        const auto [retained, counts] = filter_predictions(preds, ThresholdVector{});
        CHECK(retained.size() == 2);
        CHECK(counts.retained_total() == 2);
    }
    SUBCASE("below-threshold prediction is discarded") {
        ThresholdVector tau;
        tau.set(HistologicPattern::Solid, 0.5);
        std::vector<PatchPrediction> preds = {pred(HistologicPattern::Solid, 0.4)};
        const auto [retained, counts] = filter_predictions(preds, tau);
        CHECK(retained.empty());
        CHECK(counts.retained_total() == 0);
    }
    SUBCASE("exactly-at-threshold prediction is retained") {
        ThresholdVector tau;
        tau.set(HistologicPattern::Solid, 0.4);
        std::vector<PatchPrediction> preds = {pred(HistologicPattern::Solid, 0.4)};
        const auto [retained, counts] = filter_predictions(preds, tau);
        CHECK(retained.size() == 1);
        CHECK(counts[HistologicPattern::Solid] == 1);
    }
    SUBCASE("threshold applies per argmax class only") {
        ThresholdVector tau;
        tau.set(HistologicPattern::Acinar, 0.99); // never reached by these
        std::vector<PatchPrediction> preds = {pred(HistologicPattern::Solid, 0.5),
                                              pred(HistologicPattern::Acinar, 0.5)};
        const auto [retained, counts] = filter_predictions(preds, tau);
        REQUIRE(retained.size() == 1);
        CHECK(retained[0].top_class == HistologicPattern::Solid);
    }
    SUBCASE("raising a threshold never increases the retained total") {
        Rng rng(3);
        std::vector<PatchPrediction> preds;
        for (int i = 0; i < 200; ++i) {
            preds.push_back(pred(kAllPatterns[rng.next_below(kPatternCount)],
                                 0.2 + 0.8 * rng.next_unit()));
        }
        ThresholdVector tau;
        std::uint64_t prev = count_filtered(preds, tau).retained_total();
        for (double v = 0.1; v <= 1.0; v += 0.1) {
            tau.set(HistologicPattern::Acinar, v);
            const std::uint64_t cur = count_filtered(preds, tau).retained_total();
            CHECK(cur <= prev);
            prev = cur;
        }
    }
}

TEST_CASE("aggregate: the three-step heuristic") {
    const AggregationConfig cfg;

    SUBCASE("worked example with a dropped 4% class") {
        const SlideLabel out = aggregate(counts_of({{HistologicPattern::Acinar, 50},
                                                    {HistologicPattern::Lepidic, 40},
                                                    {HistologicPattern::Solid, 4},
                                                    {HistologicPattern::Benign, 6}}),
                                         cfg);
        CHECK(out.predominant == HistologicPattern::Acinar);
        REQUIRE(out.minors.size() == 1);
        CHECK(out.minors[0] == HistologicPattern::Lepidic);
    }
    SUBCASE("single class") {
        const SlideLabel out = aggregate(counts_of({{HistologicPattern::Solid, 100}}), cfg);
        CHECK(out.predominant == HistologicPattern::Solid);
        CHECK(out.minors.empty());
    }
    SUBCASE("all benign is indeterminate") {
        const SlideLabel out = aggregate(counts_of({{HistologicPattern::Benign, 100}}), cfg);
        CHECK(out.is_indeterminate());
    }
    SUBCASE("exactly five percent survives") {
        const SlideLabel out = aggregate(counts_of({{HistologicPattern::Acinar, 95},
                                                    {HistologicPattern::Micropapillary, 5}}),
                                         cfg);
        CHECK(out.predominant == HistologicPattern::Acinar);
        REQUIRE(out.minors.size() == 1);
        CHECK(out.minors[0] == HistologicPattern::Micropapillary);
    }
    SUBCASE("empty counts are indeterminate") {
        CHECK(aggregate(ClassCounts{}, cfg).is_indeterminate());
    }
    SUBCASE("predominance tie breaks to the lower canonical index") {
        const SlideLabel out = aggregate(counts_of({{HistologicPattern::Papillary, 50},
                                                    {HistologicPattern::Solid, 50}}),
                                         cfg);
        CHECK(out.predominant == HistologicPattern::Papillary);
        REQUIRE(out.minors.size() == 1);
        CHECK(out.minors[0] == HistologicPattern::Solid);
    }
    SUBCASE("scale invariance") {
        Rng rng(11);
        for (int trial = 0; trial < 100; ++trial) {
            ClassCounts counts;
            for (std::size_t c = 0; c < kPatternCount; ++c) {
                counts.counts[c] = rng.next_below(30);
            }
            const SlideLabel base = aggregate(counts, cfg);
            ClassCounts scaled = counts;
            const std::uint64_t factor = 2 + rng.next_below(50);
            for (auto& v : scaled.counts) {
                v *= factor;
            }
            CHECK(aggregate(scaled, cfg) == base);
        }
    }
    SUBCASE("output label is always valid") {
        Rng rng(13);
        for (int trial = 0; trial < 500; ++trial) {
            ClassCounts counts;
            for (std::size_t c = 0; c < kPatternCount; ++c) {
                counts.counts[c] = rng.next_below(40);
            }
            const SlideLabel out = aggregate(counts, cfg);
            if (out.predominant) {
                CHECK(is_cancerous(*out.predominant));
                CHECK(std::find(out.minors.begin(), out.minors.end(), *out.predominant) ==
                      out.minors.end());
            } else {
                CHECK(out.minors.empty());
            }
            for (HistologicPattern m : out.minors) {
                CHECK(is_cancerous(m));
            }
        }
    }
    SUBCASE("benign out of the denominator changes the floor") {
        // 9 acinar / 171 lepidic / 60 benign: 9 < 5% of 240 but >= 5% of 180.
        AggregationConfig no_benign = cfg;
        no_benign.benign_in_denominator = false;
        const ClassCounts counts = counts_of({{HistologicPattern::Lepidic, 171},
                                              {HistologicPattern::Acinar, 9},
                                              {HistologicPattern::Benign, 60}});
        CHECK(aggregate(counts, cfg).minors.empty());
        const SlideLabel out = aggregate(counts, no_benign);
        REQUIRE(out.minors.size() == 1);
        CHECK(out.minors[0] == HistologicPattern::Acinar);
    }
    SUBCASE("keeping benign only matters when it wins") {
        AggregationConfig keep = cfg;
        keep.drop_benign = false;
        CHECK(aggregate(counts_of({{HistologicPattern::Benign, 90},
                                   {HistologicPattern::Solid, 10}}),
                        keep)
                  .is_indeterminate());
        const SlideLabel out = aggregate(counts_of({{HistologicPattern::Benign, 10},
                                                    {HistologicPattern::Solid, 90}}),
                                         keep);
        CHECK(out.predominant == HistologicPattern::Solid);
        CHECK(out.minors.empty()); // benign never becomes a minor
    }
}

TEST_CASE("baseline_aggregate") {
    const ThresholdVector zero;

    SUBCASE("two identical one-hot patches") {
        std::vector<PatchPrediction> preds = {pred(HistologicPattern::Acinar, 1.0),
                                              pred(HistologicPattern::Acinar, 1.0)};
        ThresholdVector tau;
        for (HistologicPattern p : kAllPatterns) {
            tau.set(p, 0.25);
        }
        const SlideLabel out = baseline_aggregate(preds, tau);
        CHECK(out.predominant == HistologicPattern::Acinar);
        CHECK(out.minors.empty());
    }
    SUBCASE("hand-computed mean vector with per-class thresholds") {
        // Mean (.30, .40, .02, .03, .20, .05); tau 0.25 everywhere.
        std::vector<PatchPrediction> preds;
        preds.emplace_back(PatchGeometry{0, 0, 32},
                           ProbabilityVector({0.30, 0.40, 0.02, 0.03, 0.20, 0.05}));
        preds.emplace_back(PatchGeometry{32, 0, 32},
                           ProbabilityVector({0.30, 0.40, 0.02, 0.03, 0.20, 0.05}));
        ThresholdVector tau;
        for (HistologicPattern p : kAllPatterns) {
            tau.set(p, 0.25);
        }
        const SlideLabel out = baseline_aggregate(preds, tau);
        CHECK(out.predominant == HistologicPattern::Acinar);
        REQUIRE(out.minors.size() == 1);
        CHECK(out.minors[0] == HistologicPattern::Lepidic); // solid .20 < .25
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(baseline_aggregate({}, zero), EmptyPredictions);
    }
    SUBCASE("benign dominating with no cancerous class at threshold") {
        std::vector<PatchPrediction> preds = {pred(HistologicPattern::Benign, 0.9)};
        ThresholdVector tau;
        for (HistologicPattern p : kAllPatterns) {
            tau.set(p, 0.5);
        }
        CHECK(baseline_aggregate(preds, tau).is_indeterminate());
        // With a reachable threshold the cancerous argmax still wins.
        CHECK_FALSE(baseline_aggregate(preds, zero).is_indeterminate());
    }
    SUBCASE("permutation invariance") {
        Rng rng(17);
        std::vector<PatchPrediction> preds;
        for (int i = 0; i < 50; ++i) {
            preds.push_back(pred(kAllPatterns[rng.next_below(kPatternCount)],
                                 0.3 + 0.7 * rng.next_unit(), i));
        }
        ThresholdVector tau;
        for (HistologicPattern p : kAllPatterns) {
            tau.set(p, 0.15);
        }
        const SlideLabel base = baseline_aggregate(preds, tau);
        for (int shuffle = 0; shuffle < 10; ++shuffle) {
            for (std::size_t i = preds.size() - 1; i > 0; --i) {
                std::swap(preds[i], preds[rng.next_below(i + 1)]);
            }
            CHECK(baseline_aggregate(preds, tau) == base);
        }
    }
}

TEST_CASE("infer_slide composes the pipeline") {
    // 70/30 acinar/solid slide, noise-free oracle.
    SyntheticSpec spec;
    spec.width = 640;
    spec.height = 320;
    spec.seed = 3;
    spec.regions = {PaintRegion{0, 0, 448, 320, HistologicPattern::Acinar},
                    PaintRegion{448, 0, 192, 320, HistologicPattern::Solid}};
    const SyntheticSlide slide = generate_slide(spec);
    const TilerConfig tiler = TilerConfig::with_overlap(32, 0.2);
    const AggregationConfig agg;

    OracleConfig oracle;
    oracle.noise_rate = 0.0;
    Classifier classifier(ClassifierHandle{oracle});

    const SlideInference inf =
        infer_slide(slide.image, classifier, tiler, ThresholdVector{}, agg);
    CHECK(inf.label == expected_slide_label(spec, tiler, agg));
    CHECK(inf.label.predominant == HistologicPattern::Acinar);
    REQUIRE(inf.label.minors.size() == 1);
    CHECK(inf.label.minors[0] == HistologicPattern::Solid);
    CHECK(inf.retained.size() == inf.all_predictions.size()); // tau = 0

    SUBCASE("batch size does not change the outcome") {
        OracleConfig noisy = oracle;
        noisy.noise_rate = 0.15;
        noisy.seed = 9;
        noisy.batch_size = 7;
        Classifier c1(ClassifierHandle{noisy});
        const SlideInference a = infer_slide(slide.image, c1, tiler, ThresholdVector{}, agg);

        noisy.batch_size = 500;
        Classifier c2(ClassifierHandle{noisy});
        const SlideInference b = infer_slide(slide.image, c2, tiler, ThresholdVector{}, agg);
        CHECK(a.label == b.label);
        REQUIRE(a.all_predictions.size() == b.all_predictions.size());
        for (std::size_t i = 0; i < a.all_predictions.size(); ++i) {
            CHECK(a.all_predictions[i].probs == b.all_predictions[i].probs);
        }
    }
    SUBCASE("too-small slide surfaces the tiler error") {
        const Image tiny(16, 16);
        CHECK_THROWS_AS(infer_slide(tiny, classifier, tiler, ThresholdVector{}, agg),
                        RegionTooSmall);
    }
    SUBCASE("brightness skip drops near-white patches before classification") {
        // Paint the solid band white-ish benign: luminance cutoff removes it.
        TilerConfig skipping = tiler;
        skipping.bright_skip_luminance = 200.0;
        SyntheticSpec bright = spec;
        bright.regions[1].pattern = HistologicPattern::Benign; // near-white paint
        const SyntheticSlide s2 = generate_slide(bright);
        const SlideInference inf2 =
            infer_slide(s2.image, classifier, skipping, ThresholdVector{}, agg);
        CHECK(inf2.all_predictions.size() < inf.all_predictions.size());
        for (const PatchPrediction& p : inf2.all_predictions) {
            CHECK(p.top_class != HistologicPattern::Benign);
        }
    }
}
