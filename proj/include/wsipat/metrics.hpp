#pragma once

#include "wsipat/core.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

// =============================================================================
// Agreement statistics between annotators and the model: Cohen's kappa and
// variants, agreement fractions, robust agreement, Welch's t-test,
// precision/recall/F1, and ROC/AUC. Everything here is a pure function.
// =============================================================================

namespace wsipat {

struct EmptySeries : Error {
    using Error::Error;
};

struct RequiresExactlyThreeOthers : Error {
    using Error::Error;
};

struct MissingPair : Error {
    using Error::Error;
};

struct InsufficientSamples : Error {
    using Error::Error;
};

struct ZeroVarianceBoth : Error {
    using Error::Error;
};

struct OneClassOnly : Error {
    using Error::Error;
};

// Ordered whole-slide labels from one annotator. Series being compared must
// share slide order and length.
struct LabeledSeries {
    std::string annotator_id;
    std::vector<SlideLabel> labels;
};

struct CiInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Categorical code for a slide's predominant pattern; Indeterminate is its
// own category rather than an excluded slide.
int predominant_category(const SlideLabel& label);

// -----------------------------------------------------------------------------
// Kappa and agreement
// -----------------------------------------------------------------------------

struct KappaResult {
    double kappa = 0.0;
    double po = 0.0; // observed agreement
    double pe = 0.0; // chance agreement from the marginals
};

// kappa = (po - pe) / (1 - pe). When pe = 1 (both series constant and equal)
// the ratio degenerates; by convention kappa is 1 when po = 1 and 0 otherwise.
KappaResult cohen_kappa(std::span<const int> a, std::span<const int> b);

// Kappa with the normal-approximation 95% CI,
// SE = sqrt(po (1-po) / (n (1-pe)^2)), clamped to [-1, 1].
struct KappaWithCi {
    KappaResult result;
    CiInterval ci;
};
KappaWithCi kappa_predom(const LabeledSeries& a, const LabeledSeries& b);

// Fraction of slides with matching predominant labels, with the binomial
// normal-approximation CI clamped to [0, 1].
struct FractionWithCi {
    double value = 0.0;
    CiInterval ci;
};
FractionWithCi predominant_agreement(const LabeledSeries& a, const LabeledSeries& b);

// Kappa over per-slide presence of one cancerous pattern, counting both
// predominant and minor occurrences.
KappaResult per_class_kappa(const LabeledSeries& a, const LabeledSeries& b,
                            HistologicPattern pattern);

// Fraction of slides where the target's predominant label matches at least
// two of the three other annotators.
double robust_agreement(const LabeledSeries& target, std::span<const LabeledSeries> others);

// Mean of the three pairwise kappas involving target_id. Keys are unordered
// annotator-id pairs (stored with the lexicographically smaller id first).
using PairwiseKappas = std::map<std::pair<std::string, std::string>, double>;
double average_kappa(const std::string& target_id, std::span<const std::string> all_ids,
                     const PairwiseKappas& kappas);

// -----------------------------------------------------------------------------
// Welch's t-test
// -----------------------------------------------------------------------------

struct WelchResult {
    double t = 0.0;
    double dof = 0.0;
    double p_two_sided = 1.0;
};

// Unequal-variance two-sample t-test with the Welch-Satterthwaite degrees of
// freedom. Each sample needs at least two values. When both variances vanish
// the statistic exists only for equal means (t = 0, p = 1); unequal constant
// samples raise ZeroVarianceBoth.
WelchResult welch_t_test(std::span<const double> x, std::span<const double> y);

// Regularized incomplete beta I_x(a, b), via the standard continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// CDF of Student's t distribution with dof degrees of freedom.
double student_t_cdf(double t, double dof);

// -----------------------------------------------------------------------------
// Precision / recall / F1 and ROC
// -----------------------------------------------------------------------------

struct RatioWithCi {
    double value = 0.0;
    CiInterval ci;
};

// One-vs-rest metrics for a single class. A metric whose denominator is zero
// is absent rather than zero. CIs are normal approximations over each
// ratio's own denominator.
struct ClassPrf {
    std::optional<RatioWithCi> precision;
    std::optional<RatioWithCi> recall;
    std::optional<RatioWithCi> f1;
};
ClassPrf precision_recall_f1(std::span<const int> preds, std::span<const int> refs, int cls);

// Unweighted means over the classes where each metric is defined.
struct MacroPrf {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};
MacroPrf macro_prf(std::span<const int> preds, std::span<const int> refs,
                   std::span<const int> classes);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocResult {
    double auc = 0.5;
    std::vector<RocPoint> curve; // staircase from (0,0) to (1,1)
};

// AUC as the Mann-Whitney statistic (ties count one half); needs at least
// one positive and one negative.
RocResult roc_auc(std::span<const double> scores, const std::vector<bool>& positives);

std::string roc_curve_csv(const RocResult& roc);

// -----------------------------------------------------------------------------
// Four-annotator agreement report
// -----------------------------------------------------------------------------

struct PairStats {
    std::string a;
    std::string b;
    double kappa = 0.0;
    CiInterval kappa_ci;
    double agreement = 0.0;
    CiInterval agreement_ci;
    std::array<double, kCancerousCount> per_class_kappa{};
};

// One table row. Averaged rows (each annotator, and the inter-annotator row
// over the first three series) carry the mean of their member values and the
// mean of the member CI bounds; robust agreement per annotator carries its
// own binomial CI.
struct ReportRow {
    std::string id;
    double kappa = 0.0;
    CiInterval kappa_ci;
    double agreement = 0.0;
    CiInterval agreement_ci;
    double robust = 0.0;
    CiInterval robust_ci;
};

struct WelchCell {
    std::string pair_a; // "id1|id2"
    std::string pair_b;
    std::optional<WelchResult> result; // absent when undefined (constant, unequal)
};

struct AgreementReport {
    std::vector<std::string> annotator_ids;
    std::size_t slide_count = 0;
    std::vector<PairStats> pairs;   // all unordered pairs, lower index first
    std::vector<ReportRow> rows;    // one per annotator, then the inter row
    std::vector<WelchCell> welch;   // every pair of pairwise agreement series
};

// The full statistics battery over exactly four aligned series; the paper's
// setting puts the three human annotators first and the model last.
AgreementReport agreement_report(std::span<const LabeledSeries> series);

std::string agreement_report_json(const AgreementReport& report);
std::string agreement_report_table(const AgreementReport& report);
std::string per_class_kappa_csv(const AgreementReport& report);

} // namespace wsipat
