#include "wsipat/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace wsipat {

namespace {

constexpr double kZ95 = 1.96;

double clamp(double v, double lo, double hi) {
    return std::min(hi, std::max(lo, v));
}

void require_aligned(std::size_t na, std::size_t nb) {
    if (na != nb) {
        throw LengthMismatch("series lengths differ: " + std::to_string(na) + " vs " +
                             std::to_string(nb));
    }
    if (na == 0) {
        throw EmptySeries("series is empty");
    }
}

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

} // namespace

int predominant_category(const SlideLabel& label) {
    return label.predominant ? static_cast<int>(pattern_index(*label.predominant))
                             : static_cast<int>(kPatternCount);
}

// =============================================================================
// Kappa and agreement
// =============================================================================

KappaResult cohen_kappa(std::span<const int> a, std::span<const int> b) {
    require_aligned(a.size(), b.size());
    const double n = static_cast<double>(a.size());

    std::map<int, std::uint64_t> count_a;
    std::map<int, std::uint64_t> count_b;
    std::uint64_t matches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++count_a[a[i]];
        ++count_b[b[i]];
        if (a[i] == b[i]) {
            ++matches;
        }
    }

    KappaResult r;
    r.po = static_cast<double>(matches) / n;
    r.pe = 0.0;
    for (const auto& [cat, ca] : count_a) {
        const auto it = count_b.find(cat);
        if (it != count_b.end()) {
            r.pe += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
        }
    }

    if (1.0 - r.pe < 1e-12) {
        // Both series constant on the same category.
        r.pe = 1.0;
        r.kappa = r.po == 1.0 ? 1.0 : 0.0;
        return r;
    }
    r.kappa = (r.po - r.pe) / (1.0 - r.pe);
    return r;
}

namespace {

std::vector<int> predominant_codes(const LabeledSeries& s) {
    std::vector<int> out;
    out.reserve(s.labels.size());
    for (const SlideLabel& l : s.labels) {
        out.push_back(predominant_category(l));
    }
    return out;
}

CiInterval kappa_ci(const KappaResult& r, std::size_t n) {
    double se = 0.0;
    const double spread = r.po * (1.0 - r.po);
    if (spread > 0.0 && r.pe < 1.0) {
        se = std::sqrt(spread / (static_cast<double>(n) * (1.0 - r.pe) * (1.0 - r.pe)));
    }
    return CiInterval{clamp(r.kappa - kZ95 * se, -1.0, 1.0),
                      clamp(r.kappa + kZ95 * se, -1.0, 1.0)};
}

} // namespace

KappaWithCi kappa_predom(const LabeledSeries& a, const LabeledSeries& b) {
    const std::vector<int> ca = predominant_codes(a);
    const std::vector<int> cb = predominant_codes(b);
    KappaWithCi out;
    out.result = cohen_kappa(ca, cb);
    out.ci = kappa_ci(out.result, ca.size());
    return out;
}

FractionWithCi predominant_agreement(const LabeledSeries& a, const LabeledSeries& b) {
    require_aligned(a.labels.size(), b.labels.size());
    const double n = static_cast<double>(a.labels.size());
    std::uint64_t matches = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        if (predominant_category(a.labels[i]) == predominant_category(b.labels[i])) {
            ++matches;
        }
    }
    FractionWithCi out;
    out.value = static_cast<double>(matches) / n;
    const double se = std::sqrt(out.value * (1.0 - out.value) / n);
    out.ci = CiInterval{clamp(out.value - kZ95 * se, 0.0, 1.0),
                        clamp(out.value + kZ95 * se, 0.0, 1.0)};
    return out;
}

KappaResult per_class_kappa(const LabeledSeries& a, const LabeledSeries& b,
                            HistologicPattern pattern) {
    require_aligned(a.labels.size(), b.labels.size());
    auto presence = [&](const SlideLabel& l) {
        const auto set = l.label_set();
        return std::find(set.begin(), set.end(), pattern) != set.end() ? 1 : 0;
    };
    std::vector<int> pa;
    std::vector<int> pb;
    pa.reserve(a.labels.size());
    pb.reserve(b.labels.size());
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        pa.push_back(presence(a.labels[i]));
        pb.push_back(presence(b.labels[i]));
    }
    return cohen_kappa(pa, pb);
}

double robust_agreement(const LabeledSeries& target, std::span<const LabeledSeries> others) {
    if (others.size() != 3) {
        throw RequiresExactlyThreeOthers("robust agreement is defined against exactly three "
                                         "other annotators; got " +
                                         std::to_string(others.size()));
    }
    for (const LabeledSeries& o : others) {
        require_aligned(target.labels.size(), o.labels.size());
    }
    std::uint64_t robust = 0;
    for (std::size_t i = 0; i < target.labels.size(); ++i) {
        const int mine = predominant_category(target.labels[i]);
        int agreeing = 0;
        for (const LabeledSeries& o : others) {
            if (predominant_category(o.labels[i]) == mine) {
                ++agreeing;
            }
        }
        if (agreeing >= 2) {
            ++robust;
        }
    }
    return static_cast<double>(robust) / static_cast<double>(target.labels.size());
}

double average_kappa(const std::string& target_id, std::span<const std::string> all_ids,
                     const PairwiseKappas& kappas) {
    double total = 0.0;
    int pairs = 0;
    for (const std::string& other : all_ids) {
        if (other == target_id) {
            continue;
        }
        auto key = std::minmax(target_id, other);
        const auto it = kappas.find({key.first, key.second});
        if (it == kappas.end()) {
            throw MissingPair("no kappa recorded for pair " + key.first + " / " + key.second);
        }
        total += it->second;
        ++pairs;
    }
    if (pairs == 0) {
        throw MissingPair("no pairs involve annotator " + target_id);
    }
    return total / pairs;
}

// =============================================================================
// Welch's t-test and the t distribution
// =============================================================================

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    // Continued fraction (Lentz) with the symmetry transform for convergence.
    auto betacf = [](double aa, double bb, double xx) {
        constexpr int kMaxIter = 300;
        constexpr double kEps = 3e-16;
        constexpr double kFpMin = 1e-300;
        const double qab = aa + bb;
        const double qap = aa + 1.0;
        const double qam = aa - 1.0;
        double c = 1.0;
        double d = 1.0 - qab * xx / qap;
        if (std::abs(d) < kFpMin) {
            d = kFpMin;
        }
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= kMaxIter; ++m) {
            const int m2 = 2 * m;
            double num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < kFpMin) {
                d = kFpMin;
            }
            c = 1.0 + num / c;
            if (std::abs(c) < kFpMin) {
                c = kFpMin;
            }
            d = 1.0 / d;
            h *= d * c;
            num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < kFpMin) {
                d = kFpMin;
            }
            c = 1.0 + num / c;
            if (std::abs(c) < kFpMin) {
                c = kFpMin;
            }
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < kEps) {
                break;
            }
        }
        return h;
    };

    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
    if (dof <= 0.0) {
        throw FormatError("degrees of freedom must be positive");
    }
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

WelchResult welch_t_test(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2 || y.size() < 2) {
        throw InsufficientSamples("welch t-test needs at least two values per sample");
    }
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nx;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / ny;

    auto sample_var = [](std::span<const double> v, double mean) {
        double s = 0.0;
        for (double val : v) {
            s += (val - mean) * (val - mean);
        }
        return s / (static_cast<double>(v.size()) - 1.0);
    };
    const double vx = sample_var(x, mx);
    const double vy = sample_var(y, my);

    if (vx == 0.0 && vy == 0.0) {
        if (mx == my) {
            return WelchResult{0.0, nx + ny - 2.0, 1.0};
        }
        throw ZeroVarianceBoth("both samples are constant with unequal means; t is undefined");
    }

    const double se2 = vx / nx + vy / ny;
    WelchResult r;
    r.t = (mx - my) / std::sqrt(se2);
    r.dof = se2 * se2 /
            ((vx / nx) * (vx / nx) / (nx - 1.0) + (vy / ny) * (vy / ny) / (ny - 1.0));
    r.p_two_sided = 2.0 * (1.0 - student_t_cdf(std::abs(r.t), r.dof));
    return r;
}

// =============================================================================
// Precision / recall / F1 and ROC
// =============================================================================

namespace {

std::optional<RatioWithCi> ratio_with_ci(std::uint64_t numerator, std::uint64_t denominator) {
    if (denominator == 0) {
        return std::nullopt;
    }
    RatioWithCi out;
    out.value = static_cast<double>(numerator) / static_cast<double>(denominator);
    const double se = std::sqrt(out.value * (1.0 - out.value) / static_cast<double>(denominator));
    out.ci = CiInterval{clamp(out.value - kZ95 * se, 0.0, 1.0),
                        clamp(out.value + kZ95 * se, 0.0, 1.0)};
    return out;
}

} // namespace

ClassPrf precision_recall_f1(std::span<const int> preds, std::span<const int> refs, int cls) {
    require_aligned(preds.size(), refs.size());
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == cls;
        const bool r = refs[i] == cls;
        tp += p && r;
        fp += p && !r;
        fn += !p && r;
    }
    ClassPrf out;
    out.precision = ratio_with_ci(tp, tp + fp);
    out.recall = ratio_with_ci(tp, tp + fn);
    // F1 = 2TP / (2TP + FP + FN); treated as a ratio over its own denominator.
    out.f1 = ratio_with_ci(2 * tp, 2 * tp + fp + fn);
    return out;
}

MacroPrf macro_prf(std::span<const int> preds, std::span<const int> refs,
                   std::span<const int> classes) {
    double sp = 0.0, sr = 0.0, sf = 0.0;
    int np = 0, nr = 0, nf = 0;
    for (int cls : classes) {
        const ClassPrf c = precision_recall_f1(preds, refs, cls);
        if (c.precision) {
            sp += c.precision->value;
            ++np;
        }
        if (c.recall) {
            sr += c.recall->value;
            ++nr;
        }
        if (c.f1) {
            sf += c.f1->value;
            ++nf;
        }
    }
    MacroPrf out;
    if (np > 0) {
        out.precision = sp / np;
    }
    if (nr > 0) {
        out.recall = sr / nr;
    }
    if (nf > 0) {
        out.f1 = sf / nf;
    }
    return out;
}

RocResult roc_auc(std::span<const double> scores, const std::vector<bool>& positives) {
    require_aligned(scores.size(), positives.size());
    std::uint64_t n_pos = 0;
    for (bool p : positives) {
        n_pos += p;
    }
    const std::uint64_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw OneClassOnly("ROC needs at least one positive and one negative");
    }

    // Ranks ascending with ties averaged; AUC from the Mann-Whitney U.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double mean_rank = static_cast<double>(i + j + 1) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            rank[order[k]] = mean_rank;
        }
        i = j;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (positives[k]) {
            rank_sum_pos += rank[k];
        }
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;

    RocResult out;
    out.auc = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));

    // Staircase swept from the highest score down, one point per distinct
    // threshold.
    out.curve.push_back(RocPoint{std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::uint64_t tp = 0, fp = 0;
    std::size_t at = order.size();
    while (at > 0) {
        const double threshold = scores[order[at - 1]];
        while (at > 0 && scores[order[at - 1]] == threshold) {
            if (positives[order[at - 1]]) {
                ++tp;
            } else {
                ++fp;
            }
            --at;
        }
        out.curve.push_back(RocPoint{threshold, static_cast<double>(fp) / n_neg,
                                     static_cast<double>(tp) / n_pos});
    }
    return out;
}

std::string roc_curve_csv(const RocResult& roc) {
    std::ostringstream out;
    out << "threshold,fpr,tpr\n";
    for (const RocPoint& p : roc.curve) {
        if (std::isinf(p.threshold)) {
            out << "inf";
        } else {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9g", p.threshold);
            out << buf;
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf), ",%.9g,%.9g\n", p.fpr, p.tpr);
        out << buf;
    }
    return out.str();
}

// =============================================================================
// Agreement report
// =============================================================================

AgreementReport agreement_report(std::span<const LabeledSeries> series) {
    if (series.size() != 4) {
        throw FormatError("agreement report is defined over exactly four series");
    }
    const std::size_t n = series.front().labels.size();
    for (const LabeledSeries& s : series) {
        require_aligned(n, s.labels.size());
    }

    AgreementReport report;
    report.slide_count = n;
    for (const LabeledSeries& s : series) {
        report.annotator_ids.push_back(s.annotator_id);
    }

    // All pairwise statistics.
    PairwiseKappas kappa_by_pair;
    std::map<std::pair<std::size_t, std::size_t>, PairStats> stats_by_index;
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (std::size_t j = i + 1; j < series.size(); ++j) {
            PairStats ps;
            ps.a = series[i].annotator_id;
            ps.b = series[j].annotator_id;
            const KappaWithCi k = kappa_predom(series[i], series[j]);
            ps.kappa = k.result.kappa;
            ps.kappa_ci = k.ci;
            const FractionWithCi agr = predominant_agreement(series[i], series[j]);
            ps.agreement = agr.value;
            ps.agreement_ci = agr.ci;
            for (std::size_t c = 0; c < kCancerousCount; ++c) {
                ps.per_class_kappa[c] =
                    per_class_kappa(series[i], series[j], kAllPatterns[c]).kappa;
            }
            report.pairs.push_back(ps);
            stats_by_index[{i, j}] = ps;
            auto key = std::minmax(ps.a, ps.b);
            kappa_by_pair[{key.first, key.second}] = ps.kappa;
        }
    }

    auto pair_stats = [&](std::size_t i, std::size_t j) -> const PairStats& {
        return stats_by_index.at({std::min(i, j), std::max(i, j)});
    };

    // Per-annotator rows: averages over the three pairs containing the
    // annotator, CI bounds averaged the same way; robust agreement with its
    // own binomial CI.
    for (std::size_t i = 0; i < series.size(); ++i) {
        ReportRow row;
        row.id = series[i].annotator_id;
        double k = 0.0, klo = 0.0, khi = 0.0, a = 0.0, alo = 0.0, ahi = 0.0;
        for (std::size_t j = 0; j < series.size(); ++j) {
            if (j == i) {
                continue;
            }
            const PairStats& ps = pair_stats(i, j);
            k += ps.kappa;
            klo += ps.kappa_ci.lo;
            khi += ps.kappa_ci.hi;
            a += ps.agreement;
            alo += ps.agreement_ci.lo;
            ahi += ps.agreement_ci.hi;
        }
        row.kappa = k / 3.0;
        row.kappa_ci = CiInterval{klo / 3.0, khi / 3.0};
        row.agreement = a / 3.0;
        row.agreement_ci = CiInterval{alo / 3.0, ahi / 3.0};

        std::vector<LabeledSeries> others;
        for (std::size_t j = 0; j < series.size(); ++j) {
            if (j != i) {
                others.push_back(series[j]);
            }
        }
        row.robust = robust_agreement(series[i], others);
        const double se = std::sqrt(row.robust * (1.0 - row.robust) / static_cast<double>(n));
        row.robust_ci = CiInterval{clamp(row.robust - kZ95 * se, 0.0, 1.0),
                                   clamp(row.robust + kZ95 * se, 0.0, 1.0)};
        report.rows.push_back(row);
    }

    // Inter-annotator row over the first three series (the human annotators
    // in the paper's setting).
    {
        ReportRow row;
        row.id = "inter-annotator";
        double k = 0.0, klo = 0.0, khi = 0.0, a = 0.0, alo = 0.0, ahi = 0.0;
        const std::array<std::pair<std::size_t, std::size_t>, 3> pairs = {
            std::pair<std::size_t, std::size_t>{0, 1}, {0, 2}, {1, 2}};
        for (const auto& [i, j] : pairs) {
            const PairStats& ps = pair_stats(i, j);
            k += ps.kappa;
            klo += ps.kappa_ci.lo;
            khi += ps.kappa_ci.hi;
            a += ps.agreement;
            alo += ps.agreement_ci.lo;
            ahi += ps.agreement_ci.hi;
        }
        row.kappa = k / 3.0;
        row.kappa_ci = CiInterval{klo / 3.0, khi / 3.0};
        row.agreement = a / 3.0;
        row.agreement_ci = CiInterval{alo / 3.0, ahi / 3.0};
        double r = 0.0, rlo = 0.0, rhi = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            r += report.rows[i].robust;
            rlo += report.rows[i].robust_ci.lo;
            rhi += report.rows[i].robust_ci.hi;
        }
        row.robust = r / 3.0;
        row.robust_ci = CiInterval{rlo / 3.0, rhi / 3.0};
        report.rows.push_back(row);
    }

    // Welch's test on per-slide agreement indicators for every pair of
    // annotator pairs.
    std::vector<std::pair<std::string, std::vector<double>>> indicator_series;
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (std::size_t j = i + 1; j < series.size(); ++j) {
            std::vector<double> ind(n);
            for (std::size_t s = 0; s < n; ++s) {
                ind[s] = predominant_category(series[i].labels[s]) ==
                                 predominant_category(series[j].labels[s])
                             ? 1.0
                             : 0.0;
            }
            indicator_series.emplace_back(series[i].annotator_id + "|" + series[j].annotator_id,
                                          std::move(ind));
        }
    }
    for (std::size_t i = 0; i < indicator_series.size(); ++i) {
        for (std::size_t j = i + 1; j < indicator_series.size(); ++j) {
            WelchCell cell;
            cell.pair_a = indicator_series[i].first;
            cell.pair_b = indicator_series[j].first;
            try {
                cell.result = welch_t_test(indicator_series[i].second, indicator_series[j].second);
            } catch (const ZeroVarianceBoth&) {
                cell.result = std::nullopt;
            }
            report.welch.push_back(cell);
        }
    }
    return report;
}

std::string agreement_report_json(const AgreementReport& report) {
    nlohmann::json j;
    j["annotators"] = report.annotator_ids;
    j["slide_count"] = report.slide_count;

    nlohmann::json pairs = nlohmann::json::array();
    for (const PairStats& ps : report.pairs) {
        nlohmann::json p;
        p["a"] = ps.a;
        p["b"] = ps.b;
        p["kappa"] = ps.kappa;
        p["kappa_ci"] = {ps.kappa_ci.lo, ps.kappa_ci.hi};
        p["agreement"] = ps.agreement;
        p["agreement_ci"] = {ps.agreement_ci.lo, ps.agreement_ci.hi};
        nlohmann::json pc;
        for (std::size_t c = 0; c < kCancerousCount; ++c) {
            pc[std::string(pattern_name(kAllPatterns[c]))] = ps.per_class_kappa[c];
        }
        p["per_class_kappa"] = pc;
        pairs.push_back(p);
    }
    j["pairs"] = pairs;

    nlohmann::json rows = nlohmann::json::array();
    for (const ReportRow& r : report.rows) {
        nlohmann::json row;
        row["id"] = r.id;
        row["kappa"] = r.kappa;
        row["kappa_ci"] = {r.kappa_ci.lo, r.kappa_ci.hi};
        row["agreement"] = r.agreement;
        row["agreement_ci"] = {r.agreement_ci.lo, r.agreement_ci.hi};
        row["robust_agreement"] = r.robust;
        row["robust_agreement_ci"] = {r.robust_ci.lo, r.robust_ci.hi};
        rows.push_back(row);
    }
    j["rows"] = rows;

    nlohmann::json welch = nlohmann::json::array();
    for (const WelchCell& c : report.welch) {
        nlohmann::json cell;
        cell["pair_a"] = c.pair_a;
        cell["pair_b"] = c.pair_b;
        if (c.result) {
            cell["t"] = c.result->t;
            cell["dof"] = c.result->dof;
            cell["p"] = c.result->p_two_sided;
        } else {
            cell["t"] = nullptr;
        }
        welch.push_back(cell);
    }
    j["welch"] = welch;
    return j.dump(2);
}

std::string agreement_report_table(const AgreementReport& report) {
    std::ostringstream out;
    auto cell = [&](double v, const CiInterval& ci) {
        return fmt(v) + " (" + fmt(ci.lo) + "-" + fmt(ci.hi) + ")";
    };
    out << "annotator            kappa (95% CI)          agreement (95% CI)      "
           "robust agreement (95% CI)\n";
    for (const ReportRow& r : report.rows) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-20s %-23s %-23s %-23s\n", r.id.c_str(),
                      cell(r.kappa, r.kappa_ci).c_str(), cell(r.agreement, r.agreement_ci).c_str(),
                      cell(r.robust, r.robust_ci).c_str());
        out << line;
    }
    return out.str();
}

std::string per_class_kappa_csv(const AgreementReport& report) {
    std::ostringstream out;
    out << "annotator_a,annotator_b";
    for (std::size_t c = 0; c < kCancerousCount; ++c) {
        out << "," << pattern_name(kAllPatterns[c]);
    }
    out << "\n";
    for (const PairStats& ps : report.pairs) {
        out << ps.a << "," << ps.b;
        for (std::size_t c = 0; c < kCancerousCount; ++c) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), ",%.9g", ps.per_class_kappa[c]);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

} // namespace wsipat
