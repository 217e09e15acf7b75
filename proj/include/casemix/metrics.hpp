#pragma once

// Discrimination and calibration metrics on finite samples.
//
// Conventions:
//  * a prediction is a positive call iff pred > tau (ties at tau are negative);
//  * AUC gives half credit to tied positive/negative pairs, which matches the
//    trapezoidal area of the ROC curve stepping diagonally through tie blocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "casemix/csv.hpp"
#include "casemix/datagen.hpp"
#include "casemix/errors.hpp"

namespace casemix {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double tau = 0.5;

    [[nodiscard]] std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

namespace detail {

inline void check_labels(std::span<const double> preds, std::span<const int> labels)
{
    if (preds.size() != labels.size()) throw ContractError("predictions and labels differ in length");
    if (preds.empty()) throw ContractError("metric of an empty sample");
    for (int y : labels) {
        if (y != 0 && y != 1) throw ContractError("labels must be 0 or 1");
    }
}

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) noexcept
{
    std::size_t pos = 0;
    for (int y : labels) pos += static_cast<std::size_t>(y);
    return {pos, labels.size() - pos};
}

inline void require_both_classes(std::span<const int> labels, const char* what)
{
    const auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0) throw UndefinedMetricError(std::string(what) + " requires both outcome classes");
}

} // namespace detail

inline ConfusionCounts confusion_at(std::span<const double> preds, std::span<const int> labels, double tau)
{
    detail::check_labels(preds, labels);
    ConfusionCounts c;
    c.tau = tau;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool called = preds[i] > tau;
        if (labels[i] == 1) {
            (called ? c.tp : c.fn) += 1;
        } else {
            (called ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

inline double sensitivity(const ConfusionCounts& c)
{
    if (c.tp + c.fn == 0) throw UndefinedMetricError("sensitivity undefined without positives");
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline double specificity(const ConfusionCounts& c)
{
    if (c.tn + c.fp == 0) throw UndefinedMetricError("specificity undefined without negatives");
    return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    // confusion_at(preds, labels, threshold) reproduces (fpr, tpr) exactly.
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
};

namespace detail {

// Distinct prediction values in descending order with per-value class counts.
struct TieBlock {
    double value;
    std::uint64_t pos;
    std::uint64_t neg;
};

inline std::vector<TieBlock> tie_blocks_descending(std::span<const double> preds, std::span<const int> labels)
{
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a] > preds[b]; });
    std::vector<TieBlock> blocks;
    for (std::size_t idx : order) {
        if (blocks.empty() || preds[idx] != blocks.back().value) blocks.push_back({preds[idx], 0, 0});
        (labels[idx] == 1 ? blocks.back().pos : blocks.back().neg) += 1;
    }
    return blocks;
}

} // namespace detail

inline RocCurve roc_curve(std::span<const double> preds, std::span<const int> labels)
{
    detail::check_labels(preds, labels);
    detail::require_both_classes(labels, "ROC curve");
    for (double p : preds) {
        if (std::isnan(p)) throw DomainError("ROC curve: NaN prediction");
    }
    const auto [npos, nneg] = detail::class_counts(labels);
    const auto blocks = detail::tie_blocks_descending(preds, labels);

    RocCurve curve;
    curve.points.reserve(blocks.size() + 1);
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        tp += blocks[k].pos;
        fp += blocks[k].neg;
        const double tau = k + 1 < blocks.size() ? blocks[k + 1].value : -std::numeric_limits<double>::infinity();
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(nneg),
                                static_cast<double>(tp) / static_cast<double>(npos), tau});
    }
    return curve;
}

inline double trapezoid_area(const RocCurve& curve)
{
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (b.tpr + a.tpr) * 0.5;
    }
    return area;
}

// Counts behind the Mann-Whitney statistic.
struct PairCounts {
    std::uint64_t wins = 0;  // positive scored above negative
    std::uint64_t ties = 0;
    std::uint64_t pairs = 0;

    [[nodiscard]] double auc() const noexcept
    {
        return static_cast<double>(2 * wins + ties) / static_cast<double>(2 * pairs);
    }
};

inline PairCounts mann_whitney_counts(std::span<const double> preds, std::span<const int> labels)
{
    detail::check_labels(preds, labels);
    detail::require_both_classes(labels, "AUC");
    const auto [npos, nneg] = detail::class_counts(labels);
    PairCounts c;
    c.pairs = static_cast<std::uint64_t>(npos) * nneg;
    // Walking from the highest score down, negatives below a block are those not yet seen.
    std::uint64_t neg_seen = 0;
    for (const auto& b : detail::tie_blocks_descending(preds, labels)) {
        neg_seen += b.neg;
        c.wins += b.pos * (nneg - neg_seen);
        c.ties += b.pos * b.neg;
    }
    return c;
}

inline double auc(std::span<const double> preds, std::span<const int> labels)
{
    return mann_whitney_counts(preds, labels).auc();
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

// Mean |f(x_i) - P(Y=1|X=x_i)| with the true risks known from simulation.
inline double ici_oracle(std::span<const double> preds, std::span<const double> true_risks)
{
    if (preds.size() != true_risks.size()) throw ContractError("ici_oracle: length mismatch");
    if (preds.empty()) throw ContractError("ici_oracle: empty sample");
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += std::fabs(true_risks[i] - preds[i]);
    return acc / static_cast<double>(preds.size());
}

inline double ici_oracle(std::span<const double> preds, const Dataset& data)
{
    if (preds.size() != data.size()) throw ContractError("ici_oracle: length mismatch");
    const auto risks = data.true_risks();
    return ici_oracle(preds, risks);
}

struct CalibrationBin {
    double mean_predicted = 0.0;
    double observed_rate = 0.0;
    std::size_t count = 0;
};

struct CalibrationCurve {
    std::vector<CalibrationBin> bins;
    std::string binning = "equal-frequency";
};

// Equal-frequency bins over sorted predictions. A tie block is never split, so
// the number of non-empty bins can be below n_bins.
inline CalibrationCurve calibration_curve(std::span<const double> preds, std::span<const int> labels,
                                          std::size_t n_bins = 10)
{
    detail::check_labels(preds, labels);
    if (n_bins < 2) throw ContractError("calibration_curve: need at least 2 bins");
    const std::size_t n = preds.size();
    if (n_bins > n) throw ContractError("calibration_curve: more bins than observations");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });

    CalibrationCurve curve;
    std::size_t begin = 0;
    for (std::size_t k = 1; k <= n_bins && begin < n; ++k) {
        std::size_t end = (k * n) / n_bins;
        if (end <= begin) continue;
        while (end < n && preds[order[end]] == preds[order[end - 1]]) ++end;
        double sum_p = 0.0;
        std::size_t events = 0;
        for (std::size_t i = begin; i < end; ++i) {
            sum_p += preds[order[i]];
            events += static_cast<std::size_t>(labels[order[i]]);
        }
        const std::size_t count = end - begin;
        curve.bins.push_back({sum_p / static_cast<double>(count),
                              static_cast<double>(events) / static_cast<double>(count), count});
        begin = end;
    }
    return curve;
}

// Count-weighted mean |observed - predicted| over the bins.
inline double binned_ece(const CalibrationCurve& curve)
{
    double acc = 0.0;
    std::size_t total = 0;
    for (const auto& b : curve.bins) {
        acc += static_cast<double>(b.count) * std::fabs(b.observed_rate - b.mean_predicted);
        total += b.count;
    }
    if (total == 0) throw ContractError("binned_ece: empty curve");
    return acc / static_cast<double>(total);
}

// Log-odds offset c maximizing the likelihood of labels under expit(logit(pred) + c).
inline double calibration_in_the_large(std::span<const double> preds, std::span<const int> labels)
{
    detail::check_labels(preds, labels);
    detail::require_both_classes(labels, "calibration-in-the-large");
    std::vector<double> lp;
    lp.reserve(preds.size());
    for (double p : preds) {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("calibration_in_the_large: predictions must lie in (0, 1)");
        lp.push_back(logit(p));
    }
    double c = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        double g = 0.0;
        double h = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) {
            const double s = expit(lp[i] + c);
            g += labels[i] - s;
            h += s * (1.0 - s);
        }
        if (!(h > 0.0)) throw UndefinedMetricError("calibration_in_the_large: zero information");
        const double step = g / h;
        c += step;
        if (std::fabs(step) < 1e-13 * std::max(1.0, std::fabs(c))) break;
    }
    return c;
}

struct CalibrationSummary {
    double ici = 0.0;
    double binned_ece = 0.0;
    double citl_logit_offset = 0.0;
};

inline CalibrationSummary calibration_summary(std::span<const double> preds, std::span<const int> labels,
                                              std::span<const double> true_risks, std::size_t n_bins = 10)
{
    return {ici_oracle(preds, true_risks), binned_ece(calibration_curve(preds, labels, n_bins)),
            calibration_in_the_large(preds, labels)};
}

// ---------------------------------------------------------------------------
// Curve CSV
// ---------------------------------------------------------------------------

inline void write_roc_csv(std::ostream& out, const RocCurve& curve)
{
    out << "fpr,tpr,threshold\n";
    for (const auto& p : curve.points) {
        out << csv::format_double(p.fpr) << ',' << csv::format_double(p.tpr) << ','
            << csv::format_double(p.threshold) << '\n';
    }
}

inline void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve)
{
    out << "mean_predicted,observed_rate,count\n";
    for (const auto& b : curve.bins) {
        out << csv::format_double(b.mean_predicted) << ',' << csv::format_double(b.observed_rate) << ','
            << b.count << '\n';
    }
}

inline RocCurve read_roc_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || csv::strip_cr(line) != "fpr,tpr,threshold") {
        throw FormatError("ROC CSV: expected header 'fpr,tpr,threshold'");
    }
    RocCurve curve;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::strip_cr(line).empty()) continue;
        const auto f = csv::split(csv::strip_cr(line));
        if (f.size() != 3) throw FormatError("ROC CSV line " + std::to_string(line_no) + ": expected 3 fields");
        const auto fpr = csv::parse_double(f[0]);
        const auto tpr = csv::parse_double(f[1]);
        const auto thr = csv::parse_double(f[2]);
        if (!fpr || !tpr || !thr) throw FormatError("ROC CSV line " + std::to_string(line_no) + ": bad number");
        curve.points.push_back({*fpr, *tpr, *thr});
    }
    return curve;
}

inline CalibrationCurve read_calibration_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || csv::strip_cr(line) != "mean_predicted,observed_rate,count") {
        throw FormatError("calibration CSV: expected header 'mean_predicted,observed_rate,count'");
    }
    CalibrationCurve curve;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::strip_cr(line).empty()) continue;
        const auto f = csv::split(csv::strip_cr(line));
        if (f.size() != 3) {
            throw FormatError("calibration CSV line " + std::to_string(line_no) + ": expected 3 fields");
        }
        const auto mp = csv::parse_double(f[0]);
        const auto obs = csv::parse_double(f[1]);
        const auto cnt = csv::parse_double(f[2]);
        if (!mp || !obs || !cnt || *cnt < 0) {
            throw FormatError("calibration CSV line " + std::to_string(line_no) + ": bad number");
        }
        curve.bins.push_back({*mp, *obs, static_cast<std::size_t>(*cnt)});
    }
    return curve;
}

} // namespace casemix
