#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cfn/emotions.hpp"

namespace cfn {

// Coefficient of determination, 1 − SS_res / SS_tot. Throws InputError for
// n < 2 and UndefinedMetricError when the ground truth is constant.
double r2_score(std::span<const double> y, std::span<const double> y_hat);

// Mean of precision@k over the ranks of the positives, scores sorted
// descending with ties broken by original index. Throws UndefinedMetricError
// without positives.
double average_precision(std::span<const double> scores, const std::vector<bool>& labels);

// Mann–Whitney AUC; tied scores count one half. Throws UndefinedMetricError
// unless both classes are present.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

// 2PR / (P + R), or 0 when P + R = 0.
double f1_score(const std::vector<bool>& predicted, const std::vector<bool>& labels);

// Units of the (r2, map, mra) triple handed to ers():
//   Mixed   – r2 as a fraction, map and mra in percent points
//   Uniform – all three as fractions
enum class ErsConvention { Mixed, Uniform };

std::string_view to_string(ErsConvention c);
ErsConvention parse_ers_convention(std::string_view s);

// Emotion recognition score in percent:
//   Δ = r2 + (map + mra)/2,  ERS = (Δ − min G)/(max G − min G),  G = {r2, map, mra}.
// Throws UndefinedMetricError when max G = min G.
double ers(double r2, double map, double mra, ErsConvention convention);

double silverman_bandwidth(std::span<const double> values);

// Shannon entropy (bits) of the Gaussian-KDE density evaluated at the samples
// and normalized into masses. Lies in [0, log2 n]; 0 for a degenerate sample.
double entropy_kde(std::span<const double> values);

// Mutual information (bits) between paired samples. The joint density (product
// Gaussian kernel, Silverman bandwidth per axis) is evaluated on every
// (y_a, ŷ_b) combination of observed values and normalized into masses; the
// marginals are its row and column sums. 0 when either side is degenerate.
double mutual_information_kde(std::span<const double> y, std::span<const double> y_hat);

// ---------------------------------------------------------------------------

enum class F1Mode { Threshold, Argmax };

struct EvalOptions {
    double label_threshold = 0.5;
    double prediction_threshold = 0.5;
    F1Mode f1_mode = F1Mode::Threshold;
};

// Undefined entries are NaN and excluded from the means.
struct MetricsReport {
    std::vector<double> r2;   // [3]
    double mean_r2 = 0.0;
    std::vector<double> ap;   // [26]
    double mean_ap = 0.0;
    std::vector<double> ra;   // [26]
    double mean_ra = 0.0;
    std::vector<double> f1;   // [26]
    double mean_f1 = 0.0;
    double ers_mixed = 0.0;
    double ers_uniform = 0.0;
    double entropy_bits = 0.0;
    double mi_bits = 0.0;
    std::size_t samples = 0;
    std::size_t undefined_r2 = 0;
    std::size_t undefined_ap = 0;
    std::size_t undefined_ra = 0;
};

// Rows of `targets` and `predictions` are 29-dim vectors: 26 discrete
// confidences then 3 normalized continuous values. Entropy and mutual
// information are computed per sample over its 29 values and averaged.
MetricsReport evaluate(const std::vector<std::vector<double>>& targets,
                       const std::vector<std::vector<double>>& predictions,
                       const EvalOptions& options = {});

nlohmann::json report_to_json(const MetricsReport& r);
std::string report_csv_header();
std::string report_csv_row(const MetricsReport& r);
// class,ap,ra,f1
void write_per_class_csv(const MetricsReport& r, std::ostream& out);

}  // namespace cfn
