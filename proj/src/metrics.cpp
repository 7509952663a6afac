#include "cfn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cfn/error.hpp"
#include "cfn/log.hpp"

namespace cfn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(a) +
                             " vs " + std::to_string(b));
    }
}

double sample_stddev(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0));
}

// Unnormalized Gaussian kernel matrix K[a][m] = exp(−½((v_a − v_m)/h)²).
std::vector<double> kernel_matrix(std::span<const double> v, double h) {
    const std::size_t n = v.size();
    std::vector<double> K(n * n);
    for (std::size_t a = 0; a < n; ++a) {
        K[a * n + a] = 1.0;
        for (std::size_t m = a + 1; m < n; ++m) {
            const double z = (v[a] - v[m]) / h;
            const double k = std::exp(-0.5 * z * z);
            K[a * n + m] = k;
            K[m * n + a] = k;
        }
    }
    return K;
}

double mean_defined(const std::vector<double>& v, std::size_t& undefined) {
    double s = 0.0;
    std::size_t count = 0;
    undefined = 0;
    for (double x : v) {
        if (std::isnan(x)) {
            ++undefined;
        } else {
            s += x;
            ++count;
        }
    }
    return count == 0 ? kNaN : s / static_cast<double>(count);
}

}  // namespace

double r2_score(std::span<const double> y, std::span<const double> y_hat) {
    require_same_length(y.size(), y_hat.size(), "r2_score");
    if (y.size() < 2) throw InputError("r2_score needs at least two samples");
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (ss_tot == 0.0) throw UndefinedMetricError("r2_score: constant ground truth");
    return 1.0 - ss_res / ss_tot;
}

double average_precision(std::span<const double> scores, const std::vector<bool>& labels) {
    require_same_length(scores.size(), labels.size(), "average_precision");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (!labels[order[k]]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    if (hits == 0) throw UndefinedMetricError("average_precision: no positive labels");
    return sum / static_cast<double>(hits);
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
    require_same_length(scores.size(), labels.size(), "roc_auc");
    const std::size_t n = scores.size();
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw UndefinedMetricError("roc_auc: needs both positive and negative labels");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of average (1-based) ranks of the positives.
    double rank_sum = 0.0;
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo;
        while (hi + 1 < n && scores[order[hi + 1]] == scores[order[lo]]) ++hi;
        const double avg_rank = 0.5 * static_cast<double>(lo + hi) + 1.0;
        for (std::size_t k = lo; k <= hi; ++k) {
            if (labels[order[k]]) rank_sum += avg_rank;
        }
        lo = hi + 1;
    }
    const double p = static_cast<double>(positives);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double f1_score(const std::vector<bool>& predicted, const std::vector<bool>& labels) {
    require_same_length(predicted.size(), labels.size(), "f1_score");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predicted[i] && labels[i]) ++tp;
        else if (predicted[i]) ++fp;
        else if (labels[i]) ++fn;
    }
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

std::string_view to_string(ErsConvention c) {
    return c == ErsConvention::Mixed ? "mixed" : "uniform";
}

ErsConvention parse_ers_convention(std::string_view s) {
    if (s == "mixed") return ErsConvention::Mixed;
    if (s == "uniform") return ErsConvention::Uniform;
    throw ParameterError("unknown ERS convention '" + std::string(s) + "'");
}

double ers(double r2, double map, double mra, ErsConvention convention) {
    if (!std::isfinite(r2) || !std::isfinite(map) || !std::isfinite(mra)) {
        throw UndefinedMetricError("ers: non-finite input");
    }
    const double scale_limit = convention == ErsConvention::Mixed ? 100.0 : 1.0;
    if (map < 0.0 || map > scale_limit || mra < 0.0 || mra > scale_limit) {
        throw ParameterError("ers: mAP/mRA outside the range of the '" +
                             std::string(to_string(convention)) + "' convention");
    }
    const double lo = std::min({r2, map, mra});
    const double hi = std::max({r2, map, mra});
    if (hi == lo) throw UndefinedMetricError("ers: degenerate normalization (max G = min G)");
    const double delta = r2 + (map + mra) / 2.0;
    return 100.0 * (delta - lo) / (hi - lo);
}

double silverman_bandwidth(std::span<const double> values) {
    if (values.size() < 2) throw InputError("bandwidth needs at least two samples");
    return 1.06 * sample_stddev(values) * std::pow(static_cast<double>(values.size()), -0.2);
}

double entropy_kde(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw InputError("entropy_kde needs at least two samples");
    if (sample_stddev(values) < 1e-12) return 0.0;
    const auto K = kernel_matrix(values, silverman_bandwidth(values));
    std::vector<double> density(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t m = 0; m < n; ++m) density[a] += K[a * n + m];
    }
    const double total = std::accumulate(density.begin(), density.end(), 0.0);
    double h = 0.0;
    for (double d : density) {
        const double p = d / total;
        if (p > 0.0) h -= p * std::log2(p);
    }
    return std::clamp(h, 0.0, std::log2(static_cast<double>(n)));
}

double mutual_information_kde(std::span<const double> y, std::span<const double> y_hat) {
    require_same_length(y.size(), y_hat.size(), "mutual_information_kde");
    const std::size_t n = y.size();
    if (n < 2) throw InputError("mutual_information_kde needs at least two samples");
    if (sample_stddev(y) < 1e-12 || sample_stddev(y_hat) < 1e-12) return 0.0;
    const auto Ky = kernel_matrix(y, silverman_bandwidth(y));
    const auto Kh = kernel_matrix(y_hat, silverman_bandwidth(y_hat));

    // joint[a][b] = Σ_m Ky[a][m]·Kh[b][m]
    std::vector<double> joint(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        double* out = &joint[a * n];
        for (std::size_t m = 0; m < n; ++m) {
            const double ky = Ky[a * n + m];
            if (ky == 0.0) continue;
            const double* kh = &Kh[m * n];  // symmetric: Kh[b][m] == Kh[m][b]
            for (std::size_t b = 0; b < n; ++b) out[b] += ky * kh[b];
        }
    }
    const double total = std::accumulate(joint.begin(), joint.end(), 0.0);
    std::vector<double> rows(n, 0.0), cols(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double p = joint[a * n + b] / total;
            rows[a] += p;
            cols[b] += p;
        }
    }
    double mi = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double p = joint[a * n + b] / total;
            if (p > 0.0) mi += p * std::log2(p / (rows[a] * cols[b]));
        }
    }
    if (mi < -0.05) throw NumericError("mutual_information_kde: estimate below tolerance");
    return std::max(0.0, mi);
}

// ---------------------------------------------------------------------------

MetricsReport evaluate(const std::vector<std::vector<double>>& targets,
                       const std::vector<std::vector<double>>& predictions,
                       const EvalOptions& options) {
    require_same_length(targets.size(), predictions.size(), "evaluate");
    if (targets.empty()) throw InputError("evaluate: no samples");
    const std::size_t n = targets.size();
    for (std::size_t s = 0; s < n; ++s) {
        if (targets[s].size() != kEmotionDims || predictions[s].size() != kEmotionDims) {
            throw DimensionError("evaluate: rows must have " + std::to_string(kEmotionDims) +
                                 " entries");
        }
    }

    MetricsReport r;
    r.samples = n;
    std::vector<double> truth(n), score(n);

    r.r2.assign(kContinuousEmotions, kNaN);
    for (std::size_t k = 0; k < kContinuousEmotions; ++k) {
        for (std::size_t s = 0; s < n; ++s) {
            truth[s] = targets[s][kDiscreteEmotions + k];
            score[s] = predictions[s][kDiscreteEmotions + k];
        }
        try {
            r.r2[k] = r2_score(truth, score);
        } catch (const UndefinedMetricError&) {
            log::warn("R2 undefined for " + std::string(kContinuousEmotionNames[k]) +
                      "; excluded from the mean");
        }
    }

    std::vector<std::size_t> argmax(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& p = predictions[s];
        argmax[s] = static_cast<std::size_t>(
            std::max_element(p.begin(), p.begin() + kDiscreteEmotions) - p.begin());
    }

    r.ap.assign(kDiscreteEmotions, kNaN);
    r.ra.assign(kDiscreteEmotions, kNaN);
    r.f1.assign(kDiscreteEmotions, kNaN);
    std::vector<bool> labels(n), predicted(n);
    for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
        for (std::size_t s = 0; s < n; ++s) {
            score[s] = predictions[s][i];
            labels[s] = targets[s][i] >= options.label_threshold;
            predicted[s] = options.f1_mode == F1Mode::Threshold
                               ? score[s] >= options.prediction_threshold
                               : argmax[s] == i;
        }
        try {
            r.ap[i] = average_precision(score, labels);
        } catch (const UndefinedMetricError&) {
        }
        try {
            r.ra[i] = roc_auc(score, labels);
        } catch (const UndefinedMetricError&) {
        }
        // F1 follows AP: a class without positives in the split is undefined.
        if (!std::isnan(r.ap[i])) r.f1[i] = f1_score(predicted, labels);
    }

    std::size_t ignored = 0;
    r.mean_r2 = mean_defined(r.r2, r.undefined_r2);
    r.mean_ap = mean_defined(r.ap, r.undefined_ap);
    r.mean_ra = mean_defined(r.ra, r.undefined_ra);
    r.mean_f1 = mean_defined(r.f1, ignored);
    if (r.undefined_ap + r.undefined_ra > 0) {
        log::warn(std::to_string(r.undefined_ap) + " AP and " + std::to_string(r.undefined_ra) +
                  " RA classes undefined on this split; excluded from the means");
    }

    r.ers_mixed = kNaN;
    r.ers_uniform = kNaN;
    try {
        r.ers_mixed = ers(r.mean_r2, 100.0 * r.mean_ap, 100.0 * r.mean_ra, ErsConvention::Mixed);
        r.ers_uniform = ers(r.mean_r2, r.mean_ap, r.mean_ra, ErsConvention::Uniform);
    } catch (const UndefinedMetricError&) {
    }

    double entropy = 0.0, mi = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        entropy += entropy_kde(predictions[s]);
        mi += mutual_information_kde(targets[s], predictions[s]);
    }
    r.entropy_bits = entropy / static_cast<double>(n);
    r.mi_bits = mi / static_cast<double>(n);
    return r;
}

namespace {

nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json vector_or_null(const std::vector<double>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (double x : v) out.push_back(number_or_null(x));
    return out;
}

std::string csv_number(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

nlohmann::json report_to_json(const MetricsReport& r) {
    return nlohmann::json{{"samples", r.samples},
                          {"r2", vector_or_null(r.r2)},
                          {"mean_r2", number_or_null(r.mean_r2)},
                          {"ap", vector_or_null(r.ap)},
                          {"mean_ap", number_or_null(r.mean_ap)},
                          {"ra", vector_or_null(r.ra)},
                          {"mean_ra", number_or_null(r.mean_ra)},
                          {"f1", vector_or_null(r.f1)},
                          {"mean_f1", number_or_null(r.mean_f1)},
                          {"ers_mixed", number_or_null(r.ers_mixed)},
                          {"ers_uniform", number_or_null(r.ers_uniform)},
                          {"entropy_bits", number_or_null(r.entropy_bits)},
                          {"mi_bits", number_or_null(r.mi_bits)},
                          {"undefined", {{"r2", r.undefined_r2},
                                         {"ap", r.undefined_ap},
                                         {"ra", r.undefined_ra}}}};
}

std::string report_csv_header() {
    return "samples,mean_r2,mean_ap,mean_ra,mean_f1,ers_mixed,ers_uniform,entropy_bits,mi_bits";
}

std::string report_csv_row(const MetricsReport& r) {
    std::ostringstream os;
    os << r.samples << ',' << csv_number(r.mean_r2) << ',' << csv_number(r.mean_ap) << ','
       << csv_number(r.mean_ra) << ',' << csv_number(r.mean_f1) << ','
       << csv_number(r.ers_mixed) << ',' << csv_number(r.ers_uniform) << ','
       << csv_number(r.entropy_bits) << ',' << csv_number(r.mi_bits);
    return os.str();
}

void write_per_class_csv(const MetricsReport& r, std::ostream& out) {
    out << "class,ap,ra,f1\n";
    for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
        out << kDiscreteEmotionNames[i] << ',' << csv_number(r.ap[i]) << ','
            << csv_number(r.ra[i]) << ',' << csv_number(r.f1[i]) << '\n';
    }
}

}  // namespace cfn
