#include "cfn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cfn/emotions.hpp"
#include "cfn/error.hpp"

namespace cfn {

using ad::Tensor;
using ad::Var;

Temperature Temperature::from_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ParameterError("temperature sigma must be positive");
    }
    return Temperature(std::log(sigma));
}

double Temperature::sigma() const { return std::exp(log_sigma_); }

namespace {

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void require_positive(double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("temperature sigma must be positive");
}

}  // namespace

Var tempered_softmax(Var h, Var log_sigma) { return ad::softmax(ad::temper(h, log_sigma)); }

std::vector<double> tempered_softmax(std::span<const double> h, double sigma) {
    require_positive(sigma);
    ad::Graph g;
    const Var out = tempered_softmax(g.constant(Tensor::vector({h.begin(), h.end()})),
                                     g.constant(Tensor::scalar(std::log(sigma))));
    return out.value().values;
}

Var tempered_cross_entropy(Var h, Var log_sigma, std::size_t target) {
    return ad::softmax_cross_entropy(ad::temper(h, log_sigma), target);
}

double tempered_cross_entropy(std::span<const double> h, double sigma, std::size_t target) {
    require_positive(sigma);
    ad::Graph g;
    const Var out = tempered_cross_entropy(g.constant(Tensor::vector({h.begin(), h.end()})),
                                           g.constant(Tensor::scalar(std::log(sigma))), target);
    return out.value()[0];
}

double tempered_partition_gap(std::span<const double> h, double sigma) {
    require_positive(sigma);
    if (h.empty()) throw DimensionError("tempered_partition_gap: empty logits");
    const double inv = 1.0 / (sigma * sigma);
    std::vector<double> scaled(h.begin(), h.end());
    for (double& v : scaled) v *= inv;
    return log_sum_exp(scaled) - inv * log_sum_exp(h);
}

Var mse_loss(Var y, Var y_tilde) {
    if (y.shape() != y_tilde.shape()) {
        throw DimensionError("mse_loss: length mismatch " + ad::shape_string(y.shape()) +
                             " vs " + ad::shape_string(y_tilde.shape()));
    }
    return ad::squared_distance(y, y_tilde);
}

double mse_loss(std::span<const double> y, std::span<const double> y_tilde) {
    if (y.size() != y_tilde.size()) {
        throw DimensionError("mse_loss: length mismatch " + std::to_string(y.size()) + " vs " +
                             std::to_string(y_tilde.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - y_tilde[i];
        s += d * d;
    }
    return s;
}

Var total_loss(Var y, Var y_tilde, Var h_discrete, Var log_sigma, double beta) {
    if (beta < 0.0) throw ParameterError("beta must be non-negative");
    const Var mse = mse_loss(y, y_tilde);
    if (beta == 0.0) return mse;
    const auto& yv = y.value().values;
    const std::size_t n = std::min(h_discrete.value().size(), yv.size());
    if (n == 0) throw DimensionError("total_loss: empty discrete slice");
    const std::size_t target = static_cast<std::size_t>(
        std::max_element(yv.begin(), yv.begin() + static_cast<std::ptrdiff_t>(n)) - yv.begin());
    const Var ce = tempered_cross_entropy(h_discrete, log_sigma, target);
    return ad::add(mse, ad::scale(ce, beta));
}

}  // namespace cfn
