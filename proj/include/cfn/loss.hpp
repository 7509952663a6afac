#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfn/autodiff.hpp"

namespace cfn {

// Positive temperature σ, stored and optimized as log σ.
class Temperature {
public:
    Temperature() = default;
    // Throws ParameterError unless sigma > 0.
    static Temperature from_sigma(double sigma);
    static Temperature from_log(double log_sigma) { return Temperature(log_sigma); }

    double sigma() const;
    double log_sigma() const { return log_sigma_; }

private:
    explicit Temperature(double log_sigma) : log_sigma_(log_sigma) {}
    double log_sigma_ = 0.0;
};

// softmax(h / σ²)
ad::Var tempered_softmax(ad::Var h, ad::Var log_sigma);
std::vector<double> tempered_softmax(std::span<const double> h, double sigma);

// −[h_i/σ² − log Σ_j exp(h_j/σ²)]
ad::Var tempered_cross_entropy(ad::Var h, ad::Var log_sigma, std::size_t target);
double tempered_cross_entropy(std::span<const double> h, double sigma, std::size_t target);

// log Σ exp(h/σ²) − (1/σ²)·log Σ exp(h): the error of replacing the tempered
// partition function with the σ-th power of the untempered one. Exactly 0 at
// σ = 1.
double tempered_partition_gap(std::span<const double> h, double sigma);

// Per-sample squared L2 distance ‖y − ŷ‖².
ad::Var mse_loss(ad::Var y, ad::Var y_tilde);
double mse_loss(std::span<const double> y, std::span<const double> y_tilde);

// mse + β · tempered_cross_entropy(h_discrete, σ, argmax(y_discrete)).
// The cross-entropy term is skipped entirely when β = 0.
ad::Var total_loss(ad::Var y, ad::Var y_tilde, ad::Var h_discrete, ad::Var log_sigma,
                   double beta);

}  // namespace cfn
