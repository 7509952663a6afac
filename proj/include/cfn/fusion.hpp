#pragma once

// Probabilistic late fusion of context streams with the emotion stream.
//
// Per input, each context stream projects its attribute probabilities z onto
// κ mixture weights w = softmax(zᵀf + b). The stream's conditional row is the
// w-weighted mixture of the selected attributes' dataset-level P⁺ (and P⁻)
// rows. Rows of both streams stack into 2×d_e matrices; Q is their
// column-wise max and the pooled joint is
//
//   P̂[j, i] = Q[i]·P⁺[j, i] + (1 − Q[i])·P⁻[j, i]
//
// which collapses over the two rows into a d_e context vector that is then
// blended into the emotion stream's prediction.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cfn/autodiff.hpp"
#include "cfn/stats.hpp"

namespace cfn {

enum class FusionRule { Convex, Reciprocal, QPlusOnly };
enum class Collapse { Mean, Max };
enum class Stream { Place, Object };

std::string_view to_string(FusionRule rule);
std::string_view to_string(Collapse collapse);
FusionRule parse_fusion_rule(std::string_view s);
Collapse parse_collapse(std::string_view s);

// Frozen slices of P⁺/P⁻ for one stream's selected attributes.
struct StreamPriors {
    std::vector<std::size_t> indices;  // into the stream's own attribute space
    ad::Tensor plus;                   // [κ × d_e]
    ad::Tensor minus;                  // [κ × d_e]

    std::size_t kappa() const { return indices.size(); }
};

StreamPriors make_stream_priors(const CooccurrenceStats& stats, Stream stream,
                                std::vector<std::size_t> indices);

struct FusionParameters {
    ad::Tensor f_place;   // [κ_in_place × κ]
    ad::Tensor b_place;   // [κ]
    ad::Tensor f_object;  // [κ_in_object × κ]
    ad::Tensor b_object;  // [κ]
    std::size_t kappa = 56;
    double lambda = 0.2;
    FusionRule rule = FusionRule::Convex;
    Collapse collapse = Collapse::Mean;
};

inline constexpr double kSelectorScale = 5.0;

// One-hot selector [input_width × indices.size()]: column k picks attribute
// indices[k], scaled by `scale`.
ad::Tensor selector_filter(std::size_t input_width, const std::vector<std::size_t>& indices,
                           double scale = kSelectorScale);

// Throws ParameterError for κ < 1, λ outside [0, 1], or λ = 0 under the
// reciprocal rule.
void validate_fusion_settings(std::size_t kappa, double lambda, FusionRule rule);

// ---------------------------------------------------------------------------
// Differentiable building blocks.

// softmax(zᵀf + b)
ad::Var project_stream(ad::Var z, ad::Var f, ad::Var b);
// wᵀM: the w-weighted mixture of M's rows.
ad::Var stream_conditionals(ad::Var w, ad::Var M);
// Column-wise max of the 2×d_e P⁺ matrix.
ad::Var compute_q(ad::Var P_plus_2);

struct Pooled {
    ad::Var P_hat;
    ad::Var context;
};

// With `include_minus` false the pooled joint reduces to Q·P⁺.
Pooled pool(ad::Var Q, ad::Var P_plus_2, ad::Var P_minus_2, Collapse collapse,
            bool include_minus = true);

// Blends the d_e context into the discrete slice of the 29-dim emotion
// prediction; the continuous slice passes through unchanged.
ad::Var fuse(ad::Var y_emotion, ad::Var context, double lambda, FusionRule rule);

// ---------------------------------------------------------------------------

struct StreamInput {
    ad::Var z;
    ad::Var f;
    ad::Var b;
    const StreamPriors* priors = nullptr;
};

struct FusionSettings {
    double lambda = 0.2;
    FusionRule rule = FusionRule::Convex;
    Collapse collapse = Collapse::Mean;
};

struct FusionNodes {
    std::optional<ad::Var> w_place;
    std::optional<ad::Var> w_object;
    ad::Var P_plus_2;
    ad::Var P_minus_2;
    ad::Var Q;
    ad::Var P_hat;
    ad::Var context;
    ad::Var fused;
};

// Full pipeline. When one stream is absent the other fills both rows of the
// stacked conditional matrices. At least one stream is required.
FusionNodes fusion_forward(const std::optional<StreamInput>& place,
                           const std::optional<StreamInput>& object, ad::Var y_emotion,
                           const FusionSettings& settings);

struct FusionTrace {
    std::vector<double> w_place;
    std::vector<double> w_object;
    ad::Tensor P_plus_2;
    ad::Tensor P_minus_2;
    std::vector<double> Q;
    ad::Tensor P_hat;
    std::vector<double> context;
    std::vector<double> fused;
};

FusionTrace trace_of(const FusionNodes& nodes);
nlohmann::json trace_to_json(const FusionTrace& trace);

}  // namespace cfn
