#pragma once

// Co-occurrence statistics between context attributes and discrete emotions.
//
// Attributes of both streams share one index space: place attributes first,
// then object attributes. For attribute a and emotion i:
//
//   P_plus[a, i]  = Pr(emotion i | attribute a present) = C[a, i] / p_j[a]
//   P_minus[a, i] = Pr(emotion i | attribute a absent)  = (p_i[i] - C[a, i]) / (1 - p_j[a])
//
// When p_j[a] is 0 (resp. 1) the P_plus (resp. P_minus) row falls back to the
// emotion prior p_i.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"

#include "cfn/autodiff.hpp"
#include "cfn/data.hpp"

namespace cfn {

std::vector<bool> binarize(std::span<const double> raw, double threshold);

struct CooccurrenceOptions {
    double threshold_attr = 0.01;
    double threshold_emo = 0.5;
    // Additive smoothing on the conditional tables; 0 keeps them exact.
    double smoothing = 0.0;
};

// Integer counts, mergeable across shards of a dataset.
struct CooccurrenceCounts {
    std::size_t n = 0;
    std::size_t place_width = 0;
    std::size_t object_width = 0;
    std::vector<std::uint64_t> emotion_count;    // [d_e]
    std::vector<std::uint64_t> attribute_count;  // [κ_total]
    std::vector<std::uint64_t> joint_count;      // [κ_total × d_e], row-major

    CooccurrenceCounts(std::size_t place_width, std::size_t object_width);

    std::size_t attributes() const { return place_width + object_width; }
    void add(const Sample& s, const CooccurrenceOptions& options);
    void merge(const CooccurrenceCounts& other);
};

struct CooccurrenceStats {
    std::size_t n = 0;
    std::size_t place_width = 0;
    std::size_t object_width = 0;
    double threshold_attr = 0.01;
    double threshold_emo = 0.5;
    double smoothing = 0.0;
    std::vector<std::uint64_t> emotion_count;
    std::vector<std::uint64_t> attribute_count;
    std::vector<double> p_i;  // [d_e]
    std::vector<double> p_j;  // [κ_total]
    ad::Tensor C;             // [κ_total × d_e]
    ad::Tensor P_plus;
    ad::Tensor P_minus;

    std::size_t attributes() const { return place_width + object_width; }
};

CooccurrenceStats finalize(const CooccurrenceCounts& counts, const CooccurrenceOptions& options);

// Throws InputError on an empty dataset.
CooccurrenceStats build_cooccurrence(const Dataset& d, const CooccurrenceOptions& options = {});

nlohmann::json stats_to_json(const CooccurrenceStats& s);
CooccurrenceStats stats_from_json(const nlohmann::json& j);
// Heatmap of P_plus: one row per attribute, one column per discrete emotion.
void write_p_plus_csv(const CooccurrenceStats& s, std::ostream& out);

struct TopAttributes {
    std::vector<std::size_t> place;
    std::vector<std::size_t> object;
};

// Mean raw activation per attribute over a dataset.
struct MeanActivations {
    std::vector<double> place;
    std::vector<double> object;
};
MeanActivations mean_activations(const Dataset& d);

// The k indices with the highest mean activation, ties to the lower index,
// returned in ascending index order.
std::vector<std::size_t> top_k(std::span<const double> means, std::size_t k);

// Applies top_k to each stream. Throws ParameterError when k < 1 or k exceeds
// the width of a non-empty stream. An empty stream yields an empty list.
TopAttributes select_top_attributes(const MeanActivations& means, std::size_t k);

}  // namespace cfn
