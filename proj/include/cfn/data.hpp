#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfn/emotions.hpp"

namespace cfn {

// One labeled frame. `emotions_continuous` holds the raw annotation scale
// [1, 10]; use continuous_normalized() for the [0, 1] training targets.
struct Sample {
    std::string id;
    std::vector<double> features;
    std::vector<double> emotions_discrete;
    std::vector<double> emotions_continuous;
    std::vector<double> place_attrs;
    std::vector<double> object_attrs;

    std::array<double, kContinuousEmotions> continuous_normalized() const;
    // Discrete confidences followed by normalized continuous values.
    std::vector<double> target() const;

    friend bool operator==(const Sample&, const Sample&) = default;
};

inline double normalize_continuous(double raw) { return (raw - 1.0) / 9.0; }

// Immutable after construction; widths are enforced across all samples.
class Dataset {
public:
    Dataset() = default;
    // Validates every sample; throws SchemaError on inconsistent widths and
    // ValidationError on out-of-range values.
    explicit Dataset(std::vector<Sample> samples);

    const std::vector<Sample>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    auto begin() const { return samples_.begin(); }
    auto end() const { return samples_.end(); }

    std::size_t feature_width() const { return feature_width_; }
    std::size_t place_width() const { return place_width_; }
    std::size_t object_width() const { return object_width_; }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<Sample> samples_;
    std::size_t feature_width_ = 0;
    std::size_t place_width_ = 0;
    std::size_t object_width_ = 0;
};

void validate_sample(const Sample& s);

nlohmann::json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

// JSONL, one sample object per line. Blank lines are ignored.
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& d, std::ostream& out);
void save_dataset(const Dataset& d, const std::filesystem::path& path);

// Index of the largest discrete confidence; ties go to the lower index.
std::size_t dominant_emotion(const Sample& s);

struct SplitSpec {
    double train = 0.6;
    double test = 0.3;
    double val = 0.1;
    std::uint64_t seed = 0;
};

struct Splits {
    Dataset train;
    Dataset test;
    Dataset val;
};

// Stratified by dominant_emotion(). Each stratum is shuffled with the seed and
// allocated proportionally; leftover samples go to the parts with the
// largest fractional share (train, test, val on ties).
Splits split(const Dataset& d, const SplitSpec& spec);

// Per-stratum allocation used by split(); exposed for testing.
std::array<std::size_t, 3> allocate_stratum(std::size_t count, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic data with planted context -> emotion structure.

// Rows are context clusters; entry [c][i] is Pr(emotion i present | cluster c).
using PlantedTable = std::vector<std::array<double, kDiscreteEmotions>>;

PlantedTable default_planted_table(std::size_t clusters);
void validate_planted_table(const PlantedTable& table);
nlohmann::json planted_table_to_json(const PlantedTable& table);
PlantedTable planted_table_from_json(const nlohmann::json& j);

struct SynthConfig {
    std::size_t n = 5000;
    std::size_t feature_width = 20;
    std::size_t place_width = 30;
    std::size_t object_width = 15;
    std::size_t clusters = 6;
    // When empty, default_planted_table(clusters) is used.
    std::optional<PlantedTable> table;
    // Jitter on label confidences and attribute activations. Never flips a
    // presence decision at the default thresholds.
    double noise = 0.1;
    double feature_noise = 1.5;
    // Probability that a stream reports the sample's true cluster; otherwise
    // it reports a uniformly drawn cluster.
    double place_signal = 1.0;
    double object_signal = 1.0;
    std::uint64_t seed = 7;
};

struct SynthResult {
    Dataset dataset;
    PlantedTable table;
    std::vector<std::size_t> clusters;
};

SynthResult synth_generate(const SynthConfig& config);

}  // namespace cfn
