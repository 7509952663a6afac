#pragma once

// Desk-scale multi-stream network: a shared affine+relu stem over the sample
// features, an emotion head producing 26 logistic confidences and 3 linear
// continuous values, and the frozen place/object context streams combined
// through probabilistic fusion. Training is SGD with momentum and a step
// learning-rate schedule.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cfn/autodiff.hpp"
#include "cfn/data.hpp"
#include "cfn/fusion.hpp"
#include "cfn/metrics.hpp"

namespace cfn {

enum class Variant { Full, NoPlace, NoObject, QPlusOnly, IntermediateConcat, EmotionOnly };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
const std::vector<Variant>& all_variants();

struct TrainConfig {
    double lr0 = 1e-2;
    double momentum = 0.9;
    double lr_decay = 0.1;
    std::size_t decay_every = 45;
    std::size_t max_epochs = 90;
    std::size_t batch_size = 8;
    bool shuffle = true;
    double lambda = 0.2;
    std::size_t kappa = 56;
    FusionRule rule = FusionRule::Convex;
    Collapse collapse = Collapse::Mean;
    double beta = 0.0;
    std::vector<std::size_t> stem_widths{64, 32};
    Variant variant = Variant::Full;
    std::uint64_t seed = 0;
};

// Throws ParameterError for invalid values.
void validate_train_config(const TrainConfig& c);
// lr0 · decay^floor(epoch / decay_every)
double learning_rate(const TrainConfig& c, std::size_t epoch);

nlohmann::json train_config_to_json(const TrainConfig& c);
// Missing keys keep their defaults; unknown keys throw SchemaError.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Frozen source of a stream's attribute probabilities z for a sample.
class ContextProvider {
public:
    // Reads the sample's own place_attrs / object_attrs column.
    static ContextProvider dataset_column(Stream stream);
    // Looks the sample id up in a fixed table.
    static ContextProvider fixed_table(Stream stream,
                                       std::map<std::string, std::vector<double>> table);

    Stream stream() const { return stream_; }
    // Throws InputError for an id missing from a fixed table.
    const std::vector<double>& operator()(const Sample& s) const;

private:
    ContextProvider(Stream stream, std::map<std::string, std::vector<double>> table, bool fixed)
        : stream_(stream), table_(std::move(table)), fixed_(fixed) {}

    Stream stream_;
    std::map<std::string, std::vector<double>> table_;
    bool fixed_ = false;
};

struct Providers {
    ContextProvider place = ContextProvider::dataset_column(Stream::Place);
    ContextProvider object = ContextProvider::dataset_column(Stream::Object);
};

struct Dense {
    ad::Tensor W;  // [in × out]
    ad::Tensor b;  // [out]
};

struct ModelState {
    Variant variant = Variant::Full;
    std::size_t feature_width = 0;
    std::size_t place_width = 0;
    std::size_t object_width = 0;
    std::vector<Dense> stem;
    Dense head;
    std::optional<Dense> concat;  // intermediate_concat only
    FusionParameters fusion;
    ad::Tensor log_sigma = ad::Tensor::scalar(0.0);
    StreamPriors place_priors;  // frozen
    StreamPriors object_priors;  // frozen
    std::map<std::string, ad::Tensor> momentum;
    std::size_t epoch = 0;
    std::uint64_t rng_seed = 0;

    bool uses_place() const;
    bool uses_object() const;
    // Width of the shared representation F.
    std::size_t representation_width() const;
};

// emotion_only runs the convex rule at λ = 0, so ỹ equals the emotion stream.
// Builds co-occurrence statistics and stream priors from `train`, picks the
// top-κ attributes per stream (κ clamped to the stream width), and draws
// initial weights from the config seed.
ModelState init_model(const Dataset& train, const TrainConfig& config);
ModelState init_model(const Dataset& train, const CooccurrenceStats& stats,
                      const TrainConfig& config);

// Names of the trainable parameter blocks, in a fixed order.
std::vector<std::string> trainable_parameters(const ModelState& m);
ad::Tensor& parameter(ModelState& m, std::string_view name);
const ad::Tensor& parameter(const ModelState& m, std::string_view name);

struct Prediction {
    std::vector<double> y_tilde;    // [29]
    std::vector<double> y_emotion;  // [29]
    std::optional<FusionTrace> trace;
};

// Throws DimensionError for a wrong feature width and SchemaError when a
// provider returns a vector of the wrong width.
Prediction forward(const ModelState& m, const Sample& s, const Providers& providers = {});

// Predictions for every sample; `jobs` threads split the samples.
std::vector<Prediction> predict_all(const ModelState& m, const Dataset& d,
                                    const Providers& providers = {}, std::size_t jobs = 1);

// v ← μ·v − lr·g;  θ ← θ + v
void momentum_update(ad::Tensor& theta, ad::Tensor& velocity, const ad::Tensor& grad, double lr,
                     double momentum);

// One update on the mean per-sample loss of `batch`; returns that loss.
// Throws NumericError naming the offending parameter block when the loss or a
// gradient is non-finite.
double sgd_step(ModelState& m, const std::vector<const Sample*>& batch, double lr,
                const TrainConfig& config, const Providers& providers = {});

// Mean per-sample training objective over a dataset (no update).
double mean_loss(const ModelState& m, const Dataset& d, const TrainConfig& config,
                 const Providers& providers = {});
// Mean per-sample ‖y − ỹ‖² over a dataset.
double mean_squared_error(const ModelState& m, const Dataset& d,
                          const Providers& providers = {});

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    ModelState model;  // best validation loss
    TrainingHistory history;
};

// Throws InputError for an empty train or validation split or overlapping
// splits.
TrainResult train(ModelState initial, const Splits& splits, const TrainConfig& config,
                  const Providers& providers = {});

void write_history_csv(const TrainingHistory& h, std::ostream& out);

nlohmann::json checkpoint_to_json(const ModelState& m, const TrainConfig& config);
// Returns the model; the config echo is written to `config` when given.
ModelState checkpoint_from_json(const nlohmann::json& j, TrainConfig* config = nullptr);

struct AblationResult {
    Variant variant = Variant::Full;
    std::uint64_t seed = 0;
    double test_mse = 0.0;
    MetricsReport metrics;
    TrainingHistory history;
};

// Splits `dataset` with the config seed, trains the given variant, and
// evaluates it on the test split.
AblationResult ablate(Variant variant, const Dataset& dataset, const TrainConfig& config,
                      const Providers& providers = {}, std::size_t jobs = 1);

}  // namespace cfn
