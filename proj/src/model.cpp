#include "cfn/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "cfn/error.hpp"
#include "cfn/log.hpp"
#include "cfn/loss.hpp"
#include "cfn/stats.hpp"

namespace cfn {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using nlohmann::json;

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoPlace: return "no_place";
        case Variant::NoObject: return "no_object";
        case Variant::QPlusOnly: return "q_plus_only";
        case Variant::IntermediateConcat: return "intermediate_concat";
        case Variant::EmotionOnly: return "emotion_only";
    }
    return "full";
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v{Variant::Full,      Variant::EmotionOnly,
                                        Variant::NoPlace,   Variant::NoObject,
                                        Variant::QPlusOnly, Variant::IntermediateConcat};
    return v;
}

Variant parse_variant(std::string_view s) {
    for (Variant v : all_variants()) {
        if (to_string(v) == s) return v;
    }
    throw ParameterError("unknown variant '" + std::string(s) + "'");
}

void validate_train_config(const TrainConfig& c) {
    if (!(c.lr0 > 0.0) || !std::isfinite(c.lr0)) throw ParameterError("lr0 must be positive");
    if (!(c.momentum >= 0.0 && c.momentum < 1.0)) {
        throw ParameterError("momentum must lie in [0, 1)");
    }
    if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) {
        throw ParameterError("lr_decay must lie in (0, 1]");
    }
    if (c.decay_every < 1) throw ParameterError("decay_every must be at least 1");
    if (c.batch_size < 1) throw ParameterError("batch_size must be at least 1");
    if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) {
        throw ParameterError("beta must be non-negative");
    }
    for (std::size_t w : c.stem_widths) {
        if (w < 1) throw ParameterError("stem widths must be positive");
    }
    const bool emotion_only = c.variant == Variant::EmotionOnly;
    validate_fusion_settings(c.kappa, emotion_only ? 0.0 : c.lambda,
                             emotion_only ? FusionRule::Convex : c.rule);
}

double learning_rate(const TrainConfig& c, std::size_t epoch) {
    return c.lr0 * std::pow(c.lr_decay, static_cast<double>(epoch / c.decay_every));
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"lr0", c.lr0},
                {"momentum", c.momentum},
                {"lr_decay", c.lr_decay},
                {"decay_every", c.decay_every},
                {"max_epochs", c.max_epochs},
                {"batch_size", c.batch_size},
                {"shuffle", c.shuffle},
                {"lambda", c.lambda},
                {"kappa", c.kappa},
                {"rule", to_string(c.rule)},
                {"collapse", to_string(c.collapse)},
                {"beta", c.beta},
                {"stem_widths", c.stem_widths},
                {"variant", to_string(c.variant)},
                {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    if (!j.is_object()) throw SchemaError("training config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "lr0") c.lr0 = value.get<double>();
            else if (key == "momentum") c.momentum = value.get<double>();
            else if (key == "lr_decay") c.lr_decay = value.get<double>();
            else if (key == "decay_every") c.decay_every = value.get<std::size_t>();
            else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "shuffle") c.shuffle = value.get<bool>();
            else if (key == "lambda") c.lambda = value.get<double>();
            else if (key == "kappa") c.kappa = value.get<std::size_t>();
            else if (key == "rule") c.rule = parse_fusion_rule(value.get<std::string>());
            else if (key == "collapse") c.collapse = parse_collapse(value.get<std::string>());
            else if (key == "beta") c.beta = value.get<double>();
            else if (key == "stem_widths") c.stem_widths = value.get<std::vector<std::size_t>>();
            else if (key == "variant") c.variant = parse_variant(value.get<std::string>());
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else throw SchemaError("unknown training config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("training config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------

ContextProvider ContextProvider::dataset_column(Stream stream) {
    return ContextProvider(stream, {}, false);
}

ContextProvider ContextProvider::fixed_table(Stream stream,
                                             std::map<std::string, std::vector<double>> table) {
    return ContextProvider(stream, std::move(table), true);
}

const std::vector<double>& ContextProvider::operator()(const Sample& s) const {
    if (!fixed_) return stream_ == Stream::Place ? s.place_attrs : s.object_attrs;
    const auto it = table_.find(s.id);
    if (it == table_.end()) {
        throw InputError("context table has no entry for sample '" + s.id + "'");
    }
    return it->second;
}

// ---------------------------------------------------------------------------

bool ModelState::uses_place() const { return variant != Variant::NoPlace; }
bool ModelState::uses_object() const { return variant != Variant::NoObject; }

std::size_t ModelState::representation_width() const {
    return stem.empty() ? feature_width : stem.back().b.size();
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Dense random_dense(std::size_t in, std::size_t out, double gain, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(gain / static_cast<double>(in)));
    Dense d{Tensor::zeros({in, out}), Tensor::zeros({out})};
    for (double& w : d.W.values) w = gauss(rng);
    return d;
}

}  // namespace

ModelState init_model(const Dataset& train, const TrainConfig& config) {
    if (train.empty()) throw InputError("empty training split");
    return init_model(train, build_cooccurrence(train), config);
}

ModelState init_model(const Dataset& train, const CooccurrenceStats& stats,
                      const TrainConfig& config) {
    validate_train_config(config);
    if (train.empty()) throw InputError("empty training split");
    if (stats.place_width != train.place_width() || stats.object_width != train.object_width()) {
        throw SchemaError("statistics do not match the dataset attribute widths");
    }
    ModelState m;
    m.variant = config.variant;
    m.feature_width = train.feature_width();
    m.place_width = train.place_width();
    m.object_width = train.object_width();
    m.rng_seed = config.seed;
    if (m.feature_width == 0) throw SchemaError("samples carry no features");
    if (m.uses_place() && m.place_width == 0) {
        throw SchemaError("variant '" + std::string(to_string(m.variant)) +
                          "' needs place attributes");
    }
    if (m.uses_object() && m.object_width == 0) {
        throw SchemaError("variant '" + std::string(to_string(m.variant)) +
                          "' needs object attributes");
    }

    std::mt19937_64 rng(mix_seed(config.seed, 1));
    std::size_t width = m.feature_width;
    for (std::size_t w : config.stem_widths) {
        m.stem.push_back(random_dense(width, w, 2.0, rng));
        width = w;
    }

    const MeanActivations means = mean_activations(train);
    auto pick = [&](const std::vector<double>& stream_means) {
        if (stream_means.empty()) return std::vector<std::size_t>{};
        return top_k(stream_means, std::min(config.kappa, stream_means.size()));
    };
    m.place_priors = make_stream_priors(stats, Stream::Place, pick(means.place));
    m.object_priors = make_stream_priors(stats, Stream::Object, pick(means.object));

    m.fusion.kappa = config.kappa;
    m.fusion.lambda = m.variant == Variant::EmotionOnly ? 0.0 : config.lambda;
    m.fusion.rule = m.variant == Variant::QPlusOnly     ? FusionRule::QPlusOnly
                    : m.variant == Variant::EmotionOnly ? FusionRule::Convex
                                                        : config.rule;
    m.fusion.collapse = config.collapse;
    m.fusion.f_place = selector_filter(m.place_width, m.place_priors.indices);
    m.fusion.b_place = Tensor::zeros({m.place_priors.kappa()});
    m.fusion.f_object = selector_filter(m.object_width, m.object_priors.indices);
    m.fusion.b_object = Tensor::zeros({m.object_priors.kappa()});

    if (m.variant == Variant::IntermediateConcat) {
        const std::size_t in =
            m.place_priors.kappa() + m.object_priors.kappa() + m.representation_width();
        m.concat = random_dense(in, m.representation_width(), 2.0, rng);
    }
    m.head = random_dense(m.representation_width(), kEmotionDims, 1.0, rng);

    for (const std::string& name : trainable_parameters(m)) {
        m.momentum[name] = Tensor::zeros(parameter(m, name).shape);
    }
    return m;
}

std::vector<std::string> trainable_parameters(const ModelState& m) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < m.stem.size(); ++i) {
        names.push_back("stem." + std::to_string(i) + ".W");
        names.push_back("stem." + std::to_string(i) + ".b");
    }
    if (m.concat) {
        names.emplace_back("concat.W");
        names.emplace_back("concat.b");
    }
    names.emplace_back("head.W");
    names.emplace_back("head.b");
    if (m.uses_place()) {
        names.emplace_back("fusion.f_place");
        names.emplace_back("fusion.b_place");
    }
    if (m.uses_object()) {
        names.emplace_back("fusion.f_object");
        names.emplace_back("fusion.b_object");
    }
    names.emplace_back("log_sigma");
    return names;
}

namespace {

// Every parameter block including ones the variant leaves unused.
std::vector<std::string> all_parameter_names(const ModelState& m) {
    std::vector<std::string> names = trainable_parameters(m);
    for (const char* n : {"fusion.f_place", "fusion.b_place", "fusion.f_object",
                          "fusion.b_object"}) {
        if (std::find(names.begin(), names.end(), n) == names.end()) names.emplace_back(n);
    }
    return names;
}

template <typename M>
auto& parameter_impl(M& m, std::string_view name) {
    if (name.starts_with("stem.")) {
        const std::size_t dot = name.find('.', 5);
        if (dot != std::string_view::npos) {
            const std::size_t i = std::stoul(std::string(name.substr(5, dot - 5)));
            if (i < m.stem.size()) {
                if (name.substr(dot + 1) == "W") return m.stem[i].W;
                if (name.substr(dot + 1) == "b") return m.stem[i].b;
            }
        }
    }
    if (name == "head.W") return m.head.W;
    if (name == "head.b") return m.head.b;
    if (m.concat && name == "concat.W") return m.concat->W;
    if (m.concat && name == "concat.b") return m.concat->b;
    if (name == "fusion.f_place") return m.fusion.f_place;
    if (name == "fusion.b_place") return m.fusion.b_place;
    if (name == "fusion.f_object") return m.fusion.f_object;
    if (name == "fusion.b_object") return m.fusion.b_object;
    if (name == "log_sigma") return m.log_sigma;
    throw ParameterError("unknown parameter block '" + std::string(name) + "'");
}

}  // namespace

Tensor& parameter(ModelState& m, std::string_view name) { return parameter_impl(m, name); }

const Tensor& parameter(const ModelState& m, std::string_view name) {
    return parameter_impl(m, name);
}

// ---------------------------------------------------------------------------

namespace {

struct Bound {
    std::vector<std::pair<Var, Var>> stem;
    std::optional<std::pair<Var, Var>> concat;
    std::pair<Var, Var> head;
    std::optional<std::pair<Var, Var>> place;
    std::optional<std::pair<Var, Var>> object;
    Var log_sigma;
    std::vector<std::pair<std::string, Var>> trainable;
};

Bound bind(Graph& g, const ModelState& m, bool trainable) {
    Bound p;
    auto leaf = [&](const std::string& name) {
        const Tensor& t = parameter(m, name);
        const Var v = trainable ? g.variable(t) : g.constant(t);
        if (trainable) p.trainable.emplace_back(name, v);
        return v;
    };
    auto pair = [&](const std::string& prefix, const char* a, const char* b) {
        const Var first = leaf(prefix + a);
        return std::pair{first, leaf(prefix + b)};
    };
    for (std::size_t i = 0; i < m.stem.size(); ++i) {
        p.stem.push_back(pair("stem." + std::to_string(i), ".W", ".b"));
    }
    if (m.concat) p.concat = pair("concat", ".W", ".b");
    p.head = pair("head", ".W", ".b");
    if (m.uses_place()) p.place = pair("fusion", ".f_place", ".b_place");
    if (m.uses_object()) p.object = pair("fusion", ".f_object", ".b_object");
    p.log_sigma = leaf("log_sigma");
    return p;
}

struct ForwardNodes {
    Var y_tilde;
    Var y_emotion;
    Var h_discrete;
    std::optional<FusionNodes> fusion;
};

Var stream_z(Graph& g, const ContextProvider& provider, const Sample& s, std::size_t width) {
    const std::vector<double>& z = provider(s);
    if (z.size() != width) {
        throw SchemaError(std::string(provider.stream() == Stream::Place ? "place" : "object") +
                          " provider returned " + std::to_string(z.size()) +
                          " values for sample '" + s.id + "', expected " +
                          std::to_string(width));
    }
    return g.constant(Tensor::vector(z));
}

ForwardNodes forward_nodes(Graph& g, const Bound& p, const ModelState& m, const Sample& s,
                           const Providers& providers) {
    if (s.features.size() != m.feature_width) {
        throw DimensionError("sample '" + s.id + "' has " + std::to_string(s.features.size()) +
                             " features, model expects " + std::to_string(m.feature_width));
    }
    Var F = g.constant(Tensor::vector(s.features));
    for (const auto& [W, b] : p.stem) F = ad::relu(ad::affine(F, W, b));

    std::optional<StreamInput> place;
    std::optional<StreamInput> object;
    if (p.place) {
        place = StreamInput{stream_z(g, providers.place, s, m.place_width), p.place->first,
                            p.place->second, &m.place_priors};
    }
    if (p.object) {
        object = StreamInput{stream_z(g, providers.object, s, m.object_width), p.object->first,
                             p.object->second, &m.object_priors};
    }

    Var representation = F;
    if (p.concat) {
        Var joined = F;
        if (object) joined = ad::concat(project_stream(object->z, object->f, object->b), joined);
        if (place) joined = ad::concat(project_stream(place->z, place->f, place->b), joined);
        representation = ad::relu(ad::affine(joined, p.concat->first, p.concat->second));
    }

    ForwardNodes out;
    const Var h = ad::affine(representation, p.head.first, p.head.second);
    out.h_discrete = ad::slice(h, 0, kDiscreteEmotions);
    out.y_emotion = ad::concat(ad::logistic(out.h_discrete),
                               ad::slice(h, kDiscreteEmotions, kContinuousEmotions));
    if (p.concat) {
        out.y_tilde = out.y_emotion;
        return out;
    }
    out.fusion = fusion_forward(place, object, out.y_emotion,
                                {m.fusion.lambda, m.fusion.rule, m.fusion.collapse});
    out.y_tilde = out.fusion->fused;
    return out;
}

Var sample_loss(Graph& g, const Bound& p, const ForwardNodes& f, const Sample& s, double beta) {
    return total_loss(g.constant(Tensor::vector(s.target())), f.y_tilde, f.h_discrete,
                      p.log_sigma, beta);
}

}  // namespace

Prediction forward(const ModelState& m, const Sample& s, const Providers& providers) {
    Graph g;
    const Bound p = bind(g, m, false);
    const ForwardNodes f = forward_nodes(g, p, m, s, providers);
    Prediction out;
    out.y_tilde = f.y_tilde.value().values;
    out.y_emotion = f.y_emotion.value().values;
    if (f.fusion) out.trace = trace_of(*f.fusion);
    return out;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t t = 0; t < jobs; ++t) {
        workers.emplace_back([&, t] {
            try {
                for (std::size_t i = t * n / jobs; i < (t + 1) * n / jobs; ++i) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

std::vector<Prediction> predict_all(const ModelState& m, const Dataset& d,
                                    const Providers& providers, std::size_t jobs) {
    std::vector<Prediction> out(d.size());
    parallel_for(d.size(), jobs, [&](std::size_t i) { out[i] = forward(m, d[i], providers); });
    return out;
}

void momentum_update(Tensor& theta, Tensor& velocity, const Tensor& grad, double lr,
                     double momentum) {
    if (theta.shape != velocity.shape || theta.shape != grad.shape) {
        throw DimensionError("momentum_update: shape mismatch");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grad[i];
        theta[i] += velocity[i];
    }
}

namespace {

std::string block_magnitudes(const ModelState& m) {
    std::ostringstream os;
    for (const std::string& name : trainable_parameters(m)) {
        double mx = 0.0;
        for (double v : parameter(m, name).values) mx = std::max(mx, std::abs(v));
        os << ' ' << name << "=" << mx;
    }
    return os.str();
}

}  // namespace

double sgd_step(ModelState& m, const std::vector<const Sample*>& batch, double lr,
                const TrainConfig& config, const Providers& providers) {
    if (batch.empty()) throw InputError("sgd_step: empty batch");
    Graph g;
    const Bound p = bind(g, m, true);
    Var total;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const ForwardNodes f = forward_nodes(g, p, m, *batch[k], providers);
        const Var loss = sample_loss(g, p, f, *batch[k], config.beta);
        total = k == 0 ? loss : ad::add(total, loss);
    }
    total = ad::scale(total, 1.0 / static_cast<double>(batch.size()));
    const double loss = total.value()[0];
    if (!std::isfinite(loss)) {
        for (const std::string& name : trainable_parameters(m)) {
            if (!parameter(m, name).all_finite()) {
                throw NumericError("non-finite loss: parameter block '" + name +
                                   "' holds non-finite values");
            }
        }
        throw NumericError("non-finite loss at epoch " + std::to_string(m.epoch) +
                           "; max |theta| per block:" + block_magnitudes(m));
    }
    g.backward(total);
    for (const auto& [name, var] : p.trainable) {
        if (!var.grad().all_finite()) {
            throw NumericError("non-finite gradient in parameter block '" + name + "'");
        }
    }
    for (const auto& [name, var] : p.trainable) {
        Tensor& theta = parameter(m, name);
        momentum_update(theta, m.momentum.at(name), var.grad(), lr, config.momentum);
        if (!theta.all_finite()) {
            throw NumericError("parameter block '" + name + "' became non-finite");
        }
    }
    return loss;
}

double mean_loss(const ModelState& m, const Dataset& d, const TrainConfig& config,
                 const Providers& providers) {
    if (d.empty()) throw InputError("mean_loss: empty dataset");
    double total = 0.0;
    for (const Sample& s : d) {
        Graph g;
        const Bound p = bind(g, m, false);
        const ForwardNodes f = forward_nodes(g, p, m, s, providers);
        total += sample_loss(g, p, f, s, config.beta).value()[0];
    }
    const double mean = total / static_cast<double>(d.size());
    if (!std::isfinite(mean)) throw NumericError("non-finite loss during evaluation");
    return mean;
}

double mean_squared_error(const ModelState& m, const Dataset& d, const Providers& providers) {
    if (d.empty()) throw InputError("mean_squared_error: empty dataset");
    double total = 0.0;
    for (const Sample& s : d) total += mse_loss(s.target(), forward(m, s, providers).y_tilde);
    return total / static_cast<double>(d.size());
}

// ---------------------------------------------------------------------------

TrainResult train(ModelState initial, const Splits& splits, const TrainConfig& config,
                  const Providers& providers) {
    validate_train_config(config);
    if (splits.train.empty()) throw InputError("empty training split");
    if (splits.val.empty()) throw InputError("empty validation split");
    std::set<std::string> seen;
    for (const Dataset* part : {&splits.train, &splits.test, &splits.val}) {
        for (const Sample& s : *part) {
            if (!seen.insert(s.id).second) {
                throw InputError("splits overlap at sample '" + s.id + "'");
            }
        }
    }

    TrainResult result{initial, {}};
    ModelState& model = initial;
    double best_val = std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(mix_seed(config.seed, 2));
    std::vector<std::size_t> order(splits.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const Sample*> batch;
    batch.reserve(config.batch_size);

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = learning_rate(config, epoch);
        if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            for (std::size_t k = start; k < stop; ++k) batch.push_back(&splits.train[order[k]]);
            sum += sgd_step(model, batch, lr, config, providers);
            ++batches;
        }
        model.epoch = epoch + 1;
        EpochRecord rec{epoch, lr, sum / static_cast<double>(batches),
                        mean_loss(model, splits.val, config, providers)};
        result.history.epochs.push_back(rec);
        log::debug("epoch " + std::to_string(epoch) + " lr=" + std::to_string(lr) +
                   " train=" + std::to_string(rec.train_loss) +
                   " val=" + std::to_string(rec.val_loss));
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            result.model = model;
        }
    }
    return result;
}

void write_history_csv(const TrainingHistory& h, std::ostream& out) {
    out << "epoch,lr,train_loss,val_loss\n";
    const auto old = out.precision(17);
    for (const EpochRecord& r : h.epochs) {
        out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.val_loss << '\n';
    }
    out.precision(old);
}

// ---------------------------------------------------------------------------

namespace {

json tensor_json(const Tensor& t) { return json{{"shape", t.shape}, {"values", t.values}}; }

Tensor tensor_from_json(const json& j) {
    Tensor t(j.at("shape").get<ad::Shape>(), j.at("values").get<std::vector<double>>());
    if (!t.all_finite()) throw ValidationError("checkpoint holds non-finite values");
    return t;
}

json priors_json(const StreamPriors& p) {
    return json{{"indices", p.indices}, {"plus", tensor_json(p.plus)},
                {"minus", tensor_json(p.minus)}};
}

StreamPriors priors_from_json(const json& j) {
    StreamPriors p;
    p.indices = j.at("indices").get<std::vector<std::size_t>>();
    p.plus = tensor_from_json(j.at("plus"));
    p.minus = tensor_from_json(j.at("minus"));
    const ad::Shape expected{p.indices.size(), kDiscreteEmotions};
    if (p.plus.shape != expected || p.minus.shape != expected) {
        throw SchemaError("checkpoint: stream prior shape mismatch");
    }
    return p;
}

}  // namespace

json checkpoint_to_json(const ModelState& m, const TrainConfig& config) {
    json params = json::object();
    for (const std::string& name : all_parameter_names(m)) {
        params[name] = tensor_json(parameter(m, name));
    }
    json momentum = json::object();
    for (const auto& [name, v] : m.momentum) momentum[name] = tensor_json(v);
    return json{{"format", "cfn-checkpoint"},
                {"version", 1},
                {"config", train_config_to_json(config)},
                {"variant", to_string(m.variant)},
                {"widths",
                 {{"features", m.feature_width},
                  {"place", m.place_width},
                  {"object", m.object_width}}},
                {"fusion",
                 {{"kappa", m.fusion.kappa},
                  {"lambda", m.fusion.lambda},
                  {"rule", to_string(m.fusion.rule)},
                  {"collapse", to_string(m.fusion.collapse)}}},
                {"stem_layers", m.stem.size()},
                {"parameters", params},
                {"momentum", momentum},
                {"priors", {{"place", priors_json(m.place_priors)},
                            {"object", priors_json(m.object_priors)}}},
                {"epoch", m.epoch},
                {"rng_seed", m.rng_seed}};
}

ModelState checkpoint_from_json(const json& j, TrainConfig* config) {
    try {
        if (j.at("format") != "cfn-checkpoint") throw SchemaError("not a cfn checkpoint");
        if (j.at("version") != 1) throw SchemaError("unsupported checkpoint version");
        if (config != nullptr) *config = train_config_from_json(j.at("config"));
        ModelState m;
        m.variant = parse_variant(j.at("variant").get<std::string>());
        m.feature_width = j.at("widths").at("features").get<std::size_t>();
        m.place_width = j.at("widths").at("place").get<std::size_t>();
        m.object_width = j.at("widths").at("object").get<std::size_t>();
        const json& fusion = j.at("fusion");
        m.fusion.kappa = fusion.at("kappa").get<std::size_t>();
        m.fusion.lambda = fusion.at("lambda").get<double>();
        m.fusion.rule = parse_fusion_rule(fusion.at("rule").get<std::string>());
        m.fusion.collapse = parse_collapse(fusion.at("collapse").get<std::string>());
        m.stem.resize(j.at("stem_layers").get<std::size_t>());
        const json& params = j.at("parameters");
        if (params.contains("concat.W")) m.concat = Dense{};
        for (const std::string& name : all_parameter_names(m)) {
            parameter(m, name) = tensor_from_json(params.at(name));
        }
        for (const auto& [name, v] : j.at("momentum").items()) {
            m.momentum[name] = tensor_from_json(v);
        }
        m.place_priors = priors_from_json(j.at("priors").at("place"));
        m.object_priors = priors_from_json(j.at("priors").at("object"));
        m.epoch = j.at("epoch").get<std::size_t>();
        m.rng_seed = j.at("rng_seed").get<std::uint64_t>();

        std::size_t width = m.feature_width;
        for (const Dense& d : m.stem) {
            if (d.W.shape != ad::Shape{width, d.b.size()}) {
                throw SchemaError("checkpoint: stem layer shapes are inconsistent");
            }
            width = d.b.size();
        }
        if (m.head.W.shape != ad::Shape{m.representation_width(), kEmotionDims}) {
            throw SchemaError("checkpoint: head shape mismatch");
        }
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("checkpoint: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

AblationResult ablate(Variant variant, const Dataset& dataset, const TrainConfig& config,
                      const Providers& providers, std::size_t jobs) {
    TrainConfig c = config;
    c.variant = variant;
    SplitSpec spec;
    spec.seed = c.seed;
    const Splits splits = split(dataset, spec);
    if (splits.test.empty()) throw InputError("empty test split");
    TrainResult trained = train(init_model(splits.train, c), splits, c, providers);

    const auto predictions = predict_all(trained.model, splits.test, providers, jobs);
    std::vector<std::vector<double>> targets, outputs;
    double mse = 0.0;
    for (std::size_t i = 0; i < splits.test.size(); ++i) {
        targets.push_back(splits.test[i].target());
        outputs.push_back(predictions[i].y_tilde);
        mse += mse_loss(targets.back(), outputs.back());
    }
    AblationResult r;
    r.variant = variant;
    r.seed = c.seed;
    r.test_mse = mse / static_cast<double>(splits.test.size());
    r.metrics = evaluate(targets, outputs);
    r.history = std::move(trained.history);
    return r;
}

}  // namespace cfn
