#include "doctest.h"

#include <cmath>
#include <sstream>

#include "cfn/error.hpp"
#include "cfn/model.hpp"

using namespace cfn;
using ad::Tensor;

namespace {

SynthConfig small_synth(std::size_t n = 240) {
    SynthConfig c;
    c.n = n;
    c.feature_width = 8;
    c.place_width = 12;
    c.object_width = 6;
    c.clusters = 3;
    c.seed = 3;
    return c;
}

TrainConfig small_config(Variant v = Variant::Full) {
    TrainConfig c;
    c.stem_widths = {12};
    c.max_epochs = 4;
    c.variant = v;
    c.seed = 5;
    return c;
}

Splits small_splits(const Dataset& d) { return split(d, {0.6, 0.3, 0.1, 1}); }

std::vector<const Sample*> first_batch(const Dataset& d, std::size_t k) {
    std::vector<const Sample*> b;
    for (std::size_t i = 0; i < k; ++i) b.push_back(&d[i]);
    return b;
}

}  // namespace

TEST_CASE("variant names") {
    for (Variant v : all_variants()) CHECK(parse_variant(to_string(v)) == v);
    CHECK(all_variants().size() == 6);
    CHECK_THROWS_AS(parse_variant("nothing"), ParameterError);
}

TEST_CASE("learning-rate schedule") {
    TrainConfig c;
    c.lr0 = 0.1;
    CHECK(learning_rate(c, 0) == 0.1);
    CHECK(learning_rate(c, 44) == 0.1);
    CHECK(learning_rate(c, 45) == doctest::Approx(0.01));
    CHECK(learning_rate(c, 90) == doctest::Approx(0.001));
}

TEST_CASE("train config json") {
    TrainConfig c = small_config(Variant::NoObject);
    c.rule = FusionRule::Reciprocal;
    const auto back = train_config_from_json(train_config_to_json(c));
    CHECK(back.variant == Variant::NoObject);
    CHECK(back.rule == FusionRule::Reciprocal);
    CHECK(back.stem_widths == c.stem_widths);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"bogus", 1}}), SchemaError);
    c.batch_size = 0;
    CHECK_THROWS_AS(validate_train_config(c), ParameterError);
}

TEST_CASE("momentum update by hand") {
    Tensor theta = Tensor::scalar(1.0);
    Tensor v = Tensor::scalar(0.0);
    momentum_update(theta, v, Tensor::scalar(2.0), 0.1, 0.0);
    CHECK(theta[0] == doctest::Approx(0.8));
    momentum_update(theta, v, Tensor::scalar(0.0), 0.1, 0.5);
    CHECK(theta[0] == doctest::Approx(0.7));
}

TEST_CASE("forward basics") {
    const Dataset d = synth_generate(small_synth()).dataset;
    ModelState m = init_model(d, small_config());
    const auto a = forward(m, d[0]);
    const auto b = forward(m, d[0]);
    CHECK(a.y_tilde == b.y_tilde);
    CHECK(a.y_tilde.size() == kEmotionDims);
    for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
        CHECK(a.y_tilde[i] >= 0.0);
        CHECK(a.y_tilde[i] <= 1.0);
    }
    CHECK(forward(init_model(d, small_config()), d[0]).y_tilde == a.y_tilde);

    ModelState zero = m;
    for (const auto& name : trainable_parameters(zero)) {
        if (name.rfind("stem", 0) == 0 || name.rfind("head", 0) == 0) {
            for (double& v : parameter(zero, name).values) v = 0.0;
        }
    }
    const auto z = forward(zero, d[0]);
    for (std::size_t i = 0; i < kDiscreteEmotions; ++i) CHECK(z.y_emotion[i] == 0.5);

    Sample wrong = d[0];
    wrong.features.push_back(1.0);
    CHECK_THROWS_AS(forward(m, wrong), DimensionError);
}

TEST_CASE("lambda zero makes the output equal the emotion stream") {
    const Dataset d = synth_generate(small_synth()).dataset;
    TrainConfig c = small_config();
    c.lambda = 0.0;
    const ModelState m = init_model(d, c);
    const ModelState e = init_model(d, small_config(Variant::EmotionOnly));
    for (std::size_t k = 0; k < 20; ++k) {
        const auto p = forward(m, d[k]);
        CHECK(p.y_tilde == p.y_emotion);
        CHECK(forward(e, d[k]).y_tilde == p.y_tilde);
    }
}

TEST_CASE("sgd step") {
    const Dataset d = synth_generate(small_synth()).dataset;
    const TrainConfig c = small_config();
    ModelState m = init_model(d, c);
    const ModelState before = m;
    sgd_step(m, first_batch(d, 8), 0.0, c);
    for (const auto& name : trainable_parameters(m)) CHECK(parameter(m, name) == parameter(before, name));

    const StreamPriors frozen = m.place_priors;
    sgd_step(m, first_batch(d, 8), 0.05, c);
    CHECK(m.place_priors.plus == frozen.plus);
    CHECK(m.place_priors.minus == frozen.minus);
    CHECK_FALSE(parameter(m, "head.W") == parameter(before, "head.W"));

    ModelState twin = before;
    ModelState again = before;
    for (int step = 0; step < 5; ++step) {
        sgd_step(twin, first_batch(d, 8), 0.05, c);
        sgd_step(again, first_batch(d, 8), 0.05, c);
    }
    for (const auto& name : trainable_parameters(twin)) CHECK(parameter(twin, name) == parameter(again, name));

    ModelState broken = before;
    parameter(broken, "head.W")[0] = std::nan("");
    try {
        sgd_step(broken, first_batch(d, 8), 0.05, c);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("head.W") != std::string::npos);
    }
}

TEST_CASE("training") {
    const Dataset d = synth_generate(small_synth()).dataset;
    const Splits s = small_splits(d);
    TrainConfig c = small_config();
    c.max_epochs = 0;
    const ModelState init = init_model(s.train, c);
    const auto none = train(init, s, c);
    CHECK(none.history.epochs.empty());
    CHECK(forward(none.model, d[0]).y_tilde == forward(init, d[0]).y_tilde);

    c.max_epochs = 6;
    c.decay_every = 3;
    const auto r = train(init, s, c);
    REQUIRE(r.history.epochs.size() == 6);
    CHECK(r.history.epochs.back().train_loss < r.history.epochs.front().train_loss);
    CHECK(r.history.epochs[3].lr == doctest::Approx(c.lr0 * 0.1));
    double best = 1e300;
    for (const auto& e : r.history.epochs) best = std::min(best, e.val_loss);
    CHECK(mean_loss(r.model, s.val, c) == doctest::Approx(best).epsilon(1e-12));

    const auto r2 = train(init, s, c);
    std::ostringstream h1, h2;
    write_history_csv(r.history, h1);
    write_history_csv(r2.history, h2);
    CHECK(h1.str() == h2.str());
    CHECK(h1.str().rfind("epoch,lr,train_loss,val_loss\n", 0) == 0);

    Splits empty = s;
    empty.val = Dataset{};
    CHECK_THROWS_AS(train(init, empty, c), InputError);
    Splits overlap = s;
    overlap.val = s.train;
    CHECK_THROWS_AS(train(init, overlap, c), InputError);
}

TEST_CASE("stream-less datasets and providers") {
    SynthConfig sc = small_synth();
    sc.place_width = 0;
    const Dataset d = synth_generate(sc).dataset;
    const ModelState m = init_model(d, small_config(Variant::NoPlace));
    CHECK_FALSE(m.uses_place());
    CHECK(forward(m, d[0]).y_tilde.size() == kEmotionDims);
    CHECK_THROWS_AS(init_model(d, small_config(Variant::Full)), SchemaError);

    const Dataset full = synth_generate(small_synth()).dataset;
    const ModelState fm = init_model(full, small_config());
    std::map<std::string, std::vector<double>> table;
    for (const auto& s : full) table[s.id] = s.place_attrs;
    Providers fixed;
    fixed.place = ContextProvider::fixed_table(Stream::Place, table);
    CHECK(forward(fm, full[3], fixed).y_tilde == forward(fm, full[3]).y_tilde);

    table.erase(full[3].id);
    fixed.place = ContextProvider::fixed_table(Stream::Place, table);
    CHECK_THROWS_AS(forward(fm, full[3], fixed), InputError);

    for (auto& [id, v] : table) v.push_back(0.5);
    fixed.place = ContextProvider::fixed_table(Stream::Place, table);
    CHECK_THROWS_AS(forward(fm, full[0], fixed), SchemaError);
}

TEST_CASE("every variant runs forward") {
    const Dataset d = synth_generate(small_synth()).dataset;
    for (Variant v : all_variants()) {
        const ModelState m = init_model(d, small_config(v));
        const auto p = forward(m, d[1]);
        CHECK(p.y_tilde.size() == kEmotionDims);
        for (double x : p.y_tilde) CHECK(std::isfinite(x));
    }
}

TEST_CASE("predict_all is independent of the thread count") {
    const Dataset d = synth_generate(small_synth(60)).dataset;
    const ModelState m = init_model(d, small_config());
    const auto one = predict_all(m, d, {}, 1);
    const auto four = predict_all(m, d, {}, 4);
    REQUIRE(one.size() == d.size());
    for (std::size_t k = 0; k < one.size(); ++k) CHECK(one[k].y_tilde == four[k].y_tilde);
}

TEST_CASE("checkpoint round trip") {
    const Dataset d = synth_generate(small_synth()).dataset;
    const Splits s = small_splits(d);
    TrainConfig c = small_config(Variant::IntermediateConcat);
    c.max_epochs = 2;
    const auto r = train(init_model(s.train, c), s, c);
    const auto j = checkpoint_to_json(r.model, c);
    TrainConfig echo;
    const ModelState back = checkpoint_from_json(nlohmann::json::parse(j.dump()), &echo);
    CHECK(echo.variant == Variant::IntermediateConcat);
    CHECK(checkpoint_to_json(back, echo) == j);
    for (std::size_t k = 0; k < 10; ++k) CHECK(forward(back, d[k]).y_tilde == forward(r.model, d[k]).y_tilde);
    CHECK_THROWS(checkpoint_from_json(nlohmann::json{{"format", "other"}}));
}

TEST_CASE("ablation returns test metrics") {
    const Dataset d = synth_generate(small_synth()).dataset;
    TrainConfig c = small_config();
    c.max_epochs = 2;
    const auto r = ablate(Variant::QPlusOnly, d, c);
    CHECK(r.variant == Variant::QPlusOnly);
    CHECK(r.history.epochs.size() == 2);
    CHECK(std::isfinite(r.test_mse));
    CHECK(r.metrics.samples == split(d, {0.6, 0.3, 0.1, c.seed}).test.size());
}
