#include "doctest.h"

#include <random>
#include <sstream>

#include "cfn/error.hpp"
#include "cfn/stats.hpp"
#include "oracles.hpp"

using namespace cfn;

namespace {

Sample make_sample(const std::string& id, std::vector<std::size_t> emotions,
                   std::vector<double> place) {
    Sample s;
    s.id = id;
    s.features = {0.0};
    s.emotions_discrete.assign(kDiscreteEmotions, 0.0);
    for (std::size_t e : emotions) s.emotions_discrete[e] = 1.0;
    s.emotions_continuous = {5.0, 5.0, 5.0};
    s.place_attrs = std::move(place);
    return s;
}

// emotions {E1: s1,s2,s4; E2: s3}, attributes {A: s1,s2; B: s3,s4}
Dataset four_samples() {
    return Dataset({make_sample("s1", {0}, {0.9, 0.0}), make_sample("s2", {0}, {0.9, 0.0}),
                    make_sample("s3", {1}, {0.0, 0.9}), make_sample("s4", {0}, {0.0, 0.9})});
}

}  // namespace

TEST_CASE("binarize") {
    const std::vector<double> raw = {0.02, 0.005};
    CHECK(binarize(raw, 0.01) == std::vector<bool>{true, false});
    CHECK(binarize(raw, 0.0) == std::vector<bool>{true, true});
    CHECK(binarize(raw, 0.5) == std::vector<bool>{false, false});
    CHECK_THROWS_AS(binarize(raw, -1.0), ParameterError);
}

TEST_CASE("four-sample hand count") {
    const auto s = build_cooccurrence(four_samples());
    CHECK(s.n == 4);
    CHECK(s.p_i[0] == 0.75);
    CHECK(s.p_j[0] == 0.5);
    CHECK(s.C.at(0, 0) == 0.5);
    CHECK(s.P_plus.at(0, 0) == 1.0);
    CHECK(s.P_minus.at(0, 0) == 0.5);
    // B present in s3, s4: one of them has E1
    CHECK(s.P_plus.at(1, 0) == 0.5);
    CHECK(s.P_plus.at(1, 1) == 0.5);
    CHECK(s.emotion_count[0] == 3);
    CHECK(s.attribute_count[1] == 2);
}

TEST_CASE("guards fall back to the emotion prior") {
    // attribute 0 never present, attribute 1 always present
    Dataset d({make_sample("a", {0}, {0.0, 0.5}), make_sample("b", {1}, {0.0, 0.5}),
               make_sample("c", {0, 1}, {0.0, 0.5})});
    const auto s = build_cooccurrence(d);
    for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
        CHECK(s.P_plus.at(0, i) == s.p_i[i]);
        CHECK(s.P_minus.at(1, i) == s.p_i[i]);
    }
}

TEST_CASE("matches an independent brute-force counter") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const auto d = oracle::random_dataset(rng, 40 + 17 * trial, 5, 3);
        const auto s = build_cooccurrence(d);
        const auto ref = oracle::brute_force_cooccurrence(d, 0.01, 0.5);
        for (std::size_t a = 0; a < s.attributes(); ++a) {
            CHECK(s.p_j[a] == ref.p_attribute[a]);
            for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
                CHECK(s.P_plus.at(a, i) == ref.plus[a][i]);
                CHECK(s.P_minus.at(a, i) == ref.minus[a][i]);
            }
        }
    }
}

TEST_CASE("invariants and total probability") {
    std::mt19937_64 rng(5);
    const auto d = oracle::random_dataset(rng, 300, 6, 4);
    const auto s = build_cooccurrence(d);
    for (std::size_t a = 0; a < s.attributes(); ++a) {
        for (std::size_t i = 0; i < kDiscreteEmotions; ++i) {
            const double c = s.C.at(a, i);
            CHECK(c >= 0.0);
            CHECK(c <= std::min(s.p_j[a], s.p_i[i]));
            CHECK(s.P_plus.at(a, i) >= 0.0);
            CHECK(s.P_plus.at(a, i) <= 1.0);
            CHECK(s.P_minus.at(a, i) >= 0.0);
            CHECK(s.P_minus.at(a, i) <= 1.0);
            const double total = s.P_plus.at(a, i) * s.p_j[a] + s.P_minus.at(a, i) * (1.0 - s.p_j[a]);
            CHECK(std::abs(total - s.p_i[i]) <= 1e-12);
        }
    }
}

TEST_CASE("counts merge like a single pass") {
    std::mt19937_64 rng(8);
    const auto d = oracle::random_dataset(rng, 60, 3, 2);
    CooccurrenceCounts whole(3, 2), left(3, 2), right(3, 2);
    for (std::size_t k = 0; k < d.size(); ++k) {
        whole.add(d[k], {});
        (k % 2 ? left : right).add(d[k], {});
    }
    left.merge(right);
    CHECK(left.joint_count == whole.joint_count);
    CHECK(left.attribute_count == whole.attribute_count);
    CHECK_THROWS_AS(left.merge(CooccurrenceCounts(1, 1)), SchemaError);
}

TEST_CASE("smoothing keeps tables strictly inside (0, 1)") {
    const auto s = build_cooccurrence(four_samples(), {0.01, 0.5, 1.0});
    CHECK(s.P_plus.at(0, 0) == doctest::Approx(3.0 / 4.0));
    CHECK(s.P_minus.at(0, 0) == doctest::Approx(2.0 / 4.0));
    for (double v : s.P_plus.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    CHECK_THROWS_AS(build_cooccurrence(four_samples(), {0.01, 0.5, -1.0}), ParameterError);
}

TEST_CASE("json round trip") {
    std::mt19937_64 rng(1);
    const auto s = build_cooccurrence(oracle::random_dataset(rng, 50, 3, 2));
    const auto back = stats_from_json(nlohmann::json::parse(stats_to_json(s).dump()));
    CHECK(back.P_plus == s.P_plus);
    CHECK(back.P_minus == s.P_minus);
    CHECK(back.p_i == s.p_i);
    CHECK(back.n == s.n);
    CHECK_THROWS_AS(stats_from_json(nlohmann::json{{"n", 0}}), SchemaError);
}

TEST_CASE("p_plus csv has one row per attribute") {
    const auto s = build_cooccurrence(four_samples());
    std::ostringstream os;
    write_p_plus_csv(s, os);
    std::size_t lines = 0;
    for (char c : os.str()) lines += c == '\n';
    CHECK(lines == 1 + s.attributes());
}

TEST_CASE("top_k selection") {
    CHECK(top_k(std::vector<double>{0.5, 0.1, 0.3}, 2) == std::vector<std::size_t>{0, 2});
    CHECK(top_k(std::vector<double>{0.5, 0.1, 0.3}, 3) == std::vector<std::size_t>{0, 1, 2});
    CHECK(top_k(std::vector<double>{0.2, 0.2}, 1) == std::vector<std::size_t>{0});
    MeanActivations m{{0.1, 0.4}, {}};
    CHECK_THROWS_AS(select_top_attributes(m, 0), ParameterError);
    CHECK_THROWS_AS(select_top_attributes(m, 3), ParameterError);
    const auto t = select_top_attributes(m, 1);
    CHECK(t.place == std::vector<std::size_t>{1});
    CHECK(t.object.empty());
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(build_cooccurrence(Dataset{}), InputError);
    CooccurrenceCounts c(2, 0);
    Sample wrong = make_sample("x", {0}, {0.5});
    CHECK_THROWS_AS(c.add(wrong, {}), SchemaError);
}
