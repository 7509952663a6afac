#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "cfn/autodiff.hpp"
#include "cfn/error.hpp"

using namespace cfn;
using namespace cfn::ad;

namespace {

std::vector<double> vals(Var v) { return v.value().values; }

}  // namespace

TEST_CASE("affine hand values") {
    Graph g;
    auto W = g.constant(Tensor::matrix(2, 2, {2, 3, 4, 5}));
    CHECK(vals(affine(g.constant(Tensor::vector({1, 0})), W, g.constant(Tensor::vector({0, 0})))) ==
          std::vector<double>{2, 3});
    CHECK(vals(affine(g.constant(Tensor::vector({0, 0})), W, g.constant(Tensor::vector({7, -1})))) ==
          std::vector<double>{7, -1});
    auto ones = g.constant(Tensor::matrix(2, 2, {1, 1, 1, 1}));
    CHECK(vals(affine(g.constant(Tensor::vector({1, 2})), ones, g.constant(Tensor::vector({1, 1})))) ==
          std::vector<double>{4, 4});
}

TEST_CASE("affine shape mismatch names both shapes") {
    Graph g;
    auto x = g.constant(Tensor::vector({1, 2, 3}));
    auto W = g.constant(Tensor::matrix(2, 2, {1, 1, 1, 1}));
    try {
        affine(x, W);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[3]") != std::string::npos);
        CHECK(msg.find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("relu values and gradient") {
    Graph g;
    CHECK(vals(relu(g.constant(Tensor::vector({-1, 0, 2})))) == std::vector<double>{0, 0, 2});
    Graph h;
    auto x = h.variable(Tensor::vector({-1, 3}));
    h.backward(sum(relu(x)));
    CHECK(x.grad().values == std::vector<double>{0, 1});
    Graph k;
    auto neg = k.variable(Tensor::vector({-1, -2}));
    k.backward(sum(relu(neg)));
    CHECK(neg.grad().values == std::vector<double>{0, 0});
}

TEST_CASE("softmax closed forms and stability") {
    Graph g;
    CHECK(vals(softmax(g.constant(Tensor::vector({0, 0})))) == std::vector<double>{0.5, 0.5});
    auto p = vals(softmax(g.constant(Tensor::vector({0, std::log(3.0)}))));
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(vals(softmax(g.constant(Tensor::vector({1000, 1000})))) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("softmax is a shift-invariant probability vector") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N(0.0, 4.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> h(7);
        for (double& v : h) v = N(rng);
        std::vector<double> shifted = h;
        for (double& v : shifted) v += 123.0;
        Graph g;
        auto a = vals(softmax(g.constant(Tensor::vector(h))));
        auto b = vals(softmax(g.constant(Tensor::vector(shifted))));
        double total = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] >= 0.0);
            CHECK(std::abs(a[i] - b[i]) < 1e-12);
            total += a[i];
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("row_max values and tie routing") {
    Graph g;
    CHECK(vals(row_max(g.constant(Tensor::matrix(2, 2, {0.3, 0.9, 0.5, 0.2})))) ==
          std::vector<double>{0.5, 0.9});
    CHECK(vals(row_max(g.constant(Tensor::matrix(1, 3, {1, 2, 3})))) ==
          std::vector<double>{1, 2, 3});

    Graph h;
    auto P = h.variable(Tensor::matrix(2, 1, {0.4, 0.4}));
    auto m = row_max(P);
    CHECK(vals(m) == std::vector<double>{0.4});
    h.backward(sum(m));
    CHECK(P.grad().values == std::vector<double>{1.0, 0.0});
}

TEST_CASE("row_max dominates every row and picks an entry") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(3 * 5);
        for (double& x : v) x = U(rng);
        Graph g;
        auto out = vals(row_max(g.constant(Tensor::matrix(3, 5, v))));
        for (std::size_t c = 0; c < 5; ++c) {
            bool found = false;
            for (std::size_t r = 0; r < 3; ++r) {
                CHECK(out[c] >= v[r * 5 + c]);
                found = found || out[c] == v[r * 5 + c];
            }
            CHECK(found);
        }
    }
}

TEST_CASE("backward may only run once and needs a scalar root") {
    Graph g;
    auto x = g.variable(Tensor::vector({1, 2}));
    CHECK_THROWS(g.backward(x));
    auto s = sum(x);
    g.backward(s);
    CHECK_THROWS(g.backward(s));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    Graph g;
    auto x = g.constant(Tensor::vector({0.3, -0.2}));
    auto W = g.variable(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    auto b = g.variable(Tensor::vector({0.1, 0.2, 0.3}));
    auto out = logistic(affine(x, W, b));
    g.backward(out, Tensor::zeros({3}));
    for (double v : W.grad().values) CHECK(v == 0.0);
    for (double v : b.grad().values) CHECK(v == 0.0);
}

TEST_CASE("softmax cross entropy rejects a bad target") {
    Graph g;
    auto h = g.constant(Tensor::vector({0, 1}));
    CHECK_THROWS_AS(softmax_cross_entropy(h, 2), InputError);
}

TEST_CASE("grad_check basics") {
    SUBCASE("constant function has zero error") {
        const double err = grad_check(
            [](Graph& g, Var) { return g.constant(Tensor::scalar(3.0)); },
            Tensor::vector({0.1, 0.2}));
        CHECK(err == 0.0);
    }
    SUBCASE("affine then squared distance") {
        std::vector<Tensor> point = {Tensor::vector({0.3, -0.7, 1.1}),
                                     Tensor::matrix(3, 2, {0.2, -0.1, 0.5, 0.4, -0.3, 0.8}),
                                     Tensor::vector({0.05, -0.02})};
        const double err = grad_check(
            [](Graph& g, std::span<const Var> in) {
                auto y = g.constant(Tensor::vector({0.4, 0.1}));
                return squared_distance(affine(in[0], in[1], in[2]), y);
            },
            point);
        CHECK(err < 1e-6);
    }
    SUBCASE("tempered cross entropy with respect to sigma") {
        const double err = grad_check(
            [](Graph& g, Var log_sigma) {
                auto h = g.constant(Tensor::vector({0.2, -0.4, 1.3}));
                return softmax_cross_entropy(temper(h, log_sigma), 1);
            },
            Tensor::scalar(std::log(1.3)));
        CHECK(err < 1e-5);
    }
    SUBCASE("eps outside the allowed range") {
        auto f = [](Graph&, Var x) { return sum(x); };
        CHECK_THROWS_AS(grad_check(f, Tensor::vector({1.0}), {0.0, std::nullopt}), ParameterError);
        CHECK_THROWS_AS(grad_check(f, Tensor::vector({1.0}), {0.1, std::nullopt}), ParameterError);
    }
    SUBCASE("non-finite evaluation") {
        auto f = [](Graph& g, Var x) {
            return temper(x, g.constant(Tensor::scalar(-1e3)));
        };
        CHECK_THROWS_AS(grad_check([&](Graph& g, Var x) { return sum(f(g, x)); },
                                   Tensor::vector({1.0})),
                        NumericError);
    }
    SUBCASE("a flipped backward rule is detected") {
        auto f = [](Graph&, Var x) { return sum(logistic(x)); };
        const Tensor point = Tensor::vector({0.2, -0.5});
        CHECK(grad_check(f, point) < 1e-8);
        CHECK(grad_check(f, point, {1e-5, Op::Logistic}) > 0.1);
    }
}

TEST_CASE("op names round trip") {
    for (Op op : {Op::Affine, Op::Relu, Op::Softmax, Op::RowMax, Op::ColMean}) {
        CHECK(op_from_name(op_name(op)) == op);
    }
    CHECK_FALSE(op_from_name("nope").has_value());
}
